#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "saflab/data.hpp"
#include "saflab/errors.hpp"
#include "saflab/network.hpp"
#include "saflab/rng.hpp"
#include "saflab/tensor.hpp"

namespace saflab {

struct TrainConfig {
    enum class Optimizer { sgd_momentum, adamw };
    enum class Schedule { cosine, constant };

    Optimizer optimizer = Optimizer::sgd_momentum;
    float lr0 = 0.1f;
    float momentum = 0.9f;
    float weight_decay = 1e-3f;
    float beta1 = 0.9f;   // adamw
    float beta2 = 0.999f; // adamw
    float eps = 1e-8f;    // adamw
    int epochs = 200;
    int batch_size = 128;
    Schedule schedule = Schedule::cosine;
    uint64_t seed = 0;
    bool augment = false;

    void validate() const {
        require(lr0 > 0.0f, ErrorCategory::input, "lr0 must be > 0");
        require(momentum >= 0.0f && momentum < 1.0f, ErrorCategory::input,
                "momentum must be in [0,1)");
        require(weight_decay >= 0.0f, ErrorCategory::input, "weight_decay must be >= 0");
        require(epochs >= 1, ErrorCategory::input, "epochs must be >= 1");
        require(batch_size >= 1, ErrorCategory::input, "batch_size must be >= 1");
    }

    // Fine-tune recipe: short AdamW adaptation from an existing checkpoint.
    static TrainConfig finetune_defaults() {
        TrainConfig c;
        c.optimizer = Optimizer::adamw;
        c.lr0 = 1e-5f;
        c.weight_decay = 1e-3f;
        c.epochs = 5;
        return c;
    }
};

inline const char* optimizer_name(TrainConfig::Optimizer o) {
    return o == TrainConfig::Optimizer::sgd_momentum ? "sgd" : "adamw";
}

inline const char* schedule_name(TrainConfig::Schedule s) {
    return s == TrainConfig::Schedule::cosine ? "cosine" : "constant";
}

// lr0 * (1 + cos(pi * epoch / total)) / 2
inline float cosine_lr(float lr0, int epoch, int total_epochs) {
    require(total_epochs >= 1 && epoch >= 0 && epoch <= total_epochs, ErrorCategory::input,
            "cosine_lr epoch out of range");
    const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return static_cast<float>(static_cast<double>(lr0) * 0.5 *
                              (1.0 + std::cos(3.14159265358979323846 * t)));
}

// v <- momentum*v + (g + wd*p); p <- p - lr*v   (coupled L2 decay)
inline void sgd_momentum_step(Tensor& params, const Tensor& grads, Tensor& velocity, float lr,
                              float momentum, float weight_decay) {
    require(params.shape == grads.shape && params.shape == velocity.shape,
            ErrorCategory::dimension, "sgd step shape mismatch");
    for (size_t i = 0; i < params.data.size(); ++i) {
        const float g = grads.data[i] + weight_decay * params.data[i];
        velocity.data[i] = momentum * velocity.data[i] + g;
        params.data[i] -= lr * velocity.data[i];
    }
}

// Decoupled weight decay (applied to the incoming params, separate from the
// adaptive term), bias-corrected first/second moments.
inline void adamw_step(Tensor& params, const Tensor& grads, Tensor& m, Tensor& v, int64_t t,
                       float lr, float beta1, float beta2, float eps, float weight_decay) {
    require(t >= 1, ErrorCategory::input, "adamw step index must be >= 1");
    require(params.shape == grads.shape && params.shape == m.shape && params.shape == v.shape,
            ErrorCategory::dimension, "adamw step shape mismatch");
    const float c1 = 1.0f - std::pow(beta1, static_cast<float>(t));
    const float c2 = 1.0f - std::pow(beta2, static_cast<float>(t));
    for (size_t i = 0; i < params.data.size(); ++i) {
        const float p0 = params.data[i];
        const float g = grads.data[i];
        m.data[i] = beta1 * m.data[i] + (1.0f - beta1) * g;
        v.data[i] = beta2 * v.data[i] + (1.0f - beta2) * g * g;
        const float mhat = m.data[i] / c1;
        const float vhat = v.data[i] / c2;
        params.data[i] = p0 - lr * weight_decay * p0 - lr * mhat / (std::sqrt(vhat) + eps);
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochStats {
    int epoch = 0;
    float lr = 0.0f;
    float loss = 0.0f;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    float final_loss = 0.0f;
};

namespace detail {

struct OptimState {
    std::vector<Tensor> vel_w, vel_b;  // sgd velocity / adamw first moment
    std::vector<Tensor> sq_w, sq_b;    // adamw second moment
    int64_t step = 0;
};

inline OptimState make_optim_state(const Model& m, bool adamw) {
    OptimState st;
    for (const Layer& l : m.layers) {
        if (!l.has_params()) {
            st.vel_w.emplace_back();
            st.vel_b.emplace_back();
            if (adamw) {
                st.sq_w.emplace_back();
                st.sq_b.emplace_back();
            }
            continue;
        }
        st.vel_w.emplace_back(l.weights.shape);
        st.vel_b.emplace_back(l.bias.shape);
        if (adamw) {
            st.sq_w.emplace_back(l.weights.shape);
            st.sq_b.emplace_back(l.bias.shape);
        }
    }
    return st;
}

inline Tensor gather_batch(const Dataset& ds, const std::vector<int64_t>& order, int64_t from,
                           int64_t count, std::vector<int>& labels_out) {
    std::vector<int64_t> shape = ds.images.shape;
    shape[0] = count;
    Tensor batch(shape);
    const int64_t per = ds.images.numel() / ds.size();
    labels_out.resize(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        const int64_t src = order[static_cast<size_t>(from + i)];
        std::copy(ds.images.data.begin() + static_cast<size_t>(src * per),
                  ds.images.data.begin() + static_cast<size_t>((src + 1) * per),
                  batch.data.begin() + static_cast<size_t>(i * per));
        labels_out[static_cast<size_t>(i)] = ds.labels[static_cast<size_t>(src)];
    }
    return batch;
}

}  // namespace detail

// Single-threaded minibatch training. Weight decay acts on raw weights (the
// stored quantity); biases update from plain gradients with no decay.
inline TrainReport train(Model& model, const Dataset& train_set, const TrainConfig& cfg,
                         std::ostream* log = nullptr) {
    cfg.validate();
    require(train_set.size() >= 1, ErrorCategory::input, "empty training set");
    const bool adamw = cfg.optimizer == TrainConfig::Optimizer::adamw;
    detail::OptimState st = detail::make_optim_state(model, adamw);
    Rng root(cfg.seed);
    TrainReport report;

    const int64_t n = train_set.size();
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    // flip/crop is defined for CIFAR-shaped batches only
    const bool image_aug = cfg.augment && train_set.images.rank() == 4 &&
                           train_set.images.shape[1] == 3 && train_set.images.shape[2] == 32 &&
                           train_set.images.shape[3] == 32;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const float lr = cfg.schedule == TrainConfig::Schedule::cosine
                             ? cosine_lr(cfg.lr0, epoch, cfg.epochs)
                             : cfg.lr0;
        Rng shuffle_rng = root.split(0x10000u + static_cast<uint64_t>(epoch));
        for (int64_t i = n - 1; i > 0; --i) {
            const auto j = static_cast<int64_t>(shuffle_rng.next_below(static_cast<uint64_t>(i + 1)));
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }
        Rng aug_rng = root.split(0x20000u + static_cast<uint64_t>(epoch));

        double epoch_loss = 0.0;
        int64_t batches = 0;
        for (int64_t from = 0; from < n; from += cfg.batch_size) {
            const int64_t count = std::min<int64_t>(cfg.batch_size, n - from);
            std::vector<int> labels;
            Tensor batch = detail::gather_batch(train_set, order, from, count, labels);
            if (image_aug) batch = augment_train(batch, aug_rng);

            BackwardResult back = backward(model, batch, labels);
            epoch_loss += back.loss;
            ++batches;
            ++st.step;

            for (size_t li = 0; li < model.layers.size(); ++li) {
                Layer& l = model.layers[li];
                if (!l.has_params()) continue;
                if (adamw) {
                    adamw_step(l.weights, back.grads[li].dw, st.vel_w[li], st.sq_w[li], st.step,
                               lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay);
                    adamw_step(l.bias, back.grads[li].db, st.vel_b[li], st.sq_b[li], st.step, lr,
                               cfg.beta1, cfg.beta2, cfg.eps, 0.0f);
                } else {
                    sgd_momentum_step(l.weights, back.grads[li].dw, st.vel_w[li], lr,
                                      cfg.momentum, cfg.weight_decay);
                    sgd_momentum_step(l.bias, back.grads[li].db, st.vel_b[li], lr, cfg.momentum,
                                      0.0f);
                }
            }
        }
        EpochStats es;
        es.epoch = epoch;
        es.lr = lr;
        es.loss = static_cast<float>(epoch_loss / static_cast<double>(batches));
        report.epochs.push_back(es);
        if (log) {
            (*log) << "epoch " << epoch << " lr " << lr << " loss " << es.loss << "\n";
        }
    }
    report.final_loss = report.epochs.empty() ? 0.0f : report.epochs.back().loss;
    return report;
}

// Adapt an existing model to a new weight transform with a short run.
inline TrainReport finetune(Model& model, const SafKind& saf, const Dataset& train_set,
                            const TrainConfig& cfg, std::ostream* log = nullptr) {
    set_saf(model, saf);
    return train(model, train_set, cfg, log);
}

}  // namespace saflab
