#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "saflab/codec.hpp"
#include "saflab/errors.hpp"
#include "saflab/injector.hpp"
#include "saflab/rng.hpp"
#include "saflab/saf.hpp"
#include "saflab/tensor.hpp"

namespace saflab {

enum class LayerKind : uint8_t { dense = 0, conv2d = 1, relu = 2, maxpool2 = 3, flatten = 4 };

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2: return "maxpool2";
        case LayerKind::flatten: return "flatten";
    }
    return "?";
}

inline LayerKind parse_layer_kind(const std::string& s) {
    if (s == "dense") return LayerKind::dense;
    if (s == "conv2d") return LayerKind::conv2d;
    if (s == "relu") return LayerKind::relu;
    if (s == "maxpool2") return LayerKind::maxpool2;
    if (s == "flatten") return LayerKind::flatten;
    fail(ErrorCategory::format, "unknown layer kind '" + s + "'");
}

// Weights are stored raw (pre-transform) at all times; the saturating
// transform is applied on the fly whenever weights are read for a forward
// pass. Biases are never transformed.
struct Layer {
    LayerKind kind = LayerKind::relu;
    Tensor weights;              // dense [out,in]; conv2d [out_ch,in_ch,3,3]
    Tensor bias;                 // [out] for dense/conv2d
    SafKind saf = SafKind::none();
    int stride = 1;              // conv2d: 1 or 2 (3x3 kernel, zero padding 1)

    bool has_params() const {
        return kind == LayerKind::dense || kind == LayerKind::conv2d;
    }
};

struct Model {
    std::vector<Layer> layers;
    int64_t class_count = 0;
    std::vector<int64_t> input_shape;  // per sample, e.g. {3,32,32} or {dim}
    std::string arch_name = "custom";
};

// Apply a transform uniformly to every weighted layer (per-layer overrides
// stay possible by writing Layer::saf directly).
inline void set_saf(Model& m, const SafKind& k) {
    for (Layer& l : m.layers) {
        if (l.has_params()) l.saf = k;
    }
}

inline int64_t weight_count(const Model& m) {
    int64_t n = 0;
    for (const Layer& l : m.layers) {
        if (l.has_params()) n += l.weights.numel();
    }
    return n;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

namespace detail {

// Fan-in scaled uniform init on the EFFECTIVE weights: raw values are drawn
// from U(-b, b) / tau'(0) with b = sqrt(1/fan_in), so tau(raw) starts at the
// intended scale for every transform (tau'(0) = c for tanh(cx), 1 otherwise).
inline void init_uniform(Tensor& w, int64_t fan_in, const SafKind& saf, Rng& rng) {
    const float slope = saf.variant == SafVariant::tanh_c ? saf.c : 1.0f;
    const float bound = std::sqrt(1.0f / static_cast<float>(fan_in)) / slope;
    for (float& v : w.data) v = (rng.next_float() * 2.0f - 1.0f) * bound;
}

}  // namespace detail

inline Layer make_plain_layer(LayerKind kind) {
    Layer l;
    l.kind = kind;
    return l;
}

inline Layer make_dense(int64_t in, int64_t out, const SafKind& saf, Rng& rng) {
    Layer l;
    l.kind = LayerKind::dense;
    l.weights = Tensor({out, in});
    l.bias = Tensor({out});
    l.saf = saf;
    detail::init_uniform(l.weights, in, saf, rng);
    return l;
}

inline Layer make_conv2d(int64_t in_ch, int64_t out_ch, int stride, const SafKind& saf, Rng& rng) {
    require(stride == 1 || stride == 2, ErrorCategory::input, "conv2d stride must be 1 or 2");
    Layer l;
    l.kind = LayerKind::conv2d;
    l.weights = Tensor({out_ch, in_ch, 3, 3});
    l.bias = Tensor({out_ch});
    l.saf = saf;
    l.stride = stride;
    detail::init_uniform(l.weights, in_ch * 9, saf, rng);
    return l;
}

// Multi-layer perceptron: dense/relu chain, final dense produces the logits.
inline Model make_mlp(const std::vector<int64_t>& dims, const SafKind& saf, Rng& rng) {
    require(dims.size() >= 2, ErrorCategory::input, "mlp needs at least input and output dims");
    Model m;
    m.arch_name = "mlp";
    m.input_shape = {dims[0]};
    m.class_count = dims.back();
    m.layers.push_back(make_plain_layer(LayerKind::flatten));
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
        m.layers.push_back(make_dense(dims[i], dims[i + 1], saf, rng));
        if (i + 2 < dims.size()) m.layers.push_back(make_plain_layer(LayerKind::relu));
    }
    return m;
}

// Small reference CNN: conv3x3x16 / relu / pool / conv3x3x32 / relu / pool /
// flatten / dense128 / relu / dense-classes.
inline Model make_cnn_s(int64_t in_ch, int64_t h, int64_t w, int64_t classes, const SafKind& saf,
                        Rng& rng) {
    Model m;
    m.arch_name = "cnn-s";
    m.input_shape = {in_ch, h, w};
    m.class_count = classes;
    m.layers.push_back(make_conv2d(in_ch, 16, 1, saf, rng));
    m.layers.push_back(make_plain_layer(LayerKind::relu));
    m.layers.push_back(make_plain_layer(LayerKind::maxpool2));
    m.layers.push_back(make_conv2d(16, 32, 1, saf, rng));
    m.layers.push_back(make_plain_layer(LayerKind::relu));
    m.layers.push_back(make_plain_layer(LayerKind::maxpool2));
    m.layers.push_back(make_plain_layer(LayerKind::flatten));
    const int64_t flat = 32 * (h / 4) * (w / 4);
    m.layers.push_back(make_dense(flat, 128, saf, rng));
    m.layers.push_back(make_plain_layer(LayerKind::relu));
    m.layers.push_back(make_dense(128, classes, saf, rng));
    return m;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

struct ForwardTrace {
    std::vector<Tensor> inputs;                    // input to each layer
    std::vector<Tensor> eff_weights;               // transformed weights (param layers)
    std::vector<std::vector<int64_t>> pool_argmax; // per layer; filled for maxpool2
};

namespace detail {

// C[M,N] (+)= A[M,K] * B[K,N]
inline void gemm(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
                 bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0f);
    for (int64_t i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        float* crow = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const float av = arow[p];
            const float* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[M,K] += A[M,N] * B[K,N]^T  (rows dotted with rows)
inline void gemm_abt_acc(const float* a, const float* b, float* c, int64_t m, int64_t n,
                         int64_t k) {
    for (int64_t i = 0; i < m; ++i) {
        const float* arow = a + i * n;
        for (int64_t j = 0; j < k; ++j) {
            const float* brow = b + j * n;
            float s = 0.0f;
            for (int64_t p = 0; p < n; ++p) s += arow[p] * brow[p];
            c[i * k + j] += s;
        }
    }
}

// C[K,N] += A[M,K]^T * B[M,N]
inline void gemm_atb_acc(const float* a, const float* b, float* c, int64_t m, int64_t k,
                         int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        const float* brow = b + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const float av = arow[p];
            if (av == 0.0f) continue;
            float* crow = c + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline int64_t conv_out_dim(int64_t in, int stride) { return (in - 1) / stride + 1; }

// col[(ic*3+kh)*3+kw, oy*ow+ox] = x[ic, oy*s+kh-1, ox*s+kw-1], zero outside.
inline void im2col(const float* x, int64_t in_ch, int64_t h, int64_t w, int stride, float* col) {
    const int64_t oh = conv_out_dim(h, stride);
    const int64_t ow = conv_out_dim(w, stride);
    int64_t row = 0;
    for (int64_t ic = 0; ic < in_ch; ++ic) {
        const float* plane = x + ic * h * w;
        for (int64_t kh = 0; kh < 3; ++kh) {
            for (int64_t kw = 0; kw < 3; ++kw, ++row) {
                float* dst = col + row * oh * ow;
                for (int64_t oy = 0; oy < oh; ++oy) {
                    const int64_t iy = oy * stride + kh - 1;
                    for (int64_t ox = 0; ox < ow; ++ox) {
                        const int64_t ix = ox * stride + kw - 1;
                        *dst++ = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                     ? plane[iy * w + ix]
                                     : 0.0f;
                    }
                }
            }
        }
    }
}

// Scatter-add of the column gradient back into the input image.
inline void col2im_acc(const float* col, int64_t in_ch, int64_t h, int64_t w, int stride,
                       float* dx) {
    const int64_t oh = conv_out_dim(h, stride);
    const int64_t ow = conv_out_dim(w, stride);
    int64_t row = 0;
    for (int64_t ic = 0; ic < in_ch; ++ic) {
        float* plane = dx + ic * h * w;
        for (int64_t kh = 0; kh < 3; ++kh) {
            for (int64_t kw = 0; kw < 3; ++kw, ++row) {
                const float* src = col + row * oh * ow;
                for (int64_t oy = 0; oy < oh; ++oy, src += ow) {
                    const int64_t iy = oy * stride + kh - 1;
                    if (iy < 0 || iy >= h) continue;
                    for (int64_t ox = 0; ox < ow; ++ox) {
                        const int64_t ix = ox * stride + kw - 1;
                        if (ix >= 0 && ix < w) plane[iy * w + ix] += src[ox];
                    }
                }
            }
        }
    }
}

inline Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.rank() == 2, ErrorCategory::dimension, "dense input must be [batch, features]");
    require(x.shape[1] == w.shape[1], ErrorCategory::dimension,
            "dense input features " + x.shape_str() + " do not match weights " + w.shape_str());
    const int64_t n = x.shape[0], in = x.shape[1], out = w.shape[0];
    Tensor y({n, out});
    for (int64_t i = 0; i < n; ++i) {
        const float* xrow = &x.data[static_cast<size_t>(i * in)];
        float* yrow = &y.data[static_cast<size_t>(i * out)];
        for (int64_t o = 0; o < out; ++o) {
            const float* wrow = &w.data[static_cast<size_t>(o * in)];
            float s = b.data[static_cast<size_t>(o)];
            for (int64_t p = 0; p < in; ++p) s += xrow[p] * wrow[p];
            yrow[o] = s;
        }
    }
    return y;
}

inline Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                             std::vector<float>& col_scratch) {
    require(x.rank() == 4, ErrorCategory::dimension, "conv2d input must be [batch,ch,h,w]");
    require(x.shape[1] == w.shape[1], ErrorCategory::dimension,
            "conv2d channels " + x.shape_str() + " do not match weights " + w.shape_str());
    const int64_t n = x.shape[0], in_ch = x.shape[1], h = x.shape[2], wd = x.shape[3];
    const int64_t out_ch = w.shape[0];
    const int64_t oh = conv_out_dim(h, stride), ow = conv_out_dim(wd, stride);
    const int64_t k = in_ch * 9, p = oh * ow;
    col_scratch.resize(static_cast<size_t>(k * p));
    Tensor y({n, out_ch, oh, ow});
    for (int64_t i = 0; i < n; ++i) {
        im2col(&x.data[static_cast<size_t>(i * in_ch * h * wd)], in_ch, h, wd, stride,
               col_scratch.data());
        float* yimg = &y.data[static_cast<size_t>(i * out_ch * p)];
        gemm(w.data.data(), col_scratch.data(), yimg, out_ch, k, p, false);
        for (int64_t oc = 0; oc < out_ch; ++oc) {
            const float bv = b.data[static_cast<size_t>(oc)];
            float* row = yimg + oc * p;
            for (int64_t j = 0; j < p; ++j) row[j] += bv;
        }
    }
    return y;
}

inline Tensor maxpool2_forward(const Tensor& x, std::vector<int64_t>* argmax) {
    require(x.rank() == 4, ErrorCategory::dimension, "maxpool input must be [batch,ch,h,w]");
    const int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    const int64_t oh = h / 2, ow = w / 2;
    require(oh >= 1 && ow >= 1, ErrorCategory::dimension, "maxpool input smaller than window");
    Tensor y({n, c, oh, ow});
    if (argmax) argmax->assign(static_cast<size_t>(y.numel()), 0);
    int64_t oi = 0;
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t ch = 0; ch < c; ++ch) {
            const float* plane = &x.data[static_cast<size_t>((i * c + ch) * h * w)];
            const int64_t base = (i * c + ch) * h * w;
            for (int64_t oy = 0; oy < oh; ++oy) {
                for (int64_t ox = 0; ox < ow; ++ox, ++oi) {
                    const int64_t iy = oy * 2, ix = ox * 2;
                    int64_t best = iy * w + ix;
                    float bv = plane[best];
                    const int64_t cand[3] = {iy * w + ix + 1, (iy + 1) * w + ix,
                                             (iy + 1) * w + ix + 1};
                    for (int64_t idx : cand) {
                        if (plane[idx] > bv) {
                            bv = plane[idx];
                            best = idx;
                        }
                    }
                    y.data[static_cast<size_t>(oi)] = bv;
                    if (argmax) (*argmax)[static_cast<size_t>(oi)] = base + best;
                }
            }
        }
    }
    return y;
}

}  // namespace detail

// Forward pass; every weighted layer reads tau(W) computed on the fly from
// its raw weights. With saf == none this is exactly the plain affine chain.
inline Tensor forward(const Model& m, const Tensor& x, ForwardTrace* trace = nullptr) {
    require(x.rank() >= 2, ErrorCategory::dimension, "input must have a batch dimension");
    Tensor cur = x;
    std::vector<float> col_scratch;
    if (trace) {
        trace->inputs.clear();
        trace->eff_weights.assign(m.layers.size(), Tensor{});
        trace->pool_argmax.assign(m.layers.size(), {});
    }
    for (size_t li = 0; li < m.layers.size(); ++li) {
        const Layer& l = m.layers[li];
        if (trace) trace->inputs.push_back(cur);
        switch (l.kind) {
            case LayerKind::dense: {
                Tensor local;
                const Tensor* w_eff = &l.weights;
                if (l.saf.variant != SafVariant::none) {
                    local = saf_forward(l.saf, l.weights);
                    w_eff = &local;
                }
                if (trace) {
                    trace->eff_weights[li] = *w_eff;
                    w_eff = &trace->eff_weights[li];
                }
                cur = detail::dense_forward(cur, *w_eff, l.bias);
                break;
            }
            case LayerKind::conv2d: {
                Tensor local;
                const Tensor* w_eff = &l.weights;
                if (l.saf.variant != SafVariant::none) {
                    local = saf_forward(l.saf, l.weights);
                    w_eff = &local;
                }
                if (trace) {
                    trace->eff_weights[li] = *w_eff;
                    w_eff = &trace->eff_weights[li];
                }
                cur = detail::conv2d_forward(cur, *w_eff, l.bias, l.stride, col_scratch);
                break;
            }
            case LayerKind::relu: {
                Tensor y = cur;
                for (float& v : y.data) v = v > 0.0f ? v : 0.0f;
                cur = std::move(y);
                break;
            }
            case LayerKind::maxpool2:
                cur = detail::maxpool2_forward(cur, trace ? &trace->pool_argmax[li] : nullptr);
                break;
            case LayerKind::flatten: {
                int64_t per = 1;
                for (int i = 1; i < cur.rank(); ++i) per *= cur.shape[i];
                cur = cur.reshaped({cur.shape[0], per});
                break;
            }
        }
    }
    require(cur.rank() == 2 && cur.shape[1] == m.class_count, ErrorCategory::dimension,
            "model output " + cur.shape_str() + " does not match class count");
    return cur;
}

// ---------------------------------------------------------------------------
// Loss and backward
// ---------------------------------------------------------------------------

// Mean softmax cross-entropy plus its gradient w.r.t. the logits.
inline float softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                   Tensor* dlogits = nullptr) {
    require(logits.rank() == 2, ErrorCategory::dimension, "logits must be [batch, classes]");
    const int64_t n = logits.shape[0], c = logits.shape[1];
    require(static_cast<int64_t>(labels.size()) == n, ErrorCategory::dimension,
            "label count does not match batch");
    if (dlogits) *dlogits = Tensor({n, c});
    double total = 0.0;
    std::vector<double> probs(static_cast<size_t>(c));
    for (int64_t i = 0; i < n; ++i) {
        const int label = labels[static_cast<size_t>(i)];
        require(label >= 0 && label < c, ErrorCategory::input,
                "label " + std::to_string(label) + " outside [0," + std::to_string(c) + ")");
        const float* row = &logits.data[static_cast<size_t>(i * c)];
        float mx = row[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            probs[static_cast<size_t>(j)] = std::exp(static_cast<double>(row[j]) - mx);
            z += probs[static_cast<size_t>(j)];
        }
        total += -(static_cast<double>(row[label]) - mx - std::log(z));
        if (dlogits) {
            float* drow = &dlogits->data[static_cast<size_t>(i * c)];
            for (int64_t j = 0; j < c; ++j) {
                const double p = probs[static_cast<size_t>(j)] / z;
                drow[j] = static_cast<float>((p - (j == label ? 1.0 : 0.0)) /
                                             static_cast<double>(n));
            }
        }
    }
    return static_cast<float>(total / static_cast<double>(n));
}

struct LayerGrads {
    Tensor dw;  // gradient w.r.t. RAW weights (includes the transform factor)
    Tensor db;  // gradient w.r.t. bias (no transform factor)
};

struct BackwardResult {
    float loss = 0.0f;
    std::vector<LayerGrads> grads;  // aligned with model.layers
};

inline BackwardResult backward(const Model& m, const Tensor& x, const std::vector<int>& labels) {
    ForwardTrace trace;
    const Tensor logits = forward(m, x, &trace);
    BackwardResult res;
    res.grads.resize(m.layers.size());
    Tensor grad;
    res.loss = softmax_cross_entropy(logits, labels, &grad);

    std::vector<float> col_scratch, dcol_scratch;
    for (size_t li = m.layers.size(); li-- > 0;) {
        const Layer& l = m.layers[li];
        const Tensor& input = trace.inputs[li];
        switch (l.kind) {
            case LayerKind::dense: {
                const Tensor& w_eff = trace.eff_weights[li];
                const int64_t n = input.shape[0], in = input.shape[1], out = w_eff.shape[0];
                Tensor dw_eff({out, in});
                Tensor db({out});
                Tensor dx({n, in});
                for (int64_t i = 0; i < n; ++i) {
                    const float* grow = &grad.data[static_cast<size_t>(i * out)];
                    const float* xrow = &input.data[static_cast<size_t>(i * in)];
                    float* dxrow = &dx.data[static_cast<size_t>(i * in)];
                    for (int64_t o = 0; o < out; ++o) {
                        const float g = grow[o];
                        db.data[static_cast<size_t>(o)] += g;
                        if (g == 0.0f) continue;
                        float* dwrow = &dw_eff.data[static_cast<size_t>(o * in)];
                        const float* wrow = &w_eff.data[static_cast<size_t>(o * in)];
                        for (int64_t p = 0; p < in; ++p) {
                            dwrow[p] += g * xrow[p];
                            dxrow[p] += g * wrow[p];
                        }
                    }
                }
                res.grads[li].dw = saf_backward(l.saf, l.weights, dw_eff);
                res.grads[li].db = std::move(db);
                grad = std::move(dx);
                break;
            }
            case LayerKind::conv2d: {
                const Tensor& w_eff = trace.eff_weights[li];
                const int64_t n = input.shape[0], in_ch = input.shape[1];
                const int64_t h = input.shape[2], wd = input.shape[3];
                const int64_t out_ch = w_eff.shape[0];
                const int64_t oh = detail::conv_out_dim(h, l.stride);
                const int64_t ow = detail::conv_out_dim(wd, l.stride);
                const int64_t k = in_ch * 9, p = oh * ow;
                Tensor dw_eff(w_eff.shape);
                Tensor db({out_ch});
                Tensor dx(input.shape);
                col_scratch.resize(static_cast<size_t>(k * p));
                dcol_scratch.resize(static_cast<size_t>(k * p));
                for (int64_t i = 0; i < n; ++i) {
                    const float* ximg = &input.data[static_cast<size_t>(i * in_ch * h * wd)];
                    const float* gimg = &grad.data[static_cast<size_t>(i * out_ch * p)];
                    detail::im2col(ximg, in_ch, h, wd, l.stride, col_scratch.data());
                    // dW += dY * col^T ; db += row sums ; dcol = W^T * dY
                    detail::gemm_abt_acc(gimg, col_scratch.data(), dw_eff.data.data(), out_ch, p,
                                         k);
                    for (int64_t oc = 0; oc < out_ch; ++oc) {
                        const float* rowg = gimg + oc * p;
                        float s = 0.0f;
                        for (int64_t j = 0; j < p; ++j) s += rowg[j];
                        db.data[static_cast<size_t>(oc)] += s;
                    }
                    std::fill(dcol_scratch.begin(), dcol_scratch.end(), 0.0f);
                    detail::gemm_atb_acc(w_eff.data.data(), gimg, dcol_scratch.data(), out_ch, k,
                                         p);
                    detail::col2im_acc(dcol_scratch.data(), in_ch, h, wd, l.stride,
                                       &dx.data[static_cast<size_t>(i * in_ch * h * wd)]);
                }
                res.grads[li].dw = saf_backward(l.saf, l.weights, dw_eff);
                res.grads[li].db = std::move(db);
                grad = std::move(dx);
                break;
            }
            case LayerKind::relu: {
                Tensor dx = grad;
                for (size_t i = 0; i < dx.data.size(); ++i) {
                    if (input.data[i] <= 0.0f) dx.data[i] = 0.0f;
                }
                grad = std::move(dx);
                break;
            }
            case LayerKind::maxpool2: {
                Tensor dx(input.shape);
                const std::vector<int64_t>& amax = trace.pool_argmax[li];
                for (size_t i = 0; i < amax.size(); ++i) {
                    dx.data[static_cast<size_t>(amax[i])] += grad.data[i];
                }
                grad = std::move(dx);
                break;
            }
            case LayerKind::flatten:
                grad = grad.reshaped(input.shape);
                break;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Deploy-time read path
// ---------------------------------------------------------------------------

// Encode all raw weights (one concatenated buffer; biases stay untouched),
// inject bit-flips, decode, and return a new model holding the decoded
// weights as its raw weights. Forward on the result applies tau as usual.
inline Model read_deployed(const Model& m, StoredDType dtype, const FaultConfig& cfg,
                           int64_t* flip_count_out = nullptr) {
    Tensor flat({weight_count(m)});
    int64_t off = 0;
    for (const Layer& l : m.layers) {
        if (!l.has_params()) continue;
        std::copy(l.weights.data.begin(), l.weights.data.end(),
                  flat.data.begin() + static_cast<size_t>(off));
        off += l.weights.numel();
    }
    const BitBuffer stored = encode(flat, dtype);
    auto [faulty, flips] = inject(stored, cfg);
    const Tensor restored = decode(faulty);
    Model out = m;
    off = 0;
    for (Layer& l : out.layers) {
        if (!l.has_params()) continue;
        std::copy(restored.data.begin() + static_cast<size_t>(off),
                  restored.data.begin() + static_cast<size_t>(off + l.weights.numel()),
                  l.weights.data.begin());
        off += l.weights.numel();
    }
    if (flip_count_out) *flip_count_out = flips;
    return out;
}

}  // namespace saflab
