#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "saflab/network.hpp"
#include "saflab/rng.hpp"

using saflab::LayerKind;
using saflab::Model;
using saflab::Rng;
using saflab::SafKind;
using saflab::Tensor;

namespace {

const SafKind kAllKinds[] = {SafKind::none(), SafKind::tanh(), SafKind::tanh_scaled(0.5f),
                             SafKind::softsign(), SafKind::arctan()};

// Straight-line reference for a flatten/dense/relu/dense model. Accumulation
// order matches the library (ascending input index), so with saf == none the
// outputs must agree bitwise.
Tensor ref_mlp_forward(const Model& m, const Tensor& x) {
    const auto& d1 = m.layers[1];
    const auto& d2 = m.layers[3];
    const int64_t n = x.shape[0];
    const int64_t in = d1.weights.shape[1], hid = d1.weights.shape[0];
    const int64_t out = d2.weights.shape[0];
    auto eff = [](const saflab::Layer& l, int64_t o, int64_t i) {
        return saflab::saf_apply(l.saf, l.weights(o, i));
    };
    Tensor logits({n, out});
    for (int64_t s = 0; s < n; ++s) {
        std::vector<float> h(static_cast<size_t>(hid));
        for (int64_t o = 0; o < hid; ++o) {
            float acc = d1.bias.data[static_cast<size_t>(o)];
            for (int64_t i = 0; i < in; ++i) acc += x(s, i) * eff(d1, o, i);
            h[static_cast<size_t>(o)] = acc > 0.0f ? acc : 0.0f;
        }
        for (int64_t o = 0; o < out; ++o) {
            float acc = d2.bias.data[static_cast<size_t>(o)];
            for (int64_t i = 0; i < hid; ++i) acc += h[static_cast<size_t>(i)] * eff(d2, o, i);
            logits(s, o) = acc;
        }
    }
    return logits;
}

Model tiny_mlp(const SafKind& saf, uint64_t seed) {
    Rng rng(seed);
    return saflab::make_mlp({4, 5, 3}, saf, rng);
}

// conv(s1) / relu / pool / conv(s2) / relu / flatten / dense, small enough to
// finite-difference every weight.
Model tiny_cnn(const SafKind& saf, uint64_t seed) {
    Rng rng(seed);
    Model m;
    m.arch_name = "tiny-cnn";
    m.input_shape = {2, 6, 6};
    m.class_count = 3;
    m.layers.push_back(saflab::make_conv2d(2, 3, 1, saf, rng));
    m.layers.push_back(saflab::make_plain_layer(LayerKind::relu));
    m.layers.push_back(saflab::make_plain_layer(LayerKind::maxpool2));
    m.layers.push_back(saflab::make_conv2d(3, 4, 2, saf, rng));
    m.layers.push_back(saflab::make_plain_layer(LayerKind::relu));
    m.layers.push_back(saflab::make_plain_layer(LayerKind::flatten));
    m.layers.push_back(saflab::make_dense(4 * 2 * 2, 3, saf, rng));
    return m;
}

Tensor random_input(const std::vector<int64_t>& shape, uint64_t seed) {
    Rng rng(seed);
    Tensor t(shape);
    for (float& v : t.data) v = rng.next_float() * 2.0f - 1.0f;
    return t;
}

// Central finite differences over the library loss; 1e-2 relative with a
// small absolute floor below the resolution of FP32 loss evaluation. Params
// where FD at h and h/2 disagree sit on a relu/maxpool kink, where the
// central difference itself is invalid; those are skipped and counted.
void finite_difference_check(Model& m, const Tensor& x, const std::vector<int>& labels) {
    const saflab::BackwardResult res = saflab::backward(m, x, labels);
    const float h = 1e-3f;
    size_t checked = 0, skipped = 0;
    for (size_t li = 0; li < m.layers.size(); ++li) {
        if (!m.layers[li].has_params()) continue;
        for (auto [tensor, grads] :
             {std::pair{&m.layers[li].weights, &res.grads[li].dw},
              std::pair{&m.layers[li].bias, &res.grads[li].db}}) {
            for (size_t wi = 0; wi < tensor->data.size(); ++wi) {
                const float keep = tensor->data[wi];
                auto loss_at = [&](float w) {
                    tensor->data[wi] = w;
                    const float l = saflab::softmax_cross_entropy(saflab::forward(m, x), labels);
                    tensor->data[wi] = keep;
                    return static_cast<double>(l);
                };
                const double fd_h = (loss_at(keep + h) - loss_at(keep - h)) / (2.0 * h);
                const double fd_h2 =
                    (loss_at(keep + h / 2) - loss_at(keep - h / 2)) / static_cast<double>(h);
                ++checked;
                if (std::fabs(fd_h - fd_h2) >
                    0.02 * std::max(std::fabs(fd_h), std::fabs(fd_h2)) + 5e-4) {
                    ++skipped;  // non-smooth under the probe
                    continue;
                }
                const double an = grads->data[wi];
                const double tol = 1e-2 * std::max(std::fabs(fd_h2), std::fabs(an)) + 1.5e-3;
                ASSERT_NEAR(an, fd_h2, tol)
                    << "layer " << li << " param " << wi << " saf "
                    << saflab::saf_name(m.layers[li].saf);
            }
        }
    }
    ASSERT_LE(skipped * 10, checked) << "too many kink-crossing params to trust the check";
}

}  // namespace

TEST(Network, IdentityDenseIsIdentity) {
    Model m;
    m.class_count = 3;
    m.input_shape = {3};
    Rng rng(1);
    m.layers.push_back(saflab::make_dense(3, 3, SafKind::none(), rng));
    auto& l = m.layers[0];
    l.weights.fill(0.0f);
    for (int64_t i = 0; i < 3; ++i) l.weights(i, i) = 1.0f;
    const Tensor x({2, 3}, {0.5f, -1.25f, 3.0f, 0.0f, 2.0f, -0.125f});
    const Tensor y = saflab::forward(m, x);
    EXPECT_EQ(y.data, x.data);
}

TEST(Network, SaturatedUniformWeightsGiveKnownLogit) {
    Model m;
    m.class_count = 2;
    m.input_shape = {8};
    Rng rng(1);
    m.layers.push_back(saflab::make_dense(8, 2, SafKind::tanh(), rng));
    m.layers[0].weights.fill(10.0f);
    m.layers[0].bias.fill(0.0f);
    Tensor x({1, 8});
    x.fill(1.0f);
    const Tensor y = saflab::forward(m, x);
    const float want = 8.0f * std::tanh(10.0f);  // ~ 8 * 0.99999999
    EXPECT_NEAR(y.data[0], want, 1e-5f);
    EXPECT_NEAR(y.data[1], want, 1e-5f);
}

TEST(Network, ForwardMatchesReferenceImplementation) {
    const Tensor x = random_input({4, 4}, 77);
    for (const SafKind& k : kAllKinds) {
        const Model m = tiny_mlp(k, 1234);
        const Tensor got = saflab::forward(m, x);
        const Tensor want = ref_mlp_forward(m, x);
        for (size_t i = 0; i < got.data.size(); ++i) {
            EXPECT_NEAR(got.data[i], want.data[i], 1e-5f) << saflab::saf_name(k);
        }
    }
}

// With saf == none the transform-aware path must be exactly the plain affine
// chain: bitwise-equal outputs.
TEST(Network, NoneReducesToPlainForwardBitwise) {
    const Tensor x = random_input({8, 4}, 99);
    const Model m = tiny_mlp(SafKind::none(), 4321);
    const Tensor got = saflab::forward(m, x);
    const Tensor want = ref_mlp_forward(m, x);
    EXPECT_EQ(got.data, want.data);
}

TEST(Network, UniformLogitsLossIsLogClassCount) {
    const Tensor logits({3, 4});  // all zeros
    const float loss = saflab::softmax_cross_entropy(logits, {0, 1, 3});
    EXPECT_NEAR(loss, std::log(4.0f), 1e-6f);
}

TEST(Network, SoftmaxGradientRowsSumToZero) {
    const Tensor logits = random_input({5, 7}, 3);
    Tensor dlogits;
    const float loss = saflab::softmax_cross_entropy(logits, {0, 1, 2, 3, 4}, &dlogits);
    EXPECT_GE(loss, 0.0f);
    for (int64_t i = 0; i < 5; ++i) {
        double s = 0.0;
        for (int64_t j = 0; j < 7; ++j) s += dlogits(i, j);
        EXPECT_NEAR(s, 0.0, 1e-7);
    }
}

TEST(Network, InvalidLabelRejected) {
    const Tensor logits({1, 3});
    try {
        saflab::softmax_cross_entropy(logits, {3});
        FAIL() << "expected input error";
    } catch (const saflab::Error& e) {
        EXPECT_EQ(e.category(), saflab::ErrorCategory::input);
    }
}

TEST(Network, GradientsMatchFiniteDifferencesMlp) {
    const Tensor x = random_input({3, 4}, 11);
    const std::vector<int> labels = {0, 2, 1};
    for (const SafKind& k : kAllKinds) {
        Model m = tiny_mlp(k, 555);
        finite_difference_check(m, x, labels);
    }
}

TEST(Network, GradientsMatchFiniteDifferencesCnn) {
    const Tensor x = random_input({2, 2, 6, 6}, 13);
    const std::vector<int> labels = {1, 2};
    for (const SafKind& k : {SafKind::none(), SafKind::tanh()}) {
        Model m = tiny_cnn(k, 999);
        finite_difference_check(m, x, labels);
    }
}

// tau' == 1 for none: raw-weight gradients equal effective-weight gradients.
TEST(Network, NoneGradientsEqualPlainBackprop) {
    Model m = tiny_mlp(SafKind::none(), 31);
    const Tensor x = random_input({3, 4}, 17);
    const std::vector<int> labels = {0, 1, 2};
    const auto res = saflab::backward(m, x, labels);
    for (size_t li = 0; li < m.layers.size(); ++li) {
        if (!m.layers[li].has_params()) continue;
        const Tensor again =
            saflab::saf_backward(SafKind::none(), m.layers[li].weights, res.grads[li].dw);
        EXPECT_EQ(again.data, res.grads[li].dw.data);
    }
}

TEST(Network, ReadDeployedFp32NoFaultsIsBitwiseIdentity) {
    const Model m = tiny_mlp(SafKind::tanh(), 71);
    const Model deployed = saflab::read_deployed(m, saflab::StoredDType::fp32, {0.0, 42, 0});
    const Tensor x = random_input({4, 4}, 7);
    EXPECT_EQ(saflab::forward(m, x).data, saflab::forward(deployed, x).data);
}

TEST(Network, ReadDeployedQ25QuantizesWeights) {
    const Model m = tiny_mlp(SafKind::none(), 72);
    const Model deployed = saflab::read_deployed(m, saflab::StoredDType::q25, {0.0, 42, 0});
    for (size_t li = 0; li < m.layers.size(); ++li) {
        if (!m.layers[li].has_params()) continue;
        const auto& a = m.layers[li].weights.data;
        const auto& b = deployed.layers[li].weights.data;
        for (size_t i = 0; i < a.size(); ++i) {
            ASSERT_NEAR(a[i], b[i], 1.0f / 64.0f);  // weights are within [-4,4)
        }
        EXPECT_EQ(m.layers[li].bias.data, deployed.layers[li].bias.data);  // biases unfaulted
    }
}

TEST(Network, ReadDeployedIsDeterministic) {
    const Model m = tiny_mlp(SafKind::softsign(), 73);
    int64_t f1 = 0, f2 = 0;
    const Model d1 = saflab::read_deployed(m, saflab::StoredDType::fp16, {1e-2, 5, 3}, &f1);
    const Model d2 = saflab::read_deployed(m, saflab::StoredDType::fp16, {1e-2, 5, 3}, &f2);
    EXPECT_EQ(f1, f2);
    for (size_t li = 0; li < m.layers.size(); ++li) {
        if (!m.layers[li].has_params()) continue;
        EXPECT_EQ(d1.layers[li].weights.data, d2.layers[li].weights.data);
    }
}

// The central hardening mechanism: whatever the BER does to stored bits, the
// effective weights stay inside the transform's bound.
TEST(Network, EffectiveWeightsBoundedAfterFaults) {
    for (const SafKind& k : {SafKind::tanh(), SafKind::softsign(), SafKind::arctan()}) {
        Model m = tiny_mlp(k, 74);
        for (double ber : {1e-3, 0.1, 0.5}) {
            const Model faulty =
                saflab::read_deployed(m, saflab::StoredDType::fp32, {ber, 99, 1});
            for (const auto& l : faulty.layers) {
                if (!l.has_params()) continue;
                const Tensor eff = saflab::saf_forward(l.saf, l.weights);
                for (float v : eff.data) {
                    if (std::isnan(v)) continue;  // NaN weights stay NaN by design
                    ASSERT_LE(std::fabs(v), saflab::saf_bound(k)) << saflab::saf_name(k);
                }
            }
        }
    }
}

TEST(Network, ShapeMismatchRejected) {
    const Model m = tiny_mlp(SafKind::none(), 75);
    try {
        saflab::forward(m, random_input({2, 7}, 1));
        FAIL() << "expected dimension error";
    } catch (const saflab::Error& e) {
        EXPECT_EQ(e.category(), saflab::ErrorCategory::dimension);
    }
}

TEST(Network, Cnn2LayerShapes) {
    Rng rng(5);
    const Model m = saflab::make_cnn_s(3, 32, 32, 10, SafKind::tanh(), rng);
    const Tensor x = random_input({2, 3, 32, 32}, 2);
    const Tensor y = saflab::forward(m, x);
    EXPECT_EQ(y.shape, (std::vector<int64_t>{2, 10}));
    EXPECT_EQ(saflab::weight_count(m), 432 + 4608 + 32 * 8 * 8 * 128 + 128 * 10);
}
