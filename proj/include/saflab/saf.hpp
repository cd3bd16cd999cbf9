#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "saflab/errors.hpp"
#include "saflab/tensor.hpp"

namespace saflab {

// Saturating transforms applied to stored weights when they are read. Every
// variant except `none` is odd, monotone and maps the reals into a bounded
// interval, which caps how far a corrupted weight can deviate.
enum class SafVariant : uint8_t { none = 0, tanh = 1, tanh_c = 2, softsign = 3, arctan = 4 };

struct SafKind {
    SafVariant variant = SafVariant::none;
    float c = 0.5f;  // input scale, tanh_c only

    static SafKind none() { return {SafVariant::none, 0.5f}; }
    static SafKind tanh() { return {SafVariant::tanh, 0.5f}; }
    static SafKind tanh_scaled(float c) {
        require(c > 0.0f, ErrorCategory::input, "tanhC scale must be > 0");
        return {SafVariant::tanh_c, c};
    }
    static SafKind softsign() { return {SafVariant::softsign, 0.5f}; }
    static SafKind arctan() { return {SafVariant::arctan, 0.5f}; }

    bool operator==(const SafKind& o) const {
        if (variant != o.variant) return false;
        return variant != SafVariant::tanh_c || c == o.c;
    }
};

inline constexpr float kHalfPi = 1.57079632679489661923f;

// Saturation bound: |saf(x)| never exceeds this.
inline float saf_bound(const SafKind& k) {
    switch (k.variant) {
        case SafVariant::none: return std::numeric_limits<float>::infinity();
        case SafVariant::arctan: return kHalfPi;
        default: return 1.0f;
    }
}

// Elementwise transform. Total: +/-Inf maps to the saturation bound, NaN
// stays NaN.
inline float saf_apply(const SafKind& k, float x) noexcept {
    switch (k.variant) {
        case SafVariant::none:
            return x;
        case SafVariant::tanh:
            return std::tanh(x);
        case SafVariant::tanh_c:
            return std::tanh(k.c * x);
        case SafVariant::softsign:
            if (std::isinf(x)) return std::copysign(1.0f, x);
            return x / (1.0f + std::fabs(x));
        case SafVariant::arctan:
            return std::atan(x);
    }
    return x;
}

// Elementwise derivative of the transform at x.
inline float saf_derivative(const SafKind& k, float x) noexcept {
    switch (k.variant) {
        case SafVariant::none:
            return 1.0f;
        case SafVariant::tanh: {
            const float t = std::tanh(x);
            return 1.0f - t * t;
        }
        case SafVariant::tanh_c: {
            const float t = std::tanh(k.c * x);
            return k.c * (1.0f - t * t);
        }
        case SafVariant::softsign: {
            if (std::isinf(x)) return 0.0f;
            const float d = 1.0f + std::fabs(x);
            return 1.0f / (d * d);
        }
        case SafVariant::arctan:
            return 1.0f / (1.0f + x * x);
    }
    return 1.0f;
}

inline Tensor saf_forward(const SafKind& k, const Tensor& w) {
    if (k.variant == SafVariant::none) return w;
    Tensor out = w;
    for (float& v : out.data) v = saf_apply(k, v);
    return out;
}

// upstream .* saf'(w); the gradient factor picked up by raw weights.
inline Tensor saf_backward(const SafKind& k, const Tensor& w, const Tensor& upstream) {
    require(w.shape == upstream.shape, ErrorCategory::dimension,
            "saf_backward shape mismatch: " + w.shape_str() + " vs " + upstream.shape_str());
    if (k.variant == SafVariant::none) return upstream;
    Tensor out = upstream;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= saf_derivative(k, w.data[i]);
    return out;
}

// Config-file names: none | tanh | tanh0.5 | softsign | arctan | tanhC:<float>
// (case-insensitive).
inline SafKind parse_saf(const std::string& name) {
    std::string s;
    s.reserve(name.size());
    for (char ch : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (s == "none") return SafKind::none();
    if (s == "tanh") return SafKind::tanh();
    if (s == "tanh0.5") return SafKind::tanh_scaled(0.5f);
    if (s == "softsign") return SafKind::softsign();
    if (s == "arctan") return SafKind::arctan();
    if (s.rfind("tanhc:", 0) == 0) {
        try {
            const float c = std::stof(s.substr(6));
            return SafKind::tanh_scaled(c);
        } catch (const std::exception&) {
            fail(ErrorCategory::input, "bad tanhC scale in '" + name + "'");
        }
    }
    fail(ErrorCategory::input,
         "unknown saturating transform '" + name +
             "' (expected none|tanh|tanh0.5|softsign|arctan|tanhC:<float>)");
}

inline std::string saf_name(const SafKind& k) {
    switch (k.variant) {
        case SafVariant::none: return "none";
        case SafVariant::tanh: return "tanh";
        case SafVariant::tanh_c:
            if (k.c == 0.5f) return "tanh0.5";
            return "tanhC:" + std::to_string(k.c);
        case SafVariant::softsign: return "softsign";
        case SafVariant::arctan: return "arctan";
    }
    return "none";
}

}  // namespace saflab
