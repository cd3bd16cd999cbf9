#pragma once

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "saflab/errors.hpp"
#include "saflab/tensor.hpp"

namespace saflab {

// Storage formats for weights written to the fault-prone medium.
//   fp32: IEEE 754 binary32, stored verbatim.
//   fp16: IEEE 754 binary16, round-to-nearest-even, overflow to +/-Inf.
//   q25 : 8-bit two's-complement fixed point, 1 sign / 2 integer / 5 fraction
//         bits; value = byte / 32 over [-4.0, +3.96875].
enum class StoredDType : uint8_t { fp32 = 0, fp16 = 1, q25 = 2 };

inline int bits_per_weight(StoredDType d) {
    switch (d) {
        case StoredDType::fp32: return 32;
        case StoredDType::fp16: return 16;
        case StoredDType::q25: return 8;
    }
    return 0;
}

inline StoredDType parse_dtype(const std::string& name) {
    std::string s;
    for (char ch : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (s == "fp32") return StoredDType::fp32;
    if (s == "fp16") return StoredDType::fp16;
    if (s == "q25" || s == "q2.5") return StoredDType::q25;
    fail(ErrorCategory::input, "unknown dtype '" + name + "' (expected fp32|fp16|q25)");
}

inline const char* dtype_name(StoredDType d) {
    switch (d) {
        case StoredDType::fp32: return "fp32";
        case StoredDType::fp16: return "fp16";
        case StoredDType::q25: return "q25";
    }
    return "?";
}

// Encoded weights: `count` elements packed little-endian, one after another.
// Bit i of the buffer is bit (i % 8) of byte (i / 8); together with the
// little-endian element layout this makes bit index == bit significance
// within each stored element.
struct BitBuffer {
    StoredDType dtype = StoredDType::fp32;
    int64_t count = 0;
    std::vector<uint8_t> bytes;

    int64_t bit_size() const { return count * bits_per_weight(dtype); }

    bool operator==(const BitBuffer& o) const {
        return dtype == o.dtype && count == o.count && bytes == o.bytes;
    }
};

// ---------------------------------------------------------------------------
// binary16 scalar conversion
// ---------------------------------------------------------------------------

inline float fp16_bits_to_fp32(uint16_t h) {
    const uint32_t sign = static_cast<uint32_t>(h & 0x8000u) << 16;
    const uint32_t exp = (h >> 10) & 0x1Fu;
    const uint32_t man = h & 0x3FFu;
    if (exp == 0) {
        // Zero or subnormal: value = man * 2^-24, exact in binary32.
        float v = static_cast<float>(man) * 0x1.0p-24f;
        return sign ? -v : v;
    }
    if (exp == 31) {
        // Inf / NaN; NaN payload moves to the top of the binary32 mantissa.
        const uint32_t out = sign | 0x7F800000u | (man << 13);
        return std::bit_cast<float>(out);
    }
    const uint32_t out = sign | ((exp - 15 + 127) << 23) | (man << 13);
    return std::bit_cast<float>(out);
}

inline uint16_t fp32_to_fp16_bits(float f) {
    const uint32_t x = std::bit_cast<uint32_t>(f);
    const auto sign = static_cast<uint16_t>((x >> 16) & 0x8000u);
    const uint32_t exp = (x >> 23) & 0xFFu;
    const uint32_t man = x & 0x7FFFFFu;

    if (exp == 255) {
        if (man == 0) return sign | 0x7C00u;  // Inf
        uint16_t payload = static_cast<uint16_t>(man >> 13);
        if (payload == 0) payload = 0x200;  // keep NaN when payload bits vanish
        return sign | 0x7C00u | payload;
    }

    const int e = static_cast<int>(exp) - 127 + 15;  // binary16-biased exponent
    if (e >= 31) return sign | 0x7C00u;              // overflow -> Inf

    if (e >= 1) {
        // Normal range: reduce 23-bit mantissa to 10 bits, round to nearest
        // even. A mantissa carry rolls into the exponent (and may reach Inf),
        // which is the correct rounded result.
        uint16_t out = sign | static_cast<uint16_t>(e << 10) | static_cast<uint16_t>(man >> 13);
        const uint32_t rem = man & 0x1FFFu;
        if (rem > 0x1000u || (rem == 0x1000u && (out & 1u))) ++out;
        return out;
    }

    // Subnormal range: target mantissa = round(value / 2^-24).
    const uint32_t sig = (exp == 0) ? man : (man | 0x800000u);
    const int biased = (exp == 0) ? 1 : static_cast<int>(exp);
    const int shift = 126 - biased;  // value = sig * 2^(biased-150); /2^-24 => >> shift
    if (shift >= 25) return sign;    // below half the smallest subnormal
    const uint32_t q = sig >> shift;
    const uint32_t rem = sig & ((1u << shift) - 1u);
    const uint32_t half = 1u << (shift - 1);
    uint32_t out = q;
    if (rem > half || (rem == half && (q & 1u))) ++out;
    return sign | static_cast<uint16_t>(out);  // carry to 0x0400 = smallest normal
}

// ---------------------------------------------------------------------------
// Q2.5 scalar conversion
// ---------------------------------------------------------------------------

// round(x * 32), half away from zero, saturating to [-128, 127].
// NaN encodes to 0; +/-Inf clamp like any out-of-range value.
inline int8_t q25_encode_value(float x) {
    if (std::isnan(x)) return 0;
    double r = std::round(static_cast<double>(x) * 32.0);
    if (r < -128.0) r = -128.0;
    if (r > 127.0) r = 127.0;
    return static_cast<int8_t>(r);
}

inline float q25_decode_value(int8_t v) { return static_cast<float>(v) / 32.0f; }

// ---------------------------------------------------------------------------
// Buffer encode / decode
// ---------------------------------------------------------------------------

inline BitBuffer encode(const Tensor& w, StoredDType dtype) {
    BitBuffer b;
    b.dtype = dtype;
    b.count = w.numel();
    b.bytes.resize(static_cast<size_t>(b.count) * static_cast<size_t>(bits_per_weight(dtype) / 8));
    size_t o = 0;
    switch (dtype) {
        case StoredDType::fp32:
            for (float v : w.data) {
                const uint32_t u = std::bit_cast<uint32_t>(v);
                b.bytes[o++] = static_cast<uint8_t>(u);
                b.bytes[o++] = static_cast<uint8_t>(u >> 8);
                b.bytes[o++] = static_cast<uint8_t>(u >> 16);
                b.bytes[o++] = static_cast<uint8_t>(u >> 24);
            }
            break;
        case StoredDType::fp16:
            for (float v : w.data) {
                const uint16_t u = fp32_to_fp16_bits(v);
                b.bytes[o++] = static_cast<uint8_t>(u);
                b.bytes[o++] = static_cast<uint8_t>(u >> 8);
            }
            break;
        case StoredDType::q25:
            for (float v : w.data) b.bytes[o++] = static_cast<uint8_t>(q25_encode_value(v));
            break;
    }
    return b;
}

inline Tensor decode(const BitBuffer& b) {
    require(static_cast<int64_t>(b.bytes.size()) ==
                b.count * static_cast<int64_t>(bits_per_weight(b.dtype) / 8),
            ErrorCategory::format, "bit buffer byte length does not match element count");
    Tensor t({b.count});
    size_t o = 0;
    switch (b.dtype) {
        case StoredDType::fp32:
            for (int64_t i = 0; i < b.count; ++i) {
                uint32_t u = static_cast<uint32_t>(b.bytes[o]) |
                             static_cast<uint32_t>(b.bytes[o + 1]) << 8 |
                             static_cast<uint32_t>(b.bytes[o + 2]) << 16 |
                             static_cast<uint32_t>(b.bytes[o + 3]) << 24;
                o += 4;
                t.data[static_cast<size_t>(i)] = std::bit_cast<float>(u);
            }
            break;
        case StoredDType::fp16:
            for (int64_t i = 0; i < b.count; ++i) {
                const auto u = static_cast<uint16_t>(static_cast<uint16_t>(b.bytes[o]) |
                                                     static_cast<uint16_t>(b.bytes[o + 1]) << 8);
                o += 2;
                t.data[static_cast<size_t>(i)] = fp16_bits_to_fp32(u);
            }
            break;
        case StoredDType::q25:
            for (int64_t i = 0; i < b.count; ++i) {
                t.data[static_cast<size_t>(i)] =
                    q25_decode_value(static_cast<int8_t>(b.bytes[o++]));
            }
            break;
    }
    return t;
}

// Checkpoint-container framing: dtype tag byte (0=fp32, 1=fp16, 2=q25),
// little-endian u64 element count, then the packed bytes.
inline void serialize(const BitBuffer& b, std::ostream& os) {
    const auto tag = static_cast<uint8_t>(b.dtype);
    os.put(static_cast<char>(tag));
    const auto n = static_cast<uint64_t>(b.count);
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((n >> (8 * i)) & 0xFF));
    os.write(reinterpret_cast<const char*>(b.bytes.data()),
             static_cast<std::streamsize>(b.bytes.size()));
}

inline BitBuffer deserialize_bitbuffer(std::istream& is) {
    const int tag = is.get();
    require(tag >= 0 && tag <= 2, ErrorCategory::format, "bad dtype tag in bit buffer");
    uint64_t n = 0;
    for (int i = 0; i < 8; ++i) {
        const int c = is.get();
        require(c >= 0, ErrorCategory::format, "truncated bit buffer header");
        n |= static_cast<uint64_t>(c) << (8 * i);
    }
    BitBuffer b;
    b.dtype = static_cast<StoredDType>(tag);
    b.count = static_cast<int64_t>(n);
    b.bytes.resize(static_cast<size_t>(n) * static_cast<size_t>(bits_per_weight(b.dtype) / 8));
    is.read(reinterpret_cast<char*>(b.bytes.data()), static_cast<std::streamsize>(b.bytes.size()));
    require(static_cast<size_t>(is.gcount()) == b.bytes.size(), ErrorCategory::format,
            "truncated bit buffer payload");
    return b;
}

}  // namespace saflab
