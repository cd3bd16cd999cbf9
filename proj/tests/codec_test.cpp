#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

#include "saflab/codec.hpp"
#include "saflab/rng.hpp"

using saflab::BitBuffer;
using saflab::StoredDType;
using saflab::Tensor;

TEST(Codec, Fp32TrivialLayout) {
    const Tensor t({1}, {1.0f});
    const BitBuffer b = saflab::encode(t, StoredDType::fp32);
    ASSERT_EQ(b.bytes.size(), 4u);
    EXPECT_EQ(b.bytes[0], 0x00);
    EXPECT_EQ(b.bytes[1], 0x00);
    EXPECT_EQ(b.bytes[2], 0x80);
    EXPECT_EQ(b.bytes[3], 0x3F);
}

TEST(Codec, Fp32RoundTripIsBitwiseIdentity) {
    std::vector<uint32_t> patterns = {0x00000000u, 0x80000000u, 0x3F800000u, 0x7F800000u,
                                      0xFF800000u, 0x7FC00000u, 0x7F800001u, 0x00000001u};
    saflab::Rng rng(17);
    for (int i = 0; i < 10000; ++i) patterns.push_back(static_cast<uint32_t>(rng.next_u64()));
    Tensor t({static_cast<int64_t>(patterns.size())});
    for (size_t i = 0; i < patterns.size(); ++i) t.data[i] = std::bit_cast<float>(patterns[i]);
    const Tensor back = saflab::decode(saflab::encode(t, StoredDType::fp32));
    for (size_t i = 0; i < patterns.size(); ++i) {
        EXPECT_EQ(std::bit_cast<uint32_t>(back.data[i]), patterns[i]);
    }
}

TEST(Codec, Fp16TrivialValues) {
    EXPECT_EQ(saflab::fp32_to_fp16_bits(1.0f), 0x3C00);
    EXPECT_FLOAT_EQ(saflab::fp16_bits_to_fp32(0x3C00), 1.0f);
    EXPECT_EQ(saflab::fp32_to_fp16_bits(0.0f), 0x0000);
    EXPECT_EQ(saflab::fp32_to_fp16_bits(-2.0f), 0xC000);
    EXPECT_EQ(saflab::fp32_to_fp16_bits(65504.0f), 0x7BFF);  // max finite
    EXPECT_EQ(saflab::fp32_to_fp16_bits(1e30f), 0x7C00);     // overflow -> inf
    EXPECT_EQ(saflab::fp32_to_fp16_bits(-1e30f), 0xFC00);
}

// Every binary16 pattern decodes to FP32 and encodes back to itself,
// including subnormals, infinities, NaN payloads and both zeros.
TEST(Codec, Fp16ExhaustiveRoundTrip) {
    for (uint32_t h = 0; h < 0x10000u; ++h) {
        const float f = saflab::fp16_bits_to_fp32(static_cast<uint16_t>(h));
        const uint16_t back = saflab::fp32_to_fp16_bits(f);
        ASSERT_EQ(back, static_cast<uint16_t>(h)) << "pattern " << h;
    }
}

namespace {

// Independent round-to-nearest-even oracle: enumerate all finite binary16
// magnitudes, pick the nearest to |x| with ties broken to the even mantissa.
uint16_t ref_fp16_encode(float x) {
    static std::vector<std::pair<double, uint16_t>> table = [] {
        std::vector<std::pair<double, uint16_t>> t;
        for (uint32_t h = 0; h < 0x7C00u; ++h) {  // finite, positive
            t.emplace_back(static_cast<double>(saflab::fp16_bits_to_fp32(static_cast<uint16_t>(h))),
                           static_cast<uint16_t>(h));
        }
        return t;
    }();
    const uint16_t sign = std::signbit(x) ? 0x8000 : 0x0000;
    if (std::isnan(x)) return 0x7E00;  // canonical; callers check NaN separately
    const double mag = std::fabs(static_cast<double>(x));
    if (mag >= 65520.0) return sign | 0x7C00;  // rounds past max finite -> inf
    auto it = std::lower_bound(table.begin(), table.end(), mag,
                               [](const auto& e, double v) { return e.first < v; });
    if (it == table.end()) return sign | table.back().second;
    if (it->first == mag) return sign | it->second;
    const auto above = *it;
    const auto below = *(it - 1);
    const double d_up = above.first - mag;
    const double d_dn = mag - below.first;
    if (d_up < d_dn) return sign | above.second;
    if (d_dn < d_up) return sign | below.second;
    return sign | ((below.second & 1) == 0 ? below.second : above.second);
}

}  // namespace

TEST(Codec, Fp16RoundToNearestEvenAgainstTableOracle) {
    // boundary cases around rounding ties and the overflow threshold
    const float specials[] = {65519.996f, 65520.0f,  65536.0f,   0x1.0p-25f, 0x1.04p-25f,
                              0x1.0p-24f, 6.1e-05f,  6.2e-05f,   0.1f,       1.0009765f,
                              1.0004883f, 2.9999f,   -0.333333f, 1e-8f,      -65504.0f};
    for (float f : specials) {
        EXPECT_EQ(saflab::fp32_to_fp16_bits(f), ref_fp16_encode(f)) << "value " << f;
    }
    saflab::Rng rng(23);
    for (int i = 0; i < 200000; ++i) {
        // log-uniform magnitudes across the fp16 range plus outliers
        const float exp = rng.next_float() * 40.0f - 30.0f;
        float f = std::ldexp(1.0f + rng.next_float(), static_cast<int>(exp));
        if (rng.next_u64() & 1) f = -f;
        ASSERT_EQ(saflab::fp32_to_fp16_bits(f), ref_fp16_encode(f)) << "value " << f;
    }
}

TEST(Codec, Q25TrivialValues) {
    EXPECT_EQ(saflab::q25_encode_value(1.0f), 0x20);
    EXPECT_EQ(static_cast<uint8_t>(saflab::q25_encode_value(-4.0f)), 0x80);
    EXPECT_EQ(saflab::q25_encode_value(10.0f), 0x7F);   // clamps to +3.96875
    EXPECT_EQ(saflab::q25_encode_value(-10.0f), static_cast<int8_t>(0x80));
    EXPECT_FLOAT_EQ(saflab::q25_decode_value(0x01), 0.03125f);
    EXPECT_FLOAT_EQ(saflab::q25_decode_value(0x7F), 3.96875f);
    EXPECT_FLOAT_EQ(saflab::q25_decode_value(static_cast<int8_t>(0x80)), -4.0f);
}

TEST(Codec, Q25RoundTripErrorWithinHalfUlp) {
    saflab::Rng rng(29);
    Tensor t({10000});
    for (float& v : t.data) v = rng.next_float() * 7.9f - 4.0f;  // [-4, 3.9]
    const Tensor back = saflab::decode(saflab::encode(t, StoredDType::q25));
    float max_err = 0.0f;
    for (int64_t i = 0; i < t.numel(); ++i) {
        max_err = std::max(max_err, std::fabs(back.data[static_cast<size_t>(i)] -
                                              t.data[static_cast<size_t>(i)]));
    }
    EXPECT_LE(max_err, 1.0f / 64.0f);
}

TEST(Codec, Q25EncodeIsMonotone) {
    int prev = -129;
    for (float x = -4.5f; x <= 4.5f; x += 1e-3f) {
        const int v = saflab::q25_encode_value(x);
        ASSERT_GE(v, prev) << "at " << x;
        prev = v;
    }
    EXPECT_EQ(prev, 127);
}

TEST(Codec, Q25NonFiniteInputs) {
    const float inf = std::numeric_limits<float>::infinity();
    EXPECT_EQ(saflab::q25_encode_value(inf), 127);
    EXPECT_EQ(saflab::q25_encode_value(-inf), static_cast<int8_t>(-128));
    EXPECT_EQ(saflab::q25_encode_value(std::numeric_limits<float>::quiet_NaN()), 0);
}

TEST(Codec, BufferSerializeRoundTrip) {
    saflab::Rng rng(31);
    Tensor t({257});
    for (float& v : t.data) v = rng.next_float() * 8.0f - 4.0f;
    for (StoredDType d : {StoredDType::fp32, StoredDType::fp16, StoredDType::q25}) {
        const BitBuffer b = saflab::encode(t, d);
        EXPECT_EQ(b.bit_size(), 257 * saflab::bits_per_weight(d));
        std::stringstream ss;
        saflab::serialize(b, ss);
        EXPECT_EQ(ss.str().size(), 9u + b.bytes.size());
        EXPECT_EQ(static_cast<uint8_t>(ss.str()[0]), static_cast<uint8_t>(d));  // dtype tag byte
        const BitBuffer back = saflab::deserialize_bitbuffer(ss);
        EXPECT_TRUE(back == b);
    }
}

TEST(Codec, BufferBadTagRejected) {
    std::stringstream ss;
    ss.put(7);
    for (int i = 0; i < 8; ++i) ss.put(0);
    try {
        saflab::deserialize_bitbuffer(ss);
        FAIL() << "expected format error";
    } catch (const saflab::Error& e) {
        EXPECT_EQ(e.category(), saflab::ErrorCategory::format);
    }
}

TEST(Codec, DtypeNamesParse) {
    EXPECT_EQ(saflab::parse_dtype("fp32"), StoredDType::fp32);
    EXPECT_EQ(saflab::parse_dtype("FP16"), StoredDType::fp16);
    EXPECT_EQ(saflab::parse_dtype("q2.5"), StoredDType::q25);
    EXPECT_EQ(saflab::parse_dtype("q25"), StoredDType::q25);
    EXPECT_THROW(saflab::parse_dtype("int8"), saflab::Error);
}
