#include <gtest/gtest.h>

#include "saflab/rng.hpp"
#include "saflab/tensor.hpp"

using saflab::Rng;
using saflab::Tensor;

TEST(Tensor, ShapeAndDataAgree) {
    Tensor t({2, 3, 4});
    EXPECT_EQ(t.numel(), 24);
    EXPECT_EQ(t.data.size(), 24u);
    EXPECT_THROW(Tensor({2, 2}, {1.0f, 2.0f, 3.0f}), saflab::Error);
}

TEST(Tensor, ReshapePreservesCount) {
    Tensor t({2, 6});
    Tensor r = t.reshaped({3, 4});
    EXPECT_EQ(r.numel(), 12);
    EXPECT_THROW(t.reshaped({5, 5}), saflab::Error);
}

TEST(Matmul, IdentityTimesVector) {
    const Tensor eye({2, 2}, {1, 0, 0, 1});
    const Tensor v({2, 1}, {3, 4});
    const Tensor out = matmul(eye, v);
    EXPECT_EQ(out.data, std::vector<float>({3, 4}));
}

TEST(Matmul, RowTimesColumn) {
    const Tensor a({1, 2}, {1, 2});
    const Tensor b({2, 1}, {3, 4});
    const Tensor out = matmul(a, b);
    ASSERT_EQ(out.numel(), 1);
    EXPECT_FLOAT_EQ(out.data[0], 11.0f);
}

TEST(Matmul, ShapeMismatchThrowsDimensionError) {
    const Tensor a({2, 3});
    const Tensor b({2, 3});
    try {
        matmul(a, b);
        FAIL() << "expected dimension error";
    } catch (const saflab::Error& e) {
        EXPECT_EQ(e.category(), saflab::ErrorCategory::dimension);
    }
}

// Independent oracle: naive triple loop with explicit index arithmetic.
TEST(Matmul, MatchesNaiveTripleLoop) {
    Rng rng(7);
    Tensor a({4, 5}), b({5, 3});
    for (float& v : a.data) v = rng.next_float() * 2.0f - 1.0f;
    for (float& v : b.data) v = rng.next_float() * 2.0f - 1.0f;
    const Tensor out = matmul(a, b);
    for (int64_t i = 0; i < 4; ++i) {
        for (int64_t j = 0; j < 3; ++j) {
            float want = 0.0f;
            for (int64_t k = 0; k < 5; ++k) want += a(i, k) * b(k, j);
            EXPECT_NEAR(out(i, j), want, 1e-6f);
        }
    }
}

TEST(Matmul, IdentityIsExactBothSides) {
    Rng rng(11);
    Tensor a({6, 6});
    for (float& v : a.data) v = rng.next_float() * 10.0f - 5.0f;
    Tensor eye({6, 6});
    for (int64_t i = 0; i < 6; ++i) eye(i, i) = 1.0f;
    const Tensor left = matmul(eye, a);
    const Tensor right = matmul(a, eye);
    EXPECT_EQ(left.data, a.data);
    EXPECT_EQ(right.data, a.data);
}
