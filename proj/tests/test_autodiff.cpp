#include <gtest/gtest.h>

#include "bag/autodiff.hpp"

#include <random>

using bag::ad::Mat;
using bag::ad::Tape;
using bag::ad::Var;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

// Central finite differences of a scalar-valued tape program w.r.t. one leaf.
template <class Build>
double fd_grad(Mat& leaf_value, Eigen::Index r, Eigen::Index c, Build&& build,
               double step = 1e-6) {
    double saved = leaf_value(r, c);
    leaf_value(r, c) = saved + step;
    double up = build();
    leaf_value(r, c) = saved - step;
    double down = build();
    leaf_value(r, c) = saved;
    return (up - down) / (2.0 * step);
}

TEST(Tape, ForwardValues) {
    Tape t;
    Mat a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 5, 6, 7, 8;
    Var va = t.leaf(a), vb = t.leaf(b);
    EXPECT_TRUE(t.val(t.matmul(va, vb)).isApprox(a * b));
    EXPECT_TRUE(t.val(t.add(va, vb)).isApprox(a + b));
    EXPECT_TRUE(t.val(t.cwise_mul(va, vb)).isApprox(a.cwiseProduct(b)));
    EXPECT_TRUE(t.val(t.transpose(va)).isApprox(a.transpose()));
    EXPECT_NEAR(t.val(t.tanh_(va))(0, 1), std::tanh(2.0), 1e-12);
    EXPECT_NEAR(t.val(t.sigmoid_(va))(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(Tape, SoftmaxRowsSumToOne) {
    std::mt19937_64 rng(1);
    Tape t;
    Var a = t.leaf(random_mat(5, 7, rng) * 10.0);
    Var s = t.softmax_rows(a);
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(t.val(s).row(i).sum(), 1.0, 1e-12);
}

TEST(Tape, SoftmaxIsShiftInvariant) {
    std::mt19937_64 rng(2);
    Mat a = random_mat(3, 4, rng);
    Tape t;
    Var s1 = t.softmax_rows(t.leaf(a));
    Var s2 = t.softmax_rows(t.leaf(a.array() + 1000.0));
    EXPECT_TRUE(t.val(s1).isApprox(t.val(s2), 1e-9));
}

TEST(Tape, MaskedSoftmaxZeroesMaskedSlots) {
    Tape t;
    Mat a(4, 1);
    a << 1, 2, 3, 4;
    Var s = t.masked_softmax_col(t.leaf(a), {0, 1, 0, 1});
    EXPECT_DOUBLE_EQ(t.val(s)(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(t.val(s)(3, 0), 0.0);
    EXPECT_NEAR(t.val(s).sum(), 1.0, 1e-12);
    EXPECT_GT(t.val(s)(2, 0), t.val(s)(0, 0));
}

// A composite expression touching most ops: gradients vs finite differences.
TEST(Tape, CompositeGradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(3);
    Mat A = random_mat(3, 4, rng);
    Mat B = random_mat(4, 3, rng);
    Mat bias = random_mat(1, 3, rng);

    auto build = [&](Tape& t, Var& va, Var& vb, Var& vbias) {
        va = t.leaf(A);
        vb = t.leaf(B);
        vbias = t.leaf(bias);
        Var h = t.tanh_(t.add_rowvec(t.matmul(va, vb), vbias));
        Var g = t.sigmoid_(t.cwise_mul(h, h));
        Var s = t.softmax_rows(t.concat_cols({g, t.one_minus(h)}));
        Var m = t.rowwise_max(t.add(s, t.scale(s, 0.5)));
        Var p = t.masked_softmax_col(m, {0, 0, 0});
        Var mixed = t.matmul(t.transpose(p), g);
        Var loss = t.entry(t.matmul(mixed, t.rowwise_mean(t.transpose(vb))), 0, 0);
        return loss;
    };

    Tape t;
    Var va, vb, vbias;
    Var loss = build(t, va, vb, vbias);
    t.backward(loss);

    auto eval = [&] {
        Tape t2;
        Var a2, b2, c2;
        return t2.val(build(t2, a2, b2, c2))(0, 0);
    };

    std::uniform_int_distribution<int> ri(0, 2), rj(0, 3);
    for (int probe = 0; probe < 10; ++probe) {
        Eigen::Index r = ri(rng), c = rj(rng);
        double fd = fd_grad(A, r, c, eval);
        EXPECT_NEAR(t.grad(va)(r, c), fd, 1e-5 * std::max(1.0, std::abs(fd)));
        fd = fd_grad(B, c, r, eval);
        EXPECT_NEAR(t.grad(vb)(c, r), fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
    double fd = fd_grad(bias, 0, 1, eval);
    EXPECT_NEAR(t.grad(vbias)(0, 1), fd, 1e-5 * std::max(1.0, std::abs(fd)));
}

TEST(Tape, GatherRowsScatterAddsOnBackward) {
    Tape t;
    Mat table(3, 2);
    table << 1, 2, 3, 4, 5, 6;
    Var vt = t.leaf(table);
    Var g = t.gather_rows(vt, {2, 0, 2});
    Mat weights(1, 3);
    weights << 1, 1, 1;
    Var loss = t.entry(t.matmul(t.leaf(weights), t.rowwise_mean(g)), 0, 0);
    t.backward(loss);
    EXPECT_DOUBLE_EQ(t.grad(vt)(2, 0), 1.0);  // two gathers of row 2, halved by mean
    EXPECT_DOUBLE_EQ(t.grad(vt)(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(t.grad(vt)(1, 0), 0.0);
}

TEST(Tape, ShapeMismatchThrows) {
    Tape t;
    Var a = t.leaf(Mat::Zero(2, 3));
    Var b = t.leaf(Mat::Zero(3, 2));
    EXPECT_THROW(t.add(a, b), std::invalid_argument);
    EXPECT_THROW(t.matmul(a, a), std::invalid_argument);
    EXPECT_THROW(t.backward(a), std::invalid_argument);
}

}  // namespace
