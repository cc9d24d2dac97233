#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adlab/errors.hpp"
#include "adlab/network.hpp"

using namespace adlab;

namespace {

double phi(double z) { return z > 0.0 ? z * z * z : 0.0; }

// Direct evaluation of sum_r sum_p phi(<w,x>) - phi(-<w,x>) with explicit loops.
double naive_forward(const Eigen::MatrixXd& W, const Eigen::MatrixXd& X) {
    double f = 0.0;
    for (int r = 0; r < W.rows(); ++r)
        for (int p = 0; p < X.rows(); ++p) {
            double z = 0.0;
            for (int k = 0; k < W.cols(); ++k) z += W(r, k) * X(p, k);
            f += phi(z) - phi(-z);
        }
    return f;
}

Sample make_sample(const Eigen::MatrixXd& X) {
    Sample s;
    s.patches = X;
    return s;
}

}  // namespace

TEST(Network, InitShapeAndOrthogonality) {
    const StudentWeights w = init_weights(80, 100, 0.01, 0);
    EXPECT_EQ(w.m(), 80);
    EXPECT_EQ(w.d(), 100);
    EXPECT_EQ(w.sigma_0, 0.01);
    EXPECT_TRUE(w.w.col(99).isZero(0.0));
    EXPECT_TRUE(w.w.allFinite());
}

TEST(Network, InitScalesLinearly) {
    const StudentWeights a = init_weights(5, 7, 0.01, 3);
    const StudentWeights b = init_weights(5, 7, 0.1, 3);
    for (int r = 0; r < 5; ++r)
        for (int k = 0; k < 7; ++k) EXPECT_DOUBLE_EQ(b.w(r, k), 10.0 * a.w(r, k));
}

TEST(Network, InitVarianceMonteCarlo) {
    const StudentWeights w = init_weights(10000, 101, 0.01, 9);  // 10^6 free entries
    const Eigen::MatrixXd free = w.w.leftCols(100);
    const double mean = free.mean();
    const double var = (free.array() - mean).square().sum() / static_cast<double>(free.size() - 1);
    EXPECT_NEAR(var, 1e-4, 0.01 * 1e-4);
}

TEST(Network, InitErrors) {
    EXPECT_THROW(init_weights(4, 10, 0.0, 0), ConfigError);
    EXPECT_THROW(init_weights(4, 10, -1.0, 0), ConfigError);
    EXPECT_THROW(init_weights(0, 10, 0.01, 0), ConfigError);
    EXPECT_THROW(init_weights(4, 2, 0.01, 0), ConfigError);
}

TEST(Network, ForwardHandCases) {
    StudentWeights w;
    w.w = Eigen::MatrixXd::Zero(1, 4);
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(1, 4);
    X(0, 0) = 5.0;
    EXPECT_EQ(forward(w, make_sample(X)), 0.0);
    w.w(0, 0) = 1.0;
    EXPECT_EQ(forward(w, make_sample(X)), 125.0);
}

TEST(Network, ForwardMatchesNaiveEvaluation) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::MatrixXd W(3, 5), X(2, 5);
        for (int k = 0; k < W.size(); ++k) W.data()[k] = g(rng);
        for (int k = 0; k < X.size(); ++k) X.data()[k] = g(rng);
        StudentWeights w;
        w.w = W;
        const double ref = naive_forward(W, X);
        EXPECT_NEAR(forward(w, make_sample(X)), ref, 1e-12 * std::max(1.0, std::abs(ref)));
    }
}

TEST(Network, OddSymmetry) {
    const StudentWeights w = init_weights(4, 6, 1.0, 2);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    Eigen::MatrixXd X(3, 6);
    for (int k = 0; k < X.size(); ++k) X.data()[k] = g(rng);
    EXPECT_DOUBLE_EQ(forward(w, Eigen::MatrixXd(-X)), -forward(w, X));
}

TEST(Network, GradientHandCases) {
    StudentWeights w;
    w.w = Eigen::MatrixXd::Zero(1, 4);
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(1, 4);
    X(0, 0) = 5.0;
    EXPECT_TRUE(logit_gradient(w, make_sample(X)).per_filter.isZero(0.0));
    w.w(0, 0) = 1.0;
    Eigen::RowVectorXd expect = Eigen::RowVectorXd::Zero(4);
    expect(0) = 375.0;  // 3 * <w,x>^2 * x_1 = 3 * 25 * 5
    EXPECT_EQ(logit_gradient(w, make_sample(X)).per_filter.row(0), expect);
}

TEST(Network, GradientMatchesNaiveSum) {
    const StudentWeights w = init_weights(3, 5, 1.0, 4);
    Eigen::MatrixXd X = init_weights(4, 5, 1.0, 5).w;
    X.col(4).setConstant(0.3);
    const auto g = logit_gradient(w, make_sample(X)).per_filter;
    for (int r = 0; r < 3; ++r) {
        Eigen::RowVectorXd ref = Eigen::RowVectorXd::Zero(5);
        for (int p = 0; p < 4; ++p) {
            const double z = w.w.row(r).dot(X.row(p));
            ref += 3.0 * z * z * X.row(p);
        }
        EXPECT_LT((g.row(r) - ref).norm(), 1e-12 * ref.norm());
    }
}

TEST(Network, InputGradientMatchesFiniteDifference) {
    const StudentWeights w = init_weights(3, 6, 1.0, 6);
    Eigen::MatrixXd X = init_weights(2, 6, 1.0, 7).w;
    const Eigen::MatrixXd G = input_gradient(w, X);
    const double h = 1e-5;
    for (int p = 0; p < 2; ++p)
        for (int k = 0; k < 6; ++k) {
            Eigen::MatrixXd Xp = X, Xm = X;
            Xp(p, k) += h;
            Xm(p, k) -= h;
            const double fd = (forward(w, Xp) - forward(w, Xm)) / (2 * h);
            EXPECT_NEAR(G(p, k), fd, 1e-6 * std::max(1.0, std::abs(fd)));
        }
}

TEST(Network, ShapeMismatch) {
    const StudentWeights w = init_weights(2, 5, 0.01, 0);
    EXPECT_THROW(forward(w, Eigen::MatrixXd::Zero(2, 6)), ShapeError);
    EXPECT_THROW(logit_gradient(w, make_sample(Eigen::MatrixXd::Zero(2, 4))), ShapeError);
    EXPECT_THROW(input_gradient(w, Eigen::MatrixXd::Zero(3, 7)), ShapeError);
}

TEST(Network, ProjectionSemantics) {
    StudentWeights w = init_weights(4, 6, 1.0, 8);
    const StudentWeights same = project_orthogonal_to_v(w);
    EXPECT_EQ(same.w, w.w);
    w.w.col(5).setOnes();
    const StudentWeights p = project_orthogonal_to_v(w);
    EXPECT_TRUE(p.w.col(5).isZero(0.0));
    EXPECT_EQ(p.w.leftCols(5), w.w.leftCols(5));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        StudentWeights r;
        r.w.resize(3, 7);
        for (int k = 0; k < r.w.size(); ++k) r.w.data()[k] = g(rng);
        const auto once = project_orthogonal_to_v(r);
        EXPECT_EQ(project_orthogonal_to_v(once).w, once.w);
    }
}
