#include "adlab/network.hpp"

#include <random>

#include "adlab/errors.hpp"
#include "adlab/random.hpp"

namespace adlab {

namespace {

void check_shapes(const StudentWeights& weights, const Eigen::MatrixXd& patches, const char* op) {
    if (weights.d() != patches.cols())
        throw ShapeError(std::string(op) + ": weights have d=" + std::to_string(weights.d()) +
                         ", sample has d=" + std::to_string(patches.cols()));
}

}  // namespace

StudentWeights init_weights(int m, int d, double sigma_0, std::uint64_t seed) {
    if (m < 1) throw ConfigError("network.m must be >= 1");
    if (d < 3) throw ConfigError("d must be >= 3");
    if (!(sigma_0 > 0.0)) throw ConfigError("network.sigma_0 must be positive");
    std::mt19937_64 rng(derive_seed(seed, streams::kInit));
    std::normal_distribution<double> gauss(0.0, 1.0);
    StudentWeights out;
    out.sigma_0 = sigma_0;
    out.w.resize(m, d);
    for (int r = 0; r < m; ++r)
        for (int k = 0; k < d; ++k) out.w(r, k) = sigma_0 * gauss(rng);
    project_orthogonal_to_v_inplace(out.w);
    return out;
}

double forward(const StudentWeights& weights, const Eigen::MatrixXd& patches) {
    check_shapes(weights, patches, "forward");
    const Eigen::MatrixXd z = patches * weights.w.transpose();  // P x m
    return z.array().cube().sum();
}

double forward(const StudentWeights& weights, const Sample& sample) {
    return forward(weights, sample.patches);
}

LogitGradient logit_gradient(const StudentWeights& weights, const Sample& sample) {
    check_shapes(weights, sample.patches, "logit_gradient");
    const Eigen::MatrixXd z = sample.patches * weights.w.transpose();  // P x m
    const Eigen::MatrixXd coef = 3.0 * z.array().square();
    return {coef.transpose() * sample.patches};
}

Eigen::MatrixXd input_gradient(const StudentWeights& weights, const Eigen::MatrixXd& patches) {
    check_shapes(weights, patches, "input_gradient");
    const Eigen::MatrixXd z = patches * weights.w.transpose();
    return (3.0 * z.array().square()).matrix() * weights.w;
}

void project_orthogonal_to_v_inplace(Eigen::MatrixXd& w) {
    if (w.cols() > 0) w.col(w.cols() - 1).setZero();
}

StudentWeights project_orthogonal_to_v(StudentWeights weights) {
    project_orthogonal_to_v_inplace(weights.w);
    return weights;
}

}  // namespace adlab
