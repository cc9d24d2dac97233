#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "adlab/datagen.hpp"

namespace adlab {

// Filters of the two-layer cubic student, one per row. The last column is the
// coordinate along v and is held at zero by every operation that exposes weights.
struct StudentWeights {
    Eigen::MatrixXd w;  // m x d
    double sigma_0 = 0.0;

    int m() const { return static_cast<int>(w.rows()); }
    int d() const { return static_cast<int>(w.cols()); }
};

struct LogitGradient {
    Eigen::MatrixXd per_filter;  // m x d, row r = df/dw_r
};

StudentWeights init_weights(int m, int d, double sigma_0, std::uint64_t seed);

// f_W(X) = sum_r sum_p [phi(<w_r,x_p>) - phi(-<w_r,x_p>)] with phi(z) = max(0,z)^3,
// evaluated as sum of cubes.
double forward(const StudentWeights& weights, const Sample& sample);
double forward(const StudentWeights& weights, const Eigen::MatrixXd& patches);

LogitGradient logit_gradient(const StudentWeights& weights, const Sample& sample);

// df/dX, P x d: row p = sum_r 3 <w_r,x_p>^2 w_r.
Eigen::MatrixXd input_gradient(const StudentWeights& weights, const Eigen::MatrixXd& patches);

StudentWeights project_orthogonal_to_v(StudentWeights weights);
void project_orthogonal_to_v_inplace(Eigen::MatrixXd& w);

}  // namespace adlab
