#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "adlab/datagen.hpp"
#include "adlab/network.hpp"

namespace adlab {

// rho_{i,j,r} stored densely as an (N*P) x m matrix, row i*P + j. Rows of signal
// patches stay exactly zero.
struct NoiseCoefficients {
    int N = 0;
    int P = 0;
    int m = 0;
    bool is_signed = false;
    Eigen::MatrixXd rho;

    static NoiseCoefficients zeros(int N, int P, int m, bool is_signed);
    double at(int i, int j, int r) const { return rho(i * P + j, r); }
};

struct ShiftedCoefficients {
    Eigen::MatrixXd rho_hat;  // same layout as NoiseCoefficients::rho
};

// Increments each noise entry by (3 eta / N) * factor_i * <w_r, x_{i,j}>^2 using the
// pre-update weights.
NoiseCoefficients update_noise_coefficients(const NoiseCoefficients& coeffs,
                                            const StudentWeights& weights_before,
                                            const std::vector<double>& per_sample_factor,
                                            const Dataset& dataset, double eta);

// Same update given precomputed responses Z = stack_patches(dataset) * W^T.
void update_noise_coefficients_inplace(NoiseCoefficients& coeffs, const Eigen::MatrixXd& responses,
                                       const std::vector<double>& per_sample_factor,
                                       const Dataset& dataset, double eta);

// Time-constant part of rho_hat: y_i <w_r^(0), x_{i,j}> / ||x_{i,j}||^2 (zero on signal rows).
Eigen::MatrixXd shift_offsets(const StudentWeights& weights_init, const Dataset& dataset);
ShiftedCoefficients shifted_coefficients(const NoiseCoefficients& coeffs,
                                         const StudentWeights& weights_init,
                                         const Dataset& dataset);
// Max of rho_hat over unlearnable noise patches; nullopt when there are none.
std::optional<double> rho_hat_max(const Eigen::MatrixXd& rho_hat, const Dataset& dataset);

struct DecompositionCheck {
    double max_abs_residual = 0.0;
    double max_abs_response = 0.0;  // max |<w_r^(t), x_{i,j}>| over noise patches

    double relative() const {
        return max_abs_response > 0.0 ? max_abs_residual / max_abs_response : max_abs_residual;
    }
};

// Checks <w^(t),x_ij> = <w^(0),x_ij> + sum_{k,q} y_k rho_kqr <x_kq, x_ij> on all noise
// patches (the diagonal term of the sum is y_i rho_ijr ||x_ij||^2).
DecompositionCheck verify_decomposition(const NoiseCoefficients& coeffs,
                                        const StudentWeights& weights_now,
                                        const StudentWeights& weights_init,
                                        const Dataset& dataset);

struct HittingTrace {
    std::vector<double> max_signal;               // max_r w_{r,1} at iteration t
    std::vector<std::optional<double>> rho_hat_max;  // per iteration; nullopt without S_U
};

struct HittingTimes {
    std::optional<int> T0;
    std::optional<int> T1;
    double C0 = 1.0;
    double C1 = 1.0;
    double signal_cutoff = 0.0;  // C0 / (alpha m^(1/3))
    double noise_cutoff = 0.0;   // C1 / ((m P)^(1/3) sigma_n^2 d)
};

HittingTimes detect_hitting_times(const HittingTrace& trace, double C0, double C1,
                                  const SyntheticConfig& config, int m);

struct NoiseResponse {
    double value = 0.0;
    int sample = -1;
    int patch = -1;
    int filter = -1;
};

// max over i in S_U, j != s(X_i), r of y_i <w_r, x_{i,j}>. Throws DomainError if S_U is empty.
NoiseResponse max_unlearnable_noise_response(const StudentWeights& weights, const Dataset& dataset);

// max over all noise patches and filters of |<w_r, x_{i,j}>|.
double max_abs_noise_response(const StudentWeights& weights, const Dataset& dataset);

}  // namespace adlab
