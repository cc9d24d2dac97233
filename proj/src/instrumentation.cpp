#include "adlab/instrumentation.hpp"

#include <cmath>
#include <limits>

#include "adlab/errors.hpp"

namespace adlab {

NoiseCoefficients NoiseCoefficients::zeros(int N, int P, int m, bool is_signed) {
    NoiseCoefficients c;
    c.N = N;
    c.P = P;
    c.m = m;
    c.is_signed = is_signed;
    c.rho = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N) * P, m);
    return c;
}

namespace {

void check_coeff_shape(const NoiseCoefficients& c, const Dataset& ds, int m, const char* op) {
    if (c.N != ds.config.N || c.P != ds.config.P || c.m != m ||
        c.rho.rows() != static_cast<Eigen::Index>(c.N) * c.P || c.rho.cols() != m)
        throw ShapeError(std::string(op) + ": coefficient tensor shape does not match dataset/weights");
}

}  // namespace

void update_noise_coefficients_inplace(NoiseCoefficients& coeffs, const Eigen::MatrixXd& responses,
                                       const std::vector<double>& per_sample_factor,
                                       const Dataset& dataset, double eta) {
    check_coeff_shape(coeffs, dataset, static_cast<int>(responses.cols()), "update_noise_coefficients");
    if (static_cast<int>(per_sample_factor.size()) != dataset.size() ||
        responses.rows() != coeffs.rho.rows())
        throw ShapeError("update_noise_coefficients: factor/response count mismatch");
    const double scale = 3.0 * eta / dataset.config.N;
    const int P = dataset.config.P;
    for (int i = 0; i < dataset.size(); ++i) {
        const double g = scale * per_sample_factor[i];
        for (int j = 0; j < P; ++j) {
            if (j == dataset.samples[i].signal_index) continue;
            const Eigen::Index row = static_cast<Eigen::Index>(i) * P + j;
            coeffs.rho.row(row).array() += g * responses.row(row).array().square();
        }
    }
}

NoiseCoefficients update_noise_coefficients(const NoiseCoefficients& coeffs,
                                            const StudentWeights& weights_before,
                                            const std::vector<double>& per_sample_factor,
                                            const Dataset& dataset, double eta) {
    if (weights_before.d() != dataset.config.d)
        throw ShapeError("update_noise_coefficients: weights/dataset dimension mismatch");
    NoiseCoefficients out = coeffs;
    const Eigen::MatrixXd z = stack_patches(dataset.samples) * weights_before.w.transpose();
    update_noise_coefficients_inplace(out, z, per_sample_factor, dataset, eta);
    return out;
}

Eigen::MatrixXd shift_offsets(const StudentWeights& weights_init, const Dataset& dataset) {
    const int P = dataset.config.P;
    const Eigen::MatrixXd X = stack_patches(dataset.samples);
    Eigen::MatrixXd off = X * weights_init.w.transpose();
    for (int i = 0; i < dataset.size(); ++i)
        for (int j = 0; j < P; ++j) {
            const Eigen::Index row = static_cast<Eigen::Index>(i) * P + j;
            if (j == dataset.samples[i].signal_index) {
                off.row(row).setZero();
            } else {
                off.row(row) *= dataset.samples[i].label / X.row(row).squaredNorm();
            }
        }
    return off;
}

ShiftedCoefficients shifted_coefficients(const NoiseCoefficients& coeffs,
                                         const StudentWeights& weights_init,
                                         const Dataset& dataset) {
    check_coeff_shape(coeffs, dataset, weights_init.m(), "shifted_coefficients");
    return {coeffs.rho + shift_offsets(weights_init, dataset)};
}

std::optional<double> rho_hat_max(const Eigen::MatrixXd& rho_hat, const Dataset& dataset) {
    if (dataset.unlearnable_indices.empty()) return std::nullopt;
    const int P = dataset.config.P;
    double best = -std::numeric_limits<double>::infinity();
    for (int i : dataset.unlearnable_indices)
        for (int j = 0; j < P; ++j)
            if (j != dataset.samples[i].signal_index)
                best = std::max(best, rho_hat.row(static_cast<Eigen::Index>(i) * P + j).maxCoeff());
    return best;
}

DecompositionCheck verify_decomposition(const NoiseCoefficients& coeffs,
                                        const StudentWeights& weights_now,
                                        const StudentWeights& weights_init,
                                        const Dataset& dataset) {
    check_coeff_shape(coeffs, dataset, weights_now.m(), "verify_decomposition");
    if (weights_init.m() != weights_now.m() || weights_init.d() != weights_now.d())
        throw ShapeError("verify_decomposition: weight shapes differ");

    const int P = dataset.config.P;
    std::vector<Eigen::Index> rows;
    std::vector<double> labels;
    for (int i = 0; i < dataset.size(); ++i)
        for (int j = 0; j < P; ++j)
            if (j != dataset.samples[i].signal_index) {
                rows.push_back(static_cast<Eigen::Index>(i) * P + j);
                labels.push_back(dataset.samples[i].label);
            }
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const Eigen::MatrixXd X = stack_patches(dataset.samples);
    Eigen::MatrixXd Xn(n, X.cols());
    Eigen::MatrixXd signed_rho(n, coeffs.m);
    for (Eigen::Index k = 0; k < n; ++k) {
        Xn.row(k) = X.row(rows[k]);
        signed_rho.row(k) = labels[k] * coeffs.rho.row(rows[k]);
    }
    const Eigen::MatrixXd gram = Xn * Xn.transpose();
    const Eigen::MatrixXd now = Xn * weights_now.w.transpose();
    const Eigen::MatrixXd init = Xn * weights_init.w.transpose();
    const Eigen::MatrixXd residual = now - init - gram * signed_rho;

    DecompositionCheck out;
    out.max_abs_residual = n ? residual.cwiseAbs().maxCoeff() : 0.0;
    out.max_abs_response = n ? now.cwiseAbs().maxCoeff() : 0.0;
    return out;
}

HittingTimes detect_hitting_times(const HittingTrace& trace, double C0, double C1,
                                  const SyntheticConfig& config, int m) {
    HittingTimes h;
    h.C0 = C0;
    h.C1 = C1;
    h.signal_cutoff = C0 / (config.alpha * std::cbrt(static_cast<double>(m)));
    h.noise_cutoff = C1 / (std::cbrt(static_cast<double>(m) * config.P) * config.sigma_n *
                           config.sigma_n * config.d);
    for (std::size_t t = 0; t < trace.max_signal.size(); ++t)
        if (trace.max_signal[t] > h.signal_cutoff) {
            h.T0 = static_cast<int>(t);
            break;
        }
    for (std::size_t t = 0; t < trace.rho_hat_max.size(); ++t)
        if (trace.rho_hat_max[t] && *trace.rho_hat_max[t] > h.noise_cutoff) {
            h.T1 = static_cast<int>(t);
            break;
        }
    return h;
}

NoiseResponse max_unlearnable_noise_response(const StudentWeights& weights, const Dataset& dataset) {
    if (dataset.unlearnable_indices.empty())
        throw DomainError("max_unlearnable_noise_response: the unlearnable set is empty");
    if (weights.d() != dataset.config.d) throw ShapeError("max_unlearnable_noise_response: dimension mismatch");
    NoiseResponse best;
    best.value = -std::numeric_limits<double>::infinity();
    for (int i : dataset.unlearnable_indices) {
        const Sample& s = dataset.samples[i];
        const Eigen::MatrixXd z = s.label * (s.patches * weights.w.transpose());
        for (int j = 0; j < s.num_patches(); ++j) {
            if (j == s.signal_index) continue;
            Eigen::Index r;
            const double v = z.row(j).maxCoeff(&r);
            if (v > best.value) best = {v, i, j, static_cast<int>(r)};
        }
    }
    return best;
}

double max_abs_noise_response(const StudentWeights& weights, const Dataset& dataset) {
    if (weights.d() != dataset.config.d) throw ShapeError("max_abs_noise_response: dimension mismatch");
    double best = 0.0;
    for (const Sample& s : dataset.samples) {
        const Eigen::MatrixXd z = s.patches * weights.w.transpose();
        for (int j = 0; j < s.num_patches(); ++j)
            if (j != s.signal_index) best = std::max(best, z.row(j).cwiseAbs().maxCoeff());
    }
    return best;
}

}  // namespace adlab
