#pragma once

#include <vector>

#include <Eigen/Dense>

#include "adlab/datagen.hpp"
#include "adlab/network.hpp"

namespace adlab {

struct AttackConfig {
    double epsilon = 0.5;
    int steps = 20;
    double step_size = 0.0625;

    void validate() const;
    // Step size 2.5 * epsilon / steps.
    static AttackConfig standard(double epsilon, int steps);
};

// Shared endpoint rule of the signal-patch attack: given the student margins at
// t = -eps and t = +eps, return the offset with the lower margin (higher loss).
// Ties return -eps * label.
double choose_signal_offset(double margin_minus, double margin_plus, double epsilon, int label);

// Offset t such that the attacked signal patch is x_s + t * e_dir.
double signal_patch_offset(const StudentWeights& weights, const Sample& sample, double epsilon);
int signal_direction(const Sample& sample);

Sample perturb_signal_patch(const StudentWeights& weights, const Sample& sample, double epsilon);

struct PgdTrace {
    std::vector<double> iterate_loss;  // loss of the raw iterate after each step
    std::vector<double> best_loss;     // best loss seen so far (clean input included)
};

// Signed-gradient ascent on l(y f(X')) inside the l-infinity box around X, keeping the
// best iterate seen.
Sample pgd_attack(const StudentWeights& weights, const Sample& sample, const AttackConfig& config,
                  PgdTrace* trace = nullptr);

// Batched PGD over stacked samples; returns the attacked margins y * f(X'). Same update
// rule as pgd_attack.
Eigen::VectorXd pgd_margins(const StudentWeights& weights, const std::vector<Sample>& samples,
                            const AttackConfig& config,
                            std::vector<Eigen::MatrixXd>* attacked = nullptr);

// Adds -y * y_vuln * eps / (sigma_n sqrt(2 ln(16 d N P / delta))) * x_vuln to every
// non-signal patch of the test sample. Throws BudgetError if ||x_vuln||_inf exceeds
// sigma_n sqrt(2 ln(16 d N P / delta)).
Sample memorized_patch_attack(const StudentWeights& weights, const Eigen::VectorXd& vulnerable_patch,
                              int vulnerable_label, const Sample& test_sample, double epsilon,
                              double delta, const SyntheticConfig& dims);

// Uniform random +-eps on every coordinate of every non-signal patch (baseline for the
// memorized-patch attack).
Sample random_sign_attack(const Sample& sample, double epsilon, std::uint64_t seed);

}  // namespace adlab
