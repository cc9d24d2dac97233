#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adlab/adversary.hpp"
#include "adlab/datagen.hpp"
#include "adlab/instrumentation.hpp"
#include "adlab/network.hpp"
#include "adlab/teacher.hpp"

namespace adlab {

enum class Objective { AT, AD };

std::string to_string(Objective objective);
Objective objective_from_string(const std::string& name);

struct TrainConfig {
    double eta = 0.01;
    double epsilon = 0.5;
    int T = 4000;
    Objective objective = Objective::AT;
    TeacherSpec teacher;  // used only by AD
    int log_every = 10;
    AttackConfig eval_attack = AttackConfig::standard(0.5, 20);
    int test_count = 100;
    std::uint64_t seed = 0;
    double C0 = 1.0;
    double C1 = 1.0;

    void validate() const;
};

struct TrainOptions {
    bool record_margins = false;
    // Iterations at which the decomposition identity is verified. Empty means {T/4, T/2, T}.
    std::vector<int> decomposition_checkpoints;
    // Fault injection for the decomposition verifier: skip the coefficient update at this step.
    std::optional<int> skip_coefficient_update_at;
};

struct MetricsRow {
    int iteration = 0;
    double train_loss = 0.0;
    double robust_train_acc = 0.0;
    double robust_test_acc = 0.0;
    double clean_test_acc = 0.0;
    double max_signal = 0.0;
    std::optional<double> rho_hat_max;
    double max_unlearnable_response = 0.0;  // NaN when S_U is empty
    double max_noise_response = 0.0;
    int events = 0;  // bit 0: T0 fired at or before this row, bit 1: T1
    std::vector<double> margins;  // optional per-sample training margins
};

struct MetricsLog {
    std::vector<MetricsRow> rows;

    static const char* csv_header();
    // One row per logged step; the first line is a `#` comment carrying metadata.
    std::string to_csv(const std::string& metadata_comment = {}) const;
};

struct Checkpoint {
    StudentWeights weights;
    int iteration = 0;
    double robust_test_acc = 0.0;
};

struct InvariantReport {
    bool signal_monotone = true;
    std::optional<int> first_monotonicity_violation;
    int monotonicity_checked_steps = 0;
    int bracket_checked_steps = 0;
    int bracket_violations = 0;
    std::optional<int> first_bracket_violation;
    bool orthogonal = true;
    bool rho_nonnegative_nondecreasing = true;  // AT only
    bool signal_cap_ok = true;  // soft flag: max w_{r,1} <= 3 log^{1/3}(T) / alpha
    std::vector<std::pair<int, DecompositionCheck>> decomposition;

    double max_relative_decomposition_residual() const;
};

struct TrainResult {
    StudentWeights final_weights;
    MetricsLog log;
    HittingTrace trace;
    HittingTimes hitting;
    Checkpoint peak;
    NoiseCoefficients coefficients;
    InvariantReport invariants;
    double initial_max_unlearnable_response = 0.0;  // NaN when S_U is empty
    double initial_max_noise_response = 0.0;
};

// psi(z) = 1 / (1 + e^z); dL_AT/df = -y psi(y f).
double loss_grad_factor_at(double student_margin);
// sigma(m_T) psi(z) - sigma(-m_T) psi(-z); dL_AD/df = -y times this.
double loss_grad_factor_ad(double student_margin, double teacher_margin);
double ad_loss(double student_margin, double teacher_margin);

// Fraction of samples with y f(PGD(X)) > 0; exact zeros count as errors.
double robust_accuracy(const StudentWeights& weights, const std::vector<Sample>& samples,
                       const AttackConfig& attack);

TrainResult train(const Dataset& dataset, const StudentWeights& init, const TrainConfig& config,
                  const std::vector<Sample>& test_set, const TrainOptions& options = {});

}  // namespace adlab
