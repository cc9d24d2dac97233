#include "adlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "adlab/errors.hpp"
#include "adlab/math.hpp"

namespace adlab {

std::string to_string(Objective objective) { return objective == Objective::AT ? "AT" : "AD"; }

Objective objective_from_string(const std::string& name) {
    if (name == "AT") return Objective::AT;
    if (name == "AD") return Objective::AD;
    throw ConfigError("unknown objective '" + name + "' (expected AT or AD)");
}

void TrainConfig::validate() const {
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("train.eta must be >= 0");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("train.epsilon must be >= 0");
    if (T < 1) throw ConfigError("train.T must be >= 1");
    if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
    if (test_count < 1) throw ConfigError("train.test_count must be >= 1");
    if (!(C0 > 0.0) || !(C1 > 0.0)) throw ConfigError("train.C0 and train.C1 must be positive");
    eval_attack.validate();
    teacher.validate();
}

double loss_grad_factor_at(double student_margin) { return sigmoid(-student_margin); }

// sigma(m) psi(z) - sigma(-m) psi(-z) = psi(z) - sigma(-m). The difference form avoids the
// cancellation of the two-term product, and the one-ulp nudge keeps the rounded factor no
// farther from psi(z) than the rounded teacher term.
double loss_grad_factor_ad(double student_margin, double teacher_margin) {
    const double psi = sigmoid(-student_margin);
    const double s = sigmoid(-teacher_margin);
    double g = psi - s;
    if (psi - g > s) g = std::nextafter(g, psi);
    return g;
}

double ad_loss(double student_margin, double teacher_margin) {
    return sigmoid(teacher_margin) * logistic_loss(student_margin) +
           sigmoid(-teacher_margin) * logistic_loss(-student_margin);
}

double robust_accuracy(const StudentWeights& weights, const std::vector<Sample>& samples,
                       const AttackConfig& attack) {
    if (samples.empty()) return 0.0;
    const Eigen::VectorXd margins = pgd_margins(weights, samples, attack);
    return static_cast<double>((margins.array() > 0.0).count()) / static_cast<double>(samples.size());
}

const char* MetricsLog::csv_header() {
    return "iteration,train_loss,robust_train_acc,robust_test_acc,clean_test_acc,max_signal,"
           "rho_hat_max,max_unlearnable_response,max_noise_response,t0_fired,t1_fired";
}

namespace {

void put(std::ostringstream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

}  // namespace

std::string MetricsLog::to_csv(const std::string& metadata_comment) const {
    std::ostringstream os;
    if (!metadata_comment.empty()) os << "# " << metadata_comment << "\n";
    os << csv_header() << "\n";
    for (const auto& r : rows) {
        os << r.iteration << ',';
        put(os, r.train_loss);
        os << ',';
        put(os, r.robust_train_acc);
        os << ',';
        put(os, r.robust_test_acc);
        os << ',';
        put(os, r.clean_test_acc);
        os << ',';
        put(os, r.max_signal);
        os << ',';
        if (r.rho_hat_max) put(os, *r.rho_hat_max);
        os << ',';
        if (!std::isnan(r.max_unlearnable_response)) put(os, r.max_unlearnable_response);
        os << ',';
        put(os, r.max_noise_response);
        os << ',' << (r.events & 1) << ',' << ((r.events >> 1) & 1) << "\n";
    }
    return os.str();
}

double InvariantReport::max_relative_decomposition_residual() const {
    double worst = 0.0;
    for (const auto& [t, check] : decomposition) worst = std::max(worst, check.relative());
    return worst;
}

namespace {

constexpr double kDivergenceLimit = 1e12;

struct Layout {
    int N, P, m, d;
    std::vector<Eigen::Index> signal_row;
    std::vector<int> dir;
    std::vector<double> label;
    std::vector<Eigen::Index> noise_rows;
    std::vector<Eigen::Index> unlearnable_noise_rows;
};

Layout make_layout(const Dataset& ds, int m) {
    Layout L;
    L.N = ds.config.N;
    L.P = ds.config.P;
    L.d = ds.config.d;
    L.m = m;
    for (int i = 0; i < ds.size(); ++i) {
        const Sample& s = ds.samples[i];
        L.signal_row.push_back(static_cast<Eigen::Index>(i) * L.P + s.signal_index);
        L.dir.push_back(s.learnable ? 0 : L.d - 1);
        L.label.push_back(s.label);
        for (int j = 0; j < L.P; ++j) {
            if (j == s.signal_index) continue;
            const Eigen::Index row = static_cast<Eigen::Index>(i) * L.P + j;
            L.noise_rows.push_back(row);
            if (!s.learnable) L.unlearnable_noise_rows.push_back(row);
        }
    }
    return L;
}

}  // namespace

TrainResult train(const Dataset& dataset, const StudentWeights& init, const TrainConfig& config,
                  const std::vector<Sample>& test_set, const TrainOptions& options) {
    config.validate();
    const auto& dc = dataset.config;
    if (init.d() != dc.d) throw ShapeError("train: weights and dataset disagree on d");
    if (dataset.size() != dc.N) throw ShapeError("train: dataset size differs from config.N");
    for (const auto& s : test_set)
        if (s.dim() != dc.d || s.num_patches() != dc.P) throw ShapeError("train: test sample shape mismatch");

    const Layout L = make_layout(dataset, init.m());
    const int N = L.N, T = config.T;
    const double eps = config.epsilon;
    const bool is_at = config.objective == Objective::AT;

    std::vector<double> teacher(N, 0.0);
    if (!is_at)
        for (int i = 0; i < N; ++i) teacher[i] = teacher_margin(config.teacher, dataset.samples[i]);

    const Eigen::MatrixXd X = stack_patches(dataset.samples);
    Eigen::MatrixXd Xadv = X;
    Eigen::MatrixXd W = init.w;
    project_orthogonal_to_v_inplace(W);

    TrainResult result;
    result.coefficients = NoiseCoefficients::zeros(N, L.P, L.m, !is_at);
    auto& rho = result.coefficients.rho;
    const Eigen::MatrixXd offsets = shift_offsets(StudentWeights{W, init.sigma_0}, dataset);
    const StudentWeights w_init{W, init.sigma_0};

    std::set<int> checkpoints(options.decomposition_checkpoints.begin(),
                              options.decomposition_checkpoints.end());
    if (checkpoints.empty()) checkpoints = {T / 4, T / 2, T};

    const double signal_cut = config.C0 / (dc.alpha * std::cbrt(static_cast<double>(L.m)));
    const double noise_cut =
        config.C1 / (std::cbrt(static_cast<double>(L.m) * L.P) * dc.sigma_n * dc.sigma_n * dc.d);
    std::optional<int> t0, t1;

    const bool has_unlearnable = !L.unlearnable_noise_rows.empty();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXd rho_at_last_log = rho;

    std::vector<double> offset(N), margin(N), factor(N);
    Eigen::MatrixXd Z(X.rows(), L.m), C(X.rows(), L.m);
    result.peak.robust_test_acc = -1.0;

    for (int t = 0; t <= T; ++t) {
        Z.noalias() = X * W.transpose();

        // Training adversary: endpoint evaluation on the signal patch only.
        double loss_sum = 0.0;
        for (int i = 0; i < N; ++i) {
            double rest = 0.0;
            for (int j = 0; j < L.P; ++j) {
                const Eigen::Index row = static_cast<Eigen::Index>(i) * L.P + j;
                if (row != L.signal_row[i]) rest += Z.row(row).array().cube().sum();
            }
            const Eigen::ArrayXd zs = Z.row(L.signal_row[i]).transpose().array();
            const Eigen::ArrayXd wd = W.col(L.dir[i]).array();
            const double y = L.label[i];
            const double m_minus = y * (rest + (zs - eps * wd).cube().sum());
            const double m_plus = y * (rest + (zs + eps * wd).cube().sum());
            offset[i] = choose_signal_offset(m_minus, m_plus, eps, static_cast<int>(y));
            margin[i] = offset[i] == -eps ? m_minus : m_plus;
            if (is_at) {
                factor[i] = loss_grad_factor_at(margin[i]);
                loss_sum += logistic_loss(margin[i]);
            } else {
                factor[i] = loss_grad_factor_ad(margin[i], teacher[i]);
                loss_sum += ad_loss(margin[i], teacher[i]);
            }
        }
        const double mean_loss = loss_sum / N;
        if (!std::isfinite(mean_loss) || std::abs(mean_loss) > kDivergenceLimit)
            throw DivergenceError(t, "train: loss diverged");

        // Full-resolution hitting trace.
        const double max_signal = W.col(0).maxCoeff();
        std::optional<double> rh;
        if (has_unlearnable) {
            double best = -std::numeric_limits<double>::infinity();
            for (Eigen::Index row : L.unlearnable_noise_rows)
                best = std::max(best, (rho.row(row) + offsets.row(row)).maxCoeff());
            rh = best;
        }
        result.trace.max_signal.push_back(max_signal);
        result.trace.rho_hat_max.push_back(rh);
        if (!t0 && max_signal > signal_cut) t0 = t;
        if (!t1 && rh && *rh > noise_cut) t1 = t;

        const bool log_now = (t > 0 && t % config.log_every == 0) || (t == T);
        double max_un = nan, max_abs = 0.0;
        if (log_now || t == 0)
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < L.P; ++j) {
                const Eigen::Index row = static_cast<Eigen::Index>(i) * L.P + j;
                if (row == L.signal_row[i]) continue;
                max_abs = std::max(max_abs, Z.row(row).cwiseAbs().maxCoeff());
                if (L.dir[i] != 0) {
                    const double v = (L.label[i] * Z.row(row)).maxCoeff();
                    max_un = std::isnan(max_un) ? v : std::max(max_un, v);
                }
            }
        if (t == 0) {
            result.initial_max_unlearnable_response = max_un;
            result.initial_max_noise_response = max_abs;
        }

        if (checkpoints.count(t))
            result.invariants.decomposition.emplace_back(
                t, verify_decomposition(result.coefficients, StudentWeights{W, init.sigma_0}, w_init, dataset));

        if (log_now) {
            const StudentWeights current{W, init.sigma_0};
            MetricsRow row;
            row.iteration = t;
            row.train_loss = mean_loss;
            row.robust_train_acc =
                static_cast<double>(std::count_if(margin.begin(), margin.end(), [](double v) { return v > 0.0; })) / N;
            if (!test_set.empty()) {
                row.robust_test_acc = robust_accuracy(current, test_set, config.eval_attack);
                AttackConfig clean = config.eval_attack;
                clean.epsilon = 0.0;
                row.clean_test_acc = robust_accuracy(current, test_set, clean);
            }
            row.max_signal = max_signal;
            row.rho_hat_max = rh;
            row.max_unlearnable_response = max_un;
            row.max_noise_response = max_abs;
            row.events = (t0 ? 1 : 0) | (t1 ? 2 : 0);
            if (options.record_margins) row.margins = margin;
            if (is_at && ((rho - rho_at_last_log).minCoeff() < 0.0 || rho.minCoeff() < 0.0))
                result.invariants.rho_nonnegative_nondecreasing = false;
            rho_at_last_log = rho;
            if (row.robust_test_acc > result.peak.robust_test_acc) {
                result.peak.robust_test_acc = row.robust_test_acc;
                result.peak.iteration = t;
                result.peak.weights = current;
            }
            result.log.rows.push_back(std::move(row));
        }
        if (t == T) break;

        // Gradient step: row (i,j) of C is y_i * factor_i * 3 <w_r, x~_ij>^2.
        for (int i = 0; i < N; ++i) {
            const Eigen::Index sr = L.signal_row[i];
            Xadv(sr, L.dir[i]) = X(sr, L.dir[i]) + offset[i];
        }
        for (int i = 0; i < N; ++i) {
            const double g = 3.0 * L.label[i] * factor[i];
            for (int j = 0; j < L.P; ++j) {
                const Eigen::Index row = static_cast<Eigen::Index>(i) * L.P + j;
                if (row == L.signal_row[i]) {
                    const Eigen::ArrayXd za =
                        Z.row(row).transpose().array() + offset[i] * W.col(L.dir[i]).array();
                    C.row(row) = (g * za.square()).transpose();
                } else {
                    C.row(row) = g * Z.row(row).array().square();
                }
            }
        }
        Eigen::MatrixXd delta = (config.eta / N) * (C.transpose() * Xadv);
        project_orthogonal_to_v_inplace(delta);

        // Signal-weight invariants.
        bool learnable_factors_nonneg = true;
        bool margin_reducing = true;
        double psi_sum = 0.0;
        for (int i = 0; i < N; ++i) {
            if (L.dir[i] != 0) continue;
            if (factor[i] < 0.0) learnable_factors_nonneg = false;
            if (offset[i] * L.label[i] != -eps) margin_reducing = false;
            psi_sum += factor[i];
        }
        auto& inv = result.invariants;
        if (is_at || learnable_factors_nonneg) {
            ++inv.monotonicity_checked_steps;
            if ((delta.col(0).array() < 0.0).any()) {
                inv.signal_monotone = false;
                if (!inv.first_monotonicity_violation) inv.first_monotonicity_violation = t;
            }
        }
        if (is_at && margin_reducing) {
            ++inv.bracket_checked_steps;
            const double base = 3.0 * config.eta / N * psi_sum;
            const double lo_c = base * std::pow(dc.alpha - eps, 3), hi_c = base * std::pow(dc.alpha, 3);
            for (int r = 0; r < L.m; ++r) {
                const double w2 = W(r, 0) * W(r, 0);
                const double dv = delta(r, 0);
                const double slack = 1e-9 * std::abs(hi_c * w2) + 1e-300;
                if (dv < lo_c * w2 - slack || dv > hi_c * w2 + slack) {
                    ++inv.bracket_violations;
                    if (!inv.first_bracket_violation) inv.first_bracket_violation = t;
                    break;
                }
            }
        }

        if (!(options.skip_coefficient_update_at && *options.skip_coefficient_update_at == t))
            update_noise_coefficients_inplace(result.coefficients, Z, factor, dataset, config.eta);

        W += delta;
        project_orthogonal_to_v_inplace(W);
        if (!W.allFinite() || W.cwiseAbs().maxCoeff() > kDivergenceLimit)
            throw DivergenceError(t + 1, "train: weights diverged");
        if ((W.col(L.d - 1).array() != 0.0).any()) inv.orthogonal = false;
    }

    result.final_weights = StudentWeights{W, init.sigma_0};
    result.hitting = detect_hitting_times(result.trace, config.C0, config.C1, dc, L.m);
    result.invariants.signal_cap_ok =
        result.final_weights.w.col(0).maxCoeff() <= 3.0 * std::cbrt(std::log(static_cast<double>(T))) / dc.alpha;
    return result;
}

}  // namespace adlab
