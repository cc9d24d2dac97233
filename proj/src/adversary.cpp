#include "adlab/adversary.hpp"

#include <cmath>
#include <random>

#include "adlab/errors.hpp"
#include "adlab/math.hpp"
#include "adlab/random.hpp"

namespace adlab {

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("attack epsilon must be >= 0");
    if (steps < 1) throw ConfigError("attack steps must be >= 1");
    if (!(step_size > 0.0) && epsilon > 0.0) throw ConfigError("attack step_size must be positive");
}

AttackConfig AttackConfig::standard(double epsilon, int steps) {
    AttackConfig c;
    c.epsilon = epsilon;
    c.steps = steps;
    c.step_size = 2.5 * epsilon / steps;
    return c;
}

int signal_direction(const Sample& sample) { return sample.learnable ? 0 : sample.dim() - 1; }

double choose_signal_offset(double margin_minus, double margin_plus, double epsilon, int label) {
    if (margin_minus < margin_plus) return -epsilon;
    if (margin_plus < margin_minus) return epsilon;
    return -epsilon * label;
}

double signal_patch_offset(const StudentWeights& weights, const Sample& sample, double epsilon) {
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    if (weights.d() != sample.dim()) throw ShapeError("perturb_signal_patch: dimension mismatch");
    const Eigen::MatrixXd z = sample.patches * weights.w.transpose();  // P x m
    double rest = 0.0;
    for (int p = 0; p < sample.num_patches(); ++p)
        if (p != sample.signal_index) rest += z.row(p).array().cube().sum();
    const Eigen::ArrayXd zs = z.row(sample.signal_index).transpose().array();
    const Eigen::ArrayXd wd = weights.w.col(signal_direction(sample)).array();
    const double y = sample.label;
    const double m_minus = y * (rest + (zs - epsilon * wd).cube().sum());
    const double m_plus = y * (rest + (zs + epsilon * wd).cube().sum());
    return choose_signal_offset(m_minus, m_plus, epsilon, sample.label);
}

Sample perturb_signal_patch(const StudentWeights& weights, const Sample& sample, double epsilon) {
    Sample out = sample;
    if (epsilon == 0.0) return out;
    const double t = signal_patch_offset(weights, sample, epsilon);
    out.patches(sample.signal_index, signal_direction(sample)) += t;
    return out;
}

namespace {

Eigen::MatrixXd signed_step(const Eigen::MatrixXd& grad, double y) {
    // sign of d l(y f)/dX = sign(-y df/dX); psi > 0 is dropped.
    return (-y * grad).array().sign().matrix();
}

}  // namespace

Sample pgd_attack(const StudentWeights& weights, const Sample& sample, const AttackConfig& config,
                  PgdTrace* trace) {
    config.validate();
    if (weights.d() != sample.dim()) throw ShapeError("pgd_attack: dimension mismatch");
    const double y = sample.label;
    const Eigen::MatrixXd& x0 = sample.patches;
    Sample best = sample;
    double best_margin = y * forward(weights, x0);
    if (trace) {
        trace->iterate_loss.clear();
        trace->best_loss.clear();
    }
    if (config.epsilon == 0.0) return best;

    const Eigen::MatrixXd lo = x0.array() - config.epsilon;
    const Eigen::MatrixXd hi = x0.array() + config.epsilon;
    Eigen::MatrixXd x = x0;
    for (int k = 0; k < config.steps; ++k) {
        x += config.step_size * signed_step(input_gradient(weights, x), y);
        x = x.cwiseMax(lo).cwiseMin(hi);
        const double margin = y * forward(weights, x);
        if (margin < best_margin) {
            best_margin = margin;
            best.patches = x;
        }
        if (trace) {
            trace->iterate_loss.push_back(logistic_loss(margin));
            trace->best_loss.push_back(logistic_loss(best_margin));
        }
    }
    return best;
}

Eigen::VectorXd pgd_margins(const StudentWeights& weights, const std::vector<Sample>& samples,
                            const AttackConfig& config, std::vector<Eigen::MatrixXd>* attacked) {
    config.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
    if (n == 0) return {};
    const Eigen::Index P = samples.front().patches.rows();
    const Eigen::MatrixXd x0 = stack_patches(samples);
    if (weights.d() != x0.cols()) throw ShapeError("pgd_margins: dimension mismatch");

    Eigen::VectorXd row_label(n * P);
    for (Eigen::Index i = 0; i < n; ++i) row_label.segment(i * P, P).setConstant(samples[i].label);

    const auto margins_of = [&](const Eigen::MatrixXd& z) {
        const Eigen::VectorXd row_sum = z.array().cube().rowwise().sum().matrix();
        Eigen::VectorXd out(n);
        for (Eigen::Index i = 0; i < n; ++i)
            out(i) = samples[i].label * row_sum.segment(i * P, P).sum();
        return out;
    };

    Eigen::MatrixXd z = x0 * weights.w.transpose();
    Eigen::VectorXd best = margins_of(z);
    Eigen::MatrixXd best_x;
    if (attacked) best_x = x0;
    if (config.epsilon > 0.0) {
        const Eigen::MatrixXd lo = x0.array() - config.epsilon;
        const Eigen::MatrixXd hi = x0.array() + config.epsilon;
        Eigen::MatrixXd x = x0;
        for (int k = 0; k < config.steps; ++k) {
            const Eigen::MatrixXd grad = (3.0 * z.array().square()).matrix() * weights.w;
            const Eigen::MatrixXd step =
                (-(row_label.asDiagonal() * grad)).array().sign().matrix();
            x += config.step_size * step;
            x = x.cwiseMax(lo).cwiseMin(hi);
            z.noalias() = x * weights.w.transpose();
            const Eigen::VectorXd margin = margins_of(z);
            for (Eigen::Index i = 0; i < n; ++i)
                if (margin(i) < best(i)) {
                    best(i) = margin(i);
                    if (attacked) best_x.middleRows(i * P, P) = x.middleRows(i * P, P);
                }
        }
    }
    if (attacked) {
        attacked->clear();
        for (Eigen::Index i = 0; i < n; ++i) attacked->push_back(best_x.middleRows(i * P, P));
    }
    return best;
}

Sample memorized_patch_attack(const StudentWeights& weights, const Eigen::VectorXd& vulnerable_patch,
                              int vulnerable_label, const Sample& test_sample, double epsilon,
                              double delta, const SyntheticConfig& dims) {
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    if (vulnerable_patch.size() != test_sample.dim() || weights.d() != test_sample.dim())
        throw ShapeError("memorized_patch_attack: dimension mismatch");
    const double cap = dims.sigma_n * std::sqrt(2.0 * std::log(16.0 * dims.d * dims.N * dims.P / delta));
    const double linf = vulnerable_patch.cwiseAbs().maxCoeff();
    if (linf > cap)
        throw BudgetError(linf, cap,
                          "memorized_patch_attack: ||x_vuln||_inf = " + std::to_string(linf) +
                              " exceeds " + std::to_string(cap) + "; the perturbation would leave the budget");
    const double scale = epsilon / cap;
    Sample out = test_sample;
    const double sgn = -static_cast<double>(test_sample.label) * vulnerable_label;
    for (int p = 0; p < out.num_patches(); ++p)
        if (p != out.signal_index) out.patches.row(p) += (sgn * scale) * vulnerable_patch.transpose();
    return out;
}

Sample random_sign_attack(const Sample& sample, double epsilon, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, streams::kRandomSign));
    Sample out = sample;
    for (int p = 0; p < out.num_patches(); ++p) {
        if (p == out.signal_index) continue;
        for (int k = 0; k < out.dim(); ++k) out.patches(p, k) += (rng() & 1ULL) ? epsilon : -epsilon;
    }
    return out;
}

}  // namespace adlab
