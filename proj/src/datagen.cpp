#include "adlab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "adlab/errors.hpp"
#include "adlab/network.hpp"
#include "adlab/random.hpp"

namespace adlab {

void SyntheticConfig::validate() const {
    if (d < 3) throw ConfigError("data.d must be >= 3, got " + std::to_string(d));
    if (N < 1) throw ConfigError("data.N must be >= 1, got " + std::to_string(N));
    if (P < 2) throw ConfigError("data.P must be >= 2, got " + std::to_string(P));
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("data.alpha must be positive");
    if (!(sigma_n > 0.0) || !std::isfinite(sigma_n)) throw ConfigError("data.sigma_n must be positive");
    if (!(p_un >= 0.0 && p_un <= 1.0)) throw ConfigError("data.p_un must lie in [0, 1]");
}

int SyntheticConfig::unlearnable_count() const {
    return static_cast<int>(std::floor(p_un * N + 0.5));
}

namespace {

// Noise patch: d Gaussian draws, then the feature coordinates are zeroed.
void fill_noise(Eigen::MatrixXd& patches, int p, double sigma_n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Eigen::Index d = patches.cols();
    for (Eigen::Index k = 0; k < d; ++k) patches(p, k) = sigma_n * gauss(rng);
    patches(p, 0) = 0.0;
    patches(p, d - 1) = 0.0;
}

Sample draw_sample(const SyntheticConfig& c, bool learnable, std::mt19937_64& rng) {
    Sample s;
    s.learnable = learnable;
    s.label = (rng() & 1ULL) ? 1 : -1;
    s.signal_index = std::uniform_int_distribution<int>(0, c.P - 1)(rng);
    s.patches = Eigen::MatrixXd::Zero(c.P, c.d);
    for (int p = 0; p < c.P; ++p) {
        if (p == s.signal_index) continue;
        fill_noise(s.patches, p, c.sigma_n, rng);
    }
    const int dir = learnable ? 0 : c.d - 1;
    s.patches(s.signal_index, dir) = c.alpha * s.label;
    return s;
}

}  // namespace

Dataset generate_dataset(const SyntheticConfig& config) {
    config.validate();
    std::mt19937_64 rng(derive_seed(config.seed, streams::kDataset));

    std::vector<int> order(config.N);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> unlearnable(config.N, false);
    const int n_un = config.unlearnable_count();
    for (int k = 0; k < n_un; ++k) unlearnable[order[k]] = true;

    Dataset ds;
    ds.config = config;
    ds.samples.reserve(config.N);
    for (int i = 0; i < config.N; ++i) {
        ds.samples.push_back(draw_sample(config, !unlearnable[i], rng));
        (unlearnable[i] ? ds.unlearnable_indices : ds.learnable_indices).push_back(i);
    }
    return ds;
}

std::vector<Sample> sample_test_learnable(const SyntheticConfig& config, int count,
                                          std::uint64_t seed) {
    config.validate();
    if (count < 1) throw ConfigError("test sample count must be >= 1");
    std::mt19937_64 rng(derive_seed(seed, streams::kTestSet));
    std::vector<Sample> out;
    out.reserve(count);
    for (int k = 0; k < count; ++k) out.push_back(draw_sample(config, true, rng));
    return out;
}

Eigen::MatrixXd stack_patches(const std::vector<Sample>& samples) {
    if (samples.empty()) return {};
    const Eigen::Index P = samples.front().patches.rows();
    const Eigen::Index d = samples.front().patches.cols();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()) * P, d);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].patches.rows() != P || samples[i].patches.cols() != d)
            throw ShapeError("stack_patches: samples disagree in shape");
        X.middleRows(static_cast<Eigen::Index>(i) * P, P) = samples[i].patches;
    }
    return X;
}

bool EventEReport::all_pass() const {
    return std::all_of(properties.begin(), properties.end(),
                       [](const EventProperty& p) { return p.pass; });
}

EventEReport check_event_E(const Dataset& dataset, const StudentWeights& init_weights,
                           double sigma_0, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    if (!(sigma_0 > 0.0)) throw ConfigError("sigma_0 must be positive");
    const auto& c = dataset.config;
    if (init_weights.d() != c.d)
        throw ShapeError("check_event_E: weights have d=" + std::to_string(init_weights.d()) +
                         ", dataset has d=" + std::to_string(c.d));
    for (const auto& s : dataset.samples)
        if (s.dim() != c.d || s.num_patches() != c.P)
            throw ShapeError("check_event_E: sample shape disagrees with the dataset config");

    const double inf = std::numeric_limits<double>::infinity();
    const double N = c.N, P = c.P, d = c.d, sn = c.sigma_n;
    const double m = init_weights.m();
    const auto& W = init_weights.w;

    // Noise patches and their labels.
    std::vector<int> rows;
    std::vector<double> labels;
    const Eigen::MatrixXd X = stack_patches(dataset.samples);
    for (int i = 0; i < dataset.size(); ++i)
        for (int j = 0; j < c.P; ++j)
            if (j != dataset.samples[i].signal_index) {
                rows.push_back(i * c.P + j);
                labels.push_back(dataset.samples[i].label);
            }
    const Eigen::Index n_noise = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd Xn(n_noise, c.d);
    for (Eigen::Index k = 0; k < n_noise; ++k) Xn.row(k) = X.row(rows[k]);

    auto make = [&](const char* name, const char* quantity, double lo, double hi, double mn,
                    double mx) {
        EventProperty p;
        p.name = name;
        p.quantity = quantity;
        p.lower = lo;
        p.upper = hi;
        p.measured_min = mn;
        p.measured_max = mx;
        p.pass = (mn >= lo) && (mx <= hi);
        return p;
    };

    EventEReport rep;
    rep.delta = delta;

    const Eigen::VectorXd sq = Xn.rowwise().squaredNorm();
    const double sq_min = n_noise ? sq.minCoeff() : 0.0, sq_max = n_noise ? sq.maxCoeff() : 0.0;
    rep.properties[0] = make("P1", "||x_ij||_2^2", 0.5 * sn * sn * d, 1.5 * sn * sn * d,
                             n_noise ? sq_min : 0.5 * sn * sn * d, n_noise ? sq_max : 0.0);

    double ip_max = 0.0;
    if (n_noise > 1) {
        Eigen::MatrixXd G = Xn * Xn.transpose();
        G.diagonal().setZero();
        ip_max = G.cwiseAbs().maxCoeff();
    }
    rep.properties[1] = make("P2", "|<x_ij, x_kq>|", -inf,
                             2.0 * sn * sn * std::sqrt(d * std::log(16.0 * N * N * P * P / delta)),
                             0.0, ip_max);

    const double linf = n_noise ? Xn.cwiseAbs().maxCoeff() : 0.0;
    rep.properties[2] = make("P3", "||x_ij||_inf", -inf,
                             sn * std::sqrt(2.0 * std::log(16.0 * d * N * P / delta)), 0.0, linf);

    const double wnorm = W.rowwise().norm().maxCoeff();
    rep.properties[3] = make("P4", "||w_r^(0)||_2", -inf, 2.0 * sigma_0 * std::sqrt(d), 0.0, wnorm);

    const double e1_cap = sigma_0 * std::sqrt(2.0 * std::log(16.0 * m / delta));
    rep.properties[4] = make("P5", "|<w_r^(0), e_1>|", -inf, e1_cap, 0.0, W.col(0).cwiseAbs().maxCoeff());

    const double ip_cap = 2.0 * sigma_0 * sn * std::sqrt(d * std::log(16.0 * N * m * P / delta));
    Eigen::MatrixXd Z = Xn * W.transpose();  // n_noise x m
    rep.properties[5] = make("P6", "|<w_r^(0), x_ij>|", -inf, ip_cap, 0.0,
                             n_noise ? Z.cwiseAbs().maxCoeff() : 0.0);

    rep.properties[6] = make("P7", "max_r <w_r^(0), e_1>", 0.5 * sigma_0, e1_cap,
                             W.col(0).maxCoeff(), W.col(0).maxCoeff());

    double p8_min = inf, p8_max = -inf;
    for (Eigen::Index k = 0; k < n_noise; ++k) {
        const double best = (labels[k] * Z.row(k)).maxCoeff();
        p8_min = std::min(p8_min, best);
        p8_max = std::max(p8_max, best);
    }
    if (n_noise == 0) p8_min = p8_max = 0.25 * sigma_0 * sn * std::sqrt(d);
    rep.properties[7] = make("P8", "max_r y_i <w_r^(0), x_ij>", 0.25 * sigma_0 * sn * std::sqrt(d),
                             ip_cap, p8_min, p8_max);
    return rep;
}

}  // namespace adlab
