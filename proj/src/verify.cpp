#include "adlab/verify.hpp"

#include <algorithm>
#include <sstream>

#include "adlab/config.hpp"
#include "adlab/errors.hpp"
#include "adlab/serialize.hpp"

namespace adlab {

namespace {

constexpr double kDecompositionTolerance = 1e-8;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

bool last_column_zero(const StudentWeights& w) { return w.w.cols() == 0 || w.w.col(w.d() - 1).isZero(0.0); }

int count_csv_rows(const std::string& csv) {
    std::istringstream is(csv);
    std::string line;
    int rows = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        ++rows;
    }
    return rows;
}

}  // namespace

RunDirectory load_run_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
    std::vector<std::filesystem::path> candidates;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.path().extension() == ".json" && name.rfind("run", 0) == 0) candidates.push_back(entry.path());
    }
    if (candidates.size() != 1)
        throw ConfigError("'" + dir.string() + "' must contain exactly one run*.json (found " +
                          std::to_string(candidates.size()) + ")");
    RunDirectory out;
    out.dir = dir;
    out.stem = candidates.front().stem().string();
    try {
        out.metadata = nlohmann::json::parse(read_text_file(candidates.front()));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(candidates.front().string() + ": " + e.what());
    }
    out.metrics_csv = read_text_file(dir / (out.stem + ".csv"));
    out.dataset = load_dataset(dir / "dataset.bin");
    out.init = load_weights(dir / "init_weights.bin");
    out.final_weights = load_weights(dir / "final_weights.bin");
    out.peak_weights = load_weights(dir / "peak_weights.bin");
    out.coefficients = load_coefficients(dir / "coefficients.bin");
    return out;
}

std::vector<PropertyCheck> verify_run(const RunDirectory& run) {
    std::vector<PropertyCheck> checks;
    const auto& meta = run.metadata;
    const ExperimentBase base = experiment_base_from_json(meta);
    const bool is_at = base.train.objective == Objective::AT;

    checks.push_back({"weights orthogonal to v",
                      last_column_zero(run.init) && last_column_zero(run.final_weights) &&
                          last_column_zero(run.peak_weights),
                      false, "last column of init, final and peak weights"});

    {
        const DecompositionCheck d = verify_decomposition(run.coefficients, run.final_weights, run.init, run.dataset);
        checks.push_back({"decomposition identity at T", d.relative() <= kDecompositionTolerance, false,
                          "relative residual " + fmt(d.relative())});
    }

    {
        bool signal_zero = true;
        for (int i = 0; i < run.dataset.size(); ++i)
            signal_zero = signal_zero &&
                          run.coefficients.rho.row(i * run.coefficients.P + run.dataset.samples[i].signal_index).isZero(0.0);
        checks.push_back({"signal coefficient slots zero", signal_zero, false, ""});
    }

    if (is_at) {
        const double mn = run.coefficients.rho.size() ? run.coefficients.rho.minCoeff() : 0.0;
        checks.push_back({"AT coefficients non-negative", mn >= 0.0, false, "min rho " + fmt(mn)});
    }

    const auto& inv = meta.at("invariants");
    checks.push_back({"signal weights monotone", inv.at("signal_monotone").get<bool>(), false,
                      std::to_string(inv.at("monotonicity_checked_steps").get<int>()) + " steps checked"});
    checks.push_back({"signal update bracket", inv.at("bracket_violations").get<int>() == 0, false,
                      std::to_string(inv.at("bracket_violations").get<int>()) + " violations in " +
                          std::to_string(inv.at("bracket_checked_steps").get<int>()) + " steps"});
    checks.push_back({"orthogonality during training", inv.at("orthogonal").get<bool>(), false, ""});
    if (is_at)
        checks.push_back({"AT coefficients non-decreasing", inv.at("rho_nonnegative_nondecreasing").get<bool>(),
                          false, ""});
    {
        double worst = 0.0;
        for (const auto& c : inv.at("decomposition")) worst = std::max(worst, c.at("relative_residual").get<double>());
        checks.push_back({"decomposition identity at checkpoints", worst <= kDecompositionTolerance, false,
                          "worst relative residual " + fmt(worst)});
    }
    checks.push_back({"signal weight cap", inv.at("signal_cap_ok").get<bool>(), true, "soft diagnostic"});

    const auto& summary = meta.at("summary");
    const double peak = summary.at("peak_robust_test_acc").get<double>();
    const double final = summary.at("final_robust_test_acc").get<double>();
    checks.push_back({"peak >= final robust test accuracy", peak >= final, false, fmt(peak) + " vs " + fmt(final)});

    {
        const int T = base.train.T, every = base.train.log_every;
        const int expected = T / every + (T % every != 0 ? 1 : 0);
        const int rows = count_csv_rows(run.metrics_csv);
        checks.push_back({"metrics log cadence", rows == expected, false,
                          std::to_string(rows) + " rows, expected " + std::to_string(expected)});
    }

    {
        const Dataset regenerated = generate_dataset(base.data);
        bool same = regenerated.size() == run.dataset.size();
        for (int i = 0; same && i < regenerated.size(); ++i)
            same = regenerated.samples[i].label == run.dataset.samples[i].label &&
                   regenerated.samples[i].signal_index == run.dataset.samples[i].signal_index &&
                   regenerated.samples[i].patches == run.dataset.samples[i].patches;
        checks.push_back({"dataset regenerates from its seed", same, false, ""});
    }

    {
        const auto& h = meta.at("hitting_times");
        if (is_at && base.data.unlearnable_count() > 0 && !h.at("T0").is_null() && !h.at("T1").is_null()) {
            const int t0 = h.at("T0").get<int>(), t1 = h.at("T1").get<int>();
            checks.push_back({"hitting-time ordering T0 < T1", t0 < t1, true,
                              "T0=" + std::to_string(t0) + " T1=" + std::to_string(t1)});
        }
    }
    return checks;
}

bool all_required_pass(const std::vector<PropertyCheck>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.pass || c.advisory; });
}

}  // namespace adlab
