#include "adlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "adlab/config.hpp"
#include "adlab/errors.hpp"
#include "adlab/serialize.hpp"
#include "adlab/teacher.hpp"

namespace adlab {

namespace {

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

void put(std::ostringstream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

std::string optional_cell(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); }

}  // namespace

std::string Method::label() const {
    switch (kind) {
        case Kind::AT: return "AT";
        case Kind::ADGood: return "AD-Good";
        case Kind::ADBad: return "AD-Bad";
        case Kind::ADCustom: return "AD-Custom:" + format_number(margin);
    }
    return "?";
}

std::string Method::slug() const {
    if (kind == Kind::ADCustom) return "AD-Custom-" + format_number(margin);
    return label();
}

Method Method::parse(const std::string& text) {
    if (text == "AT") return {Kind::AT, 0.0};
    if (text == "AD-Good") return {Kind::ADGood, 0.0};
    if (text == "AD-Bad") return {Kind::ADBad, 0.0};
    for (const std::string prefix : {"AD-Custom:", "AD-Custom-"}) {
        if (text.rfind(prefix, 0) == 0) {
            const std::string rest = text.substr(prefix.size());
            std::size_t used = 0;
            double m = 0.0;
            try {
                m = std::stod(rest, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (rest.empty() || used != rest.size() || !std::isfinite(m))
                throw ConfigError("bad margin in method '" + text + "'");
            return {Kind::ADCustom, m};
        }
    }
    throw ConfigError("unknown method '" + text + "' (expected AT, AD-Good, AD-Bad or AD-Custom:<margin>)");
}

void ExperimentBase::validate() const {
    data.validate();
    if (m < 1) throw ConfigError("network.m must be >= 1");
    if (!(sigma_0 > 0.0)) throw ConfigError("network.sigma_0 must be positive");
    if (!(event_delta > 0.0 && event_delta < 1.0)) throw ConfigError("event_check.delta must lie in (0, 1)");
    train.validate();
}

TrainConfig configure_method(TrainConfig train, const Method& method) {
    switch (method.kind) {
        case Method::Kind::AT: train.objective = Objective::AT; break;
        case Method::Kind::ADGood:
            train.objective = Objective::AD;
            train.teacher.kind = TeacherKind::Good;
            break;
        case Method::Kind::ADBad:
            train.objective = Objective::AD;
            train.teacher.kind = TeacherKind::Bad;
            break;
        case Method::Kind::ADCustom:
            train.objective = Objective::AD;
            train.teacher.kind = TeacherKind::CustomMargin;
            train.teacher.custom_unlearnable_margin = method.margin;
            break;
    }
    return train;
}

RunOutput run_single(const ExperimentBase& base, const Method& method, const TrainOptions& options) {
    base.validate();
    RunOutput out;
    out.base = base;
    out.base.train = configure_method(base.train, method);
    out.method = method;
    out.dataset = generate_dataset(base.data);
    out.init = init_weights(base.m, base.data.d, base.sigma_0, base.train.seed);
    out.test_set = sample_test_learnable(base.data, base.train.test_count, base.train.seed);
    out.result = train(out.dataset, out.init, out.base.train, out.test_set, options);
    return out;
}

std::string cell_stem(double p_un, const Method& method, std::uint64_t seed) {
    return "run_" + format_number(p_un) + "_" + method.slug() + "_" + std::to_string(seed);
}

void write_run_directory(const RunOutput& run, const std::filesystem::path& dir, const std::string& stem) {
    const EventEReport event = check_event_E(run.dataset, run.init, run.base.sigma_0, run.base.event_delta);
    const nlohmann::json meta = run_metadata(run, event, run.base.event_delta);
    const std::string comment = tool_version() + " method=" + run.method.label() +
                                " config=" + to_json(run.base).dump();
    write_text_file(dir / (stem + ".json"), meta.dump(2) + "\n");
    write_text_file(dir / (stem + ".csv"), run.result.log.to_csv(comment));
    save_weights(run.init, dir / "init_weights.bin");
    save_weights(run.result.final_weights, dir / "final_weights.bin");
    save_weights(run.result.peak.weights, dir / "peak_weights.bin");
    save_coefficients(run.result.coefficients, dir / "coefficients.bin");
    save_dataset(run.dataset, dir / "dataset.bin");
}

void SweepSpec::validate() const {
    base.validate();
    if (p_un_values.empty()) throw ConfigError("sweep.p_un_values must be non-empty");
    if (methods.empty()) throw ConfigError("sweep.methods must be non-empty");
    if (seeds.empty()) throw ConfigError("sweep.seeds must be non-empty");
    for (double p : p_un_values)
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sweep.p_un_values entries must lie in [0, 1]");
}

const char* SweepTable::csv_header() {
    return "p_un,method,seed,ok,final_robust_train_acc,final_robust_test_acc,peak_robust_train_acc,"
           "peak_robust_test_acc,peak_iteration,T0,T1,degradation,error";
}

std::string SweepTable::to_csv(const std::string& metadata_comment) const {
    std::ostringstream os;
    if (!metadata_comment.empty()) os << "# " << metadata_comment << "\n";
    os << csv_header() << "\n";
    for (const auto& c : cells) {
        put(os, c.p_un);
        os << ',' << c.method.label() << ',' << c.seed << ',' << (c.ok ? 1 : 0) << ',';
        put(os, c.final_robust_train);
        os << ',';
        put(os, c.final_robust_test);
        os << ',';
        put(os, c.peak_robust_train);
        os << ',';
        put(os, c.peak_robust_test);
        os << ',' << c.peak_iteration << ',' << optional_cell(c.T0) << ',' << optional_cell(c.T1) << ',';
        put(os, c.degradation);
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << ',' << err << "\n";
    }
    return os.str();
}

namespace {

CellResult summarize(std::shared_ptr<const RunOutput> run) {
    CellResult c;
    const auto& r = run->result;
    const auto& last = r.log.rows.back();
    c.ok = true;
    c.final_robust_train = last.robust_train_acc;
    c.final_robust_test = last.robust_test_acc;
    c.peak_robust_test = r.peak.robust_test_acc;
    c.peak_iteration = r.peak.iteration;
    for (const auto& row : r.log.rows)
        if (row.iteration == r.peak.iteration) c.peak_robust_train = row.robust_train_acc;
    c.T0 = r.hitting.T0;
    c.T1 = r.hitting.T1;
    c.degradation = c.peak_robust_test - c.final_robust_test;
    c.run = std::move(run);
    return c;
}

}  // namespace

SweepTable run_dichotomy_sweep(const SweepSpec& spec, int jobs, const std::optional<std::filesystem::path>& out_dir,
                               const std::string& metadata_comment) {
    spec.validate();
    struct Job {
        double p_un;
        Method method;
        std::uint64_t seed;
    };
    std::vector<Job> todo;
    for (double p : spec.p_un_values)
        for (const auto& m : spec.methods)
            for (auto s : spec.seeds) todo.push_back({p, m, s});

    SweepTable table;
    table.cells.resize(todo.size());
    parallel_for(static_cast<int>(todo.size()), jobs, [&](int k) {
        const Job& job = todo[k];
        ExperimentBase base = spec.base;
        base.data.p_un = job.p_un;
        base.train.seed = job.seed;
        if (spec.vary_data_seed) base.data.seed = job.seed;
        CellResult cell;
        try {
            auto run = std::make_shared<const RunOutput>(run_single(base, job.method));
            cell = summarize(run);
            if (out_dir) {
                const std::string stem = cell_stem(job.p_un, job.method, job.seed);
                const auto dir = *out_dir / stem;
                std::filesystem::create_directories(dir);
                write_run_directory(*run, dir, stem);
            }
        } catch (const DivergenceError& e) {
            cell.ok = false;
            cell.error = e.what();
        }
        cell.p_un = job.p_un;
        cell.method = job.method;
        cell.seed = job.seed;
        table.cells[k] = std::move(cell);
    });
    if (out_dir) write_text_file(*out_dir / "sweep.csv", table.to_csv(metadata_comment));
    return table;
}

IdentificationResult identify_unlearnable_set(const std::vector<StudentWeights>& checkpoints,
                                              const Dataset& dataset, const AttackConfig& attack) {
    if (checkpoints.empty()) throw DomainError("identify_unlearnable_set needs at least one checkpoint");
    attack.validate();
    const int n = dataset.size();
    const int k = static_cast<int>(checkpoints.size());
    IdentificationResult out;
    out.ensemble_size = k;
    out.correct_count.assign(n, 0);
    for (const auto& w : checkpoints) {
        const Eigen::VectorXd margins = pgd_margins(w, dataset.samples, attack);
        for (int i = 0; i < n; ++i)
            if (margins(i) > 0.0) ++out.correct_count[i];
    }
    out.histogram.assign(k + 1, 0);
    for (int i = 0; i < n; ++i) {
        const int c = out.correct_count[i];
        ++out.histogram[c];
        if (c == k)
            out.estimated_learnable.push_back(i);
        else if (c == 0)
            out.estimated_unlearnable.push_back(i);
        else
            out.unclassified.push_back(i);
    }
    return out;
}

EnsembleResult run_identification_ensemble(const ExperimentBase& base, const std::vector<Method>& methods,
                                           const std::vector<std::uint64_t>& train_seeds,
                                           const AttackConfig& attack, int jobs) {
    if (methods.empty() || train_seeds.empty()) throw ConfigError("ensemble needs methods and seeds");
    EnsembleResult out;
    out.runs.resize(methods.size() * train_seeds.size());
    parallel_for(static_cast<int>(out.runs.size()), jobs, [&](int k) {
        ExperimentBase b = base;
        b.train.seed = train_seeds[k % train_seeds.size()];
        out.runs[k] = std::make_shared<const RunOutput>(run_single(b, methods[k / train_seeds.size()]));
    });
    std::vector<StudentWeights> peaks;
    for (const auto& r : out.runs) peaks.push_back(r->result.peak.weights);
    out.identification = identify_unlearnable_set(peaks, out.runs.front()->dataset, attack);
    return out;
}

const char* EntropyStudy::csv_header() {
    return "margin,mean_entropy,final_robust_test_acc,peak_robust_test_acc,degradation,ok,error";
}

std::string EntropyStudy::to_csv(const std::string& metadata_comment) const {
    std::ostringstream os;
    if (!metadata_comment.empty()) os << "# " << metadata_comment << "\n";
    os << csv_header() << "\n";
    for (const auto& r : rows) {
        put(os, r.margin);
        os << ',';
        put(os, r.mean_entropy);
        os << ',';
        put(os, r.final_robust_test);
        os << ',';
        put(os, r.peak_robust_test);
        os << ',';
        put(os, r.degradation);
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        os << ',' << (r.ok ? 1 : 0) << ',' << err << "\n";
    }
    return os.str();
}

EntropyStudy entropy_criterion_study(const std::vector<double>& margins, const ExperimentBase& base,
                                     const AttackConfig& attack, int jobs, std::shared_ptr<const RunOutput> reference) {
    if (margins.empty()) throw ConfigError("entropy.margins must be non-empty");
    attack.validate();
    if (!reference) reference = std::make_shared<const RunOutput>(run_single(base, Method{Method::Kind::AT}));

    EntropyStudy study;
    const auto& ref = *reference;
    study.reference_peak_iteration = ref.result.peak.iteration;
    std::vector<Eigen::MatrixXd> attacked;
    const Eigen::VectorXd ref_margins = pgd_margins(ref.result.peak.weights, ref.dataset.samples, attack, &attacked);
    std::vector<Sample> adversarial;
    for (int i = 0; i < ref.dataset.size(); ++i) {
        if (ref_margins(i) > 0.0) continue;
        study.proxy_unlearnable.push_back(i);
        Sample s = ref.dataset.samples[i];
        s.patches = attacked[i];
        adversarial.push_back(std::move(s));
    }

    study.rows.resize(margins.size());
    parallel_for(static_cast<int>(margins.size()), jobs, [&](int k) {
        EntropyRow row;
        row.margin = margins[k];
        const Method method{Method::Kind::ADCustom, margins[k]};
        const TrainConfig tc = configure_method(base.train, method);
        if (!adversarial.empty()) {
            double total = 0.0;
            for (const auto& s : adversarial) total += teacher_entropy(tc.teacher, s);
            row.mean_entropy = total / static_cast<double>(adversarial.size());
        } else {
            row.mean_entropy = std::nan("");
        }
        try {
            const RunOutput run = run_single(base, method);
            row.ok = true;
            row.final_robust_test = run.result.log.rows.back().robust_test_acc;
            row.peak_robust_test = run.result.peak.robust_test_acc;
            row.degradation = row.peak_robust_test - row.final_robust_test;
        } catch (const DivergenceError& e) {
            row.error = e.what();
        }
        study.rows[k] = row;
    });

    if (adversarial.empty()) {
        study.note = "proxy unlearnable set is empty; criterion undefined";
        return study;
    }
    std::vector<double> ent, acc;
    for (const auto& r : study.rows) {
        if (!r.ok) continue;
        ent.push_back(r.mean_entropy);
        acc.push_back(r.final_robust_test);
    }
    study.spearman = ent.size() >= 2 ? spearman_correlation(ent, acc) : std::nullopt;
    if (!study.spearman) study.note = "rank correlation undefined (fewer than two finished rows or a constant column)";
    return study;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

std::optional<double> spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("spearman_correlation: length mismatch");
    if (a.size() < 2) return std::nullopt;
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
    if (count <= 0) return;
    if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    jobs = std::min(jobs, count);
    if (jobs == 1) {
        for (int k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (int k = next++; k < count; k = next++) {
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace adlab
