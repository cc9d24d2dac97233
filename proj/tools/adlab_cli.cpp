// adlab: command-line front end for the feature-learning lab.
//
// Exit codes: 0 success, 1 usage, 2 validation, 3 divergence, 4 property failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adlab/config.hpp"
#include "adlab/errors.hpp"
#include "adlab/experiments.hpp"
#include "adlab/serialize.hpp"
#include "adlab/verify.hpp"

namespace fs = std::filesystem;
using namespace adlab;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kDivergence = 3, kPropertyFailure = 4 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonFlags {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    bool overwrite = false;
    std::optional<int> jobs;
    std::optional<int> verbosity;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_out = true) {
    cmd->add_option("-c,--config", f.config, "experiment config (JSON); full-scale defaults when omitted");
    cmd->add_option("--set", f.sets, "override a config value, e.g. --set data.p_un=0.1 (repeatable)");
    if (with_out) {
        cmd->add_option("-o,--out", f.out, "output directory (overrides output.dir)");
        cmd->add_flag("--overwrite", f.overwrite, "allow writing into an existing output directory");
    }
    cmd->add_option("-j,--jobs", f.jobs, "worker threads (0 = all cores)");
    cmd->add_option("-v,--verbosity", f.verbosity, "0 quiet, 1 summary, 2 detail");
}

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

ExperimentConfig resolve(const CommonFlags& f) {
    std::vector<std::string> sets = f.sets;
    if (!f.out.empty()) sets.push_back("output.dir=" + quoted(f.out));
    if (f.overwrite) sets.push_back("output.overwrite=true");
    if (f.jobs) sets.push_back("jobs=" + std::to_string(*f.jobs));
    if (f.verbosity) sets.push_back("verbosity=" + std::to_string(*f.verbosity));
    if (f.config.empty()) return parse_experiment_config("{}", "<defaults>", sets);
    return load_experiment_config(f.config, sets);
}

// Refuses to reuse an existing directory unless overwrite is set.
fs::path prepare_out_dir(const ExperimentConfig& cfg) {
    const fs::path dir = cfg.output.dir;
    if (fs::exists(dir) && !cfg.output.overwrite)
        throw UsageError("output directory '" + dir.string() + "' exists; pass --overwrite or choose another --out");
    fs::create_directories(dir);
    write_text_file(dir / "config.resolved.json",
                    nlohmann::json{{"tool_version", tool_version()}, {"config", to_json(cfg)}}.dump(2) + "\n");
    return dir;
}

std::string metadata_comment(const ExperimentConfig& cfg) {
    return tool_version() + " config=" + to_json(cfg).dump();
}

Method method_from_config(const TrainConfig& t) {
    if (t.objective == Objective::AT) return {Method::Kind::AT, 0.0};
    switch (t.teacher.kind) {
        case TeacherKind::Good: return {Method::Kind::ADGood, 0.0};
        case TeacherKind::Bad: return {Method::Kind::ADBad, 0.0};
        case TeacherKind::CustomMargin: return {Method::Kind::ADCustom, t.teacher.custom_unlearnable_margin};
    }
    return {};
}

void print_event_report(const EventEReport& rep) {
    std::printf("event E (delta=%g): %s\n", rep.delta, rep.all_pass() ? "holds" : "FAILS");
    for (const auto& p : rep.properties)
        std::printf("  %-3s %-4s %-44s [%.4g, %.4g] within [%.4g, %.4g]\n", p.name.c_str(), p.pass ? "ok" : "FAIL",
                    p.quantity.c_str(), p.measured_min, p.measured_max, p.lower, p.upper);
}

int cmd_generate(const CommonFlags& f) {
    const ExperimentConfig cfg = resolve(f);
    const fs::path dir = prepare_out_dir(cfg);
    const Dataset ds = generate_dataset(cfg.data);
    save_dataset(ds, dir / "dataset.bin");
    const StudentWeights init = init_weights(cfg.network.m, cfg.data.d, cfg.network.sigma_0, cfg.train.seed);
    const EventEReport rep = check_event_E(ds, init, cfg.network.sigma_0, cfg.event_check.delta);
    write_text_file(dir / "event_report.json", nlohmann::json{{"tool_version", tool_version()},
                                                              {"config", to_json(cfg)},
                                                              {"unlearnable_count", ds.unlearnable_indices.size()},
                                                              {"unlearnable_indices", ds.unlearnable_indices},
                                                              {"event_E", to_json(rep)}}
                                                       .dump(2) + "\n");
    if (cfg.verbosity > 0) {
        std::printf("dataset: N=%d P=%d d=%d, |S_L|=%zu |S_U|=%zu -> %s\n", cfg.data.N, cfg.data.P, cfg.data.d,
                    ds.learnable_indices.size(), ds.unlearnable_indices.size(), (dir / "dataset.bin").c_str());
        print_event_report(rep);
    }
    return kOk;
}

int cmd_train(const CommonFlags& f, const std::string& method_text) {
    const ExperimentConfig cfg = resolve(f);
    const Method method = method_text.empty() ? method_from_config(cfg.train) : Method::parse(method_text);
    const fs::path dir = prepare_out_dir(cfg);
    const RunOutput run = run_single(cfg.base(), method);
    write_run_directory(run, dir, "run");
    if (cfg.verbosity > 0) {
        const auto& r = run.result;
        const auto& last = r.log.rows.back();
        std::printf("%s  T=%d  p_un=%g  seed=%llu\n", method.label().c_str(), cfg.train.T, cfg.data.p_un,
                    static_cast<unsigned long long>(cfg.train.seed));
        std::printf("  final robust train %.3f  robust test %.3f  clean test %.3f\n", last.robust_train_acc,
                    last.robust_test_acc, last.clean_test_acc);
        std::printf("  peak robust test %.3f at t=%d\n", r.peak.robust_test_acc, r.peak.iteration);
        auto opt = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("none"); };
        std::printf("  T0=%s  T1=%s  (cutoffs %.4g, %.4g)\n", opt(r.hitting.T0).c_str(), opt(r.hitting.T1).c_str(),
                    r.hitting.signal_cutoff, r.hitting.noise_cutoff);
        std::printf("  max noise response %.4g (init %.4g)\n", last.max_noise_response, r.initial_max_noise_response);
        std::printf("  wrote %s\n", dir.c_str());
    }
    return kOk;
}

int cmd_sweep(const CommonFlags& f) {
    const ExperimentConfig cfg = resolve(f);
    const fs::path dir = prepare_out_dir(cfg);
    const SweepTable table = run_dichotomy_sweep(cfg.sweep_spec(), cfg.jobs, dir, metadata_comment(cfg));
    if (cfg.verbosity > 0) {
        std::printf("%-6s %-16s %-5s %-8s %-8s %-8s %-6s %-6s %s\n", "p_un", "method", "seed", "rob.tr", "rob.te",
                    "peak.te", "T0", "T1", "degrad");
        for (const auto& c : table.cells) {
            if (!c.ok) {
                std::printf("%-6g %-16s %-5llu FAILED: %s\n", c.p_un, c.method.label().c_str(),
                            static_cast<unsigned long long>(c.seed), c.error.c_str());
                continue;
            }
            auto opt = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("-"); };
            std::printf("%-6g %-16s %-5llu %-8.3f %-8.3f %-8.3f %-6s %-6s %.3f\n", c.p_un, c.method.label().c_str(),
                        static_cast<unsigned long long>(c.seed), c.final_robust_train, c.final_robust_test,
                        c.peak_robust_test, opt(c.T0).c_str(), opt(c.T1).c_str(), c.degradation);
        }
        std::printf("wrote %zu cells to %s\n", table.cells.size(), dir.c_str());
    }
    return kOk;
}

int cmd_identify(const CommonFlags& f, const std::vector<std::string>& run_dirs) {
    const ExperimentConfig cfg = resolve(f);
    std::vector<RunDirectory> runs;
    for (const auto& d : run_dirs) runs.push_back(load_run_directory(d));
    for (std::size_t k = 1; k < runs.size(); ++k) {
        const auto& a = runs[0].dataset;
        const auto& b = runs[k].dataset;
        bool same = a.size() == b.size();
        for (int i = 0; same && i < a.size(); ++i) same = a.samples[i].patches == b.samples[i].patches;
        if (!same) throw ConfigError("run directories were trained on different datasets: " + run_dirs[0] + ", " +
                                     run_dirs[k]);
    }
    std::vector<StudentWeights> peaks;
    for (const auto& r : runs) peaks.push_back(r.peak_weights);
    const fs::path dir = prepare_out_dir(cfg);
    const IdentificationResult res = identify_unlearnable_set(peaks, runs.front().dataset,
                                                              cfg.criterion_attack(cfg.identify.attack_steps));
    const auto& truth = runs.front().dataset.unlearnable_indices;
    int recovered = 0;
    for (int i : res.estimated_unlearnable)
        if (std::find(truth.begin(), truth.end(), i) != truth.end()) ++recovered;
    nlohmann::json out = to_json(res);
    out["tool_version"] = tool_version();
    out["config"] = to_json(cfg);
    out["run_dirs"] = run_dirs;
    out["ground_truth_unlearnable"] = truth;
    out["recovered_ground_truth"] = recovered;
    write_text_file(dir / "subsets.json", out.dump(2) + "\n");
    if (cfg.verbosity > 0) {
        std::printf("ensemble of %d: |S_L^| = %zu  |S_U^| = %zu  unclassified = %zu\n", res.ensemble_size,
                    res.estimated_learnable.size(), res.estimated_unlearnable.size(), res.unclassified.size());
        std::printf("ground-truth S_U recovered: %d / %zu\n", recovered, truth.size());
        std::printf("correct-count histogram:");
        for (std::size_t c = 0; c < res.histogram.size(); ++c) std::printf(" %zu:%d", c, res.histogram[c]);
        std::printf("\nwrote %s\n", (dir / "subsets.json").c_str());
    }
    return kOk;
}

int cmd_entropy(const CommonFlags& f) {
    const ExperimentConfig cfg = resolve(f);
    const fs::path dir = prepare_out_dir(cfg);
    const EntropyStudy s = entropy_criterion_study(cfg.entropy.margins, cfg.base(),
                                                   cfg.criterion_attack(cfg.entropy.attack_steps), cfg.jobs);
    write_text_file(dir / "entropy.csv", s.to_csv(metadata_comment(cfg)));
    nlohmann::json j = to_json(s);
    j["tool_version"] = tool_version();
    j["config"] = to_json(cfg);
    write_text_file(dir / "entropy.json", j.dump(2) + "\n");
    if (cfg.verbosity > 0) {
        std::printf("proxy |S_U| = %zu (reference AT peak at t=%d)\n", s.proxy_unlearnable.size(),
                    s.reference_peak_iteration);
        std::printf("%-8s %-12s %-10s %-10s\n", "margin", "entropy", "final.te", "peak.te");
        for (const auto& r : s.rows)
            std::printf("%-8g %-12.6f %-10.3f %-10.3f%s\n", r.margin, r.mean_entropy, r.final_robust_test,
                        r.peak_robust_test, r.ok ? "" : "  FAILED");
        if (s.spearman)
            std::printf("Spearman(entropy, final robust test acc) = %+.4f\n", *s.spearman);
        else
            std::printf("Spearman undefined: %s\n", s.note.c_str());
    }
    return kOk;
}

int cmd_verify(const std::string& run_dir) {
    const RunDirectory run = load_run_directory(run_dir);
    const auto checks = verify_run(run);
    for (const auto& c : checks)
        std::printf("%-5s %-40s %s\n", c.pass ? "PASS" : (c.advisory ? "WARN" : "FAIL"), c.name.c_str(),
                    c.detail.c_str());
    const bool ok = all_required_pass(checks);
    std::printf("%s\n", ok ? "all properties hold" : "property failure");
    return ok ? kOk : kPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adlab: synthetic feature-learning lab for adversarial training and distillation"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(1, 1);

    CommonFlags gen, trn, swp, idf, ent;
    std::string method;
    std::vector<std::string> run_dirs;
    std::string verify_dir;

    auto* c_gen = app.add_subcommand("generate", "generate a dataset and its event-E report");
    add_common(c_gen, gen);
    auto* c_trn = app.add_subcommand("train", "train one student and write a run directory");
    add_common(c_trn, trn);
    c_trn->add_option("-m,--method", method, "AT | AD-Good | AD-Bad | AD-Custom:<margin> (default: from config)");
    auto* c_swp = app.add_subcommand("sweep", "dichotomy sweep over p_un x methods x seeds");
    add_common(c_swp, swp);
    auto* c_idf = app.add_subcommand("identify", "strict-intersection subset identification over run directories");
    add_common(c_idf, idf);
    c_idf->add_option("runs", run_dirs, "run directories (at least one)")->required();
    auto* c_ent = app.add_subcommand("entropy", "teacher-entropy criterion over custom margins");
    add_common(c_ent, ent);
    auto* c_ver = app.add_subcommand("verify", "re-check stored invariants of a run directory");
    c_ver->add_option("run", verify_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*c_gen) return cmd_generate(gen);
        if (*c_trn) return cmd_train(trn, method);
        if (*c_swp) return cmd_sweep(swp);
        if (*c_idf) return cmd_identify(idf, run_dirs);
        if (*c_ent) return cmd_entropy(ent);
        if (*c_ver) return cmd_verify(verify_dir);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "adlab: %s\n", e.what());
        return kUsage;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "adlab: training diverged at iteration %d: %s\n", e.iteration(), e.what());
        return kDivergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "adlab: %s\n", e.what());
        return kValidation;
    }
    return kUsage;
}
