#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>

#include "adlab/config.hpp"
#include "adlab/errors.hpp"
#include "adlab/experiments.hpp"
#include "adlab/instrumentation.hpp"
#include "adlab/serialize.hpp"
#include "adlab/verify.hpp"

using namespace adlab;
namespace fs = std::filesystem;

namespace {

ExperimentBase desk(double p_un = 0.2, int T = 200) {
    ExperimentBase b;
    b.data.d = 30;
    b.data.N = 20;
    b.data.P = 3;
    b.data.p_un = p_un;
    b.m = 8;
    b.train.T = T;
    b.train.test_count = 20;
    return b;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "adlab_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Rank oracle: Pearson correlation of hand-assigned average ranks.
double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = a.size();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Method, LabelsAndParse) {
    for (const char* s : {"AT", "AD-Good", "AD-Bad", "AD-Custom:2.5"}) EXPECT_EQ(Method::parse(s).label(), s);
    EXPECT_EQ(Method::parse("AD-Custom-2.5"), (Method{Method::Kind::ADCustom, 2.5}));
    EXPECT_EQ((Method{Method::Kind::ADCustom, 10}).slug(), "AD-Custom-10");
    EXPECT_THROW(Method::parse("AD-Custom:"), ConfigError);
    EXPECT_THROW(Method::parse("AD-Custom:x"), ConfigError);
    EXPECT_THROW(Method::parse("RSLAD"), ConfigError);
}

TEST(Method, ConfigureMethod) {
    TrainConfig t;
    EXPECT_EQ(configure_method(t, {Method::Kind::AT}).objective, Objective::AT);
    const TrainConfig bad = configure_method(t, {Method::Kind::ADBad});
    EXPECT_EQ(bad.objective, Objective::AD);
    EXPECT_EQ(bad.teacher.kind, TeacherKind::Bad);
    const TrainConfig custom = configure_method(t, {Method::Kind::ADCustom, 3.0});
    EXPECT_EQ(custom.teacher.kind, TeacherKind::CustomMargin);
    EXPECT_EQ(custom.teacher.custom_unlearnable_margin, 3.0);
}

TEST(Sweep, SingleCellReducesToOneTrainCall) {
    SweepSpec spec;
    spec.base = desk();
    spec.p_un_values = {0.2};
    spec.methods = {Method{Method::Kind::AT}};
    spec.seeds = {4};
    const SweepTable table = run_dichotomy_sweep(spec, 1);
    ASSERT_EQ(table.cells.size(), 1u);
    ExperimentBase b = desk();
    b.data.seed = 4;
    b.train.seed = 4;
    const Dataset ds = generate_dataset(b.data);
    const TrainResult direct = train(ds, init_weights(8, 30, 0.01, 4), b.train, sample_test_learnable(b.data, 20, 4));
    EXPECT_EQ(table.cells[0].run->result.log.to_csv(), direct.log.to_csv());
    EXPECT_EQ(table.cells[0].final_robust_test, direct.log.rows.back().robust_test_acc);
}

TEST(Sweep, DeterministicOutputsAndLayout) {
    SweepSpec spec;
    spec.base = desk(0.0, 100);
    spec.p_un_values = {0.0, 0.2};
    spec.methods = {Method{Method::Kind::AT}, Method{Method::Kind::ADGood}};
    spec.seeds = {0, 1};
    const auto d1 = fresh_dir("sweep1"), d2 = fresh_dir("sweep2");
    const SweepTable a = run_dichotomy_sweep(spec, 2, d1, "meta");
    const SweepTable b = run_dichotomy_sweep(spec, 1, d2, "meta");
    EXPECT_EQ(a.cells.size(), 8u);
    EXPECT_EQ(read_text_file(d1 / "sweep.csv"), read_text_file(d2 / "sweep.csv"));
    int dirs = 0;
    for (const auto& c : a.cells) {
        const std::string stem = cell_stem(c.p_un, c.method, c.seed);
        EXPECT_EQ(read_text_file(d1 / stem / (stem + ".csv")), read_text_file(d2 / stem / (stem + ".csv")));
        EXPECT_GE(c.peak_robust_test, c.final_robust_test);
        EXPECT_DOUBLE_EQ(c.degradation, c.peak_robust_test - c.final_robust_test);
        ++dirs;
    }
    EXPECT_EQ(dirs, 8);
    EXPECT_TRUE(fs::exists(d1 / "run_0.2_AD-Good_1" / "run_0.2_AD-Good_1.json"));
}

TEST(Sweep, DivergingCellMarkedFailed) {
    SweepSpec spec;
    spec.base = desk(0.0, 50);
    spec.base.train.eta = 1e15;
    spec.base.sigma_0 = 1.0;
    spec.p_un_values = {0.0};
    spec.methods = {Method{Method::Kind::AT}};
    spec.seeds = {0, 1};
    const SweepTable t = run_dichotomy_sweep(spec, 1);
    ASSERT_EQ(t.cells.size(), 2u);
    for (const auto& c : t.cells) {
        EXPECT_FALSE(c.ok);
        EXPECT_FALSE(c.error.empty());
    }
}

TEST(Sweep, EmptyListsRejected) {
    SweepSpec spec;
    spec.base = desk();
    spec.methods = {Method{}};
    spec.seeds = {0};
    EXPECT_THROW(run_dichotomy_sweep(spec), ConfigError);
}

TEST(Identify, Semantics) {
    SyntheticConfig c = desk().data;
    c.p_un = 0.0;
    const Dataset ds = generate_dataset(c);
    const AttackConfig attack = AttackConfig::standard(0.5, 10);
    StudentWeights perfect;
    perfect.w = Eigen::MatrixXd::Zero(1, 30);
    perfect.w(0, 0) = 1.0;  // margin alpha^3 minus tiny noise effects
    const auto one = identify_unlearnable_set({perfect}, ds, attack);
    EXPECT_EQ(one.estimated_learnable.size(), 20u);
    EXPECT_TRUE(one.estimated_unlearnable.empty());
    EXPECT_EQ(one.ensemble_size, 1);
    EXPECT_THROW(identify_unlearnable_set({}, ds, attack), DomainError);
}

// Each checkpoint is wrong on exactly the samples the other gets right.
TEST(Identify, ComplementaryErrorsGiveEmptyUnlearnableSet) {
    SyntheticConfig c = desk().data;
    c.p_un = 0.0;
    Dataset ds = generate_dataset(c);
    for (auto& s : ds.samples) {
        for (int j = 0; j < 3; ++j)
            if (j != s.signal_index) s.patches.row(j).setZero();
        s.patches((s.signal_index + 1) % 3, 1) = 1.0;  // shared constant patch
    }
    StudentWeights pos, neg;
    pos.w = Eigen::MatrixXd::Zero(1, 30);
    neg.w = pos.w;
    pos.w(0, 1) = 1.0;   // f = +1 everywhere: right exactly on y = +1
    neg.w(0, 1) = -1.0;  // f = -1 everywhere: right exactly on y = -1
    const auto r = identify_unlearnable_set({pos, neg}, ds, AttackConfig::standard(0.0, 1));
    EXPECT_TRUE(r.estimated_unlearnable.empty());
    EXPECT_TRUE(r.estimated_learnable.empty());
    EXPECT_EQ(r.unclassified.size(), 20u);
    EXPECT_EQ(r.histogram, (std::vector<int>{0, 20, 0}));
}

TEST(Identify, OrderInvariantAndDisjoint) {
    ExperimentBase b = desk(0.2, 150);
    const auto ens = run_identification_ensemble(b, {Method{Method::Kind::AT}, Method{Method::Kind::ADGood}}, {0, 1},
                                                 AttackConfig::standard(0.5, 10), 1);
    ASSERT_EQ(ens.runs.size(), 4u);
    std::vector<StudentWeights> peaks;
    for (const auto& r : ens.runs) peaks.push_back(r->result.peak.weights);
    std::vector<StudentWeights> reversed(peaks.rbegin(), peaks.rend());
    const auto a = identify_unlearnable_set(peaks, ens.runs[0]->dataset, AttackConfig::standard(0.5, 10));
    const auto z = identify_unlearnable_set(reversed, ens.runs[0]->dataset, AttackConfig::standard(0.5, 10));
    EXPECT_EQ(a.estimated_unlearnable, z.estimated_unlearnable);
    EXPECT_EQ(a.estimated_learnable, z.estimated_learnable);
    EXPECT_EQ(a.correct_count, z.correct_count);
    for (int i : a.estimated_learnable)
        EXPECT_EQ(std::count(a.estimated_unlearnable.begin(), a.estimated_unlearnable.end(), i), 0);
    for (int c : a.correct_count) {
        EXPECT_GE(c, 0);
        EXPECT_LE(c, 4);
    }
    EXPECT_EQ(a.estimated_learnable.size() + a.estimated_unlearnable.size() + a.unclassified.size(), 20u);
}

TEST(Spearman, MatchesRankOracleWithTies) {
    const std::vector<double> a{3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0};
    const std::vector<double> b{2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0};
    const std::vector<double> ra{4, 1.5, 5, 1.5, 6, 7, 3};
    const std::vector<double> rb{3.5, 5, 1.5, 6.5, 3.5, 6.5, 1.5};
    EXPECT_NEAR(*spearman_correlation(a, b), pearson(ra, rb), 1e-15);
    EXPECT_NEAR(*spearman_correlation({1, 2, 3}, {10, 20, 30}), 1.0, 1e-15);
    EXPECT_NEAR(*spearman_correlation({1, 2, 3}, {3, 2, 1}), -1.0, 1e-15);
    EXPECT_FALSE(spearman_correlation({1, 1, 1}, {1, 2, 3}));
    EXPECT_THROW(spearman_correlation({1, 2}, {1}), ShapeError);
}

TEST(ParallelFor, CoversEveryIndexOnceAndPropagates) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(100, 4, [&](int k) { ++hits[k]; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(10, 3, [](int k) {
                     if (k == 5) throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
}

TEST(Entropy, DeskStudyShapes) {
    ExperimentBase b = desk(0.2, 150);
    const EntropyStudy s = entropy_criterion_study({0.0, 10.0}, b, AttackConfig::standard(0.5, 10), 1);
    ASSERT_EQ(s.rows.size(), 2u);
    if (s.proxy_unlearnable.empty()) {
        EXPECT_FALSE(s.note.empty());
        return;
    }
    // Learnable samples in the proxy set carry the Gamma margin, so the mean is a mixture.
    EXPECT_GT(s.rows[0].mean_entropy, s.rows[1].mean_entropy);
    EXPECT_LE(s.rows[0].mean_entropy, std::log(2.0) + 1e-15);
    EXPECT_NE(s.to_csv("m").find(EntropyStudy::csv_header()), std::string::npos);
}

TEST(Entropy, EmptyMarginsRejected) {
    EXPECT_THROW(entropy_criterion_study({}, desk(), AttackConfig::standard(0.5, 10)), ConfigError);
}

TEST(RunDirectory, WriteLoadVerify) {
    const auto dir = fresh_dir("rundir");
    const RunOutput run = run_single(desk(0.2, 100), Method{});
    write_run_directory(run, dir, "run");
    const RunDirectory back = load_run_directory(dir);
    EXPECT_EQ(back.final_weights.w, run.result.final_weights.w);
    EXPECT_EQ(back.metadata["method"], "AT");
    EXPECT_EQ(back.metadata["tool_version"], tool_version());
    const auto checks = verify_run(back);
    for (const auto& c : checks) EXPECT_TRUE(c.pass || c.advisory) << c.name << ": " << c.detail;
    EXPECT_TRUE(all_required_pass(checks));

    // Tamper with the coefficient snapshot: the decomposition check must catch it.
    NoiseCoefficients bad = run.result.coefficients;
    bad.rho(1, 0) += 1.0;
    if (run.dataset.samples[0].signal_index == 1) bad.rho(2, 0) += 1.0;
    save_coefficients(bad, dir / "coefficients.bin");
    EXPECT_FALSE(all_required_pass(verify_run(load_run_directory(dir))));
}

// Full-scale AT run: the memorized-patch attack built from the most memorized
// unlearnable noise patch flips more test predictions than random signs of equal budget.
// Clean test margins at this budget sit well above what either attack removes, so both flip
// counts are usually zero. The paired margin drop is what separates the two attacks.
TEST(MemorizedPatch, BeatsRandomSignOnTrainedRun) {
    ExperimentBase b;
    b.data.p_un = 0.1;
    b.train.T = 4000;
    const RunOutput run = run_single(b, Method{});
    const auto& w = run.result.final_weights;
    const NoiseResponse vuln = max_unlearnable_noise_response(w, run.dataset);
    const Sample& src = run.dataset.samples[vuln.sample];
    const Eigen::VectorXd x = src.patches.row(vuln.patch).transpose();
    const auto test = sample_test_learnable(b.data, 200, 99);
    int flipped_mem = 0, flipped_rand = 0, clean_right = 0, mem_wins = 0;
    double drop_mem = 0.0, drop_rand = 0.0;
    for (std::size_t k = 0; k < test.size(); ++k) {
        const auto& s = test[k];
        const double m0 = s.label * forward(w, s);
        if (m0 <= 0.0) continue;
        ++clean_right;
        const Sample m = memorized_patch_attack(w, x, src.label, s, 0.5, 0.05, b.data);
        EXPECT_LE((m.patches - s.patches).lpNorm<Eigen::Infinity>(), 0.5 + 1e-12);
        const double mm = s.label * forward(w, m);
        const double mr = s.label * forward(w, random_sign_attack(s, 0.5, k));
        flipped_mem += mm <= 0.0;
        flipped_rand += mr <= 0.0;
        mem_wins += mm < mr;
        drop_mem += m0 - mm;
        drop_rand += m0 - mr;
    }
    ASSERT_GE(clean_right, 100);
    EXPECT_GE(flipped_mem, flipped_rand);
    EXPECT_GT(drop_mem, 10.0 * std::abs(drop_rand));
    EXPECT_GT(2 * mem_wins, clean_right);
}
