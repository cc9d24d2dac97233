#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adlab/adversary.hpp"
#include "adlab/datagen.hpp"
#include "adlab/training.hpp"

namespace adlab {

struct Method {
    enum class Kind { AT, ADGood, ADBad, ADCustom };
    Kind kind = Kind::AT;
    double margin = 0.0;  // unlearnable-sample teacher margin for ADCustom

    // "AT", "AD-Good", "AD-Bad", "AD-Custom:<margin>"
    std::string label() const;
    // Filename-safe form: "AT", "AD-Good", "AD-Bad", "AD-Custom-<margin>"
    std::string slug() const;
    static Method parse(const std::string& text);

    friend bool operator==(const Method&, const Method&) = default;
};

// Everything one training run needs besides the method.
struct ExperimentBase {
    SyntheticConfig data;
    int m = 80;
    double sigma_0 = 0.01;
    TrainConfig train;
    double event_delta = 0.05;  // confidence level for the event-E report in run metadata

    void validate() const;
};

TrainConfig configure_method(TrainConfig train, const Method& method);

// One fully materialized run: dataset from data.seed; initial weights and test set from
// train.seed.
struct RunOutput {
    ExperimentBase base;
    Method method;
    Dataset dataset;
    StudentWeights init;
    std::vector<Sample> test_set;
    TrainResult result;
};

RunOutput run_single(const ExperimentBase& base, const Method& method, const TrainOptions& options = {});

// Writes <stem>.json (run metadata), <stem>.csv (metrics log), init/final/peak weights, the
// coefficient snapshot and the dataset into `dir`, which must exist.
void write_run_directory(const RunOutput& run, const std::filesystem::path& dir, const std::string& stem = "run");

// "run_<p_un>_<method slug>_<seed>"
std::string cell_stem(double p_un, const Method& method, std::uint64_t seed);

struct SweepSpec {
    ExperimentBase base;
    std::vector<double> p_un_values;
    std::vector<Method> methods;
    std::vector<std::uint64_t> seeds;
    // When true a seed sets both data.seed and train.seed; otherwise only train.seed.
    bool vary_data_seed = true;

    void validate() const;
};

struct CellResult {
    double p_un = 0.0;
    Method method;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double final_robust_train = 0.0;
    double final_robust_test = 0.0;
    double peak_robust_train = 0.0;
    double peak_robust_test = 0.0;
    int peak_iteration = 0;
    std::optional<int> T0;
    std::optional<int> T1;
    double degradation = 0.0;  // peak - final robust test accuracy
    std::shared_ptr<const RunOutput> run;
};

struct SweepTable {
    std::vector<CellResult> cells;

    static const char* csv_header();
    std::string to_csv(const std::string& metadata_comment = {}) const;
};

// Runs every (p_un, method, seed) cell on a pool of `jobs` workers. Diverging cells are
// marked failed. When `out_dir` is given, writes sweep.csv and one directory per cell
// holding run_<p_un>_<method>_<seed>.{json,csv} plus weights.
SweepTable run_dichotomy_sweep(const SweepSpec& spec, int jobs = 0,
                               const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                               const std::string& metadata_comment = {});

struct IdentificationResult {
    std::vector<int> estimated_learnable;
    std::vector<int> estimated_unlearnable;
    std::vector<int> unclassified;
    std::vector<int> correct_count;  // per training sample
    std::vector<int> histogram;      // histogram[c] = #samples robustly correct under exactly c models
    int ensemble_size = 0;
};

// Strict-intersection rule over the checkpoints: all robustly correct -> learnable, none -> unlearnable.
IdentificationResult identify_unlearnable_set(const std::vector<StudentWeights>& checkpoints,
                                              const Dataset& dataset, const AttackConfig& attack);

struct EnsembleResult {
    std::vector<std::shared_ptr<const RunOutput>> runs;
    IdentificationResult identification;
};

// Trains every (method, train seed) pair on one dataset and identifies subsets from the
// peak checkpoints.
EnsembleResult run_identification_ensemble(const ExperimentBase& base, const std::vector<Method>& methods,
                                           const std::vector<std::uint64_t>& train_seeds,
                                           const AttackConfig& attack, int jobs = 0);

struct EntropyRow {
    double margin = 0.0;
    double mean_entropy = 0.0;
    double final_robust_test = 0.0;
    double peak_robust_test = 0.0;
    double degradation = 0.0;
    bool ok = false;
    std::string error;
};

struct EntropyStudy {
    std::vector<int> proxy_unlearnable;
    int reference_peak_iteration = 0;
    std::vector<EntropyRow> rows;
    std::optional<double> spearman;  // nullopt when undefined
    std::string note;

    static const char* csv_header();
    std::string to_csv(const std::string& metadata_comment = {}) const;
};

// Proxy S_U from one AT reference run at its peak checkpoint, teacher entropy evaluated on
// the reference student's adversarial examples, one AD student per margin.
EntropyStudy entropy_criterion_study(const std::vector<double>& margins, const ExperimentBase& base,
                                     const AttackConfig& attack, int jobs = 0,
                                     std::shared_ptr<const RunOutput> reference = nullptr);

// Spearman rank correlation with average ranks for ties; nullopt if either side is constant.
std::optional<double> spearman_correlation(const std::vector<double>& a, const std::vector<double>& b);

// Runs fn(0..count-1) on up to `jobs` threads (0 = hardware concurrency).
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

}  // namespace adlab
