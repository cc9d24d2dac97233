#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "adlab/datagen.hpp"
#include "adlab/experiments.hpp"
#include "adlab/instrumentation.hpp"
#include "adlab/training.hpp"

namespace adlab {

std::string tool_version();

struct NetworkConfig {
    int m = 80;
    double sigma_0 = 0.01;
};

struct EventCheckConfig {
    double delta = 0.05;
};

struct SweepConfig {
    std::vector<double> p_un_values{0.0, 0.05, 0.1, 0.2};
    std::vector<Method> methods{Method{Method::Kind::AT}, Method{Method::Kind::ADGood},
                                Method{Method::Kind::ADBad}};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    bool vary_data_seed = true;
};

struct EntropyConfig {
    std::vector<double> margins{0.0, 1.0, 2.0, 5.0, 10.0};
    int attack_steps = 10;
};

struct IdentifyConfig {
    int attack_steps = 10;
};

struct OutputConfig {
    std::string dir = "out";
    bool overwrite = false;
};

// The experiment config file: sections data, network, train, teacher, eval_attack,
// event_check, sweep, entropy, identify, output, plus verbosity and jobs.
struct ExperimentConfig {
    SyntheticConfig data;
    NetworkConfig network;
    TrainConfig train;  // owns the teacher and eval attack sections
    EventCheckConfig event_check;
    SweepConfig sweep;
    EntropyConfig entropy;
    IdentifyConfig identify;
    OutputConfig output;
    int verbosity = 1;
    int jobs = 0;
    nlohmann::json overrides = nlohmann::json::array();  // provenance of CLI overrides

    void validate() const;
    ExperimentBase base() const;
    SweepSpec sweep_spec() const;
    AttackConfig criterion_attack(int steps) const;
};

// Strict parse: unknown keys and mistyped values raise ConfigError naming the key; JSON
// syntax errors carry line and column.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Applies "section.key=value" on top of a parsed document (value parsed as JSON, falling
// back to a string).
void apply_override(nlohmann::json& document, const std::string& assignment);
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::string>& assignments);
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source,
                                         const std::vector<std::string>& assignments);

nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const SyntheticConfig& config);
SyntheticConfig synthetic_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TeacherSpec& spec);
nlohmann::json to_json(const AttackConfig& attack);
nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const EventEReport& report);
nlohmann::json to_json(const HittingTimes& hitting);
nlohmann::json to_json(const InvariantReport& invariants);
nlohmann::json to_json(const IdentificationResult& result);
nlohmann::json to_json(const EntropyStudy& study);
nlohmann::json to_json(const ExperimentBase& base);
ExperimentBase experiment_base_from_json(const nlohmann::json& j);

// Full metadata of one run: configs, seeds, method, event-E report, hitting times,
// invariants, peak checkpoint, summary metrics.
nlohmann::json run_metadata(const RunOutput& run, const EventEReport& event_report, double delta);

}  // namespace adlab
