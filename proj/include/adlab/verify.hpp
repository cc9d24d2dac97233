#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "adlab/datagen.hpp"
#include "adlab/instrumentation.hpp"
#include "adlab/network.hpp"

namespace adlab {

// A run directory as written by write_run_directory.
struct RunDirectory {
    std::filesystem::path dir;
    std::string stem;
    nlohmann::json metadata;
    std::string metrics_csv;
    Dataset dataset;
    StudentWeights init;
    StudentWeights final_weights;
    StudentWeights peak_weights;
    NoiseCoefficients coefficients;
};

// Finds the single run*.json in `dir` and loads its siblings.
RunDirectory load_run_directory(const std::filesystem::path& dir);

struct PropertyCheck {
    std::string name;
    bool pass = true;
    bool advisory = false;  // reported, never fails the suite
    std::string detail;
};

// Re-checks the stored artifacts: orthogonality, decomposition, coefficient signs,
// recorded invariants, peak >= final, log cadence and dataset regeneration.
std::vector<PropertyCheck> verify_run(const RunDirectory& run);

bool all_required_pass(const std::vector<PropertyCheck>& checks);

}  // namespace adlab
