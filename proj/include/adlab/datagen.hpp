#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace adlab {

struct StudentWeights;

// Parameters of the patch-structured binary data model.
// Coordinate 0 carries the learnable feature u, coordinate d-1 the unlearnable feature v.
struct SyntheticConfig {
    int d = 100;
    int N = 200;
    int P = 4;
    double alpha = 5.0;
    double sigma_n = 0.4;
    double p_un = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    // round(p_un * N), ties rounded up.
    int unlearnable_count() const;
};

struct Sample {
    Eigen::MatrixXd patches;  // P x d
    int label = 1;            // +1 or -1
    int signal_index = 0;
    bool learnable = true;

    int num_patches() const { return static_cast<int>(patches.rows()); }
    int dim() const { return static_cast<int>(patches.cols()); }
};

struct Dataset {
    SyntheticConfig config;
    std::vector<Sample> samples;
    std::vector<int> learnable_indices;
    std::vector<int> unlearnable_indices;

    int size() const { return static_cast<int>(samples.size()); }
};

Dataset generate_dataset(const SyntheticConfig& config);

// Fresh samples from the learnable test distribution; the noise stream is keyed by `seed`
// only, so it is independent of the training set drawn from config.seed.
std::vector<Sample> sample_test_learnable(const SyntheticConfig& config, int count,
                                          std::uint64_t seed);

// Stacks every patch of every sample into an (N*P) x d matrix, row i*P + j.
Eigen::MatrixXd stack_patches(const std::vector<Sample>& samples);

// One line of the concentration-event report. Bounds that a property does not have are
// +-infinity; `measured_min` / `measured_max` are the extreme values of the bounded quantity.
struct EventProperty {
    std::string name;
    std::string quantity;
    bool pass = true;
    double measured_min = 0.0;
    double measured_max = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct EventEReport {
    std::array<EventProperty, 8> properties;
    double delta = 0.0;

    bool all_pass() const;
};

EventEReport check_event_E(const Dataset& dataset, const StudentWeights& init_weights,
                           double sigma_0, double delta);

}  // namespace adlab
