#pragma once

#include <filesystem>
#include <string>

#include "adlab/datagen.hpp"
#include "adlab/instrumentation.hpp"
#include "adlab/network.hpp"

namespace adlab {

// Binary containers, little-endian IEEE-754 doubles.
//
// Dataset:      "ADLABDS1" | u64 header bytes | JSON header | N*P*d doubles (sample, patch, coord)
// Weights:      "ADLABWT1" | i64 m | i64 d | f64 sigma_0 | m*d doubles, row-major
// Coefficients: "ADLABRH1" | i64 N | i64 P | i64 m | u8 signed | (N*P)*m doubles, row-major
//
// The dataset header records the generating config, per-sample labels, signal indices
// and learnability flags, and the tool version.

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

void save_weights(const StudentWeights& weights, const std::filesystem::path& path);
StudentWeights load_weights(const std::filesystem::path& path);

void save_coefficients(const NoiseCoefficients& coeffs, const std::filesystem::path& path);
NoiseCoefficients load_coefficients(const std::filesystem::path& path);

// Atomic-enough text write: fails if the parent directory does not exist.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace adlab
