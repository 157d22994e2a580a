#pragma once

#include "entsearch/rng.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace entsearch::data {

// Ingestion / validation failure; the message carries the row/column position
// where applicable.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Dataset {
    std::string name;
    std::vector<std::vector<double>> X; // n_samples rows of n_features values
    std::vector<int> y;                 // labels in [0, n_classes)
    int n_classes = 0;

    int n_samples() const { return static_cast<int>(X.size()); }
    int n_features() const { return X.empty() ? 0 : static_cast<int>(X.front().size()); }
};

struct SynthConfig {
    int n_samples = 400;
    int n_features = 4;
    int n_classes = 3;
    double class_sep = 0.8;
    double noise_std = 1.0;
};

// Class centroids sit on distinct hypercube vertices scaled by class_sep;
// samples are centroid + N(0, noise_std^2) per coordinate. Classes are
// balanced, with the first (n_samples mod n_classes) classes one sample
// larger (400/3 -> 134/133/133).
Dataset generate_synthetic(const SynthConfig& config, std::uint64_t seed);

struct CsvSchema {
    bool has_header = true;
    std::string label_column;            // column name (header) or 0-based index (headerless)
    std::map<std::string, int> label_map; // raw label text -> class id
};

CsvSchema load_schema(const std::string& path);

Dataset load_csv(const std::string& path, const CsvSchema& schema);

// Per-feature z-score statistics fitted on a row subset.
struct ScaleStats {
    std::vector<double> mean;
    std::vector<double> stddev;          // 1.0 where the fit rows had zero variance
    std::vector<bool> zero_variance;     // warning flags, one per feature
};

ScaleStats fit_scaling(const std::vector<std::vector<double>>& X, std::span<const int> fit_rows);

// Applies stats to every row: zero-variance features pass through centered.
void apply_scaling(std::vector<std::vector<double>>& X, const ScaleStats& stats);

// Fit on fit_rows, transform all rows in place, return the stats for
// checkpointing.
ScaleStats standardize(std::vector<std::vector<double>>& X, std::span<const int> fit_rows);

struct Split {
    std::vector<int> train;
    std::vector<int> validation;
    std::vector<int> test;
    std::array<double, 3> fractions{};
    std::uint64_t seed = 0;
};

// Shuffles each class with its own derived stream, then allocates per-class
// counts by largest remainder so partition sizes land within one sample of
// the stratified ideal.
Split stratified_split(const Dataset& dataset, std::array<double, 3> fractions, std::uint64_t seed);

void save_split(const Split& split, const std::string& path);
Split load_split(const std::string& path);

} // namespace entsearch::data
