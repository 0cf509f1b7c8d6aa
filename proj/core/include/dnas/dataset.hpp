#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dnas/errors.hpp"

namespace dnas {

enum class DatasetKind { SPIRALS, MOONS, BLOBS_HARD };

const char* dataset_tag(DatasetKind k);
std::optional<DatasetKind> dataset_from_tag(const std::string& tag);

// Synthetic 2-d classification signals embedded isometrically into
// feature_width dimensions. Splits are stratified per class with ratios
// 0.4/0.3/0.3 (train = floor(0.4 m), val = floor(0.3 m), rest test).
struct Dataset {
    DatasetKind kind = DatasetKind::SPIRALS;
    std::size_t n = 0;
    std::size_t feature_width = 0;
    std::size_t classes = 0;
    double noise_level = 0.0;
    std::uint64_t seed = 0;

    std::vector<double> inputs; // row-major (n, feature_width)
    std::vector<int> labels;
    std::vector<std::size_t> train_idx, val_idx, test_idx;

    const std::vector<std::size_t>& split(const std::string& name) const;
    const double* row(std::size_t i) const { return inputs.data() + i * feature_width; }
};

Dataset make_dataset(DatasetKind kind, std::size_t n, std::size_t classes,
                     double noise_level, std::uint64_t seed, std::size_t feature_width);

// Cache file support; the file name encodes the generation key.
std::string dataset_cache_name(DatasetKind kind, std::size_t n, std::size_t classes,
                               double noise_level, std::uint64_t seed,
                               std::size_t feature_width);
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

} // namespace dnas
