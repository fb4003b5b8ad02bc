#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsfool/common.hpp"

namespace tsfool {

struct TimeSeries {
    Matrix values;  // T x D
    int label = 0;  // contiguous class id in [0, k)
};

struct Dataset {
    std::string name;
    std::vector<TimeSeries> train;
    std::vector<TimeSeries> test;
    int numClasses = 0;
    int seriesLength = 0;
    int featureDim = 1;
    std::vector<double> originalLabels;  // index = contiguous id, value = raw label
};

// Per-feature affine map taking raw values into [0, 1] over train+test.
// normalized = (x - offset) / scale; constant features get scale 1 (flagged).
struct NormalizationStats {
    Vector offset;
    Vector scale;
    std::vector<bool> degenerate;

    Vector apply(const Vector& rawRow) const;
    Matrix apply(const Matrix& raw) const;
    Matrix invert(const Matrix& normalized) const;
};

// Observed value envelope of the test split.
struct DomainRanges {
    Matrix stepMin;  // T x D
    Matrix stepMax;  // T x D
    Vector featureMin;
    Vector featureMax;

    Vector featureRange() const { return featureMax - featureMin; }
};

// Path resolution: "<stem>" or a directory containing "<name>_TRAIN.tsv" /
// "<name>_TEST.tsv"; a single regular file is loaded as both splits.
Dataset load_dataset(const std::filesystem::path& path);

// One UCR-style split file: "label<TAB>v1<TAB>v2...", '#'-lines are
// directives/comments ("#D=<int>" sets the feature dimension), comma accepted
// as the delimiter. Labels are returned raw; remapping happens in load_dataset.
struct RawSplit {
    std::vector<double> labels;
    std::vector<Matrix> values;
    int featureDim = 1;
};
RawSplit load_split_file(const std::filesystem::path& file);

// Writes a split back in the same format (value-exact decimal strings,
// original labels); loading the result reproduces the values bit-for-bit.
void save_split(const Dataset& d, std::span<const TimeSeries> split,
                const std::filesystem::path& file);

// Stats over train+test; normalized copy of the dataset.
NormalizationStats normalization_stats(const Dataset& d);
Dataset normalize(const Dataset& d, const NormalizationStats& stats);

DomainRanges domain_ranges(const Dataset& d);  // test split envelope

}  // namespace tsfool
