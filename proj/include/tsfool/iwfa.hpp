#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "tsfool/lstm.hpp"

namespace tsfool {

// Quantized step-output descriptor: the top-K class ids by descending
// confidence (smaller id wins ties) plus floor(conf * confLevels) for each.
struct AbstractState {
    std::vector<int> topLabels;
    std::vector<int> quantConf;

    bool operator==(const AbstractState&) const = default;
    auto operator<=>(const AbstractState&) const = default;
};

// Per-step interval key: floor(normalizedValue / intervalWidth) per feature.
using IntervalKey = std::vector<long long>;

struct ExtractionConfig {
    int topK = 2;               // classes kept in the abstract state
    int confLevels = 10;        // confidence quantization resolution
    double distanceFactor = 10.0;  // divisor on the mean adjacent-step distance
};

// One transfer matrix: |S| sparse rows; a row is row-stochastic or empty.
struct SparseRow {
    std::vector<std::pair<int, double>> entries;  // (state, weight), state ascending
};
struct TransferMatrix {
    std::vector<SparseRow> rows;
};

// Intervalized weighted finite automaton extracted from an LSTM.
// State 0 is the initial pseudo-state; init is one-hot on it.
struct IWfa {
    double intervalWidth = 0.0;
    int numClasses = 0;
    int featureDim = 0;
    NormalizationStats norm;                 // raw -> normalized for lookups
    std::vector<AbstractState> states;       // [0] is the empty pseudo-state
    std::map<IntervalKey, TransferMatrix> transfer;
    Matrix output;                           // |S| x k, row-stochastic
    Vector init;                             // |S|, one-hot on slot 0
    std::string fallbackPolicy = "nearest-interval";
};

// Mean adjacent-step L2 distance over normalized test features, divided by
// the factor. T == 1 has no adjacency and is an error; an all-constant split
// yields 0 (extraction substitutes a floor of 1 / (factor * confLevels)).
double imperceptible_distance(const Dataset& d, double factor);

IWfa extract(const LstmParams& p, const Dataset& d, const ExtractionConfig& cfg);

struct ExecResult {
    Vector classProbs;                  // k, sums to 1
    bool deadPath = false;              // hit an all-zero row (uniform output)
    std::vector<Vector> stateHistory;   // state distribution after each symbol
};

IntervalKey interval_key(const IWfa& a, const Vector& normalizedRow);

// Core execution over pre-computed interval keys (unseen keys resolve to the
// nearest seen key by L1 index distance, lexicographically smaller on ties).
ExecResult execute_intervals(const IWfa& a, std::span<const IntervalKey> keys);

ExecResult execute(const IWfa& a, const Matrix& rawSeries);
int predict(const IWfa& a, const Matrix& rawSeries);

// JSON persistence with value-exact decimal strings; exact round-trip and
// byte-identical re-save.
void save_automaton(const IWfa& a, const std::filesystem::path& file);
IWfa load_automaton(const std::filesystem::path& file);

}  // namespace tsfool
