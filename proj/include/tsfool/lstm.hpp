#pragma once

#include <filesystem>
#include <functional>
#include <span>

#include "tsfool/dataset.hpp"

namespace tsfool {

// Single-layer LSTM with a shared softmax readout applied at every step.
// Gate weights act on z_t = [h_{t-1}; x_t] (H + D columns).
struct LstmParams {
    int inputDim = 0;
    int hiddenSize = 0;
    int numClasses = 0;
    Matrix wInput, wForget, wCell, wOutput;  // H x (H + D)
    Vector bInput, bForget, bCell, bOutput;  // H
    Matrix wReadout;                         // k x H
    Vector bReadout;                         // k

    bool sameShape(const LstmParams& o) const;
};

struct StepTrace {
    Matrix hidden;      // T x H
    Matrix stepOutput;  // T x k, softmax per row
};

struct ForwardResult {
    StepTrace trace;
    int predicted = 0;  // argmax of the final row, smaller index wins ties
};

struct TrainConfig {
    int hiddenSize = 16;
    int epochs = 200;
    double learningRate = 0.3;
    std::uint64_t seed = 0;
    int patience = 0;  // 0 = run all epochs; else stop after this many
                       // consecutive epochs without train-loss improvement
};

LstmParams init_params(int inputDim, int hiddenSize, int numClasses, std::uint64_t seed);

ForwardResult forward(const LstmParams& p, const Matrix& x);
int predict(const LstmParams& p, const Matrix& x);

// Full-batch gradient descent on mean final-step cross-entropy (BPTT).
// Throws NumericError if the loss degenerates to non-finite.
LstmParams train(const Dataset& d, const TrainConfig& cfg);

// Continue training existing params; invokes onEpoch(epoch, meanLoss) after
// each update so callers can track error curves / keep checkpoints.
void train_more(LstmParams& p, std::span<const TimeSeries> samples, int epochs,
                double learningRate,
                const std::function<void(int, double)>& onEpoch = {});

// d( -log softmax(readout(h_T))[label] ) / d(input), exact BPTT.
Matrix input_gradient(const LstmParams& p, const Matrix& x, int label);

double evaluate(const LstmParams& p, std::span<const TimeSeries> samples);

// Fixed-layout binary format (magic + dims + row-major doubles), exact
// round-trip; identical params produce byte-identical files.
void save_model(const LstmParams& p, const std::filesystem::path& file);
LstmParams load_model(const std::filesystem::path& file);

}  // namespace tsfool
