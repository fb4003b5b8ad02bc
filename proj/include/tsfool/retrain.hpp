#pragma once

#include "tsfool/metrics.hpp"

namespace tsfool {

struct RetrainConfig {
    std::string method = "tsfool";  // adversarial-sample generator
    AttackConfig attack;
    BaselineConfig baseline;
    ExtractionConfig extraction;
    int epochs = 100;
    double learningRate = 0.3;
};

struct RetrainReport {
    std::vector<double> trainError;   // per epoch, on the original train split
    std::vector<double> testError;    // per epoch, on the test split
    std::vector<double> robustError;  // per epoch, on held-out adversarials
    double robustErrorBefore = 1.0;   // original model on the held-out set
    int bestStandardEpoch = -1;       // argmin test error (1-based; -1 = none)
    int bestRobustEpoch = -1;         // argmin robust error
    int adversarialTrainCount = 0;
    int heldOutCount = 0;
    bool degenerate = false;          // no adversarial train samples captured
};

// Adversarial fine-tuning: craft adversarials from the train split, append
// them (original labels) to the train set, continue training `p` in place.
// The held-out robust set is crafted from the test split with the *original*
// model. bestModel receives the checkpoint with the lowest robust error.
RetrainReport retrain(LstmParams& p, const Dataset& d, const RetrainConfig& cfg,
                      LstmParams* bestModel = nullptr);

void save_retrain_report(const RetrainReport& r, const std::filesystem::path& file);

}  // namespace tsfool
