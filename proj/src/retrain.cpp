#include "tsfool/retrain.hpp"

#include <limits>

namespace tsfool {
namespace {

// The attack machinery consumes the test split, so attacking the training
// data means presenting it as the "test" view of a derived dataset.
Dataset train_as_test(const Dataset& d) {
    Dataset view = d;
    view.test = d.train;
    return view;
}

AdversarialBatch craft(const LstmParams& p, const Dataset& view, const RetrainConfig& cfg) {
    if (cfg.method == "tsfool" || cfg.method == "tsfool-ext") {
        IWfa a = extract(p, view, cfg.extraction);
        return cfg.method == "tsfool" ? tsfool(p, a, view, cfg.attack)
                                      : tsfool_extended(p, a, view, cfg.attack);
    }
    BaselineConfig bl = cfg.baseline;
    bl.method = cfg.method;
    bl.scope = "all";
    bl.seed = cfg.attack.seed;
    bl.target = cfg.attack.target;
    return run_baseline(p, nullptr, view, bl);
}

}  // namespace

RetrainReport retrain(LstmParams& p, const Dataset& d, const RetrainConfig& cfg,
                      LstmParams* bestModel) {
    if (cfg.epochs < 1) throw UsageError("retrain: epochs must be >= 1");
    const LstmParams original = p;

    AdversarialBatch advTrain = craft(original, train_as_test(d), cfg);
    AdversarialBatch heldOut = craft(original, d, cfg);

    RetrainReport rep;
    std::vector<TimeSeries> augmented = d.train;
    for (const Candidate& c : advTrain.candidates)
        augmented.push_back(TimeSeries{c.values, c.trueLabel});
    rep.adversarialTrainCount = static_cast<int>(advTrain.candidates.size());
    rep.degenerate = advTrain.candidates.empty();

    std::vector<TimeSeries> robustSet;
    for (const Candidate& c : heldOut.candidates)
        robustSet.push_back(TimeSeries{c.values, c.trueLabel});
    rep.heldOutCount = static_cast<int>(robustSet.size());
    rep.robustErrorBefore = robustSet.empty() ? 0.0 : 1.0 - evaluate(original, robustSet);

    double bestTest = std::numeric_limits<double>::infinity();
    double bestRobust = std::numeric_limits<double>::infinity();
    train_more(p, augmented, cfg.epochs, cfg.learningRate, [&](int epoch, double) {
        const double trainErr = 1.0 - evaluate(p, d.train);
        const double testErr = 1.0 - evaluate(p, d.test);
        const double robustErr = robustSet.empty() ? 0.0 : 1.0 - evaluate(p, robustSet);
        rep.trainError.push_back(trainErr);
        rep.testError.push_back(testErr);
        rep.robustError.push_back(robustErr);
        if (testErr < bestTest) {
            bestTest = testErr;
            rep.bestStandardEpoch = epoch;
        }
        if (robustErr < bestRobust) {
            bestRobust = robustErr;
            rep.bestRobustEpoch = epoch;
            if (bestModel) *bestModel = p;
        }
    });
    return rep;
}

}  // namespace tsfool
