#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "tsfool/retrain.hpp"

using namespace tsfool;
namespace fs = std::filesystem;

namespace {

Dataset make_toy(std::uint64_t seed, double gap, double noise) {
    Rng rng(seed);
    Dataset d;
    d.name = "toy";
    d.numClasses = 2;
    d.seriesLength = 6;
    d.featureDim = 1;
    d.originalLabels = {0.0, 1.0};
    auto sample = [&](int label) {
        Matrix m(6, 1);
        for (int t = 0; t < 6; ++t)
            m(t, 0) = (label == 0 ? -gap : gap) + noise * rng.gaussian();
        return TimeSeries{m, label};
    };
    for (int i = 0; i < 12; ++i) {
        d.train.push_back(sample(0));
        d.train.push_back(sample(1));
        d.test.push_back(sample(0));
        d.test.push_back(sample(1));
    }
    return d;
}

LstmParams trained(const Dataset& d) {
    TrainConfig cfg;
    cfg.hiddenSize = 5;
    cfg.epochs = 100;
    cfg.learningRate = 0.3;
    return train(d, cfg);
}

}  // namespace

TEST_CASE("adversarial fine-tuning with fgsm lowers the held-out robust error") {
    Dataset d = make_toy(61, 2.0, 0.25);
    LstmParams p = trained(d);
    REQUIRE(evaluate(p, d.test) == 1.0);

    RetrainConfig rc;
    rc.method = "fgsm";
    rc.baseline.eps = 0.35;  // strong enough to actually fool the model
    rc.epochs = 30;
    rc.learningRate = 0.1;

    LstmParams best = p;
    RetrainReport rep = retrain(p, d, rc, &best);

    CHECK(rep.adversarialTrainCount == static_cast<int>(d.train.size()));
    CHECK(rep.heldOutCount == static_cast<int>(d.test.size()));
    CHECK_FALSE(rep.degenerate);
    REQUIRE(rep.trainError.size() == 30);
    REQUIRE(rep.testError.size() == 30);
    REQUIRE(rep.robustError.size() == 30);
    for (double e : rep.trainError) CHECK((e >= 0.0 && e <= 1.0));
    for (double e : rep.robustError) CHECK((e >= 0.0 && e <= 1.0));

    REQUIRE(rep.bestRobustEpoch >= 1);
    REQUIRE(rep.bestRobustEpoch <= 30);
    double minRobust = *std::min_element(rep.robustError.begin(), rep.robustError.end());
    CHECK(rep.robustError[rep.bestRobustEpoch - 1] == minRobust);
    CHECK(minRobust <= rep.robustErrorBefore);

    REQUIRE(rep.bestStandardEpoch >= 1);
    double minTest = *std::min_element(rep.testError.begin(), rep.testError.end());
    CHECK(rep.testError[rep.bestStandardEpoch - 1] == minTest);

    CHECK(best.sameShape(p));
}

TEST_CASE("an empty adversarial capture degenerates to plain training") {
    Dataset d = make_toy(67, 2.2, 0.15);
    LstmParams p = trained(d);
    REQUIRE(evaluate(p, d.train) == 1.0);
    REQUIRE(evaluate(p, d.test) == 1.0);  // no mistakes -> tsfool finds nothing

    LstmParams reference = p;
    RetrainConfig rc;
    rc.method = "tsfool";
    rc.epochs = 12;
    rc.learningRate = 0.1;
    RetrainReport rep = retrain(p, d, rc);

    CHECK(rep.degenerate);
    CHECK(rep.adversarialTrainCount == 0);
    CHECK(rep.heldOutCount == 0);
    CHECK(rep.robustErrorBefore == 0.0);

    // identical arithmetic to continuing plain training on the train split
    std::vector<double> plainTest;
    train_more(reference, d.train, 12, 0.1, [&](int, double) {
        plainTest.push_back(1.0 - evaluate(reference, d.test));
    });
    REQUIRE(plainTest.size() == rep.testError.size());
    for (size_t i = 0; i < plainTest.size(); ++i) CHECK(plainTest[i] == rep.testError[i]);
}

TEST_CASE("retrain validates its epoch count") {
    Dataset d = make_toy(71, 2.0, 0.2);
    LstmParams p = init_params(1, 4, 2, 0);
    RetrainConfig rc;
    rc.epochs = 0;
    CHECK_THROWS_AS(retrain(p, d, rc), UsageError);
}

TEST_CASE("retrain reports persist as json") {
    auto dir = fs::temp_directory_path() / "tsfool_test_retrain";
    fs::remove_all(dir);
    fs::create_directories(dir);

    RetrainReport rep;
    rep.trainError = {0.5, 0.25};
    rep.testError = {0.5, 0.3};
    rep.robustError = {1.0, 0.75};
    rep.robustErrorBefore = 1.0;
    rep.bestStandardEpoch = 2;
    rep.bestRobustEpoch = 2;
    rep.adversarialTrainCount = 7;
    rep.heldOutCount = 4;
    save_retrain_report(rep, dir / "retrain.json");

    std::ifstream in(dir / "retrain.json", std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.find("tsfool-retrain-v1") != std::string::npos);
    CHECK(text.find("robust_error_before") != std::string::npos);
}
