#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tsfool/iwfa.hpp"

using namespace tsfool;
namespace fs = std::filesystem;

namespace {

Dataset inline_dataset(std::vector<TimeSeries> train, std::vector<TimeSeries> test) {
    Dataset d;
    d.name = "inline";
    d.train = std::move(train);
    d.test = std::move(test);
    d.numClasses = 0;
    for (const auto& s : d.train) d.numClasses = std::max(d.numClasses, s.label + 1);
    d.seriesLength = static_cast<int>(d.train[0].values.rows());
    d.featureDim = static_cast<int>(d.train[0].values.cols());
    d.originalLabels.resize(d.numClasses);
    for (int c = 0; c < d.numClasses; ++c) d.originalLabels[c] = c;
    return d;
}

Matrix series1(std::initializer_list<double> vals) {
    Matrix m(static_cast<int>(vals.size()), 1);
    int t = 0;
    for (double v : vals) m(t++, 0) = v;
    return m;
}

Dataset make_toy(int T, int perClass, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TimeSeries> train, test;
    auto sample = [&](int label) {
        Matrix m(T, 1);
        for (int t = 0; t < T; ++t)
            m(t, 0) = (label == 0 ? -1.5 : 1.5) + 0.3 * rng.gaussian();
        return TimeSeries{m, label};
    };
    for (int i = 0; i < perClass; ++i) {
        train.push_back(sample(0));
        train.push_back(sample(1));
        test.push_back(sample(0));
        test.push_back(sample(1));
    }
    return inline_dataset(train, test);
}

SparseRow row(std::initializer_list<std::pair<int, double>> entries) {
    SparseRow r;
    for (auto& e : entries)
        if (e.second != 0.0) r.entries.push_back(e);
    return r;
}

// Three-state two-class instance with known exact dyadic execution result.
IWfa worked_instance() {
    IWfa a;
    a.intervalWidth = 1.0;
    a.numClasses = 2;
    a.featureDim = 1;
    a.states.resize(3);
    a.init = Vector::Zero(3);
    a.init(0) = 1.0;
    TransferMatrix e1, e2, e3;
    e1.rows = {row({{0, 0.25}, {2, 0.75}}), row({}), row({})};
    e2.rows = {row({{0, 0.25}, {1, 0.25}, {2, 0.5}}), row({{0, 1.0}}),
               row({{0, 0.5}, {1, 0.5}})};
    e3.rows = {row({{1, 1.0}}), row({{1, 0.25}, {2, 0.75}}),
               row({{0, 0.25}, {1, 0.5}, {2, 0.25}})};
    a.transfer[{0}] = e1;
    a.transfer[{1}] = e2;
    a.transfer[{2}] = e3;
    a.output.resize(3, 2);
    a.output << 0.5, 0.5, 0.0, 1.0, 0.75, 0.25;
    return a;
}

}  // namespace

TEST_CASE("imperceptible_distance averages adjacent-step gaps on the unit scale") {
    // single feature spanning [0,2]: normalized steps 0, .5, 1 -> mean gap .5
    Dataset d = inline_dataset({{series1({0, 1, 2}), 0}, {series1({0, 1, 2}), 1}},
                               {{series1({0, 1, 2}), 0}});
    CHECK(imperceptible_distance(d, 10.0) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(imperceptible_distance(d, 5.0) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("length-1 series have no adjacent steps to measure") {
    Dataset d = inline_dataset({{series1({1}), 0}, {series1({2}), 1}},
                               {{series1({1}), 0}});
    CHECK_THROWS_AS(imperceptible_distance(d, 10.0), DataError);
}

TEST_CASE("a constant split falls back to the quantization floor width") {
    Dataset d = inline_dataset({{series1({5, 5, 5}), 0}, {series1({5, 5, 5}), 1}},
                               {{series1({5, 5, 5}), 0}, {series1({5, 5, 5}), 1}});
    CHECK(imperceptible_distance(d, 10.0) == 0.0);
    LstmParams p = init_params(1, 3, 2, 1);
    IWfa a = extract(p, d, {});
    CHECK(a.intervalWidth == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("worked execution instance lands on the exact dyadic distribution") {
    IWfa a = worked_instance();
    std::vector<IntervalKey> keys = {{0}, {1}, {2}};
    ExecResult r = execute_intervals(a, keys);
    REQUIRE(r.classProbs.size() == 2);
    CHECK(std::abs(r.classProbs(0) - 73.0 / 256.0) <= 1e-12);
    CHECK(std::abs(r.classProbs(1) - 183.0 / 256.0) <= 1e-12);
    CHECK_FALSE(r.deadPath);
    REQUIRE(r.stateHistory.size() == 3);
    for (const Vector& dist : r.stateHistory)
        CHECK(std::abs(dist.sum() - 1.0) <= 1e-12);
}

TEST_CASE("unseen intervals resolve to the nearest seen key") {
    IWfa a;
    a.intervalWidth = 1.0;
    a.numClasses = 2;
    a.featureDim = 1;
    a.states.resize(3);
    a.init = Vector::Zero(3);
    a.init(0) = 1.0;
    TransferMatrix toOne, toTwo;
    toOne.rows = {row({{1, 1.0}}), row({{1, 1.0}}), row({})};
    toTwo.rows = {row({{2, 1.0}}), row({}), row({{2, 1.0}})};
    a.transfer[{0}] = toOne;
    a.transfer[{10}] = toTwo;
    a.output.resize(3, 2);
    a.output << 0.5, 0.5, 1.0, 0.0, 0.0, 1.0;

    auto probs = [&](long long q) {
        std::vector<IntervalKey> keys = {{q}};
        return execute_intervals(a, keys).classProbs;
    };
    CHECK(probs(2)(0) == 1.0);   // closer to key 0
    CHECK(probs(6)(1) == 1.0);   // closer to key 10
    CHECK(probs(5)(0) == 1.0);   // tie: lexicographically smaller key wins
    CHECK(probs(-3)(0) == 1.0);
    CHECK(probs(40)(1) == 1.0);
}

TEST_CASE("a zeroed distribution is a flagged dead path with uniform output") {
    IWfa a;
    a.intervalWidth = 1.0;
    a.numClasses = 2;
    a.featureDim = 1;
    a.states.resize(2);
    a.init = Vector::Zero(2);
    a.init(0) = 1.0;
    TransferMatrix hop;
    hop.rows = {row({{1, 1.0}}), row({})};  // state 1 has nowhere to go
    a.transfer[{0}] = hop;
    a.output.resize(2, 2);
    a.output << 1.0, 0.0, 0.0, 1.0;

    std::vector<IntervalKey> keys = {{0}, {0}};
    ExecResult r = execute_intervals(a, keys);
    CHECK(r.deadPath);
    CHECK(r.classProbs(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.classProbs(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("extraction produces a row-stochastic, deterministic automaton") {
    for (std::uint64_t seed : {101ULL, 202ULL}) {
        Dataset d = make_toy(6, 8, seed);
        TrainConfig cfg;
        cfg.hiddenSize = 6;
        cfg.epochs = 80;
        cfg.learningRate = 0.3;
        LstmParams p = train(d, cfg);
        IWfa a = extract(p, d, {});

        CHECK(a.intervalWidth > 0.0);
        CHECK(a.states.size() >= 2);
        CHECK(a.states[0].topLabels.empty());  // initial pseudo-state
        CHECK(a.init(0) == 1.0);
        CHECK(a.init.sum() == 1.0);
        for (const auto& [key, tm] : a.transfer) {
            CHECK(key.size() == 1);
            REQUIRE(tm.rows.size() == a.states.size());
            for (const SparseRow& r : tm.rows) {
                if (r.entries.empty()) continue;
                double sum = 0;
                int prev = -1;
                for (auto& [state, w] : r.entries) {
                    CHECK(w > 0.0);
                    CHECK(state > prev);  // ascending, unique
                    CHECK(state < static_cast<int>(a.states.size()));
                    prev = state;
                    sum += w;
                }
                CHECK(std::abs(sum - 1.0) <= 1e-12);
            }
        }
        for (int s = 0; s < a.output.rows(); ++s) {
            CHECK(a.output.row(s).minCoeff() >= 0.0);
            CHECK(std::abs(a.output.row(s).sum() - 1.0) <= 1e-12);
        }

        // execution: simplex in, simplex out, and stable across runs
        int agree = 0;
        for (const TimeSeries& s : d.test) {
            ExecResult r = execute(a, s.values);
            CHECK(r.classProbs.minCoeff() >= 0.0);
            CHECK(std::abs(r.classProbs.sum() - 1.0) <= 1e-12);
            if (!r.deadPath)
                for (const Vector& dist : r.stateHistory)
                    CHECK(std::abs(dist.sum() - 1.0) <= 1e-9);
            CHECK(predict(a, s.values) == predict(a, s.values));
            agree += predict(a, s.values) == predict(p, s.values);
        }
        // representation fidelity on the extraction set
        CHECK(agree >= static_cast<int>(d.test.size()) / 2);
    }
}

TEST_CASE("series sharing every interval share the prediction") {
    Dataset d = make_toy(6, 8, 55);
    TrainConfig cfg;
    cfg.hiddenSize = 6;
    cfg.epochs = 80;
    cfg.learningRate = 0.3;
    LstmParams p = train(d, cfg);
    IWfa a = extract(p, d, {});

    for (const TimeSeries& s : d.test) {
        Matrix norm = a.norm.apply(s.values);
        Matrix centered = norm;
        for (int t = 0; t < norm.rows(); ++t)
            for (int f = 0; f < norm.cols(); ++f) {
                auto q = static_cast<long long>(std::floor(norm(t, f) / a.intervalWidth));
                centered(t, f) = (static_cast<double>(q) + 0.5) * a.intervalWidth;
            }
        Matrix raw2 = a.norm.invert(centered);
        for (int t = 0; t < norm.rows(); ++t)
            REQUIRE(interval_key(a, a.norm.apply(Matrix(raw2.row(t))).row(0).transpose()) ==
                    interval_key(a, norm.row(t).transpose()));
        CHECK(predict(a, raw2) == predict(a, s.values));
    }
}

TEST_CASE("automaton json round-trips exactly and re-saves byte-identically") {
    auto dir = fs::temp_directory_path() / "tsfool_test_iwfa";
    fs::remove_all(dir);
    fs::create_directories(dir);

    Dataset d = make_toy(5, 6, 99);
    TrainConfig cfg;
    cfg.hiddenSize = 5;
    cfg.epochs = 60;
    cfg.learningRate = 0.3;
    LstmParams p = train(d, cfg);
    IWfa a = extract(p, d, {});
    save_automaton(a, dir / "a.json");
    IWfa b = load_automaton(dir / "a.json");

    CHECK(b.intervalWidth == a.intervalWidth);
    CHECK(b.numClasses == a.numClasses);
    CHECK(b.featureDim == a.featureDim);
    CHECK(b.fallbackPolicy == a.fallbackPolicy);
    CHECK(b.states == a.states);
    CHECK((b.init.array() == a.init.array()).all());
    CHECK((b.output.array() == a.output.array()).all());
    CHECK((b.norm.offset.array() == a.norm.offset.array()).all());
    CHECK((b.norm.scale.array() == a.norm.scale.array()).all());
    REQUIRE(b.transfer.size() == a.transfer.size());
    for (const auto& [key, tm] : a.transfer) {
        auto it = b.transfer.find(key);
        REQUIRE(it != b.transfer.end());
        REQUIRE(it->second.rows.size() == tm.rows.size());
        for (size_t r = 0; r < tm.rows.size(); ++r)
            CHECK(it->second.rows[r].entries == tm.rows[r].entries);
    }

    save_automaton(b, dir / "b.json");
    std::ifstream f1(dir / "a.json", std::ios::binary), f2(dir / "b.json", std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    CHECK_FALSE(s1.empty());

    CHECK_THROWS_AS(load_automaton(dir / "absent.json"), DataError);
    {
        std::ofstream junk(dir / "junk.json", std::ios::binary);
        junk << "{\"format\": \"something-else\"}";
    }
    CHECK_THROWS_AS(load_automaton(dir / "junk.json"), DataError);
}
