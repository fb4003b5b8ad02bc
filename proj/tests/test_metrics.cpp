#include <doctest.h>

#include <cmath>

#include "tsfool/metrics.hpp"

using namespace tsfool;

namespace {

Matrix series1(std::initializer_list<double> vals) {
    Matrix m(static_cast<int>(vals.size()), 1);
    int t = 0;
    for (double v : vals) m(t++, 0) = v;
    return m;
}

Dataset inline_dataset(std::vector<TimeSeries> train, std::vector<TimeSeries> test) {
    Dataset d;
    d.name = "inline";
    d.train = std::move(train);
    d.test = std::move(test);
    d.numClasses = 0;
    for (const auto& s : d.test) d.numClasses = std::max(d.numClasses, s.label + 1);
    d.seriesLength = static_cast<int>(d.test[0].values.rows());
    d.featureDim = static_cast<int>(d.test[0].values.cols());
    d.originalLabels.resize(d.numClasses);
    for (int c = 0; c < d.numClasses; ++c) d.originalLabels[c] = c;
    return d;
}

// two clusters: class 0 at {0, 2}, class 1 at {10, 12}
Dataset two_clusters() {
    return inline_dataset({{series1({0}), 0}},
                          {{series1({0}), 0},
                           {series1({2}), 0},
                           {series1({10}), 1},
                           {series1({12}), 1}});
}

}  // namespace

TEST_CASE("norm names parse both ways") {
    CHECK(parse_norm("l1") == Norm::l1);
    CHECK(parse_norm("l2") == Norm::l2);
    CHECK(parse_norm("linf") == Norm::linf);
    CHECK(norm_name(Norm::linf) == "linf");
    CHECK_THROWS_AS(parse_norm("l3"), UsageError);
}

TEST_CASE("class stats cover mean, radius and counts of the test split") {
    ClassStats st = class_stats(two_clusters());
    REQUIRE(st.mean.size() == 2);
    CHECK(st.mean[0](0, 0) == 1.0);
    CHECK(st.mean[1](0, 0) == 11.0);
    CHECK(st.radius[0] == 1.0);
    CHECK(st.radius[1] == 1.0);
    CHECK(st.count[0] == 2);
    CHECK(st.count[1] == 2);
}

TEST_CASE("class stats reject a class with no test members") {
    Dataset d = inline_dataset({{series1({0}), 0}}, {{series1({0}), 0}});
    d.numClasses = 2;  // class 1 exists but never occurs in the test split
    d.originalLabels = {0.0, 1.0};
    CHECK_THROWS_AS(class_stats(d), DataError);
}

TEST_CASE("camouflage coefficient on the two-cluster hand case is 1/9") {
    ClassStats st = class_stats(two_clusters());
    // x* = 2: distance 1 to its own class center, 9 to the foreign one
    double cc = camouflage_coefficient(series1({2}), 0, 1, st);
    CHECK(std::abs(cc - 1.0 / 9.0) <= 1e-12);
    // hiding badly: x* = 11 sits on the foreign center -> +inf
    CHECK(std::isinf(camouflage_coefficient(series1({11}), 0, 1, st)));
    CHECK_THROWS_AS(camouflage_coefficient(series1({2}), 0, 5, st), UsageError);
}

TEST_CASE("camouflage coefficient is invariant under affine rescaling") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        double a = rng.uniform(0.1, 5.0);
        double b = rng.uniform(-10.0, 10.0);
        Dataset d = two_clusters();
        double x = rng.uniform(3.0, 9.0);
        double base = camouflage_coefficient(series1({x}), 0, 1, class_stats(d));
        for (auto& s : d.test) s.values = (s.values.array() * a + b).matrix();
        double mapped =
            camouflage_coefficient(series1({x * a + b}), 0, 1, class_stats(d));
        CHECK(std::abs(base - mapped) <= 1e-9 * std::max(1.0, std::abs(base)));
    }
}

TEST_CASE("a zero class radius is a numerical error") {
    // both class-0 test members coincide with the mean
    Dataset d = inline_dataset({{series1({0}), 0}},
                               {{series1({5}), 0}, {series1({5}), 0},
                                {series1({9}), 1}, {series1({11}), 1}});
    CHECK_THROWS_AS(camouflage_coefficient(series1({6}), 0, 1, class_stats(d)),
                    NumericError);
}

TEST_CASE("series norms and perturbation ratio") {
    Matrix m(2, 1);
    m << 3.0, -4.0;
    CHECK(series_norm(m, Norm::l1) == 7.0);
    CHECK(series_norm(m, Norm::l2) == 5.0);
    CHECK(series_norm(m, Norm::linf) == 4.0);

    Matrix adv(2, 1);
    adv << 3.3, -4.0;
    CHECK(perturbation_ratio(adv, m, Norm::l1) == doctest::Approx(0.3 / 7.0).epsilon(1e-12));
}

TEST_CASE("domain perturbation ratio divides by the summed step widths") {
    // test envelope: step 0 spans [0,2] (width 2), step 1 spans [5,6] (width 1)
    Dataset d = inline_dataset({{series1({0, 5}), 0}},
                               {{series1({0, 5}), 0}, {series1({2, 6}), 1}});
    DomainRanges r = domain_ranges(d);
    Matrix x = series1({1.0, 5.5});
    Matrix adv = series1({1.3, 5.5});
    double rho = domain_perturbation_ratio(adv, x, r, Norm::l1);
    CHECK(std::abs(rho - 0.1) <= 1e-12);  // 0.3 / (2 + 1)
}

TEST_CASE("dtw fixtures, symmetry and path structure") {
    CHECK(dtw(series1({0, 0}), series1({1, 1}), Norm::l1).distance == 2.0);
    // a unit shift is absorbed by warping
    CHECK(dtw(series1({0, 1, 0, 0}), series1({0, 0, 1, 0}), Norm::l1).distance == 0.0);
    CHECK(dtw(series1({1, 2, 3}), series1({1, 2, 3}), Norm::l2).distance == 0.0);

    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 2 + static_cast<int>(rng.below(6));
        int m = 2 + static_cast<int>(rng.below(6));
        Matrix a(n, 1), b(m, 1);
        for (int i = 0; i < n; ++i) a(i, 0) = rng.uniform(-3, 3);
        for (int i = 0; i < m; ++i) b(i, 0) = rng.uniform(-3, 3);
        DtwResult ab = dtw(a, b), ba = dtw(b, a);
        CHECK(std::abs(ab.distance - ba.distance) <= 1e-9);

        REQUIRE_FALSE(ab.path.empty());
        CHECK(ab.path.front() == std::pair<int, int>{0, 0});
        CHECK(ab.path.back() == std::pair<int, int>{n - 1, m - 1});
        for (size_t i = 1; i < ab.path.size(); ++i) {
            int di = ab.path[i].first - ab.path[i - 1].first;
            int dj = ab.path[i].second - ab.path[i - 1].second;
            CHECK(di >= 0);
            CHECK(dj >= 0);
            CHECK(di + dj >= 1);
            CHECK(di <= 1);
            CHECK(dj <= 1);
        }
    }
}

TEST_CASE("reports average metrics over successful candidates only") {
    Dataset d = two_clusters();
    LstmParams p = init_params(1, 3, 2, 3);

    AdversarialBatch b;
    b.method = "tsfool";
    b.datasetName = d.name;
    b.scope = "tps";
    b.epsStep = Vector::Constant(1, 0.5);
    VnsTpsPair pair;
    pair.pairId = 0;
    pair.vnsIndex = 2;
    pair.tpsIndex = 1;
    pair.trueClass = 0;
    pair.adversarialClass = 1;
    pair.boundaryPoint = series1({2});
    b.pairs.push_back(pair);
    auto mk = [&](int id, double v, bool success) {
        Candidate c;
        c.pairId = 0;
        c.candidateId = id;
        c.values = series1({v});
        c.mask = {1};
        c.trueLabel = 0;
        c.rnnPred = success ? 1 : 0;
        c.success = success;
        return c;
    };
    b.candidates = {mk(0, 2.0, true), mk(1, 4.0, true), mk(2, 99.0, false)};
    b.totalGenSeconds = 0.6;

    AttackReport r = build_report(b, d, p, Norm::l2);
    CHECK(r.generated == 3);
    CHECK(r.successful == 2);
    CHECK(r.asr == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.meanTimePerSample == doctest::Approx(0.2).epsilon(1e-12));
    // the original is the pair's tps sample (test index 1, value 2); the
    // failed candidate at 99 must not contaminate any mean
    REQUIRE(r.meanRho.has_value());
    CHECK(*r.meanRho == doctest::Approx((0.0 / 2.0 + 2.0 / 2.0) / 2).epsilon(1e-12));
    CHECK(*r.meanCc == doctest::Approx((1.0 / 9.0 + 3.0 / 7.0) / 2).epsilon(1e-12));
    CHECK(*r.meanDtw == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*r.meanMinDtw == doctest::Approx(0.0).epsilon(1e-12));

    AdversarialBatch empty;
    empty.method = "tsfool";
    AttackReport er = build_report(empty, d, p, Norm::l2);
    CHECK(er.generated == 0);
    CHECK(er.asr == 0.0);
    CHECK_FALSE(er.meanCc.has_value());
}
