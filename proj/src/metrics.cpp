#include "tsfool/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tsfool {

Norm parse_norm(std::string_view s) {
    if (s == "l1") return Norm::l1;
    if (s == "l2") return Norm::l2;
    if (s == "linf") return Norm::linf;
    throw UsageError("unknown norm '" + std::string(s) + "' (expected l1, l2 or linf)");
}

std::string norm_name(Norm n) {
    switch (n) {
        case Norm::l1: return "l1";
        case Norm::l2: return "l2";
        default: return "linf";
    }
}

double series_norm(const Matrix& m, Norm norm) {
    switch (norm) {
        case Norm::l1: return m.cwiseAbs().sum();
        case Norm::l2: return m.norm();
        default: return m.cwiseAbs().maxCoeff();
    }
}

ClassStats class_stats(const Dataset& d) {
    if (d.test.empty()) throw DataError("class_stats: empty test split");
    ClassStats s;
    s.mean.assign(d.numClasses, Matrix::Zero(d.seriesLength, d.featureDim));
    s.radius.assign(d.numClasses, 0.0);
    s.count.assign(d.numClasses, 0);
    for (const TimeSeries& ts : d.test) {
        s.mean[ts.label] += ts.values;
        ++s.count[ts.label];
    }
    for (int c = 0; c < d.numClasses; ++c) {
        if (s.count[c] == 0)
            throw DataError("class_stats: class " + std::to_string(c) +
                            " has no test samples");
        s.mean[c] /= static_cast<double>(s.count[c]);
    }
    for (const TimeSeries& ts : d.test)
        s.radius[ts.label] += (ts.values - s.mean[ts.label]).norm();
    for (int c = 0; c < d.numClasses; ++c)
        s.radius[c] /= static_cast<double>(s.count[c]);
    return s;
}

double camouflage_coefficient(const Matrix& xStar, int trueClass, int predClass,
                              const ClassStats& stats) {
    const int k = static_cast<int>(stats.mean.size());
    if (trueClass < 0 || trueClass >= k || predClass < 0 || predClass >= k)
        throw UsageError("camouflage_coefficient: class id out of range");
    const double ri = stats.radius[trueClass];
    const double rj = stats.radius[predClass];
    if (ri <= 0 || rj <= 0)
        throw NumericError("camouflage_coefficient: undefined class radius");
    const double di = (xStar - stats.mean[trueClass]).norm() / ri;
    const double dj = (xStar - stats.mean[predClass]).norm() / rj;
    if (dj == 0.0) return std::numeric_limits<double>::infinity();
    return di / dj;
}

double perturbation_ratio(const Matrix& adv, const Matrix& original, Norm norm) {
    const double base = series_norm(original, norm);
    if (base == 0.0)
        throw NumericError("perturbation_ratio: original series has zero norm");
    return series_norm(adv - original, norm) / base;
}

double domain_perturbation_ratio(const Matrix& adv, const Matrix& original,
                                 const DomainRanges& ranges, Norm norm) {
    double denom = 0.0;
    for (int t = 0; t < ranges.stepMin.rows(); ++t)
        denom += series_norm(ranges.stepMax.row(t) - ranges.stepMin.row(t), norm);
    if (denom == 0.0)
        throw NumericError("domain_perturbation_ratio: degenerate domain (zero width)");
    return series_norm(adv - original, norm) / denom;
}

DtwResult dtw(const Matrix& a, const Matrix& b, Norm pointNorm) {
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(b.rows());
    if (n == 0 || m == 0) throw DataError("dtw: empty series");
    if (a.cols() != b.cols()) throw DataError("dtw: feature dimension mismatch");

    auto dist = [&](int i, int j) {
        return series_norm(a.row(i) - b.row(j), pointNorm);
    };
    constexpr double kInf = std::numeric_limits<double>::infinity();
    Matrix M = Matrix::Constant(n, m, kInf);
    M(0, 0) = dist(0, 0);
    for (int i = 1; i < n; ++i) M(i, 0) = M(i - 1, 0) + dist(i, 0);
    for (int j = 1; j < m; ++j) M(0, j) = M(0, j - 1) + dist(0, j);
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < m; ++j)
            M(i, j) = dist(i, j) + std::min({M(i - 1, j - 1), M(i, j - 1), M(i - 1, j)});

    DtwResult res;
    res.distance = M(n - 1, m - 1);
    // Backtrack; ties prefer diagonal, then left (j-1), then down (i-1).
    int i = n - 1, j = m - 1;
    res.path.emplace_back(i, j);
    while (i > 0 || j > 0) {
        if (i == 0) {
            --j;
        } else if (j == 0) {
            --i;
        } else {
            const double diag = M(i - 1, j - 1), left = M(i, j - 1), down = M(i - 1, j);
            if (diag <= left && diag <= down) {
                --i;
                --j;
            } else if (left <= down) {
                --j;
            } else {
                --i;
            }
        }
        res.path.emplace_back(i, j);
    }
    std::reverse(res.path.begin(), res.path.end());
    return res;
}

double attack_success_rate(const AdversarialBatch& b) {
    if (b.candidates.empty()) return 0.0;
    int s = 0;
    for (const Candidate& c : b.candidates) s += c.success ? 1 : 0;
    return static_cast<double>(s) / static_cast<double>(b.candidates.size());
}

AttackReport build_report(const AdversarialBatch& b, const Dataset& d,
                          const LstmParams& p, Norm norm) {
    AttackReport r;
    r.datasetName = b.datasetName.empty() ? d.name : b.datasetName;
    r.method = b.method;
    r.scope = b.scope;
    r.norm = norm_name(norm);
    r.seed = b.config.seed;
    r.generated = static_cast<int>(b.candidates.size());
    r.meanTimePerSample =
        b.candidates.empty() ? 0.0
                             : b.totalGenSeconds / static_cast<double>(b.candidates.size());

    std::vector<const VnsTpsPair*> pairById;
    for (const VnsTpsPair& pr : b.pairs) {
        if (pr.pairId >= static_cast<int>(pairById.size()))
            pairById.resize(pr.pairId + 1, nullptr);
        pairById[pr.pairId] = &pr;
    }

    ClassStats stats = class_stats(d);
    DomainRanges ranges = domain_ranges(d);

    double ccSum = 0, rhoSum = 0, rhoStarSum = 0, dtwSum = 0;
    int successCount = 0;
    // Per-pair minimum DTW over that pair's successful candidates.
    std::map<int, double> minDtwPerPair;
    for (const Candidate& c : b.candidates) {
        if (!c.success) continue;
        const VnsTpsPair* pr = pairById.at(c.pairId);
        if (!pr) throw DataError("batch references unknown pair " + std::to_string(c.pairId));
        const Matrix& original = d.test.at(pr->tpsIndex).values;
        ++successCount;
        ccSum += camouflage_coefficient(c.values, c.trueLabel, c.rnnPred, stats);
        rhoSum += perturbation_ratio(c.values, original, norm);
        rhoStarSum += domain_perturbation_ratio(c.values, original, ranges, norm);
        const double dd = dtw(c.values, original).distance;
        dtwSum += dd;
        auto [it, inserted] = minDtwPerPair.emplace(c.pairId, dd);
        if (!inserted) it->second = std::min(it->second, dd);
    }
    r.successful = successCount;
    r.asr = attack_success_rate(b);
    if (successCount > 0) {
        r.meanCc = ccSum / successCount;
        r.meanRho = rhoSum / successCount;
        r.meanRhoStar = rhoStarSum / successCount;
        r.meanDtw = dtwSum / successCount;
        double mm = 0;
        for (const auto& [id, v] : minDtwPerPair) mm += v;
        r.meanMinDtw = mm / static_cast<double>(minDtwPerPair.size());
    }
    (void)p;  // predictions are already recorded per candidate
    return r;
}

AttackReport eval_persisted(const std::filesystem::path& csvFile,
                            const std::filesystem::path& sidecarFile,
                            const Dataset& d, const LstmParams& p, Norm norm) {
    AdversarialBatch b = load_batch(csvFile, sidecarFile);
    const bool targeted = b.config.target.has_value();
    for (Candidate& c : b.candidates) {
        c.rnnPred = predict(p, c.values);
        c.success = targeted ? (c.rnnPred == *b.config.target)
                             : (c.rnnPred != c.trueLabel);
    }
    return build_report(b, d, p, norm);
}

}  // namespace tsfool
