#include "tsfool/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace tsfool {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<int> rnn_predictions(const LstmParams& p, const Dataset& d) {
    std::vector<int> preds;
    preds.reserve(d.test.size());
    for (const TimeSeries& ts : d.test) preds.push_back(predict(p, ts.values));
    return preds;
}

Vector direction_max(const Matrix& dir) {
    return dir.cwiseAbs().colwise().maxCoeff();
}

void validate_attack_config(const AttackConfig& cfg, int numClasses) {
    if (cfg.eps <= 0) throw UsageError("eps must be positive");
    if (cfg.keepProb < 0 || cfg.keepProb > 1)
        throw UsageError("keep probability must lie in [0, 1]");
    if (cfg.candidatesPerPair < 1) throw UsageError("candidates per pair must be >= 1");
    if (cfg.maxSamplingIters < 1) throw UsageError("max sampling iterations must be >= 1");
    if (cfg.interiorPoints < 1) throw UsageError("interior points must be >= 1");
    if (cfg.target && (*cfg.target < 0 || *cfg.target >= numClasses))
        throw UsageError("target class out of range");
}

bool candidate_success(int pred, int trueLabel, const std::optional<int>& target) {
    return target ? pred == *target : pred != trueLabel;
}

// Shared pair-generation engine for standard and extended modes.
AdversarialBatch run_tsfool(const LstmParams& p, const IWfa& a, const Dataset& d,
                            const AttackConfig& cfg, bool extended) {
    validate_attack_config(cfg, p.numClasses);
    AdversarialBatch b;
    b.method = extended ? "tsfool-ext" : "tsfool";
    b.datasetName = d.name;
    b.scope = extended ? "all" : "tps";
    b.config = cfg;
    b.config.extended = extended;
    b.epsStep = cfg.eps * domain_ranges(d).featureRange();

    const std::vector<int> preds = rnn_predictions(p, d);
    const std::vector<int> vns = capture_vns(p, a, d, cfg.target);
    if (vns.empty()) {
        b.warning = "no vulnerable samples captured; empty batch";
        return b;
    }

    // (vnsIndex, tpsIndex) pairs in deterministic order.
    std::vector<std::pair<int, int>> matched;
    if (!extended) {
        for (int v : vns) {
            std::optional<int> t = pick_tps(d, preds, v);
            if (!t)
                b.skipped.push_back({v, -1, "no eligible target positive sample"});
            else
                matched.emplace_back(v, *t);
        }
    } else {
        for (int i = 0; i < static_cast<int>(d.test.size()); ++i) {
            if (preds[i] != d.test[i].label) continue;  // TPS must be correct
            int bestV = -1;
            double bestDist = 0;
            for (int v : vns) {
                if (d.test[v].label != d.test[i].label) continue;
                double dist = (d.test[v].values - d.test[i].values).norm();
                if (bestV < 0 || dist < bestDist) {
                    bestV = v;
                    bestDist = dist;
                }
            }
            if (bestV < 0)
                b.skipped.push_back({-1, i, "no same-class vulnerable sample"});
            else
                matched.emplace_back(bestV, i);
        }
    }

    const int n = extended ? 1 : cfg.candidatesPerPair;
    Classifier classify = [&p](const Matrix& x) { return predict(p, x); };
    for (const auto& [v, t] : matched) {
        const Matrix& tpsVals = d.test[t].values;
        const Matrix& vnsVals = d.test[v].values;
        const auto t0 = std::chrono::steady_clock::now();
        SamplingResult sr = interpolation_sampling(classify, tpsVals, vnsVals, b.epsStep,
                                                   cfg.interiorPoints, cfg.maxSamplingIters);
        if (sr.status != SamplingResult::Status::ok) {
            b.skipped.push_back({v, t,
                                 sr.status == SamplingResult::Status::noBoundary
                                     ? "no decision boundary on the segment"
                                     : "sampling iteration limit reached"});
            continue;
        }
        VnsTpsPair pair;
        pair.pairId = static_cast<int>(b.pairs.size());
        pair.vnsIndex = v;
        pair.tpsIndex = t;
        pair.trueClass = d.test[t].label;
        pair.adversarialClass = preds[v];
        pair.boundaryPoint = sr.boundary;
        pair.lambda = sr.lambda;
        pair.samplingIters = sr.iterations;

        std::vector<Candidate> cands =
            add_random_masking_noise(sr.boundary, tpsVals, vnsVals, b.epsStep, n,
                                     cfg.keepProb, cfg.seed ^ static_cast<std::uint64_t>(pair.pairId));
        for (Candidate& c : cands) {
            c.pairId = pair.pairId;
            c.trueLabel = pair.trueClass;
            c.rnnPred = predict(p, c.values);
            c.success = candidate_success(c.rnnPred, c.trueLabel, cfg.target);
            b.candidates.push_back(std::move(c));
        }
        pair.genSeconds = seconds_since(t0);
        b.totalGenSeconds += pair.genSeconds;
        b.pairs.push_back(std::move(pair));
    }
    if (b.pairs.empty() && b.warning.empty())
        b.warning = "all captured pairs were skipped";
    return b;
}

}  // namespace

std::vector<int> capture_vns(const LstmParams& p, const IWfa& a, const Dataset& d,
                             std::optional<int> target) {
    if (d.test.empty()) throw DataError("capture_vns: empty test split");
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(d.test.size()); ++i) {
        const TimeSeries& ts = d.test[i];
        const int rnnPred = predict(p, ts.values);
        if (rnnPred == ts.label) continue;
        if (target && rnnPred != *target) continue;
        if (predict(a, ts.values) == ts.label) out.push_back(i);
    }
    return out;
}

std::optional<int> pick_tps(const Dataset& d, std::span<const int> rnnPreds,
                            int vnsIndex) {
    if (vnsIndex < 0 || vnsIndex >= static_cast<int>(d.test.size()))
        throw UsageError("pick_tps: vns index out of range");
    const TimeSeries& vns = d.test[vnsIndex];
    int best = -1;
    double bestDist = 0;
    for (int i = 0; i < static_cast<int>(d.test.size()); ++i) {
        if (d.test[i].label != vns.label || rnnPreds[i] != vns.label) continue;
        double dist = (d.test[i].values - vns.values).norm();
        if (best < 0 || dist < bestDist) {  // strict: smaller index wins ties
            best = i;
            bestDist = dist;
        }
    }
    if (best < 0) return std::nullopt;
    return best;
}

SamplingResult interpolation_sampling(const Classifier& classify, const Matrix& tps,
                                      const Matrix& vns, const Vector& epsStep,
                                      int interiorPoints, int maxIters) {
    if (tps.rows() != vns.rows() || tps.cols() != vns.cols())
        throw UsageError("interpolation_sampling: endpoint shape mismatch");
    if ((tps.array() == vns.array()).all())
        throw UsageError("interpolation_sampling: identical endpoints");
    if (interiorPoints < 1 || maxIters < 1)
        throw UsageError("interpolation_sampling: invalid sampling parameters");

    const Matrix dir = vns - tps;
    const Vector dirMax = direction_max(dir);
    auto at = [&](double lam) -> Matrix { return tps + lam * dir; };

    SamplingResult res;
    const int classA = classify(tps);
    if (classify(vns) == classA) {
        res.status = SamplingResult::Status::noBoundary;
        return res;
    }

    double lamPos = 0.0, lamNeg = 1.0;
    auto closeEnough = [&]() {
        const double gap = lamNeg - lamPos;
        for (int f = 0; f < dirMax.size(); ++f) {
            const double span = gap * dirMax[f];
            if (epsStep[f] > 0 ? span >= epsStep[f] : span > 0) return false;
        }
        return true;
    };

    while (!closeEnough()) {
        if (res.iterations >= maxIters) {
            res.status = SamplingResult::Status::maxIters;
            return res;
        }
        ++res.iterations;
        const double width = (lamNeg - lamPos) / (interiorPoints + 1);
        double prev = lamPos;
        bool shrunk = false;
        for (int m = 1; m <= interiorPoints; ++m) {
            const double lam = lamPos + m * width;
            if (classify(at(lam)) != classA) {  // first change from the TPS side
                lamPos = prev;
                lamNeg = lam;
                shrunk = true;
                break;
            }
            prev = lam;
        }
        if (!shrunk) lamPos = prev;  // every probe was class A; keep lamNeg
    }
    res.boundary = at(lamPos);
    res.lambda = lamPos;
    res.lambdaNeg = lamNeg;
    return res;
}

std::vector<Candidate> add_random_masking_noise(const Matrix& xm, const Matrix& tps,
                                                const Matrix& vns, const Vector& epsStep,
                                                int n, double keepProb, std::uint64_t seed) {
    const Matrix dir = vns - tps;
    const Vector dirMax = direction_max(dir);
    Matrix noise = Matrix::Zero(dir.rows(), dir.cols());
    for (int f = 0; f < dir.cols(); ++f)
        if (dirMax[f] > 0) noise.col(f) = dir.col(f) * (epsStep[f] / dirMax[f]);

    Rng rng(seed);
    std::vector<Candidate> out;
    out.reserve(n);
    for (int c = 0; c < n; ++c) {
        Candidate cand;
        cand.candidateId = c;
        cand.values = xm;
        cand.mask.resize(xm.rows());
        for (int t = 0; t < xm.rows(); ++t) {
            const bool keep = rng.bernoulli(keepProb);
            cand.mask[t] = keep ? 1 : 0;
            if (keep) cand.values.row(t) += noise.row(t);
        }
        out.push_back(std::move(cand));
    }
    return out;
}

AdversarialBatch tsfool(const LstmParams& p, const IWfa& a, const Dataset& d,
                        const AttackConfig& cfg) {
    return run_tsfool(p, a, d, cfg, /*extended=*/false);
}

AdversarialBatch tsfool_extended(const LstmParams& p, const IWfa& a, const Dataset& d,
                                 const AttackConfig& cfg) {
    return run_tsfool(p, a, d, cfg, /*extended=*/true);
}

namespace {

inline double sign_of(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

// Targeted attacks step toward the target class (gradient descent on its
// loss); untargeted ones step away from the true label.
Matrix signed_step(const LstmParams& p, const Matrix& x, int label,
                   const std::optional<int>& target, const Vector& stepAbs) {
    const Matrix g = input_gradient(p, x, target.value_or(label));
    const double flip = target ? -1.0 : 1.0;
    Matrix out = x;
    for (int t = 0; t < x.rows(); ++t)
        for (int f = 0; f < x.cols(); ++f)
            out(t, f) += flip * stepAbs[f] * sign_of(g(t, f));
    return out;
}

}  // namespace

Matrix fgsm(const LstmParams& p, const Matrix& x, int label, const Vector& epsAbs) {
    return signed_step(p, x, label, std::nullopt, epsAbs);
}

Matrix pgd(const LstmParams& p, const Matrix& x, int label, const Vector& epsAbs,
           const Vector& stepAbs, int maxIter) {
    if (maxIter < 1) throw UsageError("pgd: maxIter must be >= 1");
    Matrix cur = x;
    for (int it = 0; it < maxIter; ++it) {
        cur = signed_step(p, cur, label, std::nullopt, stepAbs);
        for (int t = 0; t < x.rows(); ++t)
            for (int f = 0; f < x.cols(); ++f)
                cur(t, f) = std::clamp(cur(t, f), x(t, f) - epsAbs[f], x(t, f) + epsAbs[f]);
    }
    return cur;
}

namespace {

Matrix pgd_directed(const LstmParams& p, const Matrix& x, int label,
                    const std::optional<int>& target, const Vector& epsAbs,
                    const Vector& stepAbs, int maxIter) {
    Matrix cur = x;
    for (int it = 0; it < maxIter; ++it) {
        cur = signed_step(p, cur, label, target, stepAbs);
        for (int t = 0; t < x.rows(); ++t)
            for (int f = 0; f < x.cols(); ++f)
                cur(t, f) = std::clamp(cur(t, f), x(t, f) - epsAbs[f], x(t, f) + epsAbs[f]);
    }
    return cur;
}

}  // namespace

AdversarialBatch run_baseline(const LstmParams& p, const IWfa* a, const Dataset& d,
                              const BaselineConfig& cfg) {
    if (cfg.method != "fgsm" && cfg.method != "pgd")
        throw UsageError("baseline method must be fgsm or pgd");
    if (cfg.eps <= 0 || cfg.epsStep <= 0) throw UsageError("baseline eps must be positive");
    if (cfg.maxIter < 1) throw UsageError("baseline maxIter must be >= 1");
    if (cfg.scope != "all" && cfg.scope != "tps")
        throw UsageError("scope must be 'all' or 'tps'");
    if (cfg.target && (*cfg.target < 0 || *cfg.target >= p.numClasses))
        throw UsageError("target class out of range");

    AdversarialBatch b;
    b.method = cfg.method;
    b.datasetName = d.name;
    b.scope = cfg.scope;
    b.baseline = cfg;
    b.config.eps = cfg.eps;
    b.config.target = cfg.target;
    b.config.seed = cfg.seed;
    b.config.candidatesPerPair = 1;

    const Vector range = domain_ranges(d).featureRange();
    const Vector epsAbs = cfg.eps * range;
    const Vector stepAbs = cfg.epsStep * range;
    b.epsStep = epsAbs;

    std::vector<int> indices;
    if (cfg.scope == "all") {
        for (int i = 0; i < static_cast<int>(d.test.size()); ++i) indices.push_back(i);
    } else {
        if (!a) throw UsageError("tps scope needs an automaton");
        const std::vector<int> preds = rnn_predictions(p, d);
        std::vector<char> isTps(d.test.size(), 0);
        for (int v : capture_vns(p, *a, d, cfg.target))
            if (auto t = pick_tps(d, preds, v)) isTps[*t] = 1;
        for (int i = 0; i < static_cast<int>(d.test.size()); ++i)
            if (isTps[i]) indices.push_back(i);
        if (indices.empty()) b.warning = "no target positive samples captured; empty batch";
    }

    for (int idx : indices) {
        const TimeSeries& ts = d.test[idx];
        if (cfg.target && ts.label == *cfg.target) continue;  // vacuous target
        const auto t0 = std::chrono::steady_clock::now();
        Matrix adv;
        if (cfg.method == "fgsm" && !cfg.target)
            adv = fgsm(p, ts.values, ts.label, epsAbs);
        else if (cfg.method == "fgsm")
            adv = pgd_directed(p, ts.values, ts.label, cfg.target, epsAbs, epsAbs, 1);
        else
            adv = pgd_directed(p, ts.values, ts.label, cfg.target, epsAbs, stepAbs,
                               cfg.maxIter);

        VnsTpsPair pair;
        pair.pairId = static_cast<int>(b.pairs.size());
        pair.vnsIndex = -1;
        pair.tpsIndex = idx;
        pair.trueClass = ts.label;

        Candidate c;
        c.pairId = pair.pairId;
        c.candidateId = 0;
        c.values = std::move(adv);
        c.trueLabel = ts.label;
        c.rnnPred = predict(p, c.values);
        c.success = candidate_success(c.rnnPred, c.trueLabel, cfg.target);
        pair.adversarialClass = c.success ? c.rnnPred : -1;
        pair.genSeconds = seconds_since(t0);
        b.totalGenSeconds += pair.genSeconds;
        b.pairs.push_back(std::move(pair));
        b.candidates.push_back(std::move(c));
    }
    return b;
}

}  // namespace tsfool
