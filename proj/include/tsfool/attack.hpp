#pragma once

#include <functional>
#include <optional>

#include "tsfool/iwfa.hpp"

namespace tsfool {

struct AttackConfig {
    double eps = 0.01;         // per-step budget as a fraction of feature range
    double keepProb = 0.9;     // Bernoulli keep probability per time step
    int candidatesPerPair = 20;
    bool extended = false;     // every correct test sample gets a pair (n = 1)
    std::optional<int> target; // targeted mode: required adversarial class
    std::uint64_t seed = 0;
    int maxSamplingIters = 100;
    int interiorPoints = 9;    // evenly spaced probes per sampling iteration
};

// A vulnerable negative sample matched with its target positive sample:
// RNN(tps) = trueClass, RNN(vns) = adversarialClass != trueClass, and the
// automaton classifies the vns as trueClass.
struct VnsTpsPair {
    int pairId = 0;
    int vnsIndex = 0;
    int tpsIndex = 0;
    int trueClass = 0;
    int adversarialClass = 0;
    Matrix boundaryPoint;      // x_m, the TPS-side bracket endpoint
    double lambda = 0.0;       // x_m = tps + lambda * (vns - tps)
    int samplingIters = 0;
    double genSeconds = 0.0;
};

struct Candidate {
    int pairId = 0;
    int candidateId = 0;       // ordinal within the pair == RNG draw ordinal
    Matrix values;
    std::vector<char> mask;    // one keep-flag per time step
    int trueLabel = 0;
    int rnnPred = 0;
    bool success = false;
};

struct SkipRecord {
    int vnsIndex = -1;
    int tpsIndex = -1;
    std::string reason;
};

struct BaselineConfig {
    std::string method = "fgsm";  // fgsm | pgd
    double eps = 0.1;             // fraction of per-feature test range
    double epsStep = 0.1;         // pgd step, same units
    int maxIter = 1;
    std::string scope = "all";    // all | tps (needs the automaton)
    std::optional<int> target;
    std::uint64_t seed = 0;
};

struct AdversarialBatch {
    std::string method;        // tsfool | tsfool-ext | fgsm | pgd
    std::string datasetName;
    std::string scope;         // tps | all
    AttackConfig config;
    BaselineConfig baseline;   // populated for fgsm/pgd batches
    Vector epsStep;            // absolute per-feature budget
    std::vector<VnsTpsPair> pairs;
    std::vector<Candidate> candidates;
    std::vector<SkipRecord> skipped;
    double totalGenSeconds = 0.0;
    std::string warning;       // e.g. degenerate capture
};

using Classifier = std::function<int(const Matrix&)>;

// Test indices misclassified by the RNN but classified correctly (or, in
// targeted mode, as `target`... by the RNN) by the automaton.
std::vector<int> capture_vns(const LstmParams& p, const IWfa& a, const Dataset& d,
                             std::optional<int> target);

// Nearest (L2, flattened, smaller index on ties) correctly-predicted test
// sample with the vns's true class; nullopt when none exists.
std::optional<int> pick_tps(const Dataset& d, std::span<const int> rnnPreds,
                            int vnsIndex);

struct SamplingResult {
    enum class Status { ok, noBoundary, maxIters } status = Status::ok;
    Matrix boundary;   // x_m (TPS side)
    double lambda = 0.0;
    double lambdaNeg = 1.0;  // adversarial-side bracket endpoint
    int iterations = 0;
};

// Shrinks [tps, vns] along the line until the positive/negative endpoints are
// closer than epsStep per feature (max over steps); keeps the invariant
// classify(pos) == classify(tps) != classify(neg).
SamplingResult interpolation_sampling(const Classifier& classify, const Matrix& tps,
                                      const Matrix& vns, const Vector& epsStep,
                                      int interiorPoints, int maxIters);

// n candidates: per time step keep (add noise row) with probability keepProb.
// Noise is (vns - tps) scaled so each feature's largest magnitude is epsStep.
std::vector<Candidate> add_random_masking_noise(const Matrix& xm, const Matrix& tps,
                                                const Matrix& vns, const Vector& epsStep,
                                                int n, double keepProb, std::uint64_t seed);

AdversarialBatch tsfool(const LstmParams& p, const IWfa& a, const Dataset& d,
                        const AttackConfig& cfg);

// Every correctly-predicted test sample becomes a TPS matched with its
// nearest same-class vulnerable sample; one candidate per pair.
AdversarialBatch tsfool_extended(const LstmParams& p, const IWfa& a, const Dataset& d,
                                 const AttackConfig& cfg);

Matrix fgsm(const LstmParams& p, const Matrix& x, int label, const Vector& epsAbs);

// Iterated FGSM steps of size stepAbs, each result clamped into the epsAbs
// box around x. maxIter=1 with stepAbs=epsAbs reproduces fgsm bitwise.
Matrix pgd(const LstmParams& p, const Matrix& x, int label, const Vector& epsAbs,
           const Vector& stepAbs, int maxIter);

AdversarialBatch run_baseline(const LstmParams& p, const IWfa* a, const Dataset& d,
                              const BaselineConfig& cfg);

// CSV: pair_id,candidate_id,true_label,rnn_pred,success,v0,...  (row-major
// step-by-step values, shortest round-trip strings; byte-stable).
void save_batch_csv(const AdversarialBatch& b, const std::filesystem::path& file,
                    bool onlySuccessful = false);

// JSON sidecar: config, seed, per-pair lambda/masks/timings, skip log.
void save_batch_sidecar(const AdversarialBatch& b, const std::filesystem::path& file);

AdversarialBatch load_batch(const std::filesystem::path& csvFile,
                            const std::filesystem::path& sidecarFile);

}  // namespace tsfool
