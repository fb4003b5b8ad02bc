#pragma once

#include "tsfool/attack.hpp"

namespace tsfool {

enum class Norm { l1, l2, linf };
Norm parse_norm(std::string_view s);
std::string norm_name(Norm n);

// Per-class mean series and mean distance-to-mean over the raw test split.
struct ClassStats {
    std::vector<Matrix> mean;    // k matrices, T x D
    std::vector<double> radius;  // k, mean L2 distance to the class mean
    std::vector<int> count;
};
ClassStats class_stats(const Dataset& d);

// Relative distance to the true class i versus the predicted class j:
// (||x - m_i|| / r_i) / (||x - m_j|| / r_j), L2 on flattened series.
// r == 0 is an undefined-radius error; x == m_j yields +inf.
double camouflage_coefficient(const Matrix& xStar, int trueClass, int predClass,
                              const ClassStats& stats);

double series_norm(const Matrix& m, Norm norm);
double perturbation_ratio(const Matrix& adv, const Matrix& original, Norm norm);

// ||delta|| / sum over steps of the per-step domain width under the norm.
double domain_perturbation_ratio(const Matrix& adv, const Matrix& original,
                                 const DomainRanges& ranges, Norm norm);

struct DtwResult {
    double distance = 0.0;
    std::vector<std::pair<int, int>> path;  // warping path, (i, j) 0-based
};
DtwResult dtw(const Matrix& a, const Matrix& b, Norm pointNorm = Norm::l2);

double attack_success_rate(const AdversarialBatch& b);

struct AttackReport {
    std::string datasetName;
    std::string method;
    std::string scope;
    std::string norm = "l2";
    std::uint64_t seed = 0;
    int generated = 0;
    int successful = 0;
    double asr = 0.0;
    double meanTimePerSample = 0.0;
    // Means over successful candidates; unset when none succeeded.
    std::optional<double> meanCc;
    std::optional<double> meanRho;
    std::optional<double> meanRhoStar;
    std::optional<double> meanDtw;
    // Mean over pairs of the minimum candidate DTW (tsfool); mean DTW otherwise.
    std::optional<double> meanMinDtw;
};

// Recomputes every metric from the batch contents against the raw dataset.
AttackReport build_report(const AdversarialBatch& b, const Dataset& d,
                          const LstmParams& p, Norm norm);

// Loads a persisted batch, re-runs the model on every candidate and rebuilds
// the report from scratch (timings come from the sidecar).
AttackReport eval_persisted(const std::filesystem::path& csvFile,
                            const std::filesystem::path& sidecarFile,
                            const Dataset& d, const LstmParams& p, Norm norm);

void save_report_json(const AttackReport& r, const std::filesystem::path& file);
AttackReport load_report_json(const std::filesystem::path& file);

// Appends one row to a shared summary CSV (header written when absent):
// dataset,method,asr,n,time_s,rho,rho_star,cc,dtw,norm,scope,seed
void append_summary_row(const AttackReport& r, const std::filesystem::path& file);

}  // namespace tsfool
