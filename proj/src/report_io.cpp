#include <json.hpp>

#include <fstream>
#include <sstream>

#include "tsfool/metrics.hpp"
#include "tsfool/retrain.hpp"

namespace tsfool {
namespace {

using json = nlohmann::ordered_json;

json config_json(const AttackConfig& c) {
    json j;
    j["eps"] = c.eps;
    j["keep_prob"] = c.keepProb;
    j["candidates_per_pair"] = c.candidatesPerPair;
    j["extended"] = c.extended;
    if (c.target)
        j["target"] = *c.target;
    else
        j["target"] = nullptr;
    j["seed"] = c.seed;
    j["max_sampling_iters"] = c.maxSamplingIters;
    j["interior_points"] = c.interiorPoints;
    return j;
}

AttackConfig config_from_json(const json& j) {
    AttackConfig c;
    c.eps = j.at("eps").get<double>();
    c.keepProb = j.at("keep_prob").get<double>();
    c.candidatesPerPair = j.at("candidates_per_pair").get<int>();
    c.extended = j.at("extended").get<bool>();
    if (!j.at("target").is_null()) c.target = j.at("target").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.maxSamplingIters = j.at("max_sampling_iters").get<int>();
    c.interiorPoints = j.at("interior_points").get<int>();
    return c;
}

std::string mask_string(const std::vector<char>& mask) {
    std::string s;
    s.reserve(mask.size());
    for (char m : mask) s += m ? '1' : '0';
    return s;
}

std::vector<char> mask_from_string(const std::string& s) {
    std::vector<char> m;
    m.reserve(s.size());
    for (char c : s) m.push_back(c == '1' ? 1 : 0);
    return m;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

void save_batch_csv(const AdversarialBatch& b, const std::filesystem::path& file,
                    bool onlySuccessful) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write batch file: " + file.string());
    out << "pair_id,candidate_id,true_label,rnn_pred,success";
    long long cells = 0;
    if (!b.candidates.empty())
        cells = b.candidates.front().values.rows() * b.candidates.front().values.cols();
    for (long long i = 0; i < cells; ++i) out << ",v" << i;
    out << '\n';
    for (const Candidate& c : b.candidates) {
        if (onlySuccessful && !c.success) continue;
        out << c.pairId << ',' << c.candidateId << ',' << c.trueLabel << ','
            << c.rnnPred << ',' << (c.success ? 1 : 0);
        for (int t = 0; t < c.values.rows(); ++t)
            for (int f = 0; f < c.values.cols(); ++f)
                out << ',' << format_double(c.values(t, f));
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + file.string());
}

void save_batch_sidecar(const AdversarialBatch& b, const std::filesystem::path& file) {
    json j;
    j["format"] = "tsfool-batch-v1";
    j["method"] = b.method;
    j["dataset"] = b.datasetName;
    j["scope"] = b.scope;
    int T = 0, D = 0;
    if (!b.candidates.empty()) {
        T = static_cast<int>(b.candidates.front().values.rows());
        D = static_cast<int>(b.candidates.front().values.cols());
    }
    j["series_length"] = T;
    j["feature_dim"] = D;
    j["config"] = config_json(b.config);
    if (b.method == "fgsm" || b.method == "pgd") {
        json bl;
        bl["eps"] = b.baseline.eps;
        bl["eps_step"] = b.baseline.epsStep;
        bl["max_iter"] = b.baseline.maxIter;
        j["baseline"] = std::move(bl);
    }
    json epsStep = json::array();
    for (int f = 0; f < b.epsStep.size(); ++f)
        epsStep.push_back(format_double(b.epsStep[f]));
    j["eps_step"] = std::move(epsStep);

    json pairs = json::array();
    for (const VnsTpsPair& p : b.pairs) {
        json pj;
        pj["pair_id"] = p.pairId;
        pj["vns_index"] = p.vnsIndex;
        pj["tps_index"] = p.tpsIndex;
        pj["true_class"] = p.trueClass;
        pj["adv_class"] = p.adversarialClass;
        pj["lambda"] = format_double(p.lambda);
        pj["iterations"] = p.samplingIters;
        pj["gen_seconds"] = p.genSeconds;
        json masks = json::array();
        for (const Candidate& c : b.candidates)
            if (c.pairId == p.pairId) masks.push_back(mask_string(c.mask));
        pj["masks"] = std::move(masks);
        pairs.push_back(std::move(pj));
    }
    j["pairs"] = std::move(pairs);

    json skipped = json::array();
    for (const SkipRecord& s : b.skipped) {
        json sj;
        sj["vns_index"] = s.vnsIndex;
        sj["tps_index"] = s.tpsIndex;
        sj["reason"] = s.reason;
        skipped.push_back(std::move(sj));
    }
    j["skipped"] = std::move(skipped);
    j["total_gen_seconds"] = b.totalGenSeconds;
    if (!b.warning.empty()) j["warning"] = b.warning;

    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write sidecar file: " + file.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed: " + file.string());
}

AdversarialBatch load_batch(const std::filesystem::path& csvFile,
                            const std::filesystem::path& sidecarFile) {
    std::ifstream sc(sidecarFile, std::ios::binary);
    if (!sc) throw DataError("cannot open sidecar file: " + sidecarFile.string());
    json j;
    try {
        sc >> j;
    } catch (const json::exception& e) {
        throw DataError("sidecar JSON parse error: " + std::string(e.what()));
    }

    AdversarialBatch b;
    int T = 0, D = 1;
    try {
        if (j.at("format").get<std::string>() != "tsfool-batch-v1")
            throw DataError("unsupported batch format");
        b.method = j.at("method").get<std::string>();
        b.datasetName = j.at("dataset").get<std::string>();
        b.scope = j.at("scope").get<std::string>();
        T = j.at("series_length").get<int>();
        D = j.at("feature_dim").get<int>();
        b.config = config_from_json(j.at("config"));
        if (j.contains("baseline")) {
            b.baseline.method = b.method;
            b.baseline.eps = j["baseline"].at("eps").get<double>();
            b.baseline.epsStep = j["baseline"].at("eps_step").get<double>();
            b.baseline.maxIter = j["baseline"].at("max_iter").get<int>();
            b.baseline.scope = b.scope;
            b.baseline.target = b.config.target;
            b.baseline.seed = b.config.seed;
        }
        const json& es = j.at("eps_step");
        b.epsStep = Vector(es.size());
        for (size_t f = 0; f < es.size(); ++f)
            b.epsStep[f] = parse_double(es[f].get<std::string>());
        for (const json& pj : j.at("pairs")) {
            VnsTpsPair p;
            p.pairId = pj.at("pair_id").get<int>();
            p.vnsIndex = pj.at("vns_index").get<int>();
            p.tpsIndex = pj.at("tps_index").get<int>();
            p.trueClass = pj.at("true_class").get<int>();
            p.adversarialClass = pj.at("adv_class").get<int>();
            p.lambda = parse_double(pj.at("lambda").get<std::string>());
            p.samplingIters = pj.at("iterations").get<int>();
            p.genSeconds = pj.at("gen_seconds").get<double>();
            b.pairs.push_back(std::move(p));
        }
        for (const json& sj : j.at("skipped")) {
            SkipRecord s;
            s.vnsIndex = sj.at("vns_index").get<int>();
            s.tpsIndex = sj.at("tps_index").get<int>();
            s.reason = sj.at("reason").get<std::string>();
            b.skipped.push_back(std::move(s));
        }
        b.totalGenSeconds = j.at("total_gen_seconds").get<double>();
        if (j.contains("warning")) b.warning = j["warning"].get<std::string>();
    } catch (const json::exception& e) {
        throw DataError("sidecar JSON schema error: " + std::string(e.what()));
    }

    // Mask lookup: pair id -> list of mask strings in candidate order.
    std::map<int, std::vector<std::string>> masks;
    for (const json& pj : j.at("pairs"))
        masks[pj.at("pair_id").get<int>()] =
            pj.at("masks").get<std::vector<std::string>>();

    std::ifstream in(csvFile, std::ios::binary);
    if (!in) throw DataError("cannot open batch file: " + csvFile.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty batch file: " + csvFile.string());
    if (line.rfind("pair_id,candidate_id,true_label,rnn_pred,success", 0) != 0)
        throw DataError("batch file has unexpected header: " + csvFile.string());
    int lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv_line(line);
        if (static_cast<int>(f.size()) != 5 + T * D)
            throw DataError("batch line " + std::to_string(lineNo) + ": expected " +
                            std::to_string(5 + T * D) + " fields, got " +
                            std::to_string(f.size()));
        Candidate c;
        c.pairId = static_cast<int>(parse_double(f[0], "pair_id"));
        c.candidateId = static_cast<int>(parse_double(f[1], "candidate_id"));
        c.trueLabel = static_cast<int>(parse_double(f[2], "true_label"));
        c.rnnPred = static_cast<int>(parse_double(f[3], "rnn_pred"));
        c.success = parse_double(f[4], "success") != 0;
        c.values = Matrix(T, D);
        for (int t = 0; t < T; ++t)
            for (int ff = 0; ff < D; ++ff)
                c.values(t, ff) =
                    parse_double(f[5 + t * D + ff], "line " + std::to_string(lineNo));
        auto mit = masks.find(c.pairId);
        if (mit != masks.end() && c.candidateId < static_cast<int>(mit->second.size()))
            c.mask = mask_from_string(mit->second[c.candidateId]);
        b.candidates.push_back(std::move(c));
    }
    return b;
}

void save_report_json(const AttackReport& r, const std::filesystem::path& file) {
    json j;
    j["format"] = "tsfool-report-v1";
    j["dataset"] = r.datasetName;
    j["method"] = r.method;
    j["scope"] = r.scope;
    j["norm"] = r.norm;
    j["seed"] = r.seed;
    j["generated"] = r.generated;
    j["successful"] = r.successful;
    j["asr"] = r.asr;
    j["mean_time_per_sample"] = r.meanTimePerSample;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v)
            j[key] = format_double(*v);
        else
            j[key] = nullptr;
    };
    put("cc", r.meanCc);
    put("rho", r.meanRho);
    put("rho_star", r.meanRhoStar);
    put("dtw", r.meanDtw);
    put("min_dtw", r.meanMinDtw);
    j["class_stats_scale"] = "raw";

    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write report file: " + file.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed: " + file.string());
}

AttackReport load_report_json(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open report file: " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("report JSON parse error: " + std::string(e.what()));
    }
    AttackReport r;
    try {
        if (j.at("format").get<std::string>() != "tsfool-report-v1")
            throw DataError("unsupported report format");
        r.datasetName = j.at("dataset").get<std::string>();
        r.method = j.at("method").get<std::string>();
        r.scope = j.at("scope").get<std::string>();
        r.norm = j.at("norm").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.generated = j.at("generated").get<int>();
        r.successful = j.at("successful").get<int>();
        r.asr = j.at("asr").get<double>();
        r.meanTimePerSample = j.at("mean_time_per_sample").get<double>();
        auto get = [&](const char* key) -> std::optional<double> {
            if (j.at(key).is_null()) return std::nullopt;
            return parse_double(j.at(key).get<std::string>());
        };
        r.meanCc = get("cc");
        r.meanRho = get("rho");
        r.meanRhoStar = get("rho_star");
        r.meanDtw = get("dtw");
        r.meanMinDtw = get("min_dtw");
    } catch (const json::exception& e) {
        throw DataError("report JSON schema error: " + std::string(e.what()));
    }
    return r;
}

void append_summary_row(const AttackReport& r, const std::filesystem::path& file) {
    const bool fresh = !std::filesystem::exists(file) ||
                       std::filesystem::file_size(file) == 0;
    std::ofstream out(file, std::ios::binary | std::ios::app);
    if (!out) throw DataError("cannot write summary file: " + file.string());
    if (fresh) out << "dataset,method,asr,n,time_s,rho,rho_star,cc,dtw,norm,scope,seed\n";
    auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    out << r.datasetName << ',' << r.method << ',' << format_double(r.asr) << ','
        << r.generated << ',' << format_double(r.meanTimePerSample) << ','
        << opt(r.meanRho) << ',' << opt(r.meanRhoStar) << ',' << opt(r.meanCc) << ','
        << opt(r.meanDtw) << ',' << r.norm << ',' << r.scope << ',' << r.seed << '\n';
    if (!out) throw DataError("write failed: " + file.string());
}

void save_retrain_report(const RetrainReport& r, const std::filesystem::path& file) {
    json j;
    j["format"] = "tsfool-retrain-v1";
    j["train_error"] = r.trainError;
    j["test_error"] = r.testError;
    j["robust_error"] = r.robustError;
    j["robust_error_before"] = r.robustErrorBefore;
    j["best_standard_epoch"] = r.bestStandardEpoch;
    j["best_robust_epoch"] = r.bestRobustEpoch;
    j["adversarial_train_count"] = r.adversarialTrainCount;
    j["held_out_count"] = r.heldOutCount;
    j["degenerate"] = r.degenerate;
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write retrain report: " + file.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed: " + file.string());
}

}  // namespace tsfool
