#include "tsfool/iwfa.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace tsfool {
namespace {

using json = nlohmann::ordered_json;

AbstractState abstract_state(const Vector& stepProbs, const ExtractionConfig& cfg) {
    const int k = static_cast<int>(stepProbs.size());
    const int K = std::min(cfg.topK, k);
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (stepProbs[a] != stepProbs[b]) return stepProbs[a] > stepProbs[b];
        return a < b;  // deterministic: smaller class id first on ties
    });
    AbstractState s;
    s.topLabels.assign(order.begin(), order.begin() + K);
    s.quantConf.reserve(K);
    for (int i = 0; i < K; ++i)
        s.quantConf.push_back(static_cast<int>(
            std::floor(stepProbs[s.topLabels[i]] * cfg.confLevels)));
    return s;
}

long long key_distance(const IntervalKey& a, const IntervalKey& b) {
    long long d = 0;
    for (size_t i = 0; i < a.size(); ++i) d += std::llabs(a[i] - b[i]);
    return d;
}

// Nearest seen interval by L1 index distance; lexicographically smaller wins
// ties. |Z| stays small at desk scale, so a linear scan is fine.
const TransferMatrix& resolve_interval(const IWfa& a, const IntervalKey& key) {
    auto it = a.transfer.find(key);
    if (it != a.transfer.end()) return it->second;
    const TransferMatrix* best = nullptr;
    long long bestDist = 0;
    for (const auto& [seen, tm] : a.transfer) {
        long long d = key_distance(seen, key);
        if (!best || d < bestDist) {  // map order = lexicographic, first wins ties
            best = &tm;
            bestDist = d;
        }
    }
    if (!best) throw DataError("automaton has no transfer matrices");
    return *best;
}

}  // namespace

double imperceptible_distance(const Dataset& d, double factor) {
    if (d.test.empty()) throw DataError("imperceptible_distance: empty test split");
    if (d.seriesLength < 2)
        throw DataError("imperceptible_distance: series length 1 has no adjacent steps");
    if (factor <= 0) throw UsageError("imperceptible_distance: factor must be positive");
    NormalizationStats stats = normalization_stats(d);
    double sum = 0.0;
    long long count = 0;
    for (const TimeSeries& ts : d.test) {
        Matrix norm = stats.apply(ts.values);
        for (int t = 0; t + 1 < norm.rows(); ++t) {
            sum += (norm.row(t + 1) - norm.row(t)).norm();
            ++count;
        }
    }
    return sum / static_cast<double>(count) / factor;
}

IntervalKey interval_key(const IWfa& a, const Vector& normalizedRow) {
    IntervalKey key(normalizedRow.size());
    for (int f = 0; f < normalizedRow.size(); ++f)
        key[f] = static_cast<long long>(std::floor(normalizedRow[f] / a.intervalWidth));
    return key;
}

IWfa extract(const LstmParams& p, const Dataset& d, const ExtractionConfig& cfg) {
    if (d.test.empty()) throw DataError("extract: empty test split");
    if (cfg.topK < 1 || cfg.confLevels < 1 || cfg.distanceFactor <= 0)
        throw UsageError("extract: invalid extraction config");

    IWfa a;
    a.numClasses = p.numClasses;
    a.featureDim = d.featureDim;
    a.norm = normalization_stats(d);
    a.intervalWidth = imperceptible_distance(d, cfg.distanceFactor);
    if (a.intervalWidth <= 0)
        a.intervalWidth = 1.0 / (cfg.distanceFactor * cfg.confLevels);

    // Pass 1: trace every test sample; discover abstract states in first-
    // appearance order (state 0 is the initial pseudo-state).
    a.states.push_back(AbstractState{});
    std::map<AbstractState, int> stateId;
    std::vector<std::vector<int>> stateSeqs;     // per sample: s_1..s_T
    std::vector<std::vector<IntervalKey>> keySeqs;
    std::vector<int> finalPred;
    for (const TimeSeries& ts : d.test) {
        ForwardResult fr = forward(p, ts.values);
        Matrix norm = a.norm.apply(ts.values);
        std::vector<int> seq;
        std::vector<IntervalKey> keys;
        for (int t = 0; t < ts.values.rows(); ++t) {
            AbstractState s = abstract_state(fr.trace.stepOutput.row(t).transpose(), cfg);
            auto [it, inserted] = stateId.emplace(std::move(s), 0);
            if (inserted) {
                it->second = static_cast<int>(a.states.size());
                a.states.push_back(it->first);
            }
            seq.push_back(it->second);
            keys.push_back(interval_key(a, norm.row(t).transpose()));
        }
        stateSeqs.push_back(std::move(seq));
        keySeqs.push_back(std::move(keys));
        finalPred.push_back(fr.predicted);
    }

    // Pass 2: transition counts per interval (source at step t-1, the initial
    // pseudo-state before step 0) and final-prediction counts per visit.
    const int S = static_cast<int>(a.states.size());
    std::map<IntervalKey, std::map<std::pair<int, int>, double>> counts;
    Matrix visitPred = Matrix::Zero(S, p.numClasses);
    for (size_t n = 0; n < stateSeqs.size(); ++n) {
        const auto& seq = stateSeqs[n];
        const auto& keys = keySeqs[n];
        int prev = 0;  // initial pseudo-state
        visitPred(0, finalPred[n]) += 1.0;
        for (size_t t = 0; t < seq.size(); ++t) {
            counts[keys[t]][{prev, seq[t]}] += 1.0;
            visitPred(seq[t], finalPred[n]) += 1.0;
            prev = seq[t];
        }
    }

    for (auto& [key, cell] : counts) {
        TransferMatrix tm;
        tm.rows.resize(S);
        for (const auto& [fromTo, c] : cell)
            tm.rows[fromTo.first].entries.emplace_back(fromTo.second, c);
        for (SparseRow& row : tm.rows) {
            double total = 0.0;
            for (auto& [col, w] : row.entries) total += w;
            if (total > 0)
                for (auto& [col, w] : row.entries) w /= total;
        }
        a.transfer.emplace(key, std::move(tm));
    }

    a.output = Matrix::Zero(S, p.numClasses);
    for (int s = 0; s < S; ++s) {
        double total = visitPred.row(s).sum();
        if (total > 0) a.output.row(s) = visitPred.row(s) / total;
        // States exist only when visited, so total > 0 always holds here.
    }

    a.init = Vector::Zero(S);
    a.init[0] = 1.0;
    return a;
}

ExecResult execute_intervals(const IWfa& a, std::span<const IntervalKey> keys) {
    const int S = static_cast<int>(a.states.size());
    const int k = a.numClasses;
    ExecResult res;
    Vector state = a.init;
    res.stateHistory.reserve(keys.size());
    for (const IntervalKey& key : keys) {
        const TransferMatrix& tm = resolve_interval(a, key);
        Vector next = Vector::Zero(S);
        for (int i = 0; i < S; ++i) {
            if (state[i] == 0.0) continue;
            for (const auto& [j, w] : tm.rows[i].entries) next[j] += state[i] * w;
        }
        if (next.isZero(0.0)) {  // dead path: every reachable row was empty
            res.deadPath = true;
            res.classProbs = Vector::Constant(k, 1.0 / k);
            return res;
        }
        state = std::move(next);
        res.stateHistory.push_back(state);
    }
    res.classProbs = (state.transpose() * a.output).transpose();
    return res;
}

ExecResult execute(const IWfa& a, const Matrix& rawSeries) {
    if (rawSeries.cols() != a.featureDim)
        throw DataError("execute: input has wrong feature dimension");
    Matrix norm = a.norm.apply(rawSeries);
    std::vector<IntervalKey> keys;
    keys.reserve(norm.rows());
    for (int t = 0; t < norm.rows(); ++t)
        keys.push_back(interval_key(a, norm.row(t).transpose()));
    return execute_intervals(a, keys);
}

int predict(const IWfa& a, const Matrix& rawSeries) {
    return argmax_tie_low(execute(a, rawSeries).classProbs);
}

void save_automaton(const IWfa& a, const std::filesystem::path& file) {
    json j;
    j["format"] = "tsfool-iwfa-v1";
    j["interval_width"] = format_double(a.intervalWidth);
    j["num_classes"] = a.numClasses;
    j["feature_dim"] = a.featureDim;
    j["fallback"] = a.fallbackPolicy;
    json norm;
    norm["offset"] = json::array();
    norm["scale"] = json::array();
    norm["degenerate"] = json::array();
    for (int f = 0; f < a.norm.offset.size(); ++f) {
        norm["offset"].push_back(format_double(a.norm.offset[f]));
        norm["scale"].push_back(format_double(a.norm.scale[f]));
        norm["degenerate"].push_back(static_cast<bool>(a.norm.degenerate[f]));
    }
    j["normalization"] = std::move(norm);

    json states = json::array();
    for (size_t s = 0; s < a.states.size(); ++s) {
        if (s == 0) {
            states.push_back(nullptr);  // initial pseudo-state
            continue;
        }
        json st;
        st["labels"] = a.states[s].topLabels;
        st["conf"] = a.states[s].quantConf;
        states.push_back(std::move(st));
    }
    j["states"] = std::move(states);

    json init = json::array();
    for (int i = 0; i < a.init.size(); ++i) init.push_back(format_double(a.init[i]));
    j["init"] = std::move(init);

    json transfer = json::array();
    for (const auto& [key, tm] : a.transfer) {
        json entry;
        entry["interval"] = key;
        json rows = json::array();
        for (const SparseRow& row : tm.rows) {
            json r = json::array();
            for (const auto& [col, w] : row.entries)
                r.push_back(json::array({col, format_double(w)}));
            rows.push_back(std::move(r));
        }
        entry["rows"] = std::move(rows);
        transfer.push_back(std::move(entry));
    }
    j["transfer"] = std::move(transfer);

    json output = json::array();
    for (int s = 0; s < a.output.rows(); ++s) {
        json row = json::array();
        for (int c = 0; c < a.output.cols(); ++c)
            row.push_back(format_double(a.output(s, c)));
        output.push_back(std::move(row));
    }
    j["output"] = std::move(output);

    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write automaton file: " + file.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed: " + file.string());
}

IWfa load_automaton(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open automaton file: " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("automaton JSON parse error: " + std::string(e.what()));
    }
    try {
        if (j.at("format").get<std::string>() != "tsfool-iwfa-v1")
            throw DataError("unsupported automaton format");
        IWfa a;
        a.intervalWidth = parse_double(j.at("interval_width").get<std::string>());
        a.numClasses = j.at("num_classes").get<int>();
        a.featureDim = j.at("feature_dim").get<int>();
        a.fallbackPolicy = j.at("fallback").get<std::string>();
        const json& norm = j.at("normalization");
        const size_t D = norm.at("offset").size();
        a.norm.offset = Vector(D);
        a.norm.scale = Vector(D);
        a.norm.degenerate.resize(D);
        for (size_t f = 0; f < D; ++f) {
            a.norm.offset[f] = parse_double(norm.at("offset")[f].get<std::string>());
            a.norm.scale[f] = parse_double(norm.at("scale")[f].get<std::string>());
            a.norm.degenerate[f] = norm.at("degenerate")[f].get<bool>();
        }
        for (const json& st : j.at("states")) {
            AbstractState s;
            if (!st.is_null()) {
                s.topLabels = st.at("labels").get<std::vector<int>>();
                s.quantConf = st.at("conf").get<std::vector<int>>();
            }
            a.states.push_back(std::move(s));
        }
        const int S = static_cast<int>(a.states.size());
        a.init = Vector::Zero(S);
        const json& init = j.at("init");
        for (int i = 0; i < S; ++i) a.init[i] = parse_double(init[i].get<std::string>());
        for (const json& entry : j.at("transfer")) {
            IntervalKey key = entry.at("interval").get<IntervalKey>();
            TransferMatrix tm;
            tm.rows.resize(S);
            const json& rows = entry.at("rows");
            for (int r = 0; r < S; ++r)
                for (const json& cell : rows[r])
                    tm.rows[r].entries.emplace_back(
                        cell[0].get<int>(), parse_double(cell[1].get<std::string>()));
            a.transfer.emplace(std::move(key), std::move(tm));
        }
        a.output = Matrix(S, a.numClasses);
        const json& output = j.at("output");
        for (int s = 0; s < S; ++s)
            for (int c = 0; c < a.numClasses; ++c)
                a.output(s, c) = parse_double(output[s][c].get<std::string>());
        return a;
    } catch (const json::exception& e) {
        throw DataError("automaton JSON schema error: " + std::string(e.what()));
    }
}

}  // namespace tsfool
