#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

#include "tsfool/retrain.hpp"

namespace {

using namespace tsfool;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

struct Opts {
    std::string dataset, model, automaton, batch, sidecar, config;
    std::string out = "out";
    std::string method = "tsfool";
    std::string scope;  // empty = per-method default
    std::string exportMode = "all";
    std::string norm = "l2";
    double eps = 0.01;
    double keepProb = 0.9;
    double epsStep = 0.01;
    double lr = 0.3;
    double distanceFactor = 10.0;
    int n = 20;
    int topK = 2;
    int tRes = 10;
    int hidden = 16;
    int epochs = 200;
    int patience = 0;
    int maxIter = 100;
    int maxSampling = 100;
    int interiorPoints = 9;
    int target = -1;
    std::uint64_t seed = 0;
};

json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw UsageError("config file parse error: " + std::string(e.what()));
    }
    if (!j.is_object()) throw UsageError("config file must hold a JSON object");
    return j;
}

// CLI flags override config-file values override built-in defaults.
struct Merger {
    CLI::App* cmd;
    json cfg;

    template <typename T>
    void operator()(const std::string& flag, const char* key, T& value) const {
        const CLI::Option* opt = cmd->get_option_no_throw(flag);
        if (opt && opt->count() > 0) return;  // explicit flag wins
        if (!cfg.contains(key) || cfg.at(key).is_null()) return;
        try {
            value = cfg.at(key).get<T>();
        } catch (const json::exception&) {
            throw UsageError(std::string("config key '") + key + "' has the wrong type");
        }
    }

    bool explicit_value(const std::string& flag, const char* key) const {
        const CLI::Option* opt = cmd->get_option_no_throw(flag);
        return (opt && opt->count() > 0) || (cfg.contains(key) && !cfg.at(key).is_null());
    }
};

std::filesystem::path ensure_out_dir(const Opts& o) {
    std::filesystem::path dir(o.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory: " + dir.string());
    return dir;
}

void check_compatible(const LstmParams& p, const Dataset& d) {
    if (p.inputDim != d.featureDim || p.numClasses != d.numClasses)
        throw UsageError("model/dataset mismatch: model expects D=" +
                         std::to_string(p.inputDim) + ", k=" + std::to_string(p.numClasses) +
                         " but dataset has D=" + std::to_string(d.featureDim) +
                         ", k=" + std::to_string(d.numClasses));
}

std::optional<int> target_of(const Opts& o) {
    if (o.target < 0) return std::nullopt;
    return o.target;
}

AttackConfig attack_config(const Opts& o) {
    AttackConfig c;
    c.eps = o.eps;
    c.keepProb = o.keepProb;
    c.candidatesPerPair = o.n;
    c.target = target_of(o);
    c.seed = o.seed;
    c.maxSamplingIters = o.maxSampling;
    c.interiorPoints = o.interiorPoints;
    return c;
}

ExtractionConfig extraction_config(const Opts& o) {
    ExtractionConfig c;
    c.topK = o.topK;
    c.confLevels = o.tRes;
    c.distanceFactor = o.distanceFactor;
    return c;
}

void write_run_json(const std::filesystem::path& dir, const std::string& command,
                    const json& config, const json& outputs, double seconds) {
    json j;
    j["format"] = "tsfool-run-v1";
    j["command"] = command;
    j["version"] = kVersion;
    j["config"] = config;
    j["outputs"] = outputs;
    j["duration_seconds"] = seconds;
    std::ofstream out(dir / "run.json", std::ios::binary);
    if (!out) throw DataError("cannot write run.json");
    out << j.dump(2) << '\n';
}

json common_config_echo(const Opts& o) {
    json c;
    c["dataset"] = o.dataset;
    c["seed"] = o.seed;
    return c;
}

void print_report(const AttackReport& r) {
    auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string("n/a");
    };
    std::cout << "method " << r.method << " on " << r.datasetName << " (scope " << r.scope
              << ", norm " << r.norm << ", seed " << r.seed << ")\n";
    std::cout << "  candidates " << r.generated << ", successful " << r.successful
              << ", asr " << format_double(r.asr) << "\n";
    std::cout << "  mean cc " << opt(r.meanCc) << ", rho " << opt(r.meanRho) << ", rho* "
              << opt(r.meanRhoStar) << ", dtw " << opt(r.meanDtw) << ", min-dtw "
              << opt(r.meanMinDtw) << "\n";
    std::cout << "  mean time per sample " << format_double(r.meanTimePerSample) << " s\n";
}

int cmd_train(const Opts& o) {
    const auto t0 = std::chrono::steady_clock::now();
    Dataset d = load_dataset(o.dataset);
    TrainConfig tc;
    tc.hiddenSize = o.hidden;
    tc.epochs = o.epochs;
    tc.learningRate = o.lr;
    tc.seed = o.seed;
    tc.patience = o.patience;
    LstmParams p = train(d, tc);
    const double trainAcc = evaluate(p, d.train);
    const double testAcc = evaluate(p, d.test);

    auto dir = ensure_out_dir(o);
    save_model(p, dir / "model.bin");
    json acc;
    acc["train_accuracy"] = trainAcc;
    acc["test_accuracy"] = testAcc;
    acc["hidden"] = o.hidden;
    acc["epochs"] = o.epochs;
    acc["learning_rate"] = o.lr;
    acc["seed"] = o.seed;
    {
        std::ofstream out(dir / "train.json", std::ios::binary);
        out << acc.dump(2) << '\n';
    }
    json cfg = common_config_echo(o);
    cfg["hidden"] = o.hidden;
    cfg["epochs"] = o.epochs;
    cfg["lr"] = o.lr;
    cfg["patience"] = o.patience;
    json outputs;
    outputs["model"] = (dir / "model.bin").string();
    outputs["train_json"] = (dir / "train.json").string();
    write_run_json(dir, "train", cfg, outputs,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "trained " << d.name << ": train accuracy " << format_double(trainAcc)
              << ", test accuracy " << format_double(testAcc) << "\n";
    return 0;
}

int cmd_extract(const Opts& o) {
    const auto t0 = std::chrono::steady_clock::now();
    Dataset d = load_dataset(o.dataset);
    LstmParams p = load_model(o.model);
    check_compatible(p, d);
    IWfa a = extract(p, d, extraction_config(o));

    int agree = 0;
    for (const TimeSeries& ts : d.test)
        if (predict(a, ts.values) == predict(p, ts.values)) ++agree;
    const double agreement = static_cast<double>(agree) / d.test.size();

    auto dir = ensure_out_dir(o);
    save_automaton(a, dir / "automaton.json");
    json cfg = common_config_echo(o);
    cfg["model"] = o.model;
    cfg["k"] = o.topK;
    cfg["t_res"] = o.tRes;
    cfg["f"] = o.distanceFactor;
    json outputs;
    outputs["automaton"] = (dir / "automaton.json").string();
    write_run_json(dir, "extract", cfg, outputs,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "extracted automaton: " << a.states.size() << " states (incl. initial), "
              << a.transfer.size() << " intervals, width " << format_double(a.intervalWidth)
              << ", rnn agreement " << format_double(agreement) << "\n";
    return 0;
}

int cmd_attack(const Opts& o, const Merger& merge) {
    const auto t0 = std::chrono::steady_clock::now();
    Dataset d = load_dataset(o.dataset);
    LstmParams p = load_model(o.model);
    check_compatible(p, d);
    if (o.method != "tsfool" && o.method != "tsfool-ext" && o.method != "fgsm" &&
        o.method != "pgd")
        throw UsageError("unknown method '" + o.method +
                         "' (expected tsfool, tsfool-ext, fgsm, pgd)");
    if (o.exportMode != "all" && o.exportMode != "successful")
        throw UsageError("--export must be 'all' or 'successful'");
    const Norm norm = parse_norm(o.norm);

    const bool isTsfool = o.method == "tsfool" || o.method == "tsfool-ext";
    const bool needAutomaton = isTsfool || o.scope == "tps";
    IWfa a;
    bool extractedHere = false;
    if (needAutomaton) {
        if (!o.automaton.empty()) {
            a = load_automaton(o.automaton);
            if (a.featureDim != d.featureDim || a.numClasses != d.numClasses)
                throw UsageError("automaton/dataset mismatch");
        } else {
            a = extract(p, d, extraction_config(o));
            extractedHere = true;
        }
    }

    AdversarialBatch b;
    if (isTsfool) {
        AttackConfig ac = attack_config(o);
        b = o.method == "tsfool" ? tsfool::tsfool(p, a, d, ac)
                                 : tsfool_extended(p, a, d, ac);
    } else {
        BaselineConfig bl;
        bl.method = o.method;
        // Baseline budget convention differs from tsfool's step size, so the
        // built-in default switches when the user did not pin eps explicitly.
        bl.eps = merge.explicit_value("--eps", "eps") ? o.eps : 0.1;
        bl.epsStep = o.epsStep;
        bl.maxIter = o.method == "fgsm" ? 1 : o.maxIter;
        bl.scope = o.scope.empty() ? "all" : o.scope;
        bl.target = target_of(o);
        bl.seed = o.seed;
        b = run_baseline(p, needAutomaton ? &a : nullptr, d, bl);
    }

    AttackReport rep = build_report(b, d, p, norm);

    auto dir = ensure_out_dir(o);
    save_batch_csv(b, dir / "batch.csv", o.exportMode == "successful");
    save_batch_sidecar(b, dir / "batch.json");
    save_report_json(rep, dir / "report.json");
    append_summary_row(rep, dir / "summary.csv");
    if (extractedHere) save_automaton(a, dir / "automaton.json");

    json cfg = common_config_echo(o);
    cfg["model"] = o.model;
    cfg["method"] = o.method;
    cfg["eps"] = isTsfool ? o.eps : b.baseline.eps;
    cfg["p"] = o.keepProb;
    cfg["n"] = o.n;
    cfg["k"] = o.topK;
    cfg["t_res"] = o.tRes;
    cfg["f"] = o.distanceFactor;
    if (!isTsfool) {
        cfg["eps_step"] = o.epsStep;
        cfg["max_iter"] = o.maxIter;
    }
    cfg["target"] = o.target < 0 ? json(nullptr) : json(o.target);
    cfg["scope"] = b.scope;
    cfg["export"] = o.exportMode;
    cfg["norm"] = o.norm;
    json outputs;
    outputs["batch_csv"] = (dir / "batch.csv").string();
    outputs["batch_sidecar"] = (dir / "batch.json").string();
    outputs["report"] = (dir / "report.json").string();
    outputs["summary"] = (dir / "summary.csv").string();
    if (extractedHere) outputs["automaton"] = (dir / "automaton.json").string();
    write_run_json(dir, "attack", cfg, outputs,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    std::cout << "pairs " << b.pairs.size() << ", skipped " << b.skipped.size() << "\n";
    if (!b.warning.empty()) std::cout << "warning: " << b.warning << "\n";
    print_report(rep);
    return 0;
}

int cmd_eval(const Opts& o) {
    const auto t0 = std::chrono::steady_clock::now();
    Dataset d = load_dataset(o.dataset);
    LstmParams p = load_model(o.model);
    check_compatible(p, d);
    const Norm norm = parse_norm(o.norm);
    std::filesystem::path csv(o.batch);
    std::filesystem::path sidecar =
        o.sidecar.empty() ? std::filesystem::path(csv).replace_extension(".json")
                          : std::filesystem::path(o.sidecar);
    AttackReport rep = eval_persisted(csv, sidecar, d, p, norm);
    if (rep.generated == 0) throw DataError("batch contains no candidates");

    auto dir = ensure_out_dir(o);
    save_report_json(rep, dir / "report.json");
    append_summary_row(rep, dir / "summary.csv");
    json cfg = common_config_echo(o);
    cfg["model"] = o.model;
    cfg["batch"] = o.batch;
    cfg["norm"] = o.norm;
    json outputs;
    outputs["report"] = (dir / "report.json").string();
    outputs["summary"] = (dir / "summary.csv").string();
    write_run_json(dir, "eval", cfg, outputs,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    print_report(rep);
    return 0;
}

int cmd_retrain(const Opts& o) {
    const auto t0 = std::chrono::steady_clock::now();
    Dataset d = load_dataset(o.dataset);
    LstmParams p = load_model(o.model);
    check_compatible(p, d);
    if (o.method != "tsfool" && o.method != "tsfool-ext" && o.method != "fgsm" &&
        o.method != "pgd")
        throw UsageError("unknown method '" + o.method +
                         "' (expected tsfool, tsfool-ext, fgsm, pgd)");

    RetrainConfig rc;
    rc.method = o.method;
    rc.attack = attack_config(o);
    rc.baseline.eps = o.eps;
    rc.baseline.epsStep = o.epsStep;
    rc.baseline.maxIter = o.method == "fgsm" ? 1 : o.maxIter;
    rc.extraction = extraction_config(o);
    rc.epochs = o.epochs;
    rc.learningRate = o.lr;

    LstmParams best = p;
    RetrainReport rep = retrain(p, d, rc, &best);

    auto dir = ensure_out_dir(o);
    save_model(p, dir / "model_retrained.bin");
    save_model(best, dir / "model_best_robust.bin");
    save_retrain_report(rep, dir / "retrain.json");
    json cfg = common_config_echo(o);
    cfg["model"] = o.model;
    cfg["method"] = o.method;
    cfg["eps"] = o.eps;
    cfg["epochs"] = o.epochs;
    cfg["lr"] = o.lr;
    json outputs;
    outputs["model_retrained"] = (dir / "model_retrained.bin").string();
    outputs["model_best_robust"] = (dir / "model_best_robust.bin").string();
    outputs["retrain_report"] = (dir / "retrain.json").string();
    write_run_json(dir, "retrain", cfg, outputs,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    std::cout << "adversarial train samples " << rep.adversarialTrainCount << ", held-out "
              << rep.heldOutCount << (rep.degenerate ? " (degenerate: plain training)" : "")
              << "\n";
    std::cout << "robust error before " << format_double(rep.robustErrorBefore);
    if (rep.bestRobustEpoch > 0)
        std::cout << ", best after " << format_double(rep.robustError[rep.bestRobustEpoch - 1])
                  << " (epoch " << rep.bestRobustEpoch << ")";
    std::cout << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial time-series attacks on LSTM classifiers"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Opts o;
    auto addCommon = [&](CLI::App* cmd) {
        cmd->add_option("--dataset", o.dataset,
                        "dataset stem, directory, or single split file")
            ->required();
        cmd->add_option("--out", o.out, "output directory (default: out)");
        cmd->add_option("--seed", o.seed, "random seed");
        cmd->add_option("--config", o.config, "JSON config file (flags override it)");
    };
    auto addExtraction = [&](CLI::App* cmd) {
        cmd->add_option("--k", o.topK, "abstract-state top-K classes (default 2)");
        cmd->add_option("--t-res", o.tRes, "confidence quantization levels (default 10)");
        cmd->add_option("--f", o.distanceFactor,
                        "imperceptible-distance reduction factor (default 10)");
    };

    CLI::App* train = app.add_subcommand("train", "train an LSTM classifier");
    addCommon(train);
    train->add_option("--hidden", o.hidden, "hidden units (default 16)");
    train->add_option("--epochs", o.epochs, "training epochs (default 200)");
    train->add_option("--lr", o.lr, "learning rate (default 0.3)");
    train->add_option("--patience", o.patience, "early-stop patience (0 = off)");

    CLI::App* extract = app.add_subcommand("extract", "extract an automaton from a model");
    addCommon(extract);
    extract->add_option("--model", o.model, "model file")->required();
    addExtraction(extract);

    CLI::App* attack = app.add_subcommand("attack", "craft adversarial samples");
    addCommon(attack);
    attack->add_option("--model", o.model, "model file")->required();
    attack->add_option("--automaton", o.automaton,
                       "automaton file (extracted on the fly when omitted)");
    attack->add_option("--method", o.method, "tsfool | tsfool-ext | fgsm | pgd");
    attack->add_option("--eps", o.eps,
                       "noise magnitude as a fraction of feature range "
                       "(default 0.01; baselines default 0.1)");
    attack->add_option("--p,--keep-prob", o.keepProb,
                       "per-step noise keep probability (default 0.9)");
    attack->add_option("--n", o.n, "candidates per pair (default 20)");
    addExtraction(attack);
    attack->add_option("--target", o.target, "targeted attack class (default: untargeted)");
    attack->add_option("--scope", o.scope, "baseline scope: all | tps (default all)");
    attack->add_option("--export", o.exportMode, "persist all | successful (default all)");
    attack->add_option("--norm", o.norm, "report norm: l1 | l2 | linf (default l2)");
    attack->add_option("--eps-step", o.epsStep, "pgd step size (default 0.01)");
    attack->add_option("--max-iter", o.maxIter, "pgd iterations (default 100)");
    attack->add_option("--max-sampling-iters", o.maxSampling,
                       "interpolation iteration cap (default 100)");
    attack->add_option("--interior-points", o.interiorPoints,
                       "probes per sampling round (default 9)");

    CLI::App* eval = app.add_subcommand("eval", "recompute a report from a saved batch");
    addCommon(eval);
    eval->add_option("--model", o.model, "model file")->required();
    eval->add_option("--batch", o.batch, "batch CSV file")->required();
    eval->add_option("--sidecar", o.sidecar, "batch sidecar JSON (default: csv with .json)");
    eval->add_option("--norm", o.norm, "report norm: l1 | l2 | linf (default l2)");

    CLI::App* retrainCmd = app.add_subcommand("retrain", "adversarial fine-tuning");
    addCommon(retrainCmd);
    retrainCmd->add_option("--model", o.model, "model file")->required();
    retrainCmd->add_option("--method", o.method, "adversarial generator (default tsfool)");
    retrainCmd->add_option("--eps", o.eps, "attack eps (default 0.01)");
    retrainCmd->add_option("--p,--keep-prob", o.keepProb, "keep probability (default 0.9)");
    retrainCmd->add_option("--n", o.n, "candidates per pair (default 20)");
    addExtraction(retrainCmd);
    retrainCmd->add_option("--target", o.target, "targeted attack class");
    retrainCmd->add_option("--eps-step", o.epsStep, "pgd step size (default 0.01)");
    retrainCmd->add_option("--max-iter", o.maxIter, "pgd iterations (default 100)");
    retrainCmd->add_option("--epochs", o.epochs, "fine-tuning epochs (default 200)");
    retrainCmd->add_option("--lr", o.lr, "learning rate (default 0.3)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message
        return 2;
    }

    CLI::App* active = app.get_subcommands().front();
    try {
        Merger merge{active, json::object()};
        if (!o.config.empty()) merge.cfg = read_config_file(o.config);
        merge("--dataset", "dataset", o.dataset);
        merge("--out", "out", o.out);
        merge("--seed", "seed", o.seed);
        merge("--model", "model", o.model);
        merge("--automaton", "automaton", o.automaton);
        merge("--method", "method", o.method);
        merge("--eps", "eps", o.eps);
        merge("--p", "p", o.keepProb);
        merge("--n", "n", o.n);
        merge("--k", "k", o.topK);
        merge("--t-res", "t_res", o.tRes);
        merge("--f", "f", o.distanceFactor);
        merge("--target", "target", o.target);
        merge("--scope", "scope", o.scope);
        merge("--export", "export", o.exportMode);
        merge("--norm", "norm", o.norm);
        merge("--eps-step", "eps_step", o.epsStep);
        merge("--max-iter", "max_iter", o.maxIter);
        merge("--max-sampling-iters", "max_sampling_iters", o.maxSampling);
        merge("--interior-points", "interior_points", o.interiorPoints);
        merge("--hidden", "hidden", o.hidden);
        merge("--epochs", "epochs", o.epochs);
        merge("--lr", "lr", o.lr);
        merge("--patience", "patience", o.patience);
        merge("--batch", "batch", o.batch);
        merge("--sidecar", "sidecar", o.sidecar);

        if (active->get_name() == "train") return cmd_train(o);
        if (active->get_name() == "extract") return cmd_extract(o);
        if (active->get_name() == "attack") return cmd_attack(o, merge);
        if (active->get_name() == "eval") return cmd_eval(o);
        if (active->get_name() == "retrain") return cmd_retrain(o);
        throw UsageError("unknown command");
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}
