#include "tsfool/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace tsfool {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
    // Tab-separated with comma accepted as the alternate delimiter.
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == '\t' || c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    // Strip padding spaces around each token.
    for (auto& tok : out) {
        size_t b = tok.find_first_not_of(' ');
        size_t e = tok.find_last_not_of(' ');
        tok = (b == std::string::npos) ? std::string() : tok.substr(b, e - b + 1);
    }
    return out;
}

int label_to_int(double raw, int lineNo) {
    double r = std::round(raw);
    if (std::abs(raw - r) > 1e-9)
        throw DataError("line " + std::to_string(lineNo) + ": non-integer class label " +
                        format_double(raw));
    return static_cast<int>(r);
}

}  // namespace

RawSplit load_split_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open dataset file: " + file.string());

    RawSplit split;
    std::string line;
    int lineNo = 0;
    int valuesPerRow = -1;
    while (std::getline(in, line)) {
        ++lineNo;
        std::string trimmed = line;
        while (!trimmed.empty() && (trimmed.back() == '\r' || trimmed.back() == ' '))
            trimmed.pop_back();
        if (trimmed.empty()) continue;
        if (trimmed[0] == '#') {
            if (trimmed.rfind("#D=", 0) == 0) {
                double d = parse_double(trimmed.substr(3), "D directive");
                int dim = label_to_int(d, lineNo);
                if (dim < 1) throw DataError("line " + std::to_string(lineNo) +
                                             ": feature dimension must be >= 1");
                split.featureDim = dim;
            }
            continue;  // other '#' lines are comments
        }

        std::vector<std::string> fields = split_fields(trimmed);
        if (fields.size() < 2)
            throw DataError("line " + std::to_string(lineNo) + ": expected label and values");
        if (valuesPerRow < 0) {
            valuesPerRow = static_cast<int>(fields.size()) - 1;
        } else if (static_cast<int>(fields.size()) - 1 != valuesPerRow) {
            throw DataError("line " + std::to_string(lineNo) + ": expected " +
                            std::to_string(valuesPerRow) + " values, got " +
                            std::to_string(fields.size() - 1));
        }
        split.labels.push_back(
            parse_double(fields[0], "label, line " + std::to_string(lineNo)));
        const int D = split.featureDim;
        if (valuesPerRow % D != 0)
            throw DataError("line " + std::to_string(lineNo) + ": " +
                            std::to_string(valuesPerRow) + " values not divisible by D=" +
                            std::to_string(D));
        const int T = valuesPerRow / D;
        Matrix m(T, D);
        for (int t = 0; t < T; ++t)
            for (int f = 0; f < D; ++f)
                m(t, f) = parse_double(fields[1 + t * D + f],
                                       "line " + std::to_string(lineNo));
        split.values.push_back(std::move(m));
    }
    if (split.values.empty()) throw DataError("empty dataset file: " + file.string());
    return split;
}

namespace {

std::pair<std::filesystem::path, std::filesystem::path> resolve_split_files(
    const std::filesystem::path& path, std::string& name) {
    namespace fs = std::filesystem;
    const char* exts[] = {".tsv", ".csv", ".txt"};
    auto findSplit = [&](const fs::path& dir, const std::string& stem,
                         const char* which) -> fs::path {
        for (const char* ext : exts) {
            fs::path p = dir / (stem + "_" + which + ext);
            if (fs::exists(p)) return p;
        }
        return {};
    };

    if (fs::is_directory(path)) {
        // Directory: expect exactly one <name>_TRAIN.* inside.
        for (const auto& entry : fs::directory_iterator(path)) {
            std::string fn = entry.path().filename().string();
            auto pos = fn.find("_TRAIN");
            if (pos != std::string::npos) {
                name = fn.substr(0, pos);
                fs::path train = entry.path();
                fs::path test = findSplit(path, name, "TEST");
                if (test.empty())
                    throw DataError("no TEST split next to " + train.string());
                return {train, test};
            }
        }
        throw DataError("no *_TRAIN.* file in directory " + path.string());
    }
    if (fs::exists(path) && fs::is_regular_file(path)) {
        name = path.stem().string();
        return {path, path};  // one file serves as both splits
    }
    // Stem form: "<dir>/<name>" -> "<dir>/<name>_TRAIN.tsv" etc.
    name = path.filename().string();
    fs::path dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
    fs::path train = findSplit(dir, name, "TRAIN");
    fs::path test = findSplit(dir, name, "TEST");
    if (train.empty() || test.empty())
        throw DataError("cannot resolve dataset at '" + path.string() +
                        "' (need <stem>_TRAIN.tsv and <stem>_TEST.tsv, a directory "
                        "containing them, or a single split file)");
    return {train, test};
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
    Dataset d;
    auto [trainFile, testFile] = resolve_split_files(path, d.name);
    RawSplit train = load_split_file(trainFile);
    RawSplit test = load_split_file(testFile);

    if (train.featureDim != test.featureDim)
        throw DataError("train/test feature dimension mismatch");
    d.featureDim = train.featureDim;
    const int T = static_cast<int>(train.values.front().rows());
    if (static_cast<int>(test.values.front().rows()) != T)
        throw DataError("train/test series length mismatch");
    d.seriesLength = T;

    // Contiguous label ids from the sorted union of raw labels.
    std::map<double, int> remap;
    for (double l : train.labels) remap.emplace(l, 0);
    for (double l : test.labels) remap.emplace(l, 0);
    int next = 0;
    for (auto& [raw, id] : remap) {
        id = next++;
        d.originalLabels.push_back(raw);
    }
    d.numClasses = next;

    std::vector<int> trainCount(d.numClasses, 0);
    auto build = [&](const RawSplit& s, std::vector<TimeSeries>& out, bool isTrain) {
        out.reserve(s.values.size());
        for (size_t i = 0; i < s.values.size(); ++i) {
            TimeSeries ts;
            ts.values = s.values[i];
            ts.label = remap.at(s.labels[i]);
            if (isTrain) ++trainCount[ts.label];
            out.push_back(std::move(ts));
        }
    };
    build(train, d.train, true);
    build(test, d.test, false);

    for (int c = 0; c < d.numClasses; ++c)
        if (trainCount[c] == 0)
            throw DataError("class " + format_double(d.originalLabels[c]) +
                            " has no training samples");
    return d;
}

void save_split(const Dataset& d, std::span<const TimeSeries> split,
                const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);  // binary: stable newlines
    if (!out) throw DataError("cannot write dataset file: " + file.string());
    if (d.featureDim > 1) out << "#D=" << d.featureDim << "\n";
    for (const TimeSeries& ts : split) {
        out << format_double(d.originalLabels.at(ts.label));
        for (int t = 0; t < ts.values.rows(); ++t)
            for (int f = 0; f < ts.values.cols(); ++f)
                out << '\t' << format_double(ts.values(t, f));
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + file.string());
}

Vector NormalizationStats::apply(const Vector& rawRow) const {
    return (rawRow - offset).cwiseQuotient(scale);
}

Matrix NormalizationStats::apply(const Matrix& raw) const {
    Matrix out = raw;
    for (int f = 0; f < raw.cols(); ++f)
        out.col(f) = (raw.col(f).array() - offset[f]) / scale[f];
    return out;
}

Matrix NormalizationStats::invert(const Matrix& normalized) const {
    Matrix out = normalized;
    for (int f = 0; f < normalized.cols(); ++f)
        out.col(f) = normalized.col(f).array() * scale[f] + offset[f];
    return out;
}

NormalizationStats normalization_stats(const Dataset& d) {
    const int D = d.featureDim;
    NormalizationStats s;
    s.offset = Vector::Constant(D, std::numeric_limits<double>::infinity());
    Vector mx = Vector::Constant(D, -std::numeric_limits<double>::infinity());
    auto scan = [&](const std::vector<TimeSeries>& split) {
        for (const TimeSeries& ts : split)
            for (int f = 0; f < D; ++f) {
                s.offset[f] = std::min(s.offset[f], ts.values.col(f).minCoeff());
                mx[f] = std::max(mx[f], ts.values.col(f).maxCoeff());
            }
    };
    scan(d.train);
    scan(d.test);
    s.scale = Vector::Ones(D);
    s.degenerate.assign(D, false);
    for (int f = 0; f < D; ++f) {
        double range = mx[f] - s.offset[f];
        if (range > 0)
            s.scale[f] = range;
        else
            s.degenerate[f] = true;  // constant feature: offset=min, scale=1
    }
    return s;
}

Dataset normalize(const Dataset& d, const NormalizationStats& stats) {
    Dataset out = d;
    for (auto* split : {&out.train, &out.test})
        for (TimeSeries& ts : *split) ts.values = stats.apply(ts.values);
    return out;
}

DomainRanges domain_ranges(const Dataset& d) {
    if (d.test.empty()) throw DataError("domain_ranges: empty test split");
    const int T = d.seriesLength, D = d.featureDim;
    DomainRanges r;
    r.stepMin = Matrix::Constant(T, D, std::numeric_limits<double>::infinity());
    r.stepMax = Matrix::Constant(T, D, -std::numeric_limits<double>::infinity());
    for (const TimeSeries& ts : d.test) {
        r.stepMin = r.stepMin.cwiseMin(ts.values);
        r.stepMax = r.stepMax.cwiseMax(ts.values);
    }
    r.featureMin = r.stepMin.colwise().minCoeff();
    r.featureMax = r.stepMax.colwise().maxCoeff();
    return r;
}

}  // namespace tsfool
