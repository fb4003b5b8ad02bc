#include "tsfool/lstm.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace tsfool {
namespace {

constexpr char kModelMagic[8] = {'T', 'S', 'F', 'L', 'S', 'T', 'M', '1'};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vector softmax(const Vector& logits) {
    Vector z = logits.array() - logits.maxCoeff();
    Vector e = z.array().exp();
    return e / e.sum();
}

// Everything the backward pass needs, cached per step.
struct ForwardCache {
    std::vector<Vector> z;      // [h_{t-1}; x_t]
    std::vector<Vector> i, f, g, o, c, tanhc, h;
    std::vector<Vector> prob;   // softmax per step
};

ForwardCache run_forward(const LstmParams& p, const Matrix& x) {
    const int T = static_cast<int>(x.rows());
    const int H = p.hiddenSize, D = p.inputDim;
    if (x.cols() != D) throw DataError("forward: input has wrong feature dimension");
    if (T == 0) throw DataError("forward: empty series");

    ForwardCache fc;
    fc.z.resize(T);
    fc.i.resize(T);
    fc.f.resize(T);
    fc.g.resize(T);
    fc.o.resize(T);
    fc.c.resize(T);
    fc.tanhc.resize(T);
    fc.h.resize(T);
    fc.prob.resize(T);

    Vector hPrev = Vector::Zero(H), cPrev = Vector::Zero(H);
    for (int t = 0; t < T; ++t) {
        Vector z(H + D);
        z.head(H) = hPrev;
        z.tail(D) = x.row(t).transpose();
        Vector ai = p.wInput * z + p.bInput;
        Vector af = p.wForget * z + p.bForget;
        Vector ag = p.wCell * z + p.bCell;
        Vector ao = p.wOutput * z + p.bOutput;
        Vector i = ai.unaryExpr([](double v) { return sigmoid(v); });
        Vector f = af.unaryExpr([](double v) { return sigmoid(v); });
        Vector g = ag.array().tanh();
        Vector o = ao.unaryExpr([](double v) { return sigmoid(v); });
        Vector c = f.cwiseProduct(cPrev) + i.cwiseProduct(g);
        Vector tc = c.array().tanh();
        Vector h = o.cwiseProduct(tc);

        fc.z[t] = std::move(z);
        fc.i[t] = std::move(i);
        fc.f[t] = std::move(f);
        fc.g[t] = std::move(g);
        fc.o[t] = std::move(o);
        fc.c[t] = c;
        fc.tanhc[t] = std::move(tc);
        fc.h[t] = h;
        fc.prob[t] = softmax(p.wReadout * h + p.bReadout);
        hPrev = fc.h[t];
        cPrev = fc.c[t];
    }
    return fc;
}

struct Gradients {
    Matrix wInput, wForget, wCell, wOutput, wReadout;
    Vector bInput, bForget, bCell, bOutput, bReadout;
    Matrix inputGrad;
    double loss = 0.0;

    explicit Gradients(const LstmParams& p, int T) {
        wInput = Matrix::Zero(p.wInput.rows(), p.wInput.cols());
        wForget = wInput;
        wCell = wInput;
        wOutput = wInput;
        wReadout = Matrix::Zero(p.wReadout.rows(), p.wReadout.cols());
        bInput = Vector::Zero(p.hiddenSize);
        bForget = bInput;
        bCell = bInput;
        bOutput = bInput;
        bReadout = Vector::Zero(p.numClasses);
        inputGrad = Matrix::Zero(T, p.inputDim);
    }
};

// Cross-entropy at the final step; BPTT through every gate. Accumulates
// parameter gradients into `grad` and returns the sample loss.
double run_backward(const LstmParams& p, const Matrix& x, int label,
                    const ForwardCache& fc, Gradients& grad) {
    const int T = static_cast<int>(x.rows());
    const int H = p.hiddenSize, D = p.inputDim;
    if (label < 0 || label >= p.numClasses) throw DataError("backward: label out of range");

    const Vector& pT = fc.prob[T - 1];
    double loss = -std::log(std::max(pT[label], 1e-300));

    // d loss / d logits at the final step.
    Vector dLogits = pT;
    dLogits[label] -= 1.0;
    grad.wReadout += dLogits * fc.h[T - 1].transpose();
    grad.bReadout += dLogits;

    Vector dh = p.wReadout.transpose() * dLogits;
    Vector dcNext = Vector::Zero(H);
    for (int t = T - 1; t >= 0; --t) {
        const Vector& tc = fc.tanhc[t];
        Vector dc = dcNext.array() +
                    dh.array() * fc.o[t].array() * (1.0 - tc.array() * tc.array());
        Vector do_ = dh.cwiseProduct(tc);
        Vector di = dc.cwiseProduct(fc.g[t]);
        Vector dg = dc.cwiseProduct(fc.i[t]);
        Vector cPrev = (t == 0) ? Vector::Zero(H) : fc.c[t - 1];
        Vector df = dc.cwiseProduct(cPrev);

        // Pre-activation gradients.
        Vector dai = di.array() * fc.i[t].array() * (1.0 - fc.i[t].array());
        Vector daf = df.array() * fc.f[t].array() * (1.0 - fc.f[t].array());
        Vector dag = dg.array() * (1.0 - fc.g[t].array() * fc.g[t].array());
        Vector dao = do_.array() * fc.o[t].array() * (1.0 - fc.o[t].array());

        grad.wInput += dai * fc.z[t].transpose();
        grad.wForget += daf * fc.z[t].transpose();
        grad.wCell += dag * fc.z[t].transpose();
        grad.wOutput += dao * fc.z[t].transpose();
        grad.bInput += dai;
        grad.bForget += daf;
        grad.bCell += dag;
        grad.bOutput += dao;

        Vector dz = p.wInput.transpose() * dai + p.wForget.transpose() * daf +
                    p.wCell.transpose() * dag + p.wOutput.transpose() * dao;
        grad.inputGrad.row(t) += dz.tail(D).transpose();
        dh = dz.head(H);
        dcNext = dc.cwiseProduct(fc.f[t]);
    }
    grad.loss += loss;
    return loss;
}

void write_matrix(std::ofstream& out, const Matrix& m) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            double v = m(r, c);
            out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
}

void read_matrix(std::ifstream& in, Matrix& m) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            double v;
            if (!in.read(reinterpret_cast<char*>(&v), sizeof(double)))
                throw DataError("model file truncated");
            m(r, c) = v;
        }
}

}  // namespace

bool LstmParams::sameShape(const LstmParams& o) const {
    return inputDim == o.inputDim && hiddenSize == o.hiddenSize && numClasses == o.numClasses;
}

LstmParams init_params(int inputDim, int hiddenSize, int numClasses, std::uint64_t seed) {
    if (inputDim < 1 || hiddenSize < 1 || numClasses < 2)
        throw UsageError("init_params: need D >= 1, H >= 1, k >= 2");
    LstmParams p;
    p.inputDim = inputDim;
    p.hiddenSize = hiddenSize;
    p.numClasses = numClasses;
    Rng rng(seed);
    auto fillM = [&](int r, int c) {
        Matrix m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-0.1, 0.1);
        return m;
    };
    auto fillV = [&](int n) {
        Vector v(n);
        for (int i = 0; i < n; ++i) v[i] = rng.uniform(-0.1, 0.1);
        return v;
    };
    const int Z = hiddenSize + inputDim;
    p.wInput = fillM(hiddenSize, Z);
    p.wForget = fillM(hiddenSize, Z);
    p.wCell = fillM(hiddenSize, Z);
    p.wOutput = fillM(hiddenSize, Z);
    p.bInput = fillV(hiddenSize);
    // Forget bias starts at 1 so cell memory survives long sequences.
    p.bForget = fillV(hiddenSize).array() + 1.0;
    p.bCell = fillV(hiddenSize);
    p.bOutput = fillV(hiddenSize);
    p.wReadout = fillM(numClasses, hiddenSize);
    p.bReadout = fillV(numClasses);
    return p;
}

ForwardResult forward(const LstmParams& p, const Matrix& x) {
    ForwardCache fc = run_forward(p, x);
    const int T = static_cast<int>(x.rows());
    ForwardResult res;
    res.trace.hidden = Matrix(T, p.hiddenSize);
    res.trace.stepOutput = Matrix(T, p.numClasses);
    for (int t = 0; t < T; ++t) {
        res.trace.hidden.row(t) = fc.h[t].transpose();
        res.trace.stepOutput.row(t) = fc.prob[t].transpose();
    }
    res.predicted = argmax_tie_low(fc.prob[T - 1]);
    return res;
}

int predict(const LstmParams& p, const Matrix& x) {
    ForwardCache fc = run_forward(p, x);
    return argmax_tie_low(fc.prob.back());
}

Matrix input_gradient(const LstmParams& p, const Matrix& x, int label) {
    ForwardCache fc = run_forward(p, x);
    Gradients grad(p, static_cast<int>(x.rows()));
    run_backward(p, x, label, fc, grad);
    return grad.inputGrad;
}

void train_more(LstmParams& p, std::span<const TimeSeries> samples, int epochs,
                double learningRate, const std::function<void(int, double)>& onEpoch) {
    if (samples.empty()) throw DataError("train: empty sample set");
    const double invN = 1.0 / static_cast<double>(samples.size());
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        Gradients grad(p, 1);
        for (const TimeSeries& ts : samples) {
            ForwardCache fc = run_forward(p, ts.values);
            Gradients g(p, static_cast<int>(ts.values.rows()));
            run_backward(p, ts.values, ts.label, fc, g);
            grad.wInput += g.wInput;
            grad.wForget += g.wForget;
            grad.wCell += g.wCell;
            grad.wOutput += g.wOutput;
            grad.wReadout += g.wReadout;
            grad.bInput += g.bInput;
            grad.bForget += g.bForget;
            grad.bCell += g.bCell;
            grad.bOutput += g.bOutput;
            grad.bReadout += g.bReadout;
            grad.loss += g.loss;
        }
        double meanLoss = grad.loss * invN;
        if (!std::isfinite(meanLoss))
            throw NumericError("training diverged (non-finite loss); lower the learning rate");
        const double lr = learningRate * invN;
        p.wInput -= lr * grad.wInput;
        p.wForget -= lr * grad.wForget;
        p.wCell -= lr * grad.wCell;
        p.wOutput -= lr * grad.wOutput;
        p.wReadout -= lr * grad.wReadout;
        p.bInput -= lr * grad.bInput;
        p.bForget -= lr * grad.bForget;
        p.bCell -= lr * grad.bCell;
        p.bOutput -= lr * grad.bOutput;
        p.bReadout -= lr * grad.bReadout;
        if (onEpoch) onEpoch(epoch, meanLoss);
    }
}

LstmParams train(const Dataset& d, const TrainConfig& cfg) {
    if (d.train.empty()) throw DataError("train: dataset has no training split");
    LstmParams p = init_params(d.featureDim, cfg.hiddenSize, d.numClasses, cfg.seed);
    double best = std::numeric_limits<double>::infinity();
    int sinceBest = 0;
    bool stop = false;
    int total = 0;
    while (total < cfg.epochs && !stop) {
        train_more(p, d.train, 1, cfg.learningRate, [&](int, double loss) {
            if (loss < best) {
                best = loss;
                sinceBest = 0;
            } else if (cfg.patience > 0 && ++sinceBest >= cfg.patience) {
                stop = true;
            }
        });
        ++total;
    }
    return p;
}

double evaluate(const LstmParams& p, std::span<const TimeSeries> samples) {
    if (samples.empty()) throw DataError("evaluate: empty sample set");
    int correct = 0;
    for (const TimeSeries& ts : samples)
        if (predict(p, ts.values) == ts.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

void save_model(const LstmParams& p, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + file.string());
    out.write(kModelMagic, sizeof(kModelMagic));
    std::uint32_t dims[3] = {static_cast<std::uint32_t>(p.hiddenSize),
                             static_cast<std::uint32_t>(p.inputDim),
                             static_cast<std::uint32_t>(p.numClasses)};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    write_matrix(out, p.wInput);
    write_matrix(out, p.wForget);
    write_matrix(out, p.wCell);
    write_matrix(out, p.wOutput);
    write_matrix(out, p.bInput);
    write_matrix(out, p.bForget);
    write_matrix(out, p.bCell);
    write_matrix(out, p.bOutput);
    write_matrix(out, p.wReadout);
    write_matrix(out, p.bReadout);
    if (!out) throw DataError("write failed: " + file.string());
}

LstmParams load_model(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + file.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kModelMagic, 8) != 0)
        throw DataError("not a model file (bad magic): " + file.string());
    std::uint32_t dims[3];
    if (!in.read(reinterpret_cast<char*>(dims), sizeof(dims)))
        throw DataError("model file truncated");
    LstmParams p;
    p.hiddenSize = static_cast<int>(dims[0]);
    p.inputDim = static_cast<int>(dims[1]);
    p.numClasses = static_cast<int>(dims[2]);
    if (p.hiddenSize < 1 || p.inputDim < 1 || p.numClasses < 2 || p.hiddenSize > 1 << 20 ||
        p.inputDim > 1 << 20 || p.numClasses > 1 << 20)
        throw DataError("model file has implausible dimensions");
    const int Z = p.hiddenSize + p.inputDim;
    p.wInput = Matrix(p.hiddenSize, Z);
    p.wForget = Matrix(p.hiddenSize, Z);
    p.wCell = Matrix(p.hiddenSize, Z);
    p.wOutput = Matrix(p.hiddenSize, Z);
    p.bInput = Vector(p.hiddenSize);
    p.bForget = Vector(p.hiddenSize);
    p.bCell = Vector(p.hiddenSize);
    p.bOutput = Vector(p.hiddenSize);
    p.wReadout = Matrix(p.numClasses, p.hiddenSize);
    p.bReadout = Vector(p.numClasses);
    read_matrix(in, p.wInput);
    read_matrix(in, p.wForget);
    read_matrix(in, p.wCell);
    read_matrix(in, p.wOutput);
    Matrix tmp;
    auto readVec = [&](Vector& v) {
        Matrix m(v.size(), 1);
        read_matrix(in, m);
        v = m.col(0);
    };
    readVec(p.bInput);
    readVec(p.bForget);
    readVec(p.bCell);
    readVec(p.bOutput);
    read_matrix(in, p.wReadout);
    readVec(p.bReadout);
    char extra;
    if (in.read(&extra, 1)) throw DataError("model file has trailing bytes");
    return p;
}

}  // namespace tsfool
