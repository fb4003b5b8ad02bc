#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>

#include "tsfool/common.hpp"

// Generates a two-class ECG-like benchmark at classic UCR scale: univariate,
// 96 steps, 100 train / 100 test. Class 1 is a normal beat (P-QRS-T), class
// -1 an abnormal one (widened QRS, depressed ST segment, inverted T wave and
// a downsloping late repolarization tail). A fraction of samples mixes the
// two morphologies so a small classifier makes genuine mistakes near the
// class boundary.

namespace {

using tsfool::Rng;

double gauss(double t, double mu, double sigma, double amp) {
    const double z = (t - mu) / sigma;
    return amp * std::exp(-0.5 * z * z);
}

double normal_beat(double t) {
    double v = 0.0;
    v += gauss(t, 22.0, 4.0, 0.25);    // P wave
    v += gauss(t, 42.0, 1.8, -0.30);   // Q dip
    v += gauss(t, 45.0, 1.7, 1.55);    // R spike
    v += gauss(t, 49.0, 2.0, -0.45);   // S dip
    v += gauss(t, 72.0, 7.0, 0.50);    // T wave
    return v;
}

double abnormal_beat(double t) {
    double v = 0.0;
    v += gauss(t, 22.0, 4.5, 0.12);    // flattened P
    v += gauss(t, 42.0, 2.6, -0.25);
    v += gauss(t, 45.0, 3.4, 0.95);    // widened, lower R
    v += gauss(t, 50.0, 3.0, -0.40);
    v += gauss(t, 58.0, 6.0, -0.25);   // ST depression
    v += gauss(t, 74.0, 8.0, -0.40);   // inverted T
    // Downsloping late repolarization: the tail never returns to baseline.
    v += -0.30 / (1.0 + std::exp(-(t - 72.0) / 5.0));
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic two-class ECG-like dataset generator"};
    std::string outDir = "data";
    std::string name = "synth_ecg";
    int trainCount = 100, testCount = 100, length = 96;
    std::uint64_t seed = 1315423911ULL;
    app.add_option("--out", outDir, "output directory (default data)");
    app.add_option("--name", name, "dataset stem (default synth_ecg)");
    app.add_option("--train", trainCount, "training samples (default 100)");
    app.add_option("--test", testCount, "test samples (default 100)");
    app.add_option("--length", length, "series length (default 96)");
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    std::filesystem::create_directories(outDir);
    Rng rng(seed);

    auto write_split = [&](const std::string& which, int count) {
        std::ofstream out(std::filesystem::path(outDir) / (name + "_" + which + ".tsv"),
                          std::ios::binary);
        if (!out) {
            std::cerr << "cannot write output file\n";
            std::exit(3);
        }
        for (int i = 0; i < count; ++i) {
            // 60/40 class split, mildly imbalanced like typical UCR data.
            const bool normal = (i % 5) < 3;
            const double ambiguous = rng.uniform01();
            // A third of the samples drift toward the other morphology.
            const double alpha =
                ambiguous < 0.34 ? rng.uniform(0.28, 0.52) : rng.uniform(0.0, 0.12);
            const double amp = rng.uniform(0.85, 1.15);
            const double shift = rng.uniform(-3.0, 3.0);
            const double wanderAmp = rng.uniform(0.0, 0.08);
            const double wanderPhase = rng.uniform(0.0, 2.0 * std::numbers::pi);

            out << (normal ? "1" : "-1");
            for (int t = 0; t < length; ++t) {
                const double tt = t - shift;
                const double base = normal ? normal_beat(tt) : abnormal_beat(tt);
                const double other = normal ? abnormal_beat(tt) : normal_beat(tt);
                double v = amp * ((1.0 - alpha) * base + alpha * other);
                v += wanderAmp * std::sin(2.0 * std::numbers::pi * t / length + wanderPhase);
                v += 0.05 * rng.gaussian();
                out << '\t' << tsfool::format_double(v);
            }
            out << '\n';
        }
    };
    write_split("TRAIN", trainCount);
    write_split("TEST", testCount);
    std::cout << "wrote " << name << " (" << trainCount << " train / " << testCount
              << " test, length " << length << ") to " << outDir << "\n";
    return 0;
}
