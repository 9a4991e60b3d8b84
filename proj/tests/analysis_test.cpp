#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "vivrl/analysis.hpp"

using namespace vivrl;
using namespace vivrl::analysis;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> tone(double f, double fs, std::size_t n, double amp = 1.0, double phase = 0.0,
                         double offset = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = offset + amp * std::sin(2 * kPi * f * i / fs + phase);
    return x;
}

RunRecord record_of(const std::vector<double> &y, double dt) {
    RunRecord r{dt, {}};
    for (std::size_t i = 0; i < y.size(); ++i) r.samples.push_back({i * dt, y[i], 0, 0, 0, -std::abs(y[i])});
    return r;
}

}  // namespace

TEST(Fft, MatchesDirectDft) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (std::size_t n : {1u, 2u, 8u, 64u, 256u}) {
        std::vector<std::complex<double>> x(n);
        for (auto &v : x) v = {g(rng), g(rng)};
        auto y = x;
        fft_inplace(y);
        for (std::size_t k = 0; k < n; ++k) {
            std::complex<double> acc;
            for (std::size_t j = 0; j < n; ++j) acc += x[j] * std::polar(1.0, -2 * kPi * double(j * k % n) / double(n));
            EXPECT_LT(std::abs(acc - y[k]), 1e-9) << "n=" << n << " k=" << k;
        }
    }
}

TEST(Fft, Parseval) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    std::vector<std::complex<double>> x(1024);
    double time_energy = 0.0;
    for (auto &v : x) {
        v = {g(rng), 0.0};
        time_energy += std::norm(v);
    }
    fft_inplace(x);
    double freq_energy = 0.0;
    for (const auto &v : x) freq_energy += std::norm(v);
    EXPECT_NEAR(freq_energy / x.size(), time_energy, 1e-6 * time_energy);
}

TEST(Fft, RejectsNonPowerOfTwo) {
    std::vector<std::complex<double>> x(6);
    EXPECT_THROW(fft_inplace(x), AnalysisError);
}

TEST(DominantFrequency, FindsToneWithinOneBin) {
    const double fs = 10.0;
    for (double f : {0.5, 1.3, 2.55, 4.1}) {
        const auto x = tone(f, fs, 600);
        const double bin = spectrum(x, fs).bin_width_hz;
        EXPECT_NEAR(dominant_frequency(x, fs), f, bin) << f;
    }
}

TEST(DominantFrequency, InvariantToAmplitudeOffsetAndPhase) {
    const double fs = 10.0, f = 1.47;
    const auto base = tone(f, fs, 500);
    const double f0 = dominant_frequency(base, fs);
    EXPECT_NEAR(dominant_frequency(tone(f, fs, 500, 7.5), fs), f0, 1e-9);
    EXPECT_NEAR(dominant_frequency(tone(f, fs, 500, 1.0, 0.0, 3.0), fs), f0, 1e-9);
    const double bin = spectrum(base, fs).bin_width_hz;
    EXPECT_NEAR(dominant_frequency(tone(f, fs, 500, 1.0, 1.1), fs), f0, bin);
}

TEST(DominantFrequency, Errors) {
    EXPECT_THROW((void)dominant_frequency(tone(1.0, 10.0, 63), 10.0), AnalysisError);
    EXPECT_THROW((void)dominant_frequency(std::vector<double>(100, 0.3), 10.0), AnalysisError);
    EXPECT_THROW((void)spectrum(tone(1.0, 10.0, 100), 0.0), AnalysisError);
}

TEST(SteadyAmplitude, SinusoidAmplitude) {
    const auto y = tone(1.96, 100.0, 6000, 0.6);
    EXPECT_NEAR(steady_amplitude(record_of(y, 0.01), 0.4), 0.6, 0.006);
}

TEST(SteadyAmplitude, UsesOnlyTheTrailingWindow) {
    auto y = tone(1.96, 100.0, 6000, 0.6);
    for (std::size_t i = 0; i < 3000; ++i) y[i] *= 5.0;
    EXPECT_NEAR(steady_amplitude(record_of(y, 0.01), 0.4), 0.6, 0.006);
}

TEST(SteadyAmplitude, ZeroTraceAndErrors) {
    EXPECT_EQ(steady_amplitude(record_of(std::vector<double>(100, 0.0), 0.01)), 0.0);
    EXPECT_THROW((void)steady_amplitude(record_of(tone(1.0, 100.0, 30), 0.01)), AnalysisError);
    // A slow drift has too few mean crossings to count as a steady oscillation.
    EXPECT_THROW((void)steady_amplitude(record_of(tone(0.05, 100.0, 1000), 0.01)), AnalysisError);
    EXPECT_THROW((void)steady_amplitude(record_of(tone(1.0, 100.0, 1000), 0.01), 0.0), AnalysisError);
}

TEST(SuppressionRatio, Examples) {
    EXPECT_NEAR(suppression_ratio(0.03, 0.6), 0.95, 1e-12);
    EXPECT_NEAR(suppression_ratio(0.12, 0.6), 0.8, 1e-12);
    EXPECT_EQ(suppression_ratio(0.6, 0.6), 0.0);
    EXPECT_THROW((void)suppression_ratio(0.1, 0.0), ParameterDomainError);
}

TEST(MeanAlpha, AveragesTheAlphaColumn) {
    RunRecord r{0.1, {}};
    EXPECT_EQ(mean_alpha(r), 0.0);
    for (double a : {0.5, -0.25, 1.0, 0.75}) r.samples.push_back({0, 0, 0, 0, a, 0});
    EXPECT_NEAR(mean_alpha(r), 0.5, 1e-15);
}
