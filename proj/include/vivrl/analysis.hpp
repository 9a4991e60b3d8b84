// Signal analysis: FFT, dominant frequency, steady amplitude and summary metrics.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "vivrl/error.hpp"
#include "vivrl/record.hpp"

namespace vivrl::analysis {

[[nodiscard]] inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// In-place iterative radix-2 Cooley–Tukey FFT. Size must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>> &a) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw AnalysisError("fft: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

[[nodiscard]] inline double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct Spectrum {
    std::vector<double> freqs_hz;
    std::vector<double> magnitudes;
    double bin_width_hz = 0.0;
};

/// Mean-removed, Hann-windowed copy of the signal.
[[nodiscard]] inline std::vector<double> hann_detrended(std::span<const double> signal) {
    const std::size_t n = signal.size();
    const double mean = n ? std::accumulate(signal.begin(), signal.end(), 0.0) / static_cast<double>(n) : 0.0;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = n > 1 ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                                      static_cast<double>(n - 1))
                               : 1.0;
        out[i] = w * (signal[i] - mean);
    }
    return out;
}

/// One-sided magnitude spectrum (DC..Nyquist) of the windowed, zero-padded signal.
[[nodiscard]] inline Spectrum spectrum(std::span<const double> signal, double fs_hz) {
    if (!(fs_hz > 0)) throw AnalysisError("spectrum: sampling rate must be positive");
    const auto windowed = hann_detrended(signal);
    const std::size_t n = next_pow2(std::max<std::size_t>(windowed.size(), 1));
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < windowed.size(); ++i) buf[i] = windowed[i];
    fft_inplace(buf);
    Spectrum s;
    s.bin_width_hz = fs_hz / static_cast<double>(n);
    const std::size_t half = n / 2 + 1;
    s.freqs_hz.resize(half);
    s.magnitudes.resize(half);
    for (std::size_t k = 0; k < half; ++k) {
        s.freqs_hz[k] = static_cast<double>(k) * s.bin_width_hz;
        s.magnitudes[k] = std::abs(buf[k]);
    }
    return s;
}

/// Peak frequency of a uniformly sampled series, refined by 3-point parabolic
/// interpolation of the magnitude around the peak bin.
[[nodiscard]] inline double dominant_frequency(std::span<const double> signal, double fs_hz) {
    if (signal.size() < 64) throw AnalysisError("dominant_frequency: need at least 64 samples");
    const Spectrum s = spectrum(signal, fs_hz);
    std::size_t best = 1;
    for (std::size_t k = 1; k < s.magnitudes.size(); ++k)
        if (s.magnitudes[k] > s.magnitudes[best]) best = k;
    const double peak = s.magnitudes[best];
    double span_max = 0.0, abs_max = 0.0;
    const double mu = mean(signal);
    for (double x : signal) {
        span_max = std::max(span_max, std::abs(x - mu));
        abs_max = std::max(abs_max, std::abs(x));
    }
    if (span_max <= 1e-12 * abs_max || peak == 0.0)
        throw AnalysisError("dominant_frequency: signal has no oscillatory content");
    double offset = 0.0;
    if (best > 0 && best + 1 < s.magnitudes.size()) {
        const double a = s.magnitudes[best - 1], b = peak, c = s.magnitudes[best + 1];
        const double denom = a - 2.0 * b + c;
        if (denom != 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    return (static_cast<double>(best) + offset) * s.bin_width_hz;
}

/// √2 × RMS of Y/D over the trailing `window_fraction` of the record.
[[nodiscard]] inline double steady_amplitude(const RunRecord &rec, double window_fraction = 0.4) {
    if (!(window_fraction > 0 && window_fraction <= 1))
        throw AnalysisError("steady_amplitude: window fraction must lie in (0, 1]");
    const std::size_t n = rec.samples.size();
    const auto w = static_cast<std::size_t>(std::floor(window_fraction * static_cast<double>(n)));
    if (w < 16) throw AnalysisError("steady_amplitude: window too short");
    double sum_sq = 0.0, mean = 0.0;
    for (std::size_t i = n - w; i < n; ++i) {
        const double y = rec.samples[i].y_over_d;
        sum_sq += y * y;
        mean += y;
    }
    mean /= static_cast<double>(w);
    if (sum_sq == 0.0) return 0.0;
    // The window must span at least 5 oscillation periods (10 mean crossings).
    int crossings = 0;
    for (std::size_t i = n - w + 1; i < n; ++i) {
        const double a = rec.samples[i - 1].y_over_d - mean, b = rec.samples[i].y_over_d - mean;
        if ((a < 0) != (b < 0)) ++crossings;
    }
    if (crossings < 10) throw AnalysisError("steady_amplitude: window holds fewer than 5 oscillation periods");
    return std::sqrt(2.0 * sum_sq / static_cast<double>(w));
}

/// 1 − controlled / uncontrolled.
[[nodiscard]] inline double suppression_ratio(double controlled, double uncontrolled) {
    if (!(uncontrolled > 0)) throw ParameterDomainError("suppression_ratio: uncontrolled amplitude must be positive");
    return 1.0 - controlled / uncontrolled;
}

[[nodiscard]] inline double mean_alpha(const RunRecord &rec) {
    if (rec.empty()) return 0.0;
    double sum = 0.0;
    for (const auto &s : rec.samples) sum += s.alpha;
    return sum / static_cast<double>(rec.samples.size());
}

}  // namespace vivrl::analysis
