// Small dense networks with exact reverse-mode gradients, a diagonal Gaussian
// policy head, Adam, and a binary checkpoint format.
//
// Parameters of a DenseNet live in one flat vector, layer by layer, each layer
// storing its weight matrix row-major (out x in) followed by its bias vector.
// Gradients use the same layout, so optimizers work on plain vectors.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vivrl/error.hpp"

namespace vivrl::rl {

enum class Activation : std::uint8_t { tanh = 0, relu = 1 };

[[nodiscard]] inline const char *to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

[[nodiscard]] inline Activation activation_from_string(const std::string &s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + s + "' (expected tanh or relu)");
}

/// Intermediate values of one forward pass, needed by backward().
struct ForwardCache {
    std::vector<std::vector<double>> inputs;  ///< input to each layer
    std::vector<std::vector<double>> pre;     ///< pre-activation of each layer
};

class DenseNet {
public:
    DenseNet() = default;

    DenseNet(std::vector<std::size_t> dims, Activation act) : dims_(std::move(dims)), act_(act) {
        if (dims_.size() < 2) throw ShapeError("DenseNet: need at least input and output dims");
        for (auto d : dims_)
            if (d == 0) throw ShapeError("DenseNet: zero-width layer");
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
            w_off_.push_back(off);
            off += dims_[l] * dims_[l + 1];
            b_off_.push_back(off);
            off += dims_[l + 1];
        }
        params_.assign(off, 0.0);
    }

    [[nodiscard]] const std::vector<std::size_t> &dims() const { return dims_; }
    [[nodiscard]] Activation activation() const { return act_; }
    [[nodiscard]] std::size_t input_dim() const { return dims_.front(); }
    [[nodiscard]] std::size_t output_dim() const { return dims_.back(); }
    [[nodiscard]] std::size_t num_layers() const { return dims_.size() - 1; }
    [[nodiscard]] std::size_t param_count() const { return params_.size(); }

    [[nodiscard]] std::span<double> params() { return params_; }
    [[nodiscard]] std::span<const double> params() const { return params_; }

    [[nodiscard]] double &weight(std::size_t layer, std::size_t row, std::size_t col) {
        return params_[w_off_[layer] + row * dims_[layer] + col];
    }
    [[nodiscard]] double &bias(std::size_t layer, std::size_t row) { return params_[b_off_[layer] + row]; }

    /// Orthogonal initialization: hidden layers with `hidden_gain`, last layer with
    /// `output_gain`, biases zero.
    template <class Rng>
    void init_orthogonal(Rng &rng, double hidden_gain, double output_gain) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t l = 0; l < num_layers(); ++l) {
            const std::size_t rows = dims_[l + 1], cols = dims_[l];
            const double gain = l + 1 == num_layers() ? output_gain : hidden_gain;
            // Orthonormalize along the shorter side with modified Gram–Schmidt.
            const bool by_rows = rows <= cols;
            const std::size_t n_vec = by_rows ? rows : cols, len = by_rows ? cols : rows;
            std::vector<std::vector<double>> v(n_vec, std::vector<double>(len));
            for (auto &vec : v)
                for (auto &x : vec) x = normal(rng);
            for (std::size_t i = 0; i < n_vec; ++i) {
                for (std::size_t j = 0; j < i; ++j) {
                    double dot = 0.0;
                    for (std::size_t k = 0; k < len; ++k) dot += v[i][k] * v[j][k];
                    for (std::size_t k = 0; k < len; ++k) v[i][k] -= dot * v[j][k];
                }
                double norm = 0.0;
                for (double x : v[i]) norm += x * x;
                norm = std::sqrt(norm);
                for (auto &x : v[i]) x /= norm;
            }
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c)
                    weight(l, r, c) = gain * (by_rows ? v[r][c] : v[c][r]);
                bias(l, r) = 0.0;
            }
        }
    }

    [[nodiscard]] std::vector<double> forward(std::span<const double> x) const {
        ForwardCache scratch;
        return forward(x, scratch);
    }

    /// Affine + activation per hidden layer, linear output. Fills `cache`.
    std::vector<double> forward(std::span<const double> x, ForwardCache &cache) const {
        if (x.size() != input_dim())
            throw ShapeError("DenseNet::forward: expected input of size " + std::to_string(input_dim()) +
                             ", got " + std::to_string(x.size()));
        cache.inputs.resize(num_layers());
        cache.pre.resize(num_layers());
        std::vector<double> h(x.begin(), x.end());
        for (std::size_t l = 0; l < num_layers(); ++l) {
            const std::size_t in = dims_[l], out = dims_[l + 1];
            cache.inputs[l] = h;
            std::vector<double> z(out);
            const double *w = params_.data() + w_off_[l];
            const double *b = params_.data() + b_off_[l];
            for (std::size_t r = 0; r < out; ++r) {
                double acc = b[r];
                const double *row = w + r * in;
                for (std::size_t c = 0; c < in; ++c) acc += row[c] * h[c];
                z[r] = acc;
            }
            cache.pre[l] = z;
            if (l + 1 < num_layers())
                for (auto &v : z) v = activate(v);
            h = std::move(z);
        }
        return h;
    }

    /// Accumulates d(upstreamᵀ·y)/dθ into `grad` (flat, param-shaped) and
    /// returns d(upstreamᵀ·y)/dx.
    std::vector<double> backward(const ForwardCache &cache, std::span<const double> upstream,
                                 std::span<double> grad) const {
        if (upstream.size() != output_dim()) throw ShapeError("DenseNet::backward: upstream size mismatch");
        if (grad.size() != param_count()) throw ShapeError("DenseNet::backward: gradient buffer size mismatch");
        if (cache.pre.size() != num_layers()) throw ShapeError("DenseNet::backward: missing forward cache");
        std::vector<double> delta(upstream.begin(), upstream.end());
        for (std::size_t li = num_layers(); li-- > 0;) {
            const std::size_t in = dims_[li], out = dims_[li + 1];
            if (li + 1 < num_layers())
                for (std::size_t r = 0; r < out; ++r) delta[r] *= activate_derivative(cache.pre[li][r]);
            const auto &x = cache.inputs[li];
            double *gw = grad.data() + w_off_[li];
            double *gb = grad.data() + b_off_[li];
            const double *w = params_.data() + w_off_[li];
            std::vector<double> next(in, 0.0);
            for (std::size_t r = 0; r < out; ++r) {
                const double d = delta[r];
                gb[r] += d;
                if (d == 0.0) continue;
                double *grow = gw + r * in;
                const double *wrow = w + r * in;
                for (std::size_t c = 0; c < in; ++c) {
                    grow[c] += d * x[c];
                    next[c] += d * wrow[c];
                }
            }
            delta = std::move(next);
        }
        return delta;
    }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const DenseNet &, const DenseNet &) = default;

private:
    [[nodiscard]] double activate(double z) const { return act_ == Activation::tanh ? std::tanh(z) : std::max(z, 0.0); }
    [[nodiscard]] double activate_derivative(double z) const {
        if (act_ == Activation::tanh) {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        return z > 0.0 ? 1.0 : 0.0;
    }

    std::vector<std::size_t> dims_;
    Activation act_ = Activation::tanh;
    std::vector<std::size_t> w_off_, b_off_;
    std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Gaussian policy head
// ---------------------------------------------------------------------------

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct GaussianHead {
    std::vector<double> log_std;

    void clamp() {
        for (auto &v : log_std) v = std::clamp(v, kLogStdMin, kLogStdMax);
    }

    friend bool operator==(const GaussianHead &, const GaussianHead &) = default;
};

/// Σ_i −½((a_i − μ_i)/σ_i)² − log σ_i − ½ log 2π.
[[nodiscard]] inline double gaussian_logprob(std::span<const double> mean, std::span<const double> log_std,
                                             std::span<const double> a) {
    if (mean.size() != log_std.size() || mean.size() != a.size())
        throw ShapeError("gaussian_logprob: shape mismatch");
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    double lp = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double z = (a[i] - mean[i]) * std::exp(-log_std[i]);
        lp += -0.5 * z * z - log_std[i] - half_log_2pi;
    }
    return lp;
}

/// Entropy of the diagonal Gaussian: Σ (log σ + ½(1 + log 2π)).
[[nodiscard]] inline double gaussian_entropy(std::span<const double> log_std) {
    double h = 0.0;
    for (double ls : log_std) h += ls + 0.5 * (1.0 + std::log(2.0 * std::numbers::pi));
    return h;
}

struct SampledAction {
    std::vector<double> raw;      ///< Gaussian sample before clamping
    std::vector<double> clamped;  ///< sample clipped to [−limit, limit]
    double logprob = 0.0;         ///< log-probability of `raw`
};

/// Draws a ~ N(mean, σ²) and clips it to [−limit, limit]; the log-probability
/// refers to the unclipped sample.
template <class Rng>
[[nodiscard]] SampledAction sample_action(std::span<const double> mean, std::span<const double> log_std, Rng &rng,
                                          double limit = 0.4) {
    if (mean.size() != log_std.size()) throw ShapeError("sample_action: shape mismatch");
    std::normal_distribution<double> normal(0.0, 1.0);
    SampledAction s;
    s.raw.resize(mean.size());
    s.clamped.resize(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
        s.raw[i] = mean[i] + std::exp(log_std[i]) * normal(rng);
        s.clamped[i] = std::clamp(s.raw[i], -limit, limit);
    }
    s.logprob = gaussian_logprob(mean, log_std, s.raw);
    return s;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::int64_t step_count = 0;

    AdamState() = default;
    explicit AdamState(std::size_t n) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam step in place. Rejects non-finite gradients untouched.
inline void adam_update(std::span<double> params, std::span<const double> grads, AdamState &st, double lr,
                        const AdamConfig &cfg = {}) {
    if (params.size() != grads.size() || st.first_moment.size() != params.size() ||
        st.second_moment.size() != params.size())
        throw ShapeError("adam_update: parameter, gradient and moment sizes differ");
    for (double g : grads)
        if (!std::isfinite(g)) throw TrainingError("adam_update: non-finite gradient");
    ++st.step_count;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.first_moment[i] = cfg.beta1 * st.first_moment[i] + (1.0 - cfg.beta1) * grads[i];
        st.second_moment[i] = cfg.beta2 * st.second_moment[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double m_hat = st.first_moment[i] / bc1;
        const double v_hat = st.second_moment[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

// ---------------------------------------------------------------------------
// Checkpoint records
// ---------------------------------------------------------------------------
//
// One record:  "VIVRL1" | u32 n_dims | u32 dims[n_dims] | u8 activation |
//              u32 n_log_std | f64 log_std[n] | f64 params[param_count]
// All integers and floats little-endian.

inline constexpr char kCheckpointMagic[] = "VIVRL1";

namespace io {

inline void put_u32(std::ostream &os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
    os.write(reinterpret_cast<const char *>(b), 4);
}

inline void put_f64(std::ostream &os, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
    os.write(reinterpret_cast<const char *>(b), 8);
}

inline std::uint32_t get_u32(std::istream &is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char *>(b), 4)) throw ConfigError("checkpoint: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream &is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char *>(b), 8)) throw ConfigError("checkpoint: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace io

inline void write_record(std::ostream &os, const DenseNet &net, std::span<const double> log_std) {
    os.write(kCheckpointMagic, 6);
    io::put_u32(os, static_cast<std::uint32_t>(net.dims().size()));
    for (auto d : net.dims()) io::put_u32(os, static_cast<std::uint32_t>(d));
    const auto tag = static_cast<char>(net.activation());
    os.write(&tag, 1);
    io::put_u32(os, static_cast<std::uint32_t>(log_std.size()));
    for (double v : log_std) io::put_f64(os, v);
    for (double v : net.params()) io::put_f64(os, v);
}

/// Reads one record; returns the network and fills `log_std`.
[[nodiscard]] inline DenseNet read_record(std::istream &is, std::vector<double> &log_std) {
    char magic[6];
    if (!is.read(magic, 6) || std::memcmp(magic, kCheckpointMagic, 6) != 0)
        throw ConfigError("checkpoint: bad magic (expected VIVRL1)");
    const std::uint32_t n_dims = io::get_u32(is);
    if (n_dims < 2 || n_dims > 64) throw ConfigError("checkpoint: implausible layer count");
    std::vector<std::size_t> dims(n_dims);
    for (auto &d : dims) {
        d = io::get_u32(is);
        if (d == 0 || d > 1u << 16) throw ConfigError("checkpoint: implausible layer width");
    }
    char tag = 0;
    if (!is.read(&tag, 1)) throw ConfigError("checkpoint: truncated");
    if (tag != 0 && tag != 1) throw ConfigError("checkpoint: unknown activation tag");
    DenseNet net(std::move(dims), static_cast<Activation>(tag));
    const std::uint32_t n_ls = io::get_u32(is);
    if (n_ls > net.output_dim()) throw ConfigError("checkpoint: log_std longer than output");
    log_std.resize(n_ls);
    for (auto &v : log_std) v = io::get_f64(is);
    for (auto &p : net.params()) p = io::get_f64(is);
    return net;
}

}  // namespace vivrl::rl
