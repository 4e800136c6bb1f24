#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "glut/vec3.hpp"

namespace glut {

/// Weight-normalization constant used unless a model says otherwise.
inline constexpr double kDefaultEpsilon = 1e-6;

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Lower-triangular Cholesky factor stored as (l00, l11, l22, l10, l20, l21).
struct Cholesky {
    double l00, l11, l22, l10, l20, l21;

    /// Solves L z = d by forward substitution.
    Vec3 solve_lower(const Vec3& d) const {
        const double z0 = d[0] / l00;
        const double z1 = (d[1] - l10 * z0) / l11;
        const double z2 = (d[2] - l20 * z0 - l21 * z1) / l22;
        return {z0, z1, z2};
    }
    /// Solves L^T v = z by back substitution.
    Vec3 solve_upper(const Vec3& z) const {
        const double v2 = z[2] / l22;
        const double v1 = (z[1] - l21 * v2) / l11;
        const double v0 = (z[0] - l10 * v1 - l20 * v2) / l00;
        return {v0, v1, v2};
    }
    Mat3 matrix() const {
        Mat3 m;
        m.m = {l00, 0.0, 0.0, l10, l11, 0.0, l20, l21, l22};
        return m;
    }
    double log_det_sigma() const { return 2.0 * (std::log(l00) + std::log(l11) + std::log(l22)); }
};

/// One colour-space primitive. chol_raw = (d0, d1, d2, l10, l20, l21): the three diagonal entries
/// pass through softplus, the sub-diagonal entries are used as-is.
struct GaussianPrimitive {
    Vec3 mean;
    std::array<double, 6> chol_raw{};
    double opacity_raw = 0.0;
    Mat3 local_matrix = Mat3::identity();
    Vec3 local_bias;

    double opacity() const { return sigmoid(opacity_raw); }
    Cholesky cholesky() const {
        return {softplus(chol_raw[0]), softplus(chol_raw[1]), softplus(chol_raw[2]), chol_raw[3], chol_raw[4], chol_raw[5]};
    }
    Mat3 covariance() const {
        const Mat3 l = cholesky().matrix();
        Mat3 s;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = 0; k < 3; ++k) acc += l(r, k) * l(c, k);
                s(r, c) = acc;
            }
        return s;
    }
};

/// Flat structure-of-arrays layout of the 22N + 12 learnable parameters. Serialization and gradient
/// bundles share this order.
struct ParamLayout {
    std::size_t n = 0;

    static constexpr std::size_t count_for(std::size_t n) { return 22 * n + 12; }
    std::size_t count() const { return count_for(n); }
    std::size_t means() const { return 0; }
    std::size_t chol() const { return 3 * n; }
    std::size_t opacity() const { return 9 * n; }
    std::size_t local_matrix() const { return 10 * n; }
    std::size_t local_bias() const { return 19 * n; }
    std::size_t global_matrix() const { return 22 * n; }
    std::size_t global_bias() const { return 22 * n + 9; }
};

/// N Gaussian primitives with local affine transforms plus one global affine transform.
class GlutModel {
public:
    GlutModel() = default;
    explicit GlutModel(std::size_t n, double epsilon = kDefaultEpsilon)
        : layout_{n}, params_(ParamLayout::count_for(n), 0.0), epsilon_(epsilon) {
        if (n == 0) throw std::invalid_argument("GLUT needs at least one primitive");
        if (!(epsilon > 0.0)) throw std::invalid_argument("GLUT epsilon must be positive");
    }

    std::size_t size() const { return layout_.n; }
    std::size_t parameter_count() const { return params_.size(); }
    const ParamLayout& layout() const { return layout_; }
    double epsilon() const { return epsilon_; }
    void set_epsilon(double e) { epsilon_ = e; }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    std::span<double> means() { return block(layout_.means(), 3 * size()); }
    std::span<const double> means() const { return block(layout_.means(), 3 * size()); }
    std::span<double> chol_raw() { return block(layout_.chol(), 6 * size()); }
    std::span<const double> chol_raw() const { return block(layout_.chol(), 6 * size()); }
    std::span<double> opacity_raw() { return block(layout_.opacity(), size()); }
    std::span<const double> opacity_raw() const { return block(layout_.opacity(), size()); }
    std::span<double> local_matrices() { return block(layout_.local_matrix(), 9 * size()); }
    std::span<const double> local_matrices() const { return block(layout_.local_matrix(), 9 * size()); }
    std::span<double> local_biases() { return block(layout_.local_bias(), 3 * size()); }
    std::span<const double> local_biases() const { return block(layout_.local_bias(), 3 * size()); }

    Vec3 mean(std::size_t i) const { return vec_at(layout_.means(), i); }
    Vec3 local_bias(std::size_t i) const { return vec_at(layout_.local_bias(), i); }
    void set_local_bias(std::size_t i, const Vec3& b) {
        for (int k = 0; k < 3; ++k) params_[layout_.local_bias() + 3 * i + k] = b[k];
    }
    double opacity(std::size_t i) const { return sigmoid(params_[layout_.opacity() + i]); }

    Mat3 global_matrix() const {
        Mat3 m;
        std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>(layout_.global_matrix()), 9, m.m.begin());
        return m;
    }
    void set_global_matrix(const Mat3& m) {
        std::copy_n(m.m.begin(), 9, params_.begin() + static_cast<std::ptrdiff_t>(layout_.global_matrix()));
    }
    Vec3 global_bias() const { return vec_at(layout_.global_bias(), 0); }
    void set_global_bias(const Vec3& g) {
        for (int k = 0; k < 3; ++k) params_[layout_.global_bias() + k] = g[k];
    }

    GaussianPrimitive primitive(std::size_t i) const {
        GaussianPrimitive p;
        p.mean = mean(i);
        for (int k = 0; k < 6; ++k) p.chol_raw[static_cast<std::size_t>(k)] = params_[layout_.chol() + 6 * i + k];
        p.opacity_raw = params_[layout_.opacity() + i];
        for (int k = 0; k < 9; ++k) p.local_matrix.m[static_cast<std::size_t>(k)] = params_[layout_.local_matrix() + 9 * i + k];
        p.local_bias = local_bias(i);
        return p;
    }

    void set_primitive(std::size_t i, const GaussianPrimitive& p) {
        for (int k = 0; k < 3; ++k) params_[layout_.means() + 3 * i + k] = p.mean[k];
        for (int k = 0; k < 6; ++k) params_[layout_.chol() + 6 * i + k] = p.chol_raw[static_cast<std::size_t>(k)];
        params_[layout_.opacity() + i] = p.opacity_raw;
        for (int k = 0; k < 9; ++k) params_[layout_.local_matrix() + 9 * i + k] = p.local_matrix.m[static_cast<std::size_t>(k)];
        set_local_bias(i, p.local_bias);
    }

    void validate() const {
        if (size() == 0) throw std::invalid_argument("GLUT needs at least one primitive");
        if (!(epsilon_ > 0.0)) throw std::invalid_argument("GLUT epsilon must be positive");
        for (double v : params_)
            if (!std::isfinite(v)) throw std::invalid_argument("GLUT has non-finite parameters");
    }

    friend bool operator==(const GlutModel& a, const GlutModel& b) {
        return a.layout_.n == b.layout_.n && a.epsilon_ == b.epsilon_ && a.params_ == b.params_;
    }

private:
    std::span<double> block(std::size_t off, std::size_t len) { return std::span<double>(params_).subspan(off, len); }
    std::span<const double> block(std::size_t off, std::size_t len) const {
        return std::span<const double>(params_).subspan(off, len);
    }
    Vec3 vec_at(std::size_t off, std::size_t i) const {
        return {params_[off + 3 * i], params_[off + 3 * i + 1], params_[off + 3 * i + 2]};
    }

    ParamLayout layout_{};
    std::vector<double> params_;
    double epsilon_ = kDefaultEpsilon;
};

// ---------------------------------------------------------------------------------------------
// Per-primitive math

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

/// Squared Mahalanobis distance (x - mu)^T Sigma^-1 (x - mu) through a triangular solve against L.
inline double mahalanobis(const GaussianPrimitive& p, const Rgb& x) {
    const Vec3 z = p.cholesky().solve_lower(x - p.mean);
    return dot(z, z);
}

/// Normalized trivariate Gaussian density at x.
inline double gaussian_density(const GaussianPrimitive& p, const Rgb& x) {
    const Cholesky l = p.cholesky();
    const Vec3 z = l.solve_lower(x - p.mean);
    return std::exp(-1.5 * kLog2Pi - 0.5 * l.log_det_sigma() - 0.5 * dot(z, z));
}

// ---------------------------------------------------------------------------------------------
// Evaluation kernel

/// Arithmetic-operation tally used for cost accounting. The null counter compiles away.
struct NullOpCounter {
    constexpr void add(std::uint64_t) const noexcept {}
};
struct OpCounter {
    std::uint64_t ops = 0;
    void add(std::uint64_t n) noexcept { ops += n; }
};

/// Per-model quantities shared by every evaluated color: Cholesky factors, log normalizers
/// including opacity, local and global transforms. Built once per model, then read-only.
class PreparedGlut {
public:
    PreparedGlut() = default;
    explicit PreparedGlut(const GlutModel& m) : n_(m.size()), epsilon_(m.epsilon()) {
        chol_.resize(n_);
        log_coef_.resize(n_);
        mean_.resize(3 * n_);
        local_m_.assign(m.local_matrices().begin(), m.local_matrices().end());
        local_b_.assign(m.local_biases().begin(), m.local_biases().end());
        std::copy(m.means().begin(), m.means().end(), mean_.begin());
        for (std::size_t i = 0; i < n_; ++i) {
            const GaussianPrimitive p = m.primitive(i);
            chol_[i] = p.cholesky();
            const double log_o = -softplus(-p.opacity_raw);  // log sigmoid
            log_coef_[i] = log_o - 1.5 * kLog2Pi - 0.5 * chol_[i].log_det_sigma();
        }
        global_m_ = m.global_matrix();
        global_b_ = m.global_bias();
    }

    std::size_t size() const { return n_; }
    double epsilon() const { return epsilon_; }
    const Cholesky& cholesky(std::size_t i) const { return chol_[i]; }
    double log_coef(std::size_t i) const { return log_coef_[i]; }
    Vec3 mean(std::size_t i) const { return {mean_[3 * i], mean_[3 * i + 1], mean_[3 * i + 2]}; }

    /// log(p_i(x) * o_i).
    template <typename Counter = NullOpCounter>
    double log_weighted_density(std::size_t i, const Rgb& x, Counter&& ops = Counter{}) const {
        const Cholesky& l = chol_[i];
        const double d0 = x[0] - mean_[3 * i], d1 = x[1] - mean_[3 * i + 1], d2 = x[2] - mean_[3 * i + 2];
        const double z0 = d0 / l.l00;
        const double z1 = (d1 - l.l10 * z0) / l.l11;
        const double z2 = (d2 - l.l20 * z0 - l.l21 * z1) / l.l22;
        // 3 (diff) + 9 (solve) + 5 (dot) + 2 (scale, offset)
        ops.add(19);
        return log_coef_[i] - 0.5 * (z0 * z0 + z1 * z1 + z2 * z2);
    }

    /// Normalized influence weights over the `active` primitives (all others are zero), computed
    /// with a max-log shift so far-away colors do not underflow. `logq` receives the weights.
    template <typename Active, typename Counter = NullOpCounter>
    void weights_into(const Rgb& x, Active&& active, std::span<double> logq, Counter&& ops = Counter{}) const {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n_; ++i) {
            if (!active(i)) continue;
            logq[i] = log_weighted_density(i, x, ops);
            mx = std::max(mx, logq[i]);
        }
        if (!std::isfinite(mx)) {
            std::fill(logq.begin(), logq.begin() + static_cast<std::ptrdiff_t>(n_), 0.0);
            return;
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (!active(i)) {
                logq[i] = 0.0;
                continue;
            }
            logq[i] = std::exp(logq[i] - mx);
            sum += logq[i];
            ops.add(3);  // shift, exp, accumulate
        }
        const double denom = sum + epsilon_ * std::exp(-mx);
        const double inv = 1.0 / denom;
        ops.add(4);
        for (std::size_t i = 0; i < n_; ++i) {
            if (!active(i)) continue;
            logq[i] *= inv;
            ops.add(1);
        }
    }

    /// Unclamped mixture output over the active primitives.
    template <typename Active, typename Counter = NullOpCounter>
    Vec3 mix(const Rgb& x, Active&& active, std::span<double> scratch, Counter&& ops = Counter{}) const {
        weights_into(x, active, scratch, ops);
        double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (!active(i)) continue;
            const double w = scratch[i];
            const double* m = &local_m_[9 * i];
            const double* b = &local_b_[3 * i];
            acc0 += w * (m[0] * x[0] + m[1] * x[1] + m[2] * x[2] + b[0]);
            acc1 += w * (m[3] * x[0] + m[4] * x[1] + m[5] * x[2] + b[1]);
            acc2 += w * (m[6] * x[0] + m[7] * x[1] + m[8] * x[2] + b[2]);
            ops.add(24);  // 18 affine + 6 weighted accumulate
        }
        const Vec3 gx = global_m_ * x;
        ops.add(21);  // global affine 18 + final sums 3
        return {acc0 + gx[0] + global_b_[0], acc1 + gx[1] + global_b_[1], acc2 + gx[2] + global_b_[2]};
    }

    template <typename Counter = NullOpCounter>
    Vec3 evaluate_unclamped(const Rgb& x, std::span<double> scratch, Counter&& ops = Counter{}) const {
        return mix(x, [](std::size_t) { return true; }, scratch, ops);
    }

    template <typename Counter = NullOpCounter>
    Rgb evaluate(const Rgb& x, std::span<double> scratch, Counter&& ops = Counter{}) const {
        return clamp01(evaluate_unclamped(x, scratch, ops));
    }

    /// Number of primitives kept by the Euclidean pre-filter.
    std::size_t kept_count(double keep_fraction) const {
        const auto k = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n_) - 1e-12));
        return std::clamp<std::size_t>(k, 1, n_);
    }

    /// Sparse activation: only the ceil(keep_fraction * N) primitives nearest to x in Euclidean
    /// distance get exact densities; the rest get zero weight. `scratch` needs 3N doubles.
    template <typename Counter = NullOpCounter>
    Rgb evaluate_sparse(const Rgb& x, double keep_fraction, std::span<double> scratch, std::span<std::uint32_t> order,
                        Counter&& ops = Counter{}) const {
        if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw std::invalid_argument("keep_fraction must be in (0, 1]");
        const std::size_t keep = kept_count(keep_fraction);
        std::span<double> dist = scratch.subspan(n_, n_);
        std::span<double> flag = scratch.subspan(2 * n_, n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double d0 = x[0] - mean_[3 * i], d1 = x[1] - mean_[3 * i + 1], d2 = x[2] - mean_[3 * i + 2];
            dist[i] = d0 * d0 + d1 * d1 + d2 * d2;
            ops.add(8);
            order[i] = static_cast<std::uint32_t>(i);
        }
        if (keep < n_) {
            std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep - 1), order.begin() + static_cast<std::ptrdiff_t>(n_),
                             [&](std::uint32_t a, std::uint32_t b) {
                                 ops.add(1);
                                 return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                             });
        }
        std::fill(flag.begin(), flag.end(), 0.0);
        for (std::size_t j = 0; j < keep; ++j) flag[order[j]] = 1.0;
        return clamp01(mix(x, [&](std::size_t i) { return flag[i] != 0.0; }, scratch.first(n_), ops));
    }

private:
    std::size_t n_ = 0;
    double epsilon_ = kDefaultEpsilon;
    std::vector<Cholesky> chol_;
    std::vector<double> log_coef_;
    std::vector<double> mean_;
    std::vector<double> local_m_;
    std::vector<double> local_b_;
    Mat3 global_m_;
    Vec3 global_b_;
};

// ---------------------------------------------------------------------------------------------
// Convenience single-color entry points (prepare per call; use PreparedGlut in loops)

/// w_i(x) = p_i(x) o_i / (sum_j p_j(x) o_j + eps).
inline std::vector<double> influence_weights(const GlutModel& model, const Rgb& x) {
    const PreparedGlut prep(model);
    std::vector<double> w(model.size());
    prep.weights_into(x, [](std::size_t) { return true; }, std::span<double>(w));
    return w;
}

inline Vec3 evaluate_unclamped(const GlutModel& model, const Rgb& x) {
    const PreparedGlut prep(model);
    std::vector<double> scratch(model.size());
    return prep.evaluate_unclamped(x, scratch);
}

inline Rgb evaluate(const GlutModel& model, const Rgb& x) { return clamp01(evaluate_unclamped(model, x)); }

inline Rgb evaluate_sparse(const GlutModel& model, const Rgb& x, double keep_fraction) {
    const PreparedGlut prep(model);
    std::vector<double> scratch(3 * model.size());
    std::vector<std::uint32_t> order(model.size());
    return prep.evaluate_sparse(x, keep_fraction, scratch, order);
}

}  // namespace glut
