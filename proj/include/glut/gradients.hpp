#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "glut/cube_lut.hpp"
#include "glut/glut_model.hpp"
#include "glut/losses.hpp"
#include "glut/parallel.hpp"

namespace glut {

struct LossWeights {
    double lambda_hc = 10.0;
    double lambda_sparse = 0.001;
};

/// A non-finite loss or gradient: the numerical fault aborts the optimizer step.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One value per learnable parameter in ParamLayout order, plus the loss it was taken at.
struct GradientBundle {
    std::vector<double> values;
    double loss = 0.0;
};

/// Reverse-mode gradient of the per-sample loss (L1 + lambda_hc * hue-chroma) through the clamped
/// mixture. Clamp passes gradients where the unclamped output lies inside [0,1] and blocks them
/// outside.
class GlutBackprop {
public:
    struct Workspace {
        std::vector<double> z, w, f;
        explicit Workspace(std::size_t n) : z(3 * n), w(n), f(3 * n) {}
    };

    explicit GlutBackprop(const GlutModel& m) : model_(m), prep_(m) {}

    const PreparedGlut& prepared() const { return prep_; }

    /// Adds scale * d(sample loss)/d(params) into grad and returns the unscaled sample loss.
    double accumulate(const Rgb& x, const Rgb& y, const HueTarget& hue, double scale, double lambda_hc,
                      std::span<double> grad, Workspace& ws) const {
        const std::size_t n = prep_.size();
        const ParamLayout lay = model_.layout();
        const auto lm = model_.local_matrices();
        const auto lb = model_.local_biases();

        // forward
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const Cholesky& l = prep_.cholesky(i);
            const Vec3 z = l.solve_lower(x - prep_.mean(i));
            ws.z[3 * i] = z[0];
            ws.z[3 * i + 1] = z[1];
            ws.z[3 * i + 2] = z[2];
            ws.w[i] = prep_.log_coef(i) - 0.5 * dot(z, z);
            mx = std::max(mx, ws.w[i]);
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ws.w[i] = std::exp(ws.w[i] - mx);
            sum += ws.w[i];
        }
        const double inv = 1.0 / (sum + prep_.epsilon() * std::exp(-mx));
        Vec3 u;
        for (std::size_t i = 0; i < n; ++i) {
            ws.w[i] *= inv;
            const double* m = &lm[9 * i];
            for (int r = 0; r < 3; ++r) {
                const double fi = m[3 * r] * x[0] + m[3 * r + 1] * x[1] + m[3 * r + 2] * x[2] + lb[3 * i + r];
                ws.f[3 * i + r] = fi;
                u[r] += ws.w[i] * fi;
            }
        }
        const Mat3 g_mat = model_.global_matrix();
        u += g_mat * x + model_.global_bias();
        const Rgb pred = clamp01(u);

        // loss and d loss / d pred
        Vec3 gy = loss_rec_grad(pred, y);
        double loss = loss_rec(pred, y);
        if (lambda_hc != 0.0) {
            Vec3 ghc;
            loss += lambda_hc * loss_hc_grad(pred, hue, ghc);
            gy += lambda_hc * ghc;
        }

        // through clamp
        Vec3 gu;
        for (int k = 0; k < 3; ++k) gu[k] = (u[k] >= 0.0 && u[k] <= 1.0) ? scale * gy[k] : 0.0;
        if (gu[0] == 0.0 && gu[1] == 0.0 && gu[2] == 0.0) return loss;

        // global affine
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) grad[lay.global_matrix() + 3 * r + c] += gu[r] * x[c];
            grad[lay.global_bias() + r] += gu[r];
        }

        // local affines and d loss / d w_i
        double wdw = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = ws.w[i];
            for (int r = 0; r < 3; ++r) {
                const double wg = w * gu[r];
                for (int c = 0; c < 3; ++c) grad[lay.local_matrix() + 9 * i + 3 * r + c] += wg * x[c];
                grad[lay.local_bias() + 3 * i + r] += wg;
            }
            const double dw = gu[0] * ws.f[3 * i] + gu[1] * ws.f[3 * i + 1] + gu[2] * ws.f[3 * i + 2];
            ws.f[3 * i] = dw;  // reuse slot
            wdw += w * dw;
        }

        // densities: d/d log(p_i o_i) = w_i (dw_i - sum_j w_j dw_j)
        for (std::size_t i = 0; i < n; ++i) {
            const double w = ws.w[i];
            if (w == 0.0) continue;
            const double dlq = w * (ws.f[3 * i] - wdw);
            const Cholesky& l = prep_.cholesky(i);
            const Vec3 z{ws.z[3 * i], ws.z[3 * i + 1], ws.z[3 * i + 2]};
            const Vec3 v = l.solve_upper(z);  // Sigma^-1 (x - mu)

            const double raw_o = model_.params()[lay.opacity() + i];
            grad[lay.opacity() + i] += dlq * (1.0 - sigmoid(raw_o));
            for (int k = 0; k < 3; ++k) grad[lay.means() + 3 * i + k] += dlq * v[k];

            // d log p / dL = v z^T - diag(1/l_kk), lower triangle
            const std::size_t c0 = lay.chol() + 6 * i;
            const auto raw = model_.params().subspan(c0, 6);
            grad[c0 + 0] += dlq * (v[0] * z[0] - 1.0 / l.l00) * sigmoid(raw[0]);
            grad[c0 + 1] += dlq * (v[1] * z[1] - 1.0 / l.l11) * sigmoid(raw[1]);
            grad[c0 + 2] += dlq * (v[2] * z[2] - 1.0 / l.l22) * sigmoid(raw[2]);
            grad[c0 + 3] += dlq * v[1] * z[0];
            grad[c0 + 4] += dlq * v[2] * z[0];
            grad[c0 + 5] += dlq * v[2] * z[1];
        }
        return loss;
    }

private:
    const GlutModel& model_;
    PreparedGlut prep_;
};

/// Adds weight * d reg_sparse / d opacity_raw into grad.
inline void accumulate_sparse_grad(const GlutModel& m, double weight, std::span<double> grad) {
    const auto off = m.layout().opacity();
    const double s = weight / static_cast<double>(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) grad[off + i] += s * opacity_entropy_grad_raw(m.opacity_raw()[i]);
}

/// Data term over selected samples: grad += scale * sum_i d loss_i / d params. Samples are
/// processed in fixed chunks whose partial sums are combined in chunk order, so the result is
/// independent of the thread count. Returns the unscaled summed sample loss.
inline double accumulate_data_grad(const GlutBackprop& bp, std::size_t nparams, std::span<const Rgb> inputs,
                                   std::span<const Rgb> targets, std::span<const HueTarget> hues,
                                   std::span<const std::uint32_t> idx, double scale, double lambda_hc,
                                   std::span<double> grad, int threads) {
    constexpr std::size_t kChunk = 128;
    const std::size_t chunks = chunk_count(idx.size(), kChunk);
    std::vector<std::vector<double>> partial(chunks);
    std::vector<double> losses(chunks, 0.0);
    parallel_chunks(chunks, threads, [&](std::size_t c) {
        GlutBackprop::Workspace ws(bp.prepared().size());
        auto& g = partial[c];
        g.assign(nparams, 0.0);
        const std::size_t end = std::min(idx.size(), (c + 1) * kChunk);
        double acc = 0.0;
        for (std::size_t s = c * kChunk; s < end; ++s) {
            const std::uint32_t k = idx[s];
            const HueTarget ht = hues.empty() ? hue_target(targets[k]) : hues[k];
            acc += bp.accumulate(inputs[k], targets[k], ht, scale, lambda_hc, g, ws);
        }
        losses[c] = acc;
    });
    double loss = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t p = 0; p < nparams; ++p) grad[p] += partial[c][p];
        loss += losses[c];
    }
    return loss;
}

inline void check_finite(std::span<const double> values, const std::string& what) {
    for (double v : values)
        if (!std::isfinite(v)) throw NumericalError("non-finite " + what);
}

/// Exact gradient of total_loss with respect to every raw parameter.
inline GradientBundle backward(const GlutModel& model, const ColorPairSet& batch, const LossWeights& lw = {}, int threads = 1) {
    batch.validate();
    if (batch.size() == 0) throw std::invalid_argument("backward: empty batch");
    GradientBundle out;
    out.values.assign(model.parameter_count(), 0.0);
    std::vector<std::uint32_t> idx(batch.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
    const GlutBackprop bp(model);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const double data = accumulate_data_grad(bp, model.parameter_count(), batch.inputs, batch.targets, {}, idx, inv_b,
                                             lw.lambda_hc, out.values, threads);
    out.loss = data * inv_b;
    if (lw.lambda_sparse != 0.0) {
        accumulate_sparse_grad(model, lw.lambda_sparse, out.values);
        out.loss += lw.lambda_sparse * reg_sparse(model);
    }
    check_finite(out.values, "gradient");
    if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss");
    return out;
}

/// mean_batch(L_rec + lambda_hc * L_hc) + lambda_sparse * R_sparse, evaluated by the forward path.
inline double total_loss(const GlutModel& model, const ColorPairSet& batch, const LossWeights& lw = {}) {
    batch.validate();
    if (batch.size() == 0) throw std::invalid_argument("total_loss: empty batch");
    const PreparedGlut prep(model);
    std::vector<double> scratch(model.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Rgb pred = prep.evaluate(batch.inputs[i], scratch);
        acc += loss_rec(pred, batch.targets[i]);
        if (lw.lambda_hc != 0.0) acc += lw.lambda_hc * loss_hc(pred, batch.targets[i]);
    }
    double loss = acc / static_cast<double>(batch.size());
    if (lw.lambda_sparse != 0.0) loss += lw.lambda_sparse * reg_sparse(model);
    return loss;
}

}  // namespace glut
