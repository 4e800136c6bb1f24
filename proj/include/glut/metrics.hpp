#pragma once

#include <chrono>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "glut/color.hpp"
#include "glut/cube_lut.hpp"
#include "glut/glut_model.hpp"
#include "glut/parallel.hpp"

namespace glut {

struct EvalReport {
    double psnr = 0.0;
    double delta_e00 = 0.0;
    double delta_e76 = 0.0;
    std::size_t sample_count = 0;
    double wall_ms = 0.0;
};

namespace metrics_detail {

struct Sums {
    double sq = 0.0, de76 = 0.0, de00 = 0.0;
};

inline double psnr_from_mse(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

/// Accumulates error sums over fixed chunks and combines them in chunk order.
template <typename PredFn>
EvalReport reduce(std::size_t count, std::span<const Rgb> targets, int threads, PredFn&& pred_of) {
    const auto t0 = std::chrono::steady_clock::now();
    constexpr std::size_t kChunk = 2048;
    const std::size_t chunks = chunk_count(count, kChunk);
    std::vector<Sums> partial(chunks);
    parallel_chunks(chunks, threads, [&](std::size_t c) {
        Sums s;
        auto ctx = pred_of.make_context();
        const std::size_t end = std::min(count, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) {
            const Rgb p = pred_of(i, ctx);
            const Rgb& t = targets[i];
            for (int k = 0; k < 3; ++k) s.sq += (p[k] - t[k]) * (p[k] - t[k]);
            const Lab lp = srgb_to_lab(p), lt = srgb_to_lab(t);
            s.de76 += delta_e76(lp, lt);
            s.de00 += delta_e00(lp, lt);
        }
        partial[c] = s;
    });
    Sums total;
    for (const auto& s : partial) {
        total.sq += s.sq;
        total.de76 += s.de76;
        total.de00 += s.de00;
    }
    EvalReport r;
    r.sample_count = count;
    if (count > 0) {
        const double n = static_cast<double>(count);
        r.psnr = psnr_from_mse(total.sq / (3.0 * n));
        r.delta_e76 = total.de76 / n;
        r.delta_e00 = total.de00 / n;
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

struct StreamPred {
    std::span<const Rgb> pred;
    int make_context() const { return 0; }
    Rgb operator()(std::size_t i, int) const { return pred[i]; }
};

struct ModelPred {
    const PreparedGlut& prep;
    std::span<const Rgb> inputs;
    std::vector<double> make_context() const { return std::vector<double>(prep.size()); }
    Rgb operator()(std::size_t i, std::vector<double>& scratch) const { return prep.evaluate(inputs[i], scratch); }
};

}  // namespace metrics_detail

/// Fidelity of a prediction stream against its targets.
inline EvalReport compare_colors(std::span<const Rgb> pred, std::span<const Rgb> target, int threads = 1) {
    if (pred.size() != target.size()) throw std::invalid_argument("compare_colors: length mismatch");
    return metrics_detail::reduce(pred.size(), target, threads, metrics_detail::StreamPred{pred});
}

/// Fidelity of a model on paired colors.
inline EvalReport evaluate_pairs(const PreparedGlut& prep, const ColorPairSet& pairs, int threads = 0) {
    pairs.validate();
    return metrics_detail::reduce(pairs.size(), pairs.targets, threads, metrics_detail::ModelPred{prep, pairs.inputs});
}

inline EvalReport evaluate_pairs(const GlutModel& model, const ColorPairSet& pairs, int threads = 0) {
    return evaluate_pairs(PreparedGlut(model), pairs, threads);
}

}  // namespace glut
