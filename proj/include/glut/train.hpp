#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "glut/cube_lut.hpp"
#include "glut/glut_model.hpp"
#include "glut/gradients.hpp"
#include "glut/metrics.hpp"
#include "glut/model_io.hpp"
#include "glut/optim.hpp"

namespace glut {

/// Hard-sample ratio ramp over 1-based epochs: zero before start_epoch, linear from start_ratio to
/// end_ratio up to end_epoch, constant afterwards.
struct MiningSchedule {
    double start_epoch = 5;
    double end_epoch = 20;
    double start_ratio = 0.10;
    double end_ratio = 0.40;

    void validate() const {
        if (!(start_ratio >= 0.0 && start_ratio <= 1.0 && end_ratio >= 0.0 && end_ratio <= 1.0))
            throw std::invalid_argument("mining ratios must lie in [0,1]");
        if (!(start_epoch < end_epoch)) throw std::invalid_argument("mining start_epoch must precede end_epoch");
    }
};

inline double mining_ratio(double epoch, const MiningSchedule& s) {
    if (epoch < s.start_epoch) return 0.0;
    if (epoch >= s.end_epoch) return s.end_ratio;
    return s.start_ratio + (s.end_ratio - s.start_ratio) * (epoch - s.start_epoch) / (s.end_epoch - s.start_epoch);
}

/// Seed of the fixed held-out sample drawn from the evaluation lattice.
inline constexpr std::uint64_t kHoldoutSeed = 0x5eed0f7e57ULL;

struct TrainConfig {
    int epochs = 20;
    int batch_size = 1024;
    double base_lr = 1e-3;
    double lambda_hc = 10.0;
    double lambda_sparse = 0.001;
    MiningSchedule mining;
    std::uint64_t seed = 0;
    int threads = 0;
    int train_q = 128;                  // training lattice samples per axis (divides 256)
    std::size_t holdout_count = 65536;  // sampled from the remaining lattice colors
    double mean_jitter = 0.0;           // optional seeded perturbation of the initial grid

    LossWeights loss_weights() const { return {lambda_hc, lambda_sparse}; }

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("epochs must be positive");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
        if (!(base_lr > 0.0)) throw std::invalid_argument("base_lr must be positive");
        if (lambda_hc < 0.0 || lambda_sparse < 0.0) throw std::invalid_argument("loss weights must be non-negative");
        mining.validate();
    }
};

/// Aborts a run whose loss or gradient stopped being finite.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double holdout_psnr = 0.0;
    double holdout_de76 = 0.0;
    double holdout_de00 = 0.0;
    double wall_ms = 0.0;
    double mining_ratio = 0.0;

    std::string to_json() const {
        char buf[320];
        std::snprintf(buf, sizeof buf,
                      "{\"epoch\":%d,\"lr\":%.9g,\"train_loss\":%.9g,\"holdout_psnr\":%.6f,\"holdout_de76\":%.6f,"
                      "\"holdout_de00\":%.6f,\"wall_ms\":%.3f,\"mining_ratio\":%.4f}",
                      epoch, lr, train_loss, holdout_psnr, holdout_de76, holdout_de00, wall_ms, mining_ratio);
        return buf;
    }
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct FitResult {
    GlutModel model;
    std::vector<EpochRecord> log;
};

/// Grid shape for N initial means: start from ceil(cbrt N) per axis and shrink the blue, then green,
/// then red axis while the grid still holds at least N points.
inline std::array<int, 3> init_grid_dims(std::size_t n) {
    int k = 1;
    while (static_cast<std::size_t>(k) * k * k < n) ++k;
    std::array<int, 3> d{k, k, k};
    for (int axis = 2; axis >= 0; --axis) {
        while (d[static_cast<std::size_t>(axis)] > 1) {
            auto t = d;
            --t[static_cast<std::size_t>(axis)];
            if (static_cast<std::size_t>(t[0]) * t[1] * t[2] < n) break;
            d = t;
        }
    }
    return d;
}

inline constexpr double kInitSigma = 0.15;
inline constexpr double kInitOpacityRaw = 6.0;

/// Means on a regular grid over [0,1]^3 (first N points, red fastest), isotropic sigma 0.15,
/// opacity sigmoid(6), identity local transforms and a zero global transform.
inline GlutModel init_glut(std::size_t n, std::uint64_t seed = 0, double mean_jitter = 0.0) {
    if (n == 0) throw std::invalid_argument("init_glut: N must be positive");
    GlutModel m(n);
    const auto d = init_grid_dims(n);
    auto coord = [](int i, int len) { return len == 1 ? 0.5 : static_cast<double>(i) / (len - 1); };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-mean_jitter, mean_jitter);
    const double diag = softplus_inverse(kInitSigma);
    for (std::size_t i = 0; i < n; ++i) {
        const int r = static_cast<int>(i % static_cast<std::size_t>(d[0]));
        const int g = static_cast<int>((i / static_cast<std::size_t>(d[0])) % static_cast<std::size_t>(d[1]));
        const int b = static_cast<int>(i / static_cast<std::size_t>(d[0] * d[1]));
        GaussianPrimitive p;
        p.mean = {coord(r, d[0]), coord(g, d[1]), coord(b, d[2])};
        if (mean_jitter > 0.0)
            for (int k = 0; k < 3; ++k) p.mean[k] += jitter(rng);
        p.chol_raw = {diag, diag, diag, 0.0, 0.0, 0.0};
        p.opacity_raw = kInitOpacityRaw;
        m.set_primitive(i, p);
    }
    return m;
}

/// Per-epoch batch plan: a fresh permutation supplies the uniform part of every batch; when the
/// mining ratio r is positive, round(r * batch) entries of each batch are drawn uniformly from the
/// ceil(r * n) samples with the largest current error instead. Mining uses its own generator
/// seeded from the main one, so r = 0 leaves the main stream identical to plain shuffling.
inline std::vector<std::vector<std::uint32_t>> mine_batches(std::span<const double> errors, double ratio,
                                                            std::size_t batch_size, std::mt19937_64& rng) {
    const std::size_t n = errors.size();
    if (n == 0 || batch_size == 0) throw std::invalid_argument("mine_batches: empty input");
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t steps = (n + batch_size - 1) / batch_size;
    std::vector<std::vector<std::uint32_t>> batches(steps);
    if (ratio <= 0.0) {
        for (std::size_t s = 0; s < steps; ++s)
            batches[s].assign(perm.begin() + static_cast<std::ptrdiff_t>(s * batch_size),
                              perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, (s + 1) * batch_size)));
        return batches;
    }
    const auto top_count = std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n))));
    std::vector<std::uint32_t> hard(n);
    std::iota(hard.begin(), hard.end(), 0u);
    std::nth_element(hard.begin(), hard.begin() + static_cast<std::ptrdiff_t>(top_count - 1), hard.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return errors[a] > errors[b] || (errors[a] == errors[b] && a < b); });
    hard.resize(top_count);
    std::mt19937_64 hard_rng(rng());
    std::uniform_int_distribution<std::size_t> pick(0, top_count - 1);
    std::size_t cursor = 0;
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t size = std::min(batch_size, n - s * batch_size);
        const auto n_hard = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(size)));
        auto& b = batches[s];
        b.reserve(size);
        for (std::size_t k = 0; k < size - n_hard; ++k) b.push_back(perm[cursor++]);
        for (std::size_t k = 0; k < n_hard; ++k) b.push_back(hard[pick(hard_rng)]);
    }
    return batches;
}

/// Per-sample L1 error of the clamped model output.
inline std::vector<double> per_sample_errors(const PreparedGlut& prep, const ColorPairSet& data, int threads) {
    std::vector<double> err(data.size());
    constexpr std::size_t kChunk = 4096;
    parallel_chunks(chunk_count(data.size(), kChunk), threads, [&](std::size_t c) {
        std::vector<double> scratch(prep.size());
        const std::size_t end = std::min(data.size(), (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) err[i] = loss_rec(prep.evaluate(data.inputs[i], scratch), data.targets[i]);
    });
    return err;
}

inline std::vector<HueTarget> hue_targets(std::span<const Rgb> targets) {
    std::vector<HueTarget> out;
    out.reserve(targets.size());
    for (const auto& t : targets) out.push_back(hue_target(t));
    return out;
}

/// Training inputs and a fixed held-out sample, both with targets.
struct FitData {
    ColorPairSet train;
    ColorPairSet holdout;
};

/// Densifies a grid LUT onto the strided training lattice and a seeded sample of the remaining
/// lattice colors.
inline FitData make_fit_data(const CubeLut& lut, int train_q, std::size_t holdout_count, std::uint64_t holdout_seed = kHoldoutSeed) {
    lut.validate();
    const LatticeSplit split(train_q);
    const auto train_in = split.materialize_train();
    const auto test_in = split.sample_test(holdout_count, holdout_seed);
    return {densify(lut, train_in), densify(lut, test_in)};
}

/// Runs the full recipe: grid init, Adam with per-step cosine annealing, hard-sample mining, and
/// a held-out evaluation after every epoch. The returned parameters are rounded to file
/// precision before the final evaluation, so the last log record describes the stored model.
inline FitResult fit_glut(const ColorPairSet& train, const ColorPairSet& holdout, std::size_t n, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {}) {
    cfg.validate();
    train.validate();
    holdout.validate();
    if (train.size() == 0) throw std::invalid_argument("fit_glut: empty training set");
    FitResult res{init_glut(n, cfg.seed, cfg.mean_jitter), {}};
    GlutModel& model = res.model;
    const LossWeights lw = cfg.loss_weights();
    const auto hues = hue_targets(train.targets);
    AdamState adam(model.parameter_count());
    std::mt19937_64 rng(cfg.seed);
    const std::size_t bsz = static_cast<std::size_t>(cfg.batch_size);
    const long steps_per_epoch = static_cast<long>((train.size() + bsz - 1) / bsz);
    const long total_steps = steps_per_epoch * cfg.epochs;
    long step = 0;
    std::vector<double> grad(model.parameter_count());

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double ratio = mining_ratio(epoch, cfg.mining);
        std::vector<double> errors;
        if (ratio > 0.0) errors = per_sample_errors(PreparedGlut(model), train, cfg.threads);
        else errors.assign(train.size(), 0.0);
        const auto batches = mine_batches(errors, ratio, bsz, rng);

        double loss_sum = 0.0;
        double lr = cfg.base_lr;
        for (const auto& batch : batches) {
            std::fill(grad.begin(), grad.end(), 0.0);
            const GlutBackprop bp(model);
            const double inv_b = 1.0 / static_cast<double>(batch.size());
            double loss = inv_b * accumulate_data_grad(bp, model.parameter_count(), train.inputs, train.targets, hues, batch,
                                                       inv_b, lw.lambda_hc, grad, cfg.threads);
            if (lw.lambda_sparse != 0.0) {
                accumulate_sparse_grad(model, lw.lambda_sparse, grad);
                loss += lw.lambda_sparse * reg_sparse(model);
            }
            try {
                check_finite(grad, "gradient");
            } catch (const NumericalError& e) {
                throw TrainingDiverged(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
            }
            if (!std::isfinite(loss))
                throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
            lr = cosine_lr(step, total_steps, cfg.base_lr);
            adam.update(model.params(), grad, lr);
            ++step;
            loss_sum += loss;
        }
        if (epoch == cfg.epochs) snap_to_storage_precision(model);
        try {
            model.validate();
        } catch (const std::invalid_argument& e) {
            throw TrainingDiverged(std::string(e.what()) + " after epoch " + std::to_string(epoch));
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = loss_sum / static_cast<double>(batches.size());
        rec.mining_ratio = ratio;
        if (holdout.size() > 0) {
            const EvalReport ev = evaluate_pairs(model, holdout, cfg.threads);
            rec.holdout_psnr = ev.psnr;
            rec.holdout_de76 = ev.delta_e76;
            rec.holdout_de00 = ev.delta_e00;
        }
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        res.log.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return res;
}

/// Fits a grid LUT: targets are its trilinear reconstruction on the training lattice, and the
/// held-out sample comes from the remaining 8-bit lattice colors.
inline FitResult fit_glut(const CubeLut& lut, std::size_t n, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    const FitData data = make_fit_data(lut, cfg.train_q, cfg.holdout_count);
    return fit_glut(data.train, data.holdout, n, cfg, on_epoch);
}

}  // namespace glut
