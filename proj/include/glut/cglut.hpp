#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "glut/glut_model.hpp"
#include "glut/gradients.hpp"
#include "glut/metrics.hpp"
#include "glut/model_io.hpp"
#include "glut/optim.hpp"
#include "glut/train.hpp"

namespace glut {

enum class CglutMode { FullGeneration, SharedGeometry };

/// Fully connected layer y = W x + b; W is out x in row-major at `offset`, b follows it.
struct DenseLayer {
    std::size_t in = 0, out = 0, offset = 0;
    std::size_t param_count() const { return out * in + out; }

    void forward(std::span<const double> p, std::span<const double> x, std::span<double> y) const {
        const double* w = &p[offset];
        const double* b = w + out * in;
        for (std::size_t o = 0; o < out; ++o) {
            double acc = b[o];
            const double* row = w + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
            y[o] = acc;
        }
    }

    /// Accumulates dW, db into dp and, when dx is non-empty, writes dL/dx.
    void backward(std::span<const double> p, std::span<const double> x, std::span<const double> dy, std::span<double> dp,
                  std::span<double> dx) const {
        const double* w = &p[offset];
        double* dw = &dp[offset];
        double* db = dw + out * in;
        if (!dx.empty()) std::fill(dx.begin(), dx.begin() + static_cast<std::ptrdiff_t>(in), 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            const double g = dy[o];
            if (g == 0.0) continue;
            db[o] += g;
            double* drow = dw + o * in;
            const double* row = w + o * in;
            for (std::size_t i = 0; i < in; ++i) drow[i] += g * x[i];
            if (!dx.empty())
                for (std::size_t i = 0; i < in; ++i) dx[i] += g * row[i];
        }
    }
};

/// A stack of dense layers with ReLU between consecutive layers. With `relu_last` the final
/// output is rectified as well.
struct Mlp {
    std::vector<DenseLayer> layers;
    bool relu_last = false;

    std::size_t out_dim() const { return layers.back().out; }

    /// acts[0] = input, acts[k+1] = output of layer k (after its activation).
    void forward(std::span<const double> p, std::span<const double> x, std::vector<std::vector<double>>& acts) const {
        acts.resize(layers.size() + 1);
        acts[0].assign(x.begin(), x.end());
        for (std::size_t k = 0; k < layers.size(); ++k) {
            acts[k + 1].assign(layers[k].out, 0.0);
            layers[k].forward(p, acts[k], acts[k + 1]);
            if (k + 1 < layers.size() || relu_last)
                for (double& v : acts[k + 1]) v = std::max(v, 0.0);
        }
    }

    /// dy is the gradient at the final output; dx (if non-empty) receives the input gradient.
    void backward(std::span<const double> p, const std::vector<std::vector<double>>& acts, std::span<const double> dy,
                  std::span<double> dp, std::span<double> dx) const {
        std::vector<double> g(dy.begin(), dy.end());
        std::vector<double> gin;
        for (std::size_t k = layers.size(); k-- > 0;) {
            if (k + 1 < layers.size() || relu_last)
                for (std::size_t o = 0; o < g.size(); ++o)
                    if (acts[k + 1][o] <= 0.0) g[o] = 0.0;  // ReLU subgradient at 0 is 0
            const bool need_in = k > 0 || !dx.empty();
            gin.assign(need_in ? layers[k].in : 0, 0.0);
            layers[k].backward(p, acts[k], g, dp, gin);
            if (k == 0 && !dx.empty()) {
                for (std::size_t i = 0; i < gin.size(); ++i) dx[i] += gin[i];
            }
            g.swap(gin);
        }
    }
};

/// Which block of GLUT parameters a generator head produces.
enum class HeadKind { Mean, Cholesky, Opacity, LocalColor, Global };

struct GeneratorHead {
    HeadKind kind;
    Mlp net;
    std::vector<std::uint32_t> target;  // output j -> GLUT parameter index
};

/// Maps a head's outputs onto GlutModel parameter indices. Local color outputs are
/// [M (9, row-major), b (3)] per primitive; the global head emits [G (9), g (3)].
inline std::vector<std::uint32_t> head_targets(HeadKind kind, std::size_t n) {
    const ParamLayout lay{n};
    std::vector<std::uint32_t> t;
    auto push = [&](std::size_t v) { t.push_back(static_cast<std::uint32_t>(v)); };
    switch (kind) {
        case HeadKind::Mean:
            for (std::size_t j = 0; j < 3 * n; ++j) push(lay.means() + j);
            break;
        case HeadKind::Cholesky:
            for (std::size_t j = 0; j < 6 * n; ++j) push(lay.chol() + j);
            break;
        case HeadKind::Opacity:
            for (std::size_t j = 0; j < n; ++j) push(lay.opacity() + j);
            break;
        case HeadKind::LocalColor:
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < 9; ++k) push(lay.local_matrix() + 9 * i + k);
                for (std::size_t k = 0; k < 3; ++k) push(lay.local_bias() + 3 * i + k);
            }
            break;
        case HeadKind::Global:
            for (std::size_t k = 0; k < 9; ++k) push(lay.global_matrix() + k);
            for (std::size_t k = 0; k < 3; ++k) push(lay.global_bias() + k);
            break;
    }
    return t;
}

/// Encoder (3 layers of width H, ReLU after each) followed by one MLP head per parameter group:
/// mean, Cholesky, opacity and global heads have 2 layers, the local color head has 3. In shared
/// geometry mode the mean and Cholesky heads are absent.
class Generator {
public:
    Generator() = default;
    Generator(std::size_t d, std::size_t h, std::size_t n, CglutMode mode) : d_(d), h_(h), n_(n), mode_(mode) {
        if (d == 0 || h == 0 || n == 0) throw std::invalid_argument("generator dimensions must be positive");
        std::size_t off = 0;
        auto layer = [&](std::size_t in, std::size_t out) {
            DenseLayer l{in, out, off};
            off += l.param_count();
            return l;
        };
        encoder_.relu_last = true;
        encoder_.layers = {layer(d, h), layer(h, h), layer(h, h)};
        auto add_head = [&](HeadKind kind, int depth) {
            GeneratorHead head{kind, {}, head_targets(kind, n)};
            for (int k = 0; k + 1 < depth; ++k) head.net.layers.push_back(layer(h, h));
            head.net.layers.push_back(layer(h, head.target.size()));
            heads_.push_back(std::move(head));
        };
        if (mode == CglutMode::FullGeneration) {
            add_head(HeadKind::Mean, 2);
            add_head(HeadKind::Cholesky, 2);
        }
        add_head(HeadKind::Opacity, 2);
        add_head(HeadKind::LocalColor, 3);
        add_head(HeadKind::Global, 2);
        count_ = off;
    }

    std::size_t parameter_count() const { return count_; }
    std::size_t embedding_dim() const { return d_; }
    std::size_t hidden() const { return h_; }
    std::size_t primitives() const { return n_; }
    CglutMode mode() const { return mode_; }
    const Mlp& encoder() const { return encoder_; }
    const std::vector<GeneratorHead>& heads() const { return heads_; }

    /// Activations kept for the reverse pass.
    struct Tape {
        std::vector<std::vector<double>> encoder;
        std::vector<std::vector<std::vector<double>>> heads;
    };

    /// Writes every generated raw parameter into `glut` (shared geometry is filled by the caller).
    void forward(std::span<const double> p, std::span<const double> e, GlutModel& glut, Tape& tape) const {
        if (e.size() != d_) throw std::invalid_argument("embedding dimension mismatch");
        encoder_.forward(p, e, tape.encoder);
        tape.heads.resize(heads_.size());
        auto out = glut.params();
        for (std::size_t k = 0; k < heads_.size(); ++k) {
            heads_[k].net.forward(p, tape.encoder.back(), tape.heads[k]);
            const auto& y = tape.heads[k].back();
            for (std::size_t j = 0; j < y.size(); ++j) out[heads_[k].target[j]] = y[j];
        }
    }

    /// Backpropagates dL/d(GLUT params) into generator weights and the embedding.
    void backward(std::span<const double> p, const Tape& tape, std::span<const double> dglut, std::span<double> dp,
                  std::span<double> de) const {
        std::vector<double> dfeat(h_, 0.0);
        std::vector<double> dy;
        for (std::size_t k = 0; k < heads_.size(); ++k) {
            const auto& head = heads_[k];
            dy.resize(head.target.size());
            for (std::size_t j = 0; j < dy.size(); ++j) dy[j] = dglut[head.target[j]];
            head.net.backward(p, tape.heads[k], dy, dp, dfeat);
        }
        encoder_.backward(p, tape.encoder, dfeat, dp, de);
    }

    /// Fan-in uniform hidden layers; each head's last layer gets zero weights and biases equal to
    /// the matching entries of `base` (raw GLUT parameters).
    void initialize(std::span<double> p, const GlutModel& base, std::mt19937_64& rng) const {
        auto fan_in = [&](const DenseLayer& l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
            std::uniform_real_distribution<double> u(-bound, bound);
            for (std::size_t i = 0; i < l.param_count(); ++i) p[l.offset + i] = u(rng);
        };
        for (const auto& l : encoder_.layers) fan_in(l);
        for (const auto& head : heads_) {
            for (std::size_t k = 0; k + 1 < head.net.layers.size(); ++k) fan_in(head.net.layers[k]);
            const DenseLayer& last = head.net.layers.back();
            std::fill_n(p.begin() + static_cast<std::ptrdiff_t>(last.offset), last.out * last.in, 0.0);
            for (std::size_t j = 0; j < last.out; ++j) p[last.offset + last.out * last.in + j] = base.params()[head.target[j]];
        }
    }

private:
    std::size_t d_ = 0, h_ = 0, n_ = 0;
    CglutMode mode_ = CglutMode::FullGeneration;
    Mlp encoder_;
    std::vector<GeneratorHead> heads_;
    std::size_t count_ = 0;
};

inline constexpr double kCglutEpsilon = 1e-6;

/// Style embedding table, generator weights and (in shared geometry mode) one set of means and
/// Cholesky parameters common to all styles.
class CglutModel {
public:
    CglutModel() = default;
    CglutModel(std::size_t styles, std::size_t d, std::size_t h, std::size_t n, CglutMode mode)
        : styles_(styles), gen_(d, h, n, mode), embeddings_(styles * d, 0.0), weights_(gen_.parameter_count(), 0.0) {
        if (styles == 0) throw std::invalid_argument("CGLUT needs at least one style");
        if (mode == CglutMode::SharedGeometry) shared_.assign(9 * n, 0.0);
    }

    /// Embeddings ~ N(0, 0.1), generator as in Generator::initialize, shared geometry from init_glut.
    static CglutModel initialized(std::size_t styles, std::size_t d, std::size_t h, std::size_t n, CglutMode mode,
                                  std::uint64_t seed) {
        CglutModel m(styles, d, h, n, mode);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 0.1);
        for (double& v : m.embeddings_) v = normal(rng);
        const GlutModel base = init_glut(n);
        m.gen_.initialize(m.weights_, base, rng);
        if (mode == CglutMode::SharedGeometry) {
            std::copy(base.means().begin(), base.means().end(), m.shared_.begin());
            std::copy(base.chol_raw().begin(), base.chol_raw().end(), m.shared_.begin() + static_cast<std::ptrdiff_t>(3 * n));
        }
        return m;
    }

    std::size_t styles() const { return styles_; }
    std::size_t embedding_dim() const { return gen_.embedding_dim(); }
    std::size_t hidden() const { return gen_.hidden(); }
    std::size_t primitives() const { return gen_.primitives(); }
    CglutMode mode() const { return gen_.mode(); }
    const Generator& generator() const { return gen_; }

    std::span<double> embeddings() { return embeddings_; }
    std::span<const double> embeddings() const { return embeddings_; }
    std::span<double> embedding(std::size_t l) { return std::span<double>(embeddings_).subspan(l * embedding_dim(), embedding_dim()); }
    std::span<const double> embedding(std::size_t l) const {
        check_style(l);
        return std::span<const double>(embeddings_).subspan(l * embedding_dim(), embedding_dim());
    }
    std::span<double> weights() { return weights_; }
    std::span<const double> weights() const { return weights_; }
    std::span<double> shared_geometry() { return shared_; }
    std::span<const double> shared_geometry() const { return shared_; }

    std::size_t generator_parameter_count() const { return weights_.size(); }
    std::size_t parameter_count() const { return weights_.size() + embeddings_.size() + shared_.size(); }

    void check_style(std::size_t l) const {
        if (l >= styles_) throw std::out_of_range("style index " + std::to_string(l) + " out of range (" + std::to_string(styles_) + " styles)");
    }

    /// Materializes the single GLUT for embedding e, keeping activations for backward.
    GlutModel generate(std::span<const double> e, Generator::Tape& tape) const {
        GlutModel g(primitives(), kCglutEpsilon);
        gen_.forward(weights_, e, g, tape);
        if (mode() == CglutMode::SharedGeometry) {
            const std::size_t n = primitives();
            std::copy_n(shared_.begin(), 3 * n, g.means().begin());
            std::copy_n(shared_.begin() + static_cast<std::ptrdiff_t>(3 * n), 6 * n, g.chol_raw().begin());
        }
        return g;
    }

    GlutModel generate(std::span<const double> e) const {
        Generator::Tape tape;
        return generate(e, tape);
    }

    GlutModel materialize(std::size_t l) const { return generate(embedding(l)); }

    std::vector<double> blend_embedding(std::size_t l1, std::size_t l2, double alpha) const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("blend alpha must lie in [0,1]");
        const auto a = embedding(l1), b = embedding(l2);
        std::vector<double> e(a.size());
        for (std::size_t k = 0; k < e.size(); ++k) e[k] = (1.0 - alpha) * a[k] + alpha * b[k];
        return e;
    }

    GlutModel blend(std::size_t l1, std::size_t l2, double alpha) const { return generate(blend_embedding(l1, l2, alpha)); }

    void validate() const {
        auto finite = [](std::span<const double> v) { return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }); };
        if (!finite(embeddings_) || !finite(weights_) || !finite(shared_)) throw std::invalid_argument("CGLUT has non-finite parameters");
    }

    friend bool operator==(const CglutModel& a, const CglutModel& b) {
        return a.styles_ == b.styles_ && a.embedding_dim() == b.embedding_dim() && a.hidden() == b.hidden() &&
               a.primitives() == b.primitives() && a.mode() == b.mode() && a.embeddings_ == b.embeddings_ &&
               a.weights_ == b.weights_ && a.shared_ == b.shared_;
    }

private:
    std::size_t styles_ = 0;
    Generator gen_;
    std::vector<double> embeddings_;
    std::vector<double> weights_;
    std::vector<double> shared_;
};

inline GlutModel generate_params(const CglutModel& m, std::span<const double> e) { return m.generate(e); }

inline Rgb evaluate_style(const CglutModel& m, std::size_t l, const Rgb& x) { return evaluate(m.materialize(l), x); }

inline GlutModel blend(const CglutModel& m, std::size_t l1, std::size_t l2, double alpha) { return m.blend(l1, l2, alpha); }

// ---------------------------------------------------------------------------------------------
// Serialization: header | u32 L, D, N, H | f32 embeddings (L*D) | f32 generator weights
// (encoder layers, then heads mean, cholesky, opacity, local, global; each layer W row-major
// then b) | shared geometry (kind 2 only): f32 means (3N), chol_raw (6N).

inline std::vector<std::uint8_t> serialize(const CglutModel& m) {
    ByteWriter w;
    write_model_header(w, m.mode() == CglutMode::FullGeneration ? ModelKind::CglutFull : ModelKind::CglutShared);
    w.u32(static_cast<std::uint32_t>(m.styles()));
    w.u32(static_cast<std::uint32_t>(m.embedding_dim()));
    w.u32(static_cast<std::uint32_t>(m.primitives()));
    w.u32(static_cast<std::uint32_t>(m.hidden()));
    w.f32s(m.embeddings());
    w.f32s(m.weights());
    w.f32s(m.shared_geometry());
    return w.take();
}

inline CglutModel deserialize_cglut(std::span<const std::uint8_t> data) {
    ByteReader r(data);
    const ModelKind kind = read_model_header(r);
    if (kind == ModelKind::Glut) throw FormatError("not a conditional model file");
    const std::uint32_t styles = r.u32(), d = r.u32(), n = r.u32(), h = r.u32();
    if (styles == 0 || d == 0 || n == 0 || h == 0) throw FormatError("conditional model has a zero dimension");
    if (d > 4096 || h > 4096 || n > 65536 || styles > 1u << 20) throw FormatError("conditional model dimensions out of range");
    CglutModel m(styles, d, h, n, kind == ModelKind::CglutFull ? CglutMode::FullGeneration : CglutMode::SharedGeometry);
    r.f32s(m.embeddings());
    r.f32s(m.weights());
    r.f32s(m.shared_geometry());
    if (!r.done()) throw FormatError("trailing bytes after model");
    m.validate();
    return m;
}

inline void snap_to_storage_precision(CglutModel& m) {
    auto snap = [](std::span<double> v) {
        for (double& x : v) x = static_cast<double>(static_cast<float>(x));
    };
    snap(m.embeddings());
    snap(m.weights());
    snap(m.shared_geometry());
}

// ---------------------------------------------------------------------------------------------
// Training

/// Per-style training targets over shared inputs.
struct StyledPairs {
    std::vector<ColorPairSet> styles;

    std::size_t style_count() const { return styles.size(); }
    std::size_t per_style() const { return styles.empty() ? 0 : styles.front().size(); }
    std::size_t size() const { return style_count() * per_style(); }
    void validate() const {
        for (const auto& s : styles) {
            s.validate();
            if (s.size() != per_style()) throw std::invalid_argument("styled pairs: styles differ in sample count");
        }
    }
};

/// Gradients of one CGLUT batch loss, in the model's storage order.
struct CglutGradient {
    std::vector<double> weights;
    std::vector<double> embeddings;
    std::vector<double> shared;
    double loss = 0.0;
};

/// Batch loss and its gradient. Samples are flat indices style * per_style + i. The loss is
/// mean(L_rec + lambda_hc L_hc) + lambda_sparse * sum_l (n_l / B) R_sparse(model_l), where n_l is
/// the number of batch samples of style l.
inline CglutGradient backward_cglut(const CglutModel& model, const StyledPairs& data, std::span<const std::uint32_t> batch,
                                    const LossWeights& lw, int threads = 1,
                                    const std::vector<std::vector<HueTarget>>* hues = nullptr) {
    if (batch.empty()) throw std::invalid_argument("backward_cglut: empty batch");
    const std::size_t per = data.per_style();
    const std::size_t n = model.primitives();
    CglutGradient out;
    out.weights.assign(model.weights().size(), 0.0);
    out.embeddings.assign(model.embeddings().size(), 0.0);
    out.shared.assign(model.shared_geometry().size(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    std::vector<std::vector<std::uint32_t>> by_style(model.styles());
    for (std::uint32_t g : batch) by_style.at(g / per).push_back(g % static_cast<std::uint32_t>(per));
    std::vector<double> dglut(ParamLayout::count_for(n));
    for (std::size_t l = 0; l < model.styles(); ++l) {
        if (by_style[l].empty()) continue;
        Generator::Tape tape;
        const GlutModel glut = model.generate(model.embedding(l), tape);
        std::fill(dglut.begin(), dglut.end(), 0.0);
        const GlutBackprop bp(glut);
        const auto& pairs = data.styles[l];
        std::span<const HueTarget> hs;
        if (hues) hs = (*hues)[l];
        out.loss += inv_b * accumulate_data_grad(bp, dglut.size(), pairs.inputs, pairs.targets, hs, by_style[l], inv_b,
                                                 lw.lambda_hc, dglut, threads);
        if (lw.lambda_sparse != 0.0) {
            const double share = static_cast<double>(by_style[l].size()) * inv_b;
            accumulate_sparse_grad(glut, lw.lambda_sparse * share, dglut);
            out.loss += lw.lambda_sparse * share * reg_sparse(glut);
        }
        const std::span<double> de = std::span<double>(out.embeddings).subspan(l * model.embedding_dim(), model.embedding_dim());
        model.generator().backward(model.weights(), tape, dglut, out.weights, de);
        if (model.mode() == CglutMode::SharedGeometry) {
            const ParamLayout lay{n};
            for (std::size_t j = 0; j < 3 * n; ++j) out.shared[j] += dglut[lay.means() + j];
            for (std::size_t j = 0; j < 6 * n; ++j) out.shared[3 * n + j] += dglut[lay.chol() + j];
        }
    }
    check_finite(out.weights, "generator gradient");
    check_finite(out.embeddings, "embedding gradient");
    check_finite(out.shared, "shared geometry gradient");
    if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss");
    return out;
}

/// Forward-only value of the loss backward_cglut differentiates.
inline double cglut_total_loss(const CglutModel& model, const StyledPairs& data, std::span<const std::uint32_t> batch,
                               const LossWeights& lw) {
    const std::size_t per = data.per_style();
    std::vector<std::size_t> counts(model.styles(), 0);
    double acc = 0.0;
    std::vector<GlutModel> mats;
    for (std::size_t l = 0; l < model.styles(); ++l) mats.push_back(model.materialize(l));
    for (std::uint32_t g : batch) {
        const std::size_t l = g / per, i = g % per;
        ++counts[l];
        const Rgb p = evaluate(mats[l], data.styles[l].inputs[i]);
        const Rgb& t = data.styles[l].targets[i];
        acc += loss_rec(p, t) + lw.lambda_hc * loss_hc(p, t);
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = acc * inv_b;
    for (std::size_t l = 0; l < model.styles(); ++l)
        if (counts[l] > 0) loss += lw.lambda_sparse * static_cast<double>(counts[l]) * inv_b * reg_sparse(mats[l]);
    return loss;
}

struct CglutConfig {
    TrainConfig train = [] {
        TrainConfig t;
        t.epochs = 40;
        t.batch_size = 8192;
        return t;
    }();
    std::size_t embedding_dim = 64;
    std::size_t hidden = 64;  // 64 = small, 128 = large
    CglutMode mode = CglutMode::FullGeneration;
    double embedding_lr_scale = 0.1;  // also applies to shared geometry
};

struct CglutEpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    std::vector<double> style_psnr;
    std::vector<double> style_de76;
    std::vector<double> style_de00;
    double wall_ms = 0.0;

    double mean_psnr() const {
        double s = 0.0;
        for (double v : style_psnr) s += v;
        return style_psnr.empty() ? 0.0 : s / static_cast<double>(style_psnr.size());
    }

    std::string to_json() const {
        auto list = [](const std::vector<double>& v) {
            std::string s = "[";
            char buf[32];
            for (std::size_t i = 0; i < v.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%s%.6f", i ? "," : "", v[i]);
                s += buf;
            }
            return s + "]";
        };
        char head[160];
        std::snprintf(head, sizeof head, "{\"epoch\":%d,\"lr\":%.9g,\"train_loss\":%.9g,\"wall_ms\":%.3f,", epoch, lr, train_loss, wall_ms);
        return std::string(head) + "\"holdout_psnr\":" + list(style_psnr) + ",\"holdout_de76\":" + list(style_de76) +
               ",\"holdout_de00\":" + list(style_de00) + "}";
    }
};

struct CglutFitResult {
    CglutModel model;
    std::vector<CglutEpochRecord> log;
};

using CglutEpochCallback = std::function<void(const CglutEpochRecord&)>;

/// Joint training over (style, color) samples with Adam groups for the generator (base rate) and
/// for embeddings and shared geometry (scaled rate), both cosine annealed per step.
inline CglutFitResult fit_cglut(const StyledPairs& train, const StyledPairs& holdout, std::size_t n, const CglutConfig& cfg,
                                const CglutEpochCallback& on_epoch = {}) {
    const TrainConfig& tc = cfg.train;
    tc.validate();
    train.validate();
    holdout.validate();
    if (train.style_count() < 2) throw std::invalid_argument("fit_cglut needs at least two styles");
    if (train.per_style() == 0) throw std::invalid_argument("fit_cglut: empty training set");
    CglutFitResult res{CglutModel::initialized(train.style_count(), cfg.embedding_dim, cfg.hidden, n, cfg.mode, tc.seed), {}};
    CglutModel& model = res.model;
    const LossWeights lw = tc.loss_weights();
    std::vector<std::vector<HueTarget>> hues;
    for (const auto& s : train.styles) hues.push_back(hue_targets(s.targets));

    AdamState adam_w(model.weights().size()), adam_e(model.embeddings().size()), adam_s(model.shared_geometry().size());
    std::mt19937_64 rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
    const std::size_t total = train.size();
    const auto bsz = static_cast<std::size_t>(tc.batch_size);
    const long steps_per_epoch = static_cast<long>((total + bsz - 1) / bsz);
    const long total_steps = steps_per_epoch * tc.epochs;
    long step = 0;

    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double ratio = mining_ratio(epoch, tc.mining);
        std::vector<double> errors(total, 0.0);
        if (ratio > 0.0) {
            for (std::size_t l = 0; l < train.style_count(); ++l) {
                const auto e = per_sample_errors(PreparedGlut(model.materialize(l)), train.styles[l], tc.threads);
                std::copy(e.begin(), e.end(), errors.begin() + static_cast<std::ptrdiff_t>(l * train.per_style()));
            }
        }
        const auto batches = mine_batches(errors, ratio, bsz, rng);
        double loss_sum = 0.0, lr = tc.base_lr;
        for (const auto& batch : batches) {
            CglutGradient g;
            try {
                g = backward_cglut(model, train, batch, lw, tc.threads, &hues);
            } catch (const NumericalError& e) {
                throw TrainingDiverged(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
            }
            lr = cosine_lr(step, total_steps, tc.base_lr);
            adam_w.update(model.weights(), g.weights, lr);
            adam_e.update(model.embeddings(), g.embeddings, lr * cfg.embedding_lr_scale);
            if (!g.shared.empty()) adam_s.update(model.shared_geometry(), g.shared, lr * cfg.embedding_lr_scale);
            ++step;
            loss_sum += g.loss;
        }
        if (epoch == tc.epochs) snap_to_storage_precision(model);
        try {
            model.validate();
        } catch (const std::invalid_argument& e) {
            throw TrainingDiverged(std::string(e.what()) + " after epoch " + std::to_string(epoch));
        }
        CglutEpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = loss_sum / static_cast<double>(batches.size());
        for (std::size_t l = 0; l < holdout.style_count(); ++l) {
            const EvalReport ev = evaluate_pairs(model.materialize(l), holdout.styles[l], tc.threads);
            rec.style_psnr.push_back(ev.psnr);
            rec.style_de76.push_back(ev.delta_e76);
            rec.style_de00.push_back(ev.delta_e00);
        }
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        res.log.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return res;
}

/// Styled training and held-out data from grid LUTs sharing one lattice split.
inline std::pair<StyledPairs, StyledPairs> make_styled_data(std::span<const CubeLut> luts, int train_q, std::size_t holdout_count,
                                                            std::uint64_t holdout_seed = kHoldoutSeed) {
    const LatticeSplit split(train_q);
    const auto train_in = split.materialize_train();
    const auto test_in = split.sample_test(holdout_count, holdout_seed);
    std::pair<StyledPairs, StyledPairs> out;
    for (const auto& lut : luts) {
        lut.validate();
        out.first.styles.push_back(densify(lut, train_in));
        out.second.styles.push_back(densify(lut, test_in));
    }
    return out;
}

}  // namespace glut
