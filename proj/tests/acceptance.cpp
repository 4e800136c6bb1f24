// Acceptance gate: one PASS/FAIL line per release criterion; exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "glut/glut.hpp"
#include "test_support.hpp"

using namespace glut;
using glut::testing::random_color;
using glut::testing::random_model;

namespace {

int g_failures = 0;

void report(bool ok, const char* name, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string sprint(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Recipe defaults (20 epochs, batch 1024) on the given training lattice.
TrainConfig recipe(int train_q, std::uint64_t seed = 0) {
    TrainConfig cfg;
    cfg.train_q = train_q;
    cfg.seed = seed;
    return cfg;
}

void gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::size_t checked = 0, skipped = 0, failed = 0;
    double worst = 0.0;
    const std::size_t sizes[] = {2, 4, 8};
    for (int t = 0; t < 20; ++t) {
        const GlutModel m = random_model(sizes[t % 3], rng);
        const ColorPairSet batch = glut::testing::random_batch(16, rng);
        const auto r = glut::testing::check_gradients(m, batch, LossWeights{});
        checked += r.checked;
        skipped += r.skipped;
        failed += r.failed;
        worst = std::max(worst, r.worst_rel);
    }
    const double secs = seconds_since(t0);
    report(failed == 0 && skipped * 10 < checked && secs < 60.0, "gradient_correctness",
           std::to_string(checked) + " components checked, " + std::to_string(failed) + " failed, " + std::to_string(skipped) +
               " skipped at loss kinks; " + sprint("worst relative error %.2e, %.1f s", worst, secs));
}

FitResult identity_fit() {
    const auto t0 = std::chrono::steady_clock::now();
    const FitResult r = fit_glut(CubeLut::identity(33), 32, recipe(32));
    const auto& last = r.log.back();
    const double secs = seconds_since(t0);
    report(last.holdout_psnr >= 55.0 && last.holdout_de76 <= 0.3 && secs < 600.0, "identity_fit",
           sprint("GLUT-32 on 33^3 identity, 32^3 train lattice: %.2f dB, mean dE76 %.4f, %.1f s", last.holdout_psnr, last.holdout_de76, secs));
    return r;
}

FitResult style_fit(const CubeLut& lut) {
    const auto t0 = std::chrono::steady_clock::now();
    const FitResult r = fit_glut(lut, 32, recipe(128));
    const auto& last = r.log.back();
    const double secs = seconds_since(t0);
    report(last.holdout_psnr >= 40.0 && secs < 600.0, "synthetic_style_fit",
           sprint("GLUT-32 on gamma 2.2 + channel mix, 128^3 train lattice: %.2f dB, mean dE00 %.4f, %.1f s", last.holdout_psnr,
                  last.holdout_de00, secs));
    return r;
}

void parameter_accounting() {
    bool ok = true;
    std::string detail;
    for (std::size_t n : {16u, 32u, 64u}) {
        const std::size_t count = init_glut(n).parameter_count();
        ok = ok && count == 22 * n + 12;
        detail += "N=" + std::to_string(n) + " -> " + std::to_string(count) + " ";
    }
    ok = ok && init_glut(16).parameter_count() == 364 && init_glut(32).parameter_count() == 716 && init_glut(64).parameter_count() == 1420;
    report(ok, "parameter_accounting", detail + "(22N + 12)");
}

void weight_properties() {
    std::mt19937_64 rng(7);
    int bad_weights = 0, bad_perm = 0, bad_sparse = 0;
    double worst_perm = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng() % 32;
        const GlutModel m = random_model(n, rng);
        const Rgb x = random_color(rng, -0.1, 1.1);
        const auto w = influence_weights(m, x);
        double sum = 0.0;
        for (double v : w) {
            if (!(v >= 0.0)) ++bad_weights;
            sum += v;
        }
        if (!(sum < 1.0)) ++bad_weights;

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0u);
        std::shuffle(perm.begin(), perm.end(), rng);
        GlutModel p = m;
        for (std::size_t i = 0; i < n; ++i) p.set_primitive(i, m.primitive(perm[i]));
        const Vec3 a = evaluate(m, x), b = evaluate(p, x);
        const double d = norm(a - b);
        worst_perm = std::max(worst_perm, d);
        if (d > 1e-12) ++bad_perm;

        if (!(evaluate_sparse(m, x, 1.0) == evaluate(m, x))) ++bad_sparse;
    }
    report(bad_weights == 0 && bad_perm == 0 && bad_sparse == 0, "weight_normalization",
           "1000 cases: " + std::to_string(bad_weights) + " weight violations, " + std::to_string(bad_perm) +
               sprint(" permutation mismatches (max |diff| %.1e), ", worst_perm) + std::to_string(bad_sparse) +
               " sparse(1.0) bit mismatches");
}

void edit_contraction() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int bad_law = 0, bad_weights = 0, bad_undo = 0;
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const GlutModel base = random_model(2 + rng() % 31, rng);
        EditConstraint c{random_color(rng, 0.1, 0.9), random_color(rng), 1 + rng() % base.size(), u(rng)};
        GlutModel m = base;
        const EditRecord rec = apply_edit(m, c);
        const Vec3 delta = residual(base, c.c_in, c.c_out);
        const Vec3 err = residual(m, c.c_in, c.c_out) - (1.0 - c.strength * rec.movement) * delta;
        const double e = std::max({std::abs(err[0]), std::abs(err[1]), std::abs(err[2])});
        worst = std::max(worst, e);
        if (!(e <= 1e-9)) ++bad_law;
        if (influence_weights(m, c.c_in) != influence_weights(base, c.c_in)) ++bad_weights;
        undo(m, rec);
        if (!(m == base)) ++bad_undo;
    }
    report(bad_law == 0 && bad_weights == 0 && bad_undo == 0, "edit_contraction",
           "200 cases: " + std::to_string(bad_law) + sprint(" law violations (max error %.1e), ", worst) + std::to_string(bad_weights) +
               " weight changes, " + std::to_string(bad_undo) + " inexact undos");
}

void edit_locality() {
    std::mt19937_64 rng(13);
    int probes = 0, bad = 0;
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const GlutModel base = glut::testing::separated_model(rng);
        GlutModel m = base;
        const EditRecord rec = apply_edit(m, {random_color(rng, 0.1, 0.9), random_color(rng), 1, 1.0});
        const GaussianPrimitive touched = base.primitive(rec.touched[0]);
        const double mag = norm(rec.residual_before);
        if (mag == 0.0) continue;
        for (int i = 0; i < 100; ++i) {
            const Rgb x = random_color(rng);
            if (mahalanobis(touched, x) <= 100.0) continue;  // squared distance
            ++probes;
            const double ratio = norm(evaluate_unclamped(m, x) - evaluate_unclamped(base, x)) / mag;
            worst = std::max(worst, ratio);
            if (!(ratio < 1e-6)) ++bad;
        }
    }
    report(bad == 0 && probes > 0, "edit_locality",
           std::to_string(probes) + " probes beyond Mahalanobis distance 10, " + std::to_string(bad) +
               sprint(" over 1e-6 |delta| (max %.1e |delta|)", worst));
}

void cglut_two_style(const CubeLut& gamma) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<CubeLut> luts{CubeLut::identity(33), gamma};
    CglutConfig cfg;  // small generator, 40 epochs, batch 8192
    cfg.train.train_q = 64;
    const auto [train, holdout] = make_styled_data(luts, cfg.train.train_q, cfg.train.holdout_count);
    const CglutFitResult full = fit_cglut(train, holdout, 32, cfg);
    const auto& psnr = full.log.back().style_psnr;
    const bool floor_ok = psnr.size() == 2 && psnr[0] >= 40.0 && psnr[1] >= 40.0;
    const bool ends_ok = full.model.blend(0, 1, 0.0) == full.model.materialize(0) && full.model.blend(0, 1, 1.0) == full.model.materialize(1);

    CglutConfig scfg = cfg;
    scfg.mode = CglutMode::SharedGeometry;
    scfg.train.epochs = 4;
    const CglutFitResult shared = fit_cglut(train, holdout, 32, scfg);
    const GlutModel s0 = shared.model.materialize(0);
    bool shared_ok = true;
    for (const GlutModel& g : {shared.model.materialize(1), shared.model.blend(0, 1, 0.5)}) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto a = s0.primitive(i), b = g.primitive(i);
            shared_ok = shared_ok && a.mean == b.mean && a.covariance() == b.covariance();
        }
    }
    const double secs = seconds_since(t0);
    report(floor_ok && ends_ok && shared_ok && secs < 1800.0, "cglut_two_style",
           sprint("CGLUT-32 small, 64^3 train lattice: identity %.2f dB, gamma %.2f dB; ", psnr.at(0), psnr.at(1)) +
               "blend endpoints " + (ends_ok ? "bit-exact" : "differ") + ", shared geometry " +
               (shared_ok ? "style-invariant" : "varies") + sprint(", %.1f s", secs));
}

void bake_round_trip(const GlutModel& model) {
    std::size_t points = 0, bad = 0;
    for (int s : {17, 33}) {
        const CubeLut lut = bake_to_cube(model, s);
        for (int b = 0; b < s; ++b)
            for (int g = 0; g < s; ++g)
                for (int r = 0; r < s; ++r) {
                    const Rgb v{lut.vertex(r), lut.vertex(g), lut.vertex(b)};
                    ++points;
                    if (!(trilinear_sample(lut, v) == evaluate(model, v))) ++bad;
                }
    }
    report(bad == 0, "bake_round_trip", std::to_string(points) + " lattice points at S = 17, 33; " + std::to_string(bad) + " mismatches");
}

struct FittedCase {
    std::string name;
    GlutModel model;
    CubeLut lut;
    int train_q;
};

void sparse_cost(const std::vector<FittedCase>& fitted) {
    bool ok = true;
    std::string detail;
    for (std::size_t k = 0; k < fitted.size(); ++k) {
        const GlutModel& m = fitted[k].model;
        const ColorPairSet hold = densify(fitted[k].lut, LatticeSplit(fitted[k].train_q).sample_test(65536, kHoldoutSeed));
        const double full_ops = ops_per_pixel(m, std::span<const Rgb>(hold.inputs).first(4096), 1.0);
        const double half_ops = ops_per_pixel(m, std::span<const Rgb>(hold.inputs).first(4096), 0.5);
        const double cut = 1.0 - half_ops / full_ops;
        std::vector<Rgb> pred(hold.size());
        apply_to_colors(PreparedGlut(m), hold.inputs, pred, ApplyOptions{0, 0.5});
        const double full_psnr = evaluate_pairs(m, hold).psnr;
        const double half_psnr = compare_colors(pred, hold.targets, default_threads()).psnr;
        const double drop = full_psnr - half_psnr;
        ok = ok && cut >= 0.25 && drop <= 1.0;
        detail += fitted[k].name + sprint(": ops %.0f -> %.0f (-%.1f%%), PSNR %.2f", full_ops, half_ops, 100.0 * cut, full_psnr) +
                  sprint(" -> %.2f dB; ", half_psnr);
    }
    report(ok, "sparse_activation_cost", detail + "keep_fraction 0.5");
}

void compression(const CubeLut& gamma) {
    TrainConfig cfg = recipe(32);
    const FitResult r = fit_glut(gamma, 64, cfg);
    const auto bytes = serialize(r.model);
    const std::string cube = write_cube(bake_to_cube(r.model, 64));
    const double ratio = compression_ratio(bytes.size(), cube.size());
    report(bytes.size() < 12000 && ratio < 0.5, "compression_ratio",
           "GLUT-64 file " + std::to_string(bytes.size()) + " bytes vs baked 64^3 .cube " + std::to_string(cube.size()) +
               sprint(" bytes: %.3f%%", ratio));
}

void determinism(const GlutModel& model) {
    TrainConfig cfg = recipe(16, 99);
    cfg.epochs = 6;
    cfg.batch_size = 512;
    cfg.mining.start_epoch = 2;
    cfg.mining.end_epoch = 6;
    const CubeLut lut = gamma_mix_cube(17);
    cfg.threads = 1;
    const FitResult a = fit_glut(lut, 16, cfg);
    const FitResult b = fit_glut(lut, 16, cfg);
    cfg.threads = 4;
    const FitResult c = fit_glut(lut, 16, cfg);
    const bool fit_ok = a.model == b.model && a.model == c.model && serialize(a.model) == serialize(c.model);

    const Image img = noise_image(640, 360, 5);
    const Image one = apply_to_image(model, img, 1);
    bool apply_ok = true;
    for (int t : {2, 4, 8}) apply_ok = apply_ok && apply_to_image(model, img, t).pixels == one.pixels;
    for (int t : {1, 3}) apply_ok = apply_ok && apply_to_image(model, img, ApplyOptions{t, 0.5}).pixels == apply_to_image(model, img, ApplyOptions{8, 0.5}).pixels;
    report(fit_ok && apply_ok, "determinism",
           std::string("repeated and 1- vs 4-thread fits ") + (fit_ok ? "bit-identical" : "differ") + "; apply_to_image over 1/2/4/8 threads " +
               (apply_ok ? "bit-identical" : "differs"));
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    gradient_correctness();
    const FitResult id = identity_fit();
    const CubeLut gamma = gamma_mix_cube(33);
    const FitResult style = style_fit(gamma);
    parameter_accounting();
    weight_properties();
    edit_contraction();
    edit_locality();
    cglut_two_style(gamma);
    bake_round_trip(style.model);
    sparse_cost({{"identity", id.model, CubeLut::identity(33), 32}, {"gamma", style.model, gamma, 128}});
    compression(gamma);
    determinism(style.model);
    std::printf("%d of 12 criteria failed (%.0f s)\n", g_failures, seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
