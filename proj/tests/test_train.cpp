#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "glut/losses.hpp"
#include "glut/optim.hpp"
#include "glut/synthetic.hpp"
#include "glut/train.hpp"
#include "test_support.hpp"

using namespace glut;

TEST(Losses, ReconstructionIsL1) {
    EXPECT_DOUBLE_EQ(loss_rec({0.1, 0.5, 0.9}, {0.2, 0.5, 0.7}), 0.3);
    EXPECT_EQ(loss_rec_grad({0.1, 0.5, 0.9}, {0.2, 0.5, 0.7}), (Vec3{-1, 0, 1}));
}

TEST(Losses, HueChromaVanishesOnMatchingHueAndNeutralTargets) {
    EXPECT_NEAR(loss_hc(Rgb{0.8, 0.3, 0.2}, Rgb{0.8, 0.3, 0.2}), 0.0, 1e-9);
    EXPECT_EQ(loss_hc(Rgb{0.8, 0.3, 0.2}, Rgb{0.5, 0.5, 0.5}), 0.0);
    // Opposite hue costs about twice the target chroma.
    const Rgb t{0.8, 0.3, 0.2};
    const Lab lt = srgb_to_lab(t);
    const double c = std::hypot(lt.a, lt.b);
    const double opp = loss_hc({0.2, 0.55, 0.7}, t);
    EXPECT_GT(opp, c);
    EXPECT_LE(opp, 2.0 * c + 1e-9);
}

TEST(Losses, EntropyIsMaximalAtOneHalf) {
    EXPECT_NEAR(opacity_entropy(0.5), std::log(2.0), 1e-5);
    EXPECT_LT(opacity_entropy(0.99), opacity_entropy(0.5));
    EXPECT_NEAR(opacity_entropy_grad_raw(0.0), 0.0, 1e-12);
    const double h = 1e-6;
    for (double raw : {-3.0, -0.4, 1.5, 4.0}) {
        const double fd = (opacity_entropy(sigmoid(raw + h)) - opacity_entropy(sigmoid(raw - h))) / (2 * h);
        EXPECT_NEAR(opacity_entropy_grad_raw(raw), fd, 1e-7);
    }
}

TEST(Init, GridShrinksBlueThenGreenThenRed) {
    EXPECT_EQ(init_grid_dims(32), (std::array<int, 3>{4, 4, 2}));
    EXPECT_EQ(init_grid_dims(64), (std::array<int, 3>{4, 4, 4}));
    EXPECT_EQ(init_grid_dims(16), (std::array<int, 3>{3, 3, 2}));
    EXPECT_EQ(init_grid_dims(1), (std::array<int, 3>{1, 1, 1}));
}

TEST(Init, DefaultPrimitives) {
    const GlutModel m = init_glut(32);
    std::set<std::array<double, 3>> means;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const GaussianPrimitive p = m.primitive(i);
        means.insert({p.mean[0], p.mean[1], p.mean[2]});
        const Mat3 s = p.covariance();
        EXPECT_NEAR(s(0, 0), 0.15 * 0.15, 1e-12);
        EXPECT_EQ(s(0, 1), 0.0);
        EXPECT_NEAR(p.opacity(), 1.0 / (1.0 + std::exp(-6.0)), 1e-15);
        EXPECT_EQ(p.local_matrix, Mat3::identity());
        EXPECT_EQ(p.local_bias, Vec3{});
        for (int k = 0; k < 3; ++k) {
            EXPECT_GE(p.mean[k], 0.0);
            EXPECT_LE(p.mean[k], 1.0);
        }
    }
    EXPECT_EQ(means.size(), 32u);
    EXPECT_EQ(m.global_matrix(), Mat3{});
    EXPECT_EQ(m.global_bias(), Vec3{});
    // Near-identity at initialization: the weights sum to almost one inside the cube.
    const Rgb y = evaluate(m, {0.3, 0.6, 0.4});
    EXPECT_NEAR(y[0], 0.3, 1e-3);
    EXPECT_THROW(init_glut(0), std::invalid_argument);
}

TEST(Schedule, MiningRatioRamp) {
    const MiningSchedule s;
    EXPECT_EQ(mining_ratio(1, s), 0.0);
    EXPECT_EQ(mining_ratio(4, s), 0.0);
    EXPECT_DOUBLE_EQ(mining_ratio(5, s), 0.1);
    EXPECT_DOUBLE_EQ(mining_ratio(12.5, s), 0.25);
    EXPECT_DOUBLE_EQ(mining_ratio(20, s), 0.4);
    EXPECT_DOUBLE_EQ(mining_ratio(40, s), 0.4);
}

TEST(Schedule, CosineAnnealsToZero) {
    EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 1e-3), 1e-3);
    EXPECT_NEAR(cosine_lr(50, 100, 1e-3), 5e-4, 1e-18);
    EXPECT_NEAR(cosine_lr(100, 100, 1e-3), 0.0, 1e-18);
    for (long s = 1; s <= 100; ++s) EXPECT_LE(cosine_lr(s, 100, 1.0), cosine_lr(s - 1, 100, 1.0));
}

TEST(Adam, TwoStepTrace) {
    AdamState a(2);
    std::vector<double> p{1.0, -2.0};
    a.update(p, std::vector<double>{0.5, -0.2}, 0.01);
    // First bias-corrected step moves every coordinate by lr * sign(g) (up to eps).
    EXPECT_NEAR(p[0], 1.0 - 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
    EXPECT_NEAR(p[1], -2.0 + 0.01 * 0.2 / (0.2 + 1e-8), 1e-15);
    a.update(p, std::vector<double>{0.1, 0.0}, 0.01);
    const double m0 = (0.9 * 0.05 + 0.01) / (1 - 0.81);
    const double v0 = (0.999 * 0.00025 + 0.001 * 0.01) / (1 - 0.998001);
    EXPECT_NEAR(p[0], 1.0 - 0.01 * 0.5 / (0.5 + 1e-8) - 0.01 * m0 / (std::sqrt(v0) + 1e-8), 1e-15);
    const double m1 = (0.9 * -0.02) / (1 - 0.81);
    const double v1 = (0.999 * 0.00004) / (1 - 0.998001);
    EXPECT_NEAR(p[1], -2.0 + 0.01 * 0.2 / (0.2 + 1e-8) - 0.01 * m1 / (std::sqrt(v1) + 1e-8), 1e-15);
}

TEST(Mining, PlainShuffleCoversEverySampleOnce) {
    std::mt19937_64 rng(1);
    const std::vector<double> err(1000, 0.0);
    const auto batches = mine_batches(err, 0.0, 128, rng);
    ASSERT_EQ(batches.size(), 8u);
    std::vector<std::uint32_t> all;
    for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    std::vector<std::uint32_t> want(1000);
    std::iota(want.begin(), want.end(), 0u);
    EXPECT_EQ(all, want);
    EXPECT_EQ(batches.back().size(), 1000u - 7 * 128);
}

TEST(Mining, HardPartComesFromTopErrors) {
    std::mt19937_64 rng(2);
    std::vector<double> err(1000);
    for (std::size_t i = 0; i < err.size(); ++i) err[i] = static_cast<double>((i * 37) % 1000);
    const double r = 0.25;
    const auto batches = mine_batches(err, r, 100, rng);
    ASSERT_EQ(batches.size(), 10u);
    for (const auto& b : batches) {
        ASSERT_EQ(b.size(), 100u);
        // The last round(r * B) entries are mined; they lie within the top ceil(r * n) errors.
        for (std::size_t k = 75; k < 100; ++k) EXPECT_GE(err[b[k]], 750.0);
    }
}

TEST(Mining, DeterministicForSeed) {
    std::vector<double> err(300);
    for (std::size_t i = 0; i < err.size(); ++i) err[i] = std::sin(static_cast<double>(i));
    std::mt19937_64 a(5), b(5);
    EXPECT_EQ(mine_batches(err, 0.3, 64, a), mine_batches(err, 0.3, 64, b));
    EXPECT_EQ(a(), b());
}

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 256;
    cfg.train_q = 16;
    cfg.holdout_count = 2048;
    cfg.mining.start_epoch = 3;
    cfg.mining.end_epoch = 6;
    cfg.seed = 17;
    return cfg;
}

}  // namespace

TEST(Fit, DeterministicAcrossRunsAndThreadCounts) {
    const CubeLut lut = gamma_mix_cube(9);
    TrainConfig cfg = tiny_config();
    cfg.threads = 1;
    const FitResult a = fit_glut(lut, 8, cfg);
    const FitResult b = fit_glut(lut, 8, cfg);
    cfg.threads = 3;
    const FitResult c = fit_glut(lut, 8, cfg);
    EXPECT_TRUE(a.model == b.model);
    EXPECT_TRUE(a.model == c.model);
    cfg.seed = 18;
    EXPECT_FALSE(fit_glut(lut, 8, cfg).model == a.model);
}

TEST(Fit, LogDescribesStoredModelAndImproves) {
    const CubeLut lut = gamma_mix_cube(9);
    std::vector<int> seen;
    const FitResult r = fit_glut(lut, 8, tiny_config(), [&](const EpochRecord& e) { seen.push_back(e.epoch); });
    EXPECT_EQ(seen, (std::vector<int>{1, 2, 3, 4, 5, 6}));
    ASSERT_EQ(r.log.size(), 6u);
    EXPECT_GT(r.log.back().holdout_psnr, r.log.front().holdout_psnr);
    EXPECT_EQ(r.log[1].mining_ratio, 0.0);
    EXPECT_GT(r.log[2].mining_ratio, 0.0);
    // Parameters are stored at file precision and the final metrics match a fresh evaluation.
    for (double v : r.model.params()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
    const FitData d = make_fit_data(lut, 16, 2048);
    EXPECT_EQ(evaluate_pairs(r.model, d.holdout).psnr, r.log.back().holdout_psnr);
    const auto j = nlohmann::json::parse(r.log.back().to_json());
    EXPECT_EQ(j.at("epoch").get<int>(), 6);
}

TEST(Fit, NonFiniteTargetsAbort) {
    ColorPairSet train;
    train.inputs = {{0.1, 0.2, 0.3}, {0.5, 0.5, 0.5}};
    train.targets = {{std::nan(""), 0.2, 0.3}, {0.5, 0.5, 0.5}};
    TrainConfig cfg = tiny_config();
    EXPECT_THROW(fit_glut(train, ColorPairSet{}, 4, cfg), TrainingDiverged);
}

TEST(Fit, RejectsBadConfig) {
    TrainConfig cfg;
    cfg.epochs = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.mining.start_ratio = 1.5;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Synthetic, GammaMixCubeMatchesDefinition) {
    const CubeLut lut = gamma_mix_cube(5);
    const Rgb x{lut.vertex(1), lut.vertex(3), lut.vertex(4)};
    const Rgb p{std::pow(x[0], 2.2), std::pow(x[1], 2.2), std::pow(x[2], 2.2)};
    const Rgb want{0.90 * p[0] + 0.10 * p[1], 0.05 * p[0] + 0.85 * p[1] + 0.10 * p[2], 0.15 * p[1] + 0.85 * p[2]};
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(lut.at(1, 3, 4)[k], want[k], 1e-15);
}
