#include <gtest/gtest.h>

#include <random>

#include "glut/color.hpp"

using namespace glut;

namespace {

struct SharmaPair {
    Lab x, y;
    double de00;
};

// Reference pairs from Sharma, Wu and Dalal's CIEDE2000 test data.
const SharmaPair kSharma[] = {
    {{50.0000, 2.6772, -79.7751}, {50.0000, 0.0000, -82.7485}, 2.0425},
    {{50.0000, 3.1571, -77.2803}, {50.0000, 0.0000, -82.7485}, 2.8615},
    {{50.0000, 2.8361, -74.0200}, {50.0000, 0.0000, -82.7485}, 3.4412},
    {{50.0000, -1.3802, -84.2814}, {50.0000, 0.0000, -82.7485}, 1.0000},
    {{50.0000, 0.0000, 0.0000}, {50.0000, -1.0000, 2.0000}, 2.3669},
    {{50.0000, 2.5000, 0.0000}, {73.0000, 25.0000, -18.0000}, 27.1492},
    {{50.0000, 2.5000, 0.0000}, {61.0000, -5.0000, 29.0000}, 22.8977},
    {{50.0000, 2.5000, 0.0000}, {56.0000, -27.0000, -3.0000}, 31.9030},
    {{50.0000, 2.5000, 0.0000}, {58.0000, 24.0000, 15.0000}, 19.4535},
    {{50.0000, 2.5000, 0.0000}, {50.0000, 3.1736, 0.5854}, 1.0000},
    {{60.2574, -34.0099, 36.2677}, {60.4626, -34.1751, 39.4387}, 1.2644},
    {{63.0109, -31.0961, -5.8663}, {62.8187, -29.7946, -4.0864}, 1.2630},
    {{61.2901, 3.7196, -5.3901}, {61.4292, 2.2480, -4.9620}, 1.8731},
    {{35.0831, -44.1164, 3.7933}, {35.0232, -40.0716, 1.5901}, 1.8645},
    {{22.7233, 20.0904, -46.6940}, {23.0331, 14.9730, -42.5619}, 2.0373},
    {{36.4612, 47.8580, 18.3852}, {36.2715, 50.5065, 21.2231}, 1.4146},
    {{90.8027, -2.0831, 1.4410}, {91.1528, -1.6435, 0.0447}, 1.4441},
};

}  // namespace

TEST(DeltaE00, MatchesSharmaReferencePairs) {
    for (const auto& p : kSharma) {
        EXPECT_NEAR(delta_e00(p.x, p.y), p.de00, 1e-4);
        EXPECT_NEAR(delta_e00(p.y, p.x), p.de00, 1e-4);
    }
}

TEST(DeltaE00, ZeroOnIdenticalColors) {
    for (const auto& p : kSharma) EXPECT_EQ(delta_e00(p.x, p.x), 0.0);
}

TEST(DeltaE76, IsEuclideanInLab) {
    EXPECT_DOUBLE_EQ(delta_e76({50, 0, 0}, {53, 4, 0}), 5.0);
}

TEST(SrgbToLab, AgreesWithScikitImage) {
    // skimage.color.rgb2lab; its D65 matrix differs in the fourth decimal, hence the tolerance.
    const Lab a = srgb_to_lab({0.5, 0.25, 0.75});
    EXPECT_NEAR(a.L, 41.15482443, 0.01);
    EXPECT_NEAR(a.a, 51.40896626, 0.01);
    EXPECT_NEAR(a.b, -56.44527966, 0.01);
    const Lab g = srgb_to_lab({0.2, 0.7, 0.1});
    EXPECT_NEAR(g.L, 64.01060174, 0.01);
    EXPECT_NEAR(g.a, -60.07105468, 0.01);
    EXPECT_NEAR(g.b, 60.36503085, 0.01);
}

TEST(SrgbToLab, NeutralAxisHasZeroChroma) {
    for (double v : {0.0, 0.01, 0.2, 0.5, 0.9, 1.0}) {
        const Lab l = srgb_to_lab({v, v, v});
        EXPECT_NEAR(l.a, 0.0, 1e-12);
        EXPECT_NEAR(l.b, 0.0, 1e-12);
    }
    EXPECT_NEAR(srgb_to_lab({1, 1, 1}).L, 100.0, 1e-9);
    EXPECT_NEAR(srgb_to_lab({0, 0, 0}).L, 0.0, 1e-12);
}

TEST(SrgbToLab, JacobianMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.06, 0.94);
    for (int t = 0; t < 50; ++t) {
        const Rgb c{u(rng), u(rng), u(rng)};
        LabJacobian jac;
        srgb_to_lab(c, jac);
        for (int j = 0; j < 3; ++j) {
            const double h = 1e-6;
            Rgb lo = c, hi = c;
            lo[j] -= h;
            hi[j] += h;
            const Lab a = srgb_to_lab(lo), b = srgb_to_lab(hi);
            const double d[3] = {(b.L - a.L) / (2 * h), (b.a - a.a) / (2 * h), (b.b - a.b) / (2 * h)};
            for (int i = 0; i < 3; ++i) EXPECT_NEAR(jac(i, j), d[i], 1e-4 * std::max(1.0, std::abs(d[i])));
        }
    }
}

TEST(Psnr, CapsIdenticalAndMatchesClosedForm) {
    const std::vector<Rgb> a{{0.1, 0.2, 0.3}, {0.5, 0.5, 0.5}};
    EXPECT_EQ(psnr(a, a), kPsnrCap);
    std::vector<Rgb> b = a;
    for (auto& c : b) c = c + Vec3{0.01, 0.01, 0.01};
    EXPECT_NEAR(psnr(a, b), 40.0, 1e-9);
    EXPECT_THROW(psnr(a, std::vector<Rgb>{}), std::invalid_argument);
}
