#pragma once

#include <cmath>

#include "glut/color.hpp"
#include "glut/glut_model.hpp"

namespace glut {

/// Regularizer of the hue unit vector near zero chroma.
inline constexpr double kHueEpsilon = 1e-8;
/// Stabilizer inside the opacity entropy logarithms.
inline constexpr double kEntropyEpsilon = 1e-6;

/// Componentwise L1 distance.
inline double loss_rec(const Rgb& pred, const Rgb& target) {
    return std::abs(pred[0] - target[0]) + std::abs(pred[1] - target[1]) + std::abs(pred[2] - target[2]);
}

/// d loss_rec / d pred; the subgradient at a zero residual is 0.
inline Vec3 loss_rec_grad(const Rgb& pred, const Rgb& target) {
    Vec3 g;
    for (int k = 0; k < 3; ++k) {
        const double d = pred[k] - target[k];
        g[k] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    }
    return g;
}

/// Target-side quantities of the hue-chroma loss; constant during training.
struct HueTarget {
    double chroma = 0.0;
    double ha = 0.0;
    double hb = 0.0;
};

inline HueTarget hue_target(const Rgb& target) {
    const Lab t = srgb_to_lab(target);
    const double c2 = t.a * t.a + t.b * t.b;
    const double n = std::sqrt(c2 + kHueEpsilon);
    return {std::sqrt(c2), t.a / n, t.b / n};
}

/// C * (1 - <h_pred, h_target>), with C the target chroma.
inline double loss_hc(const Rgb& pred, const HueTarget& t) {
    if (t.chroma == 0.0) return 0.0;
    const Lab p = srgb_to_lab(pred);
    const double n = std::sqrt(p.a * p.a + p.b * p.b + kHueEpsilon);
    return t.chroma * (1.0 - (p.a * t.ha + p.b * t.hb) / n);
}

inline double loss_hc(const Rgb& pred, const Rgb& target) { return loss_hc(pred, hue_target(target)); }

/// Hue-chroma loss and its gradient with respect to the predicted sRGB color.
inline double loss_hc_grad(const Rgb& pred, const HueTarget& t, Vec3& grad) {
    grad = {};
    if (t.chroma == 0.0) return 0.0;
    LabJacobian jac;
    const Lab p = srgb_to_lab(pred, jac);
    const double n2 = p.a * p.a + p.b * p.b + kHueEpsilon;
    const double n = std::sqrt(n2);
    const double proj = p.a * t.ha + p.b * t.hb;
    // d<h_pred,h>/da = ha/n - proj*a/n^3 (likewise for b)
    const double dda = t.ha / n - proj * p.a / (n2 * n);
    const double ddb = t.hb / n - proj * p.b / (n2 * n);
    for (int j = 0; j < 3; ++j) grad[j] = -t.chroma * (dda * jac(1, j) + ddb * jac(2, j));
    return t.chroma * (1.0 - proj / n);
}

inline double opacity_entropy(double o) {
    return -(o * std::log(o + kEntropyEpsilon) + (1.0 - o) * std::log(1.0 - o + kEntropyEpsilon));
}

/// d entropy / d opacity_raw.
inline double opacity_entropy_grad_raw(double raw) {
    const double o = sigmoid(raw);
    const double de_do = -(std::log(o + kEntropyEpsilon) + o / (o + kEntropyEpsilon) - std::log(1.0 - o + kEntropyEpsilon) -
                           (1.0 - o) / (1.0 - o + kEntropyEpsilon));
    return de_do * o * (1.0 - o);
}

/// Mean binary entropy of the opacities.
inline double reg_sparse(const GlutModel& m) {
    double acc = 0.0;
    for (double raw : m.opacity_raw()) acc += opacity_entropy(sigmoid(raw));
    return acc / static_cast<double>(m.size());
}

}  // namespace glut
