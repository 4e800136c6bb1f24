#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>

#include "glut/vec3.hpp"

namespace glut {

struct Lab {
    double L = 0.0;
    double a = 0.0;
    double b = 0.0;
};

/// Row-major derivative d(L, a, b) / d(r, g, b).
using LabJacobian = Mat3;

namespace color_detail {

// IEC 61966-2-1 linear RGB -> XYZ (D65).
inline constexpr Mat3 kSrgbToXyz{{0.4124564, 0.3575761, 0.1804375,
                                  0.2126729, 0.7151522, 0.0721750,
                                  0.0193339, 0.1191920, 0.9503041}};

// The white point is the image of (1,1,1) so the neutral axis lands exactly on a = b = 0.
inline constexpr Vec3 kWhite{0.4124564 + 0.3575761 + 0.1804375,
                             0.2126729 + 0.7151522 + 0.0721750,
                             0.0193339 + 0.1191920 + 0.9503041};

inline constexpr double kDelta = 6.0 / 29.0;
inline constexpr double kDelta3 = kDelta * kDelta * kDelta;

inline double srgb_decode(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double srgb_decode_deriv(double c) {
    return c <= 0.04045 ? 1.0 / 12.92 : 2.4 / 1.055 * std::pow((c + 0.055) / 1.055, 1.4);
}

// Cube root above (6/29)^3, tangent line below; C1 at the joint.
inline double lab_f(double t) {
    return t > kDelta3 ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

inline double lab_f_deriv(double t) {
    if (t > kDelta3) {
        const double c = std::cbrt(t);
        return 1.0 / (3.0 * c * c);
    }
    return 1.0 / (3.0 * kDelta * kDelta);
}

inline double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
inline double rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace color_detail

inline Lab srgb_to_lab(const Rgb& c) {
    using namespace color_detail;
    const Vec3 lin{srgb_decode(c[0]), srgb_decode(c[1]), srgb_decode(c[2])};
    const Vec3 xyz = kSrgbToXyz * lin;
    const double fx = lab_f(xyz[0] / kWhite[0]);
    const double fy = lab_f(xyz[1] / kWhite[1]);
    const double fz = lab_f(xyz[2] / kWhite[2]);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

/// Same conversion, also returning the analytic Jacobian used by the hue-chroma gradient.
inline Lab srgb_to_lab(const Rgb& c, LabJacobian& jac) {
    using namespace color_detail;
    const Vec3 lin{srgb_decode(c[0]), srgb_decode(c[1]), srgb_decode(c[2])};
    const Vec3 dlin{srgb_decode_deriv(c[0]), srgb_decode_deriv(c[1]), srgb_decode_deriv(c[2])};
    const Vec3 xyz = kSrgbToXyz * lin;
    Vec3 f, df;
    for (int k = 0; k < 3; ++k) {
        const double t = xyz[k] / kWhite[k];
        f[k] = lab_f(t);
        df[k] = lab_f_deriv(t) / kWhite[k];
    }
    // dF_k/drgb_j = df_k * A_kj * dlin_j
    Mat3 dF;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) dF(k, j) = df[k] * kSrgbToXyz(k, j) * dlin[j];
    for (int j = 0; j < 3; ++j) {
        jac(0, j) = 116.0 * dF(1, j);
        jac(1, j) = 500.0 * (dF(0, j) - dF(1, j));
        jac(2, j) = 200.0 * (dF(1, j) - dF(2, j));
    }
    return {116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])};
}

inline double delta_e76(const Lab& x, const Lab& y) {
    const double dl = x.L - y.L, da = x.a - y.a, db = x.b - y.b;
    return std::sqrt(dl * dl + da * da + db * db);
}

/// CIEDE2000 with kL = kC = kH = 1.
inline double delta_e00(const Lab& x, const Lab& y) {
    using color_detail::deg;
    using color_detail::rad;
    constexpr double k25_7 = 6103515625.0;  // 25^7

    const double c1 = std::hypot(x.a, x.b);
    const double c2 = std::hypot(y.a, y.b);
    const double cbar = 0.5 * (c1 + c2);
    const double cbar7 = std::pow(cbar, 7.0);
    const double g = 0.5 * (1.0 - std::sqrt(cbar7 / (cbar7 + k25_7)));

    const double a1p = (1.0 + g) * x.a;
    const double a2p = (1.0 + g) * y.a;
    const double c1p = std::hypot(a1p, x.b);
    const double c2p = std::hypot(a2p, y.b);

    auto hue = [](double b, double ap) {
        if (b == 0.0 && ap == 0.0) return 0.0;
        double h = deg(std::atan2(b, ap));
        return h < 0.0 ? h + 360.0 : h;
    };
    const double h1p = hue(x.b, a1p);
    const double h2p = hue(y.b, a2p);

    const double dlp = y.L - x.L;
    const double dcp = c2p - c1p;
    const double cprod = c1p * c2p;

    double dhp = 0.0;
    if (cprod != 0.0) {
        dhp = h2p - h1p;
        if (dhp > 180.0) dhp -= 360.0;
        else if (dhp < -180.0) dhp += 360.0;
    }
    const double dHp = 2.0 * std::sqrt(cprod) * std::sin(rad(dhp) / 2.0);

    const double lbarp = 0.5 * (x.L + y.L);
    const double cbarp = 0.5 * (c1p + c2p);
    double hbarp = h1p + h2p;
    if (cprod != 0.0) {
        if (std::abs(h1p - h2p) > 180.0) hbarp += (hbarp < 360.0) ? 360.0 : -360.0;
        hbarp *= 0.5;
    }

    const double t = 1.0 - 0.17 * std::cos(rad(hbarp - 30.0)) + 0.24 * std::cos(rad(2.0 * hbarp)) +
                     0.32 * std::cos(rad(3.0 * hbarp + 6.0)) - 0.20 * std::cos(rad(4.0 * hbarp - 63.0));
    const double dtheta = 30.0 * std::exp(-std::pow((hbarp - 275.0) / 25.0, 2.0));
    const double cbarp7 = std::pow(cbarp, 7.0);
    const double rc = 2.0 * std::sqrt(cbarp7 / (cbarp7 + k25_7));
    const double l50 = (lbarp - 50.0) * (lbarp - 50.0);
    const double sl = 1.0 + 0.015 * l50 / std::sqrt(20.0 + l50);
    const double sc = 1.0 + 0.045 * cbarp;
    const double sh = 1.0 + 0.015 * cbarp * t;
    const double rt = -std::sin(rad(2.0 * dtheta)) * rc;

    const double tl = dlp / sl, tc = dcp / sc, th = dHp / sh;
    return std::sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

/// PSNR reported when the two inputs are identical.
inline constexpr double kPsnrCap = 100.0;

/// PSNR over all channels of sRGB-encoded values in [0,1].
inline double psnr(std::span<const Rgb> pred, std::span<const Rgb> target) {
    if (pred.size() != target.size()) throw std::invalid_argument("psnr: size mismatch");
    if (pred.empty()) throw std::invalid_argument("psnr: empty input");
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        for (int k = 0; k < 3; ++k) {
            const double d = pred[i][k] - target[i][k];
            sse += d * d;
        }
    const double mse = sse / (3.0 * static_cast<double>(pred.size()));
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

}  // namespace glut
