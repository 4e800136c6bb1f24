#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace glut {

/// Small fixed-size 3-vector used for colors and per-channel quantities.
struct Vec3 {
    double v[3] = {0.0, 0.0, 0.0};

    constexpr Vec3() = default;
    constexpr Vec3(double a, double b, double c) : v{a, b, c} {}

    constexpr double& operator[](std::size_t i) { return v[i]; }
    constexpr double operator[](std::size_t i) const { return v[i]; }

    constexpr Vec3& operator+=(const Vec3& o) {
        v[0] += o.v[0];
        v[1] += o.v[1];
        v[2] += o.v[2];
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o) {
        v[0] -= o.v[0];
        v[1] -= o.v[1];
        v[2] -= o.v[2];
        return *this;
    }
    constexpr Vec3& operator*=(double s) {
        v[0] *= s;
        v[1] *= s;
        v[2] *= s;
        return *this;
    }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr bool operator==(const Vec3& a, const Vec3& b) {
        return a.v[0] == b.v[0] && a.v[1] == b.v[1] && a.v[2] == b.v[2];
    }
};

constexpr double dot(const Vec3& a, const Vec3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 clamp01(const Vec3& a) {
    Vec3 r;
    for (int k = 0; k < 3; ++k) r[k] = a[k] < 0.0 ? 0.0 : (a[k] > 1.0 ? 1.0 : a[k]);
    return r;
}

/// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{};

    static constexpr Mat3 identity() {
        Mat3 r;
        r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        return r;
    }

    constexpr double& operator()(int r, int c) { return m[static_cast<std::size_t>(r * 3 + c)]; }
    constexpr double operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }

    friend constexpr bool operator==(const Mat3& a, const Mat3& b) { return a.m == b.m; }
};

constexpr Vec3 operator*(const Mat3& a, const Vec3& x) {
    return {a.m[0] * x[0] + a.m[1] * x[1] + a.m[2] * x[2],
            a.m[3] * x[0] + a.m[4] * x[1] + a.m[5] * x[2],
            a.m[6] * x[0] + a.m[7] * x[1] + a.m[8] * x[2]};
}

using Rgb = Vec3;

}  // namespace glut
