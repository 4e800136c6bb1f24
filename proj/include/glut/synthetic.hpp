#pragma once

#include <cmath>

#include "glut/cube_lut.hpp"

namespace glut {

/// Fixed channel mix applied after the gamma curve; rows sum to 1 so outputs stay in [0,1].
inline constexpr Mat3 kStyleMix{{0.90, 0.10, 0.00,
                                 0.05, 0.85, 0.10,
                                 0.00, 0.15, 0.85}};

/// Per-channel power curve followed by kStyleMix.
inline Rgb gamma_mix_color(const Rgb& c, double gamma = 2.2) {
    const Rgb p{std::pow(c[0], gamma), std::pow(c[1], gamma), std::pow(c[2], gamma)};
    return kStyleMix * p;
}

/// Grid LUT of gamma_mix_color.
inline CubeLut gamma_mix_cube(int size = 33, double gamma = 2.2) {
    CubeLut lut = CubeLut::identity(size);
    for (auto& e : lut.entries) e = gamma_mix_color(e, gamma);
    lut.title = "gamma mix";
    return lut;
}

}  // namespace glut
