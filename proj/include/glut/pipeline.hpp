#pragma once

#include <cstdint>
#include <vector>

#include "glut/cube_lut.hpp"
#include "glut/glut_model.hpp"
#include "glut/image.hpp"
#include "glut/parallel.hpp"

namespace glut {

struct ApplyOptions {
    int threads = 0;             // 0 = hardware concurrency
    double keep_fraction = 1.0;  // < 1 enables the Euclidean pre-filter
};

/// Maps every color of `colors` through the model. Per-model quantities are prepared once; pixels
/// are independent, so the output does not depend on the worker count.
inline void apply_to_colors(const PreparedGlut& prep, std::span<const Rgb> in, std::span<Rgb> out, const ApplyOptions& opt = {}) {
    constexpr std::size_t kChunk = 4096;
    const bool sparse = opt.keep_fraction < 1.0;
    if (sparse && !(opt.keep_fraction > 0.0)) throw std::invalid_argument("keep_fraction must be in (0, 1]");
    parallel_chunks(chunk_count(in.size(), kChunk), opt.threads, [&](std::size_t c) {
        std::vector<double> scratch(3 * prep.size());
        std::vector<std::uint32_t> order(prep.size());
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(in.size(), begin + kChunk);
        for (std::size_t i = begin; i < end; ++i)
            out[i] = sparse ? prep.evaluate_sparse(in[i], opt.keep_fraction, scratch, order) : prep.evaluate(in[i], scratch);
    });
}

inline Image apply_to_image(const GlutModel& model, const Image& img, const ApplyOptions& opt = {}) {
    const PreparedGlut prep(model);
    Image out(img.width, img.height);
    out.bit_depth = img.bit_depth;
    apply_to_colors(prep, img.pixels, out.pixels, opt);
    return out;
}

inline Image apply_to_image(const GlutModel& model, const Image& img, int threads) {
    return apply_to_image(model, img, ApplyOptions{threads, 1.0});
}

/// Samples the model on a size^3 lattice (red fastest) to produce a grid LUT.
inline CubeLut bake_to_cube(const GlutModel& model, int size, int threads = 0) {
    if (size < 2) throw std::invalid_argument("bake size must be >= 2");
    CubeLut lut = CubeLut::identity(size);
    const std::vector<Rgb> lattice = lut.entries;
    apply_to_colors(PreparedGlut(model), lattice, lut.entries, ApplyOptions{threads, 1.0});
    return lut;
}

}  // namespace glut
