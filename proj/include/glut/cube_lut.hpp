#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "glut/io_error.hpp"
#include "glut/vec3.hpp"

namespace glut {

/// Malformed text input; carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Grid LUT with red-fastest entry order.
struct CubeLut {
    int size = 0;
    std::vector<Rgb> entries;
    Rgb domain_min{0.0, 0.0, 0.0};
    Rgb domain_max{1.0, 1.0, 1.0};
    std::string title;

    std::size_t index(int r, int g, int b) const {
        return static_cast<std::size_t>(r) +
               static_cast<std::size_t>(size) * (static_cast<std::size_t>(g) + static_cast<std::size_t>(size) * static_cast<std::size_t>(b));
    }
    const Rgb& at(int r, int g, int b) const { return entries[index(r, g, b)]; }

    /// Lattice coordinate of grid vertex i along one axis, in [0,1].
    double vertex(int i) const { return static_cast<double>(i) / static_cast<double>(size - 1); }

    void validate() const {
        if (size < 2) throw std::invalid_argument("cube: size must be >= 2");
        const auto n = static_cast<std::size_t>(size);
        if (entries.size() != n * n * n) throw std::invalid_argument("cube: entry count != size^3");
        for (int k = 0; k < 3; ++k)
            if (!(domain_min[k] < domain_max[k])) throw std::invalid_argument("cube: domain_min must be < domain_max");
        for (const auto& e : entries)
            for (int k = 0; k < 3; ++k)
                if (!std::isfinite(e[k])) throw std::invalid_argument("cube: non-finite entry");
    }

    static CubeLut identity(int size) {
        CubeLut lut;
        lut.size = size;
        lut.entries.reserve(static_cast<std::size_t>(size) * size * size);
        for (int b = 0; b < size; ++b)
            for (int g = 0; g < size; ++g)
                for (int r = 0; r < size; ++r) lut.entries.push_back({lut.vertex(r), lut.vertex(g), lut.vertex(b)});
        return lut;
    }
};

namespace cube_detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const std::size_t j = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > j) out.push_back(s.substr(j, i - j));
    }
    return out;
}

inline double parse_number(std::string_view tok, std::size_t line) {
    double v = 0.0;
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw ParseError(line, "non-numeric value '" + std::string(tok) + "'");
    return v;
}

inline Rgb parse_triplet(const std::vector<std::string_view>& toks, std::size_t first, std::size_t line) {
    if (toks.size() != first + 3) throw ParseError(line, "expected 3 values");
    return {parse_number(toks[first], line), parse_number(toks[first + 1], line), parse_number(toks[first + 2], line)};
}

inline bool is_keyword(std::string_view tok) {
    return !tok.empty() && ((tok.front() >= 'A' && tok.front() <= 'Z') || tok.front() == '_');
}

}  // namespace cube_detail

/// Parses the Adobe/Resolve .cube subset: TITLE, LUT_3D_SIZE, DOMAIN_MIN, DOMAIN_MAX, '#' comments and
/// red-fastest data triplets.
inline CubeLut parse_cube(std::string_view text) {
    using namespace cube_detail;
    CubeLut lut;
    std::size_t expected = 0;
    std::size_t line_no = 0;
    std::size_t last_line = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        last_line = line_no;
        const auto toks = split_ws(line);
        const std::string_view key = toks.front();
        if (key == "TITLE") {
            const auto q0 = line.find('"');
            const auto q1 = line.rfind('"');
            lut.title = (q0 != std::string_view::npos && q1 > q0) ? std::string(line.substr(q0 + 1, q1 - q0 - 1))
                                                                   : std::string(trim(line.substr(5)));
        } else if (key == "LUT_3D_SIZE") {
            if (toks.size() != 2) throw ParseError(line_no, "LUT_3D_SIZE expects one integer");
            int s = 0;
            const auto [ptr, ec] = std::from_chars(toks[1].data(), toks[1].data() + toks[1].size(), s);
            if (ec != std::errc() || ptr != toks[1].data() + toks[1].size() || s < 2 || s > 256)
                throw ParseError(line_no, "invalid LUT_3D_SIZE '" + std::string(toks[1]) + "'");
            if (!lut.entries.empty()) throw ParseError(line_no, "LUT_3D_SIZE after data");
            lut.size = s;
            expected = static_cast<std::size_t>(s) * s * s;
            lut.entries.reserve(expected);
        } else if (key == "DOMAIN_MIN") {
            lut.domain_min = parse_triplet(toks, 1, line_no);
        } else if (key == "DOMAIN_MAX") {
            lut.domain_max = parse_triplet(toks, 1, line_no);
        } else if (key == "LUT_1D_SIZE") {
            throw ParseError(line_no, "1D LUTs are not supported");
        } else if (is_keyword(key)) {
            // Unrecognized vendor keyword (e.g. LUT_3D_INPUT_RANGE); ignored.
        } else {
            if (lut.size == 0) throw ParseError(line_no, "data before LUT_3D_SIZE (missing LUT_3D_SIZE)");
            if (lut.entries.size() == expected)
                throw ParseError(line_no, "too many entries: expected " + std::to_string(expected));
            lut.entries.push_back(parse_triplet(toks, 0, line_no));
        }
    }
    if (lut.size == 0) throw ParseError(std::max<std::size_t>(last_line, 1), "missing LUT_3D_SIZE");
    if (lut.entries.size() != expected)
        throw ParseError(last_line, "wrong entry count: expected " + std::to_string(expected) + ", found " +
                                        std::to_string(lut.entries.size()));
    for (int k = 0; k < 3; ++k)
        if (!(lut.domain_min[k] < lut.domain_max[k])) throw ParseError(last_line, "DOMAIN_MIN must be < DOMAIN_MAX");
    return lut;
}

inline CubeLut read_cube_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_cube(ss.str());
}

/// Values are written with six decimals, so a parse/write cycle is exact to 5e-7.
inline std::string write_cube(const CubeLut& lut) {
    std::string out;
    out.reserve(lut.entries.size() * 28 + 128);
    char buf[128];
    if (!lut.title.empty()) out += "TITLE \"" + lut.title + "\"\n";
    out += "LUT_3D_SIZE " + std::to_string(lut.size) + "\n";
    std::snprintf(buf, sizeof buf, "DOMAIN_MIN %.6f %.6f %.6f\n", lut.domain_min[0], lut.domain_min[1], lut.domain_min[2]);
    out += buf;
    std::snprintf(buf, sizeof buf, "DOMAIN_MAX %.6f %.6f %.6f\n", lut.domain_max[0], lut.domain_max[1], lut.domain_max[2]);
    out += buf;
    for (const auto& e : lut.entries) {
        const int n = std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f\n", e[0], e[1], e[2]);
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

inline void write_cube_file(const std::string& path, const CubeLut& lut) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    const std::string text = write_cube(lut);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

/// Trilinear interpolation in the LUT's native domain. Out-of-domain queries are clamped to the
/// domain box first.
inline Rgb trilinear_sample(const CubeLut& lut, const Rgb& c) {
    const int last = lut.size - 1;
    int i0[3];
    double f[3];
    for (int k = 0; k < 3; ++k) {
        const double lo = lut.domain_min[k], hi = lut.domain_max[k];
        const double v = std::clamp(c[k], lo, hi);
        double t = (v - lo) / (hi - lo) * last;
        // Lattice queries must hit their vertex exactly; absorb representation error of i/(S-1).
        const double rt = std::round(t);
        if (std::abs(t - rt) < 1e-9) t = rt;
        int i = static_cast<int>(std::floor(t));
        if (i >= last) i = last - 1;
        if (i < 0) i = 0;
        i0[k] = i;
        f[k] = t - i;
    }
    Rgb out;
    for (int ch = 0; ch < 3; ++ch) {
        auto e = [&](int dr, int dg, int db) { return lut.at(i0[0] + dr, i0[1] + dg, i0[2] + db)[ch]; };
        const double c00 = e(0, 0, 0) * (1.0 - f[0]) + e(1, 0, 0) * f[0];
        const double c10 = e(0, 1, 0) * (1.0 - f[0]) + e(1, 1, 0) * f[0];
        const double c01 = e(0, 0, 1) * (1.0 - f[0]) + e(1, 0, 1) * f[0];
        const double c11 = e(0, 1, 1) * (1.0 - f[0]) + e(1, 1, 1) * f[0];
        const double c0 = c00 * (1.0 - f[1]) + c10 * f[1];
        const double c1 = c01 * (1.0 - f[1]) + c11 * f[1];
        out[ch] = c0 * (1.0 - f[2]) + c1 * f[2];
    }
    return out;
}

/// Samples the LUT at a unit-cube color, mapping [0,1]^3 affinely onto the LUT domain.
inline Rgb sample_unit(const CubeLut& lut, const Rgb& x) {
    Rgb c;
    for (int k = 0; k < 3; ++k) c[k] = lut.domain_min[k] + x[k] * (lut.domain_max[k] - lut.domain_min[k]);
    return trilinear_sample(lut, c);
}

// ---------------------------------------------------------------------------------------------
// Hald rasters and lattice splits

/// Color of Hald index k on a Q-per-axis lattice: red varies fastest, then green, then blue.
inline Rgb hald_index_to_color(std::uint64_t k, int q) {
    const auto qq = static_cast<std::uint64_t>(q);
    if (q < 2 || k >= qq * qq * qq) throw std::out_of_range("hald index out of range");
    const double s = 1.0 / static_cast<double>(q - 1);
    return {static_cast<double>(k % qq) * s, static_cast<double>((k / qq) % qq) * s, static_cast<double>(k / (qq * qq)) * s};
}

struct HaldRaster {
    int samples_per_axis = 0;
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;
};

/// Raster shape used for a Q^3 lattice: the tallest height <= sqrt(Q^3 / 2) dividing Q^3
/// (128^3 -> 2048 x 1024).
inline std::pair<int, int> hald_raster_shape(int q) {
    const std::uint64_t n = static_cast<std::uint64_t>(q) * q * q;
    auto h = static_cast<std::uint64_t>(std::floor(std::sqrt(static_cast<double>(n) / 2.0)));
    while (h > 1 && n % h != 0) --h;
    if (h == 0) h = 1;
    return {static_cast<int>(n / h), static_cast<int>(h)};
}

inline HaldRaster make_identity_hald(int q) {
    HaldRaster r;
    r.samples_per_axis = q;
    std::tie(r.width, r.height) = hald_raster_shape(q);
    const std::uint64_t n = static_cast<std::uint64_t>(q) * q * q;
    r.pixels.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) r.pixels.push_back(hald_index_to_color(k, q));
    return r;
}

/// Train/test partition of a full `levels`^3 code lattice (256 for 8-bit). The training set is the
/// uniformly strided sub-lattice of `q_train` codes per axis starting at code 0; the test set is
/// every remaining lattice color.
class LatticeSplit {
public:
    explicit LatticeSplit(int q_train = 128, int levels = 256) : q_(q_train), levels_(levels) {
        if (q_train < 2 || levels < 2 || levels % q_train != 0)
            throw std::invalid_argument("lattice split: q_train must divide the code lattice");
        stride_ = levels / q_train;
    }

    int q_train() const { return q_; }
    int levels() const { return levels_; }
    int stride() const { return stride_; }

    std::uint64_t train_size() const { return cube(q_); }
    std::uint64_t test_size() const { return cube(levels_) - cube(q_); }

    double code_value(int code) const { return static_cast<double>(code) / static_cast<double>(levels_ - 1); }

    Rgb train_color(std::uint64_t k) const {
        const auto q = static_cast<std::uint64_t>(q_);
        return {code_value(static_cast<int>(k % q) * stride_), code_value(static_cast<int>((k / q) % q) * stride_),
                code_value(static_cast<int>(k / (q * q)) * stride_)};
    }

    bool is_train_code(int r, int g, int b) const { return r % stride_ == 0 && g % stride_ == 0 && b % stride_ == 0; }

    std::vector<Rgb> materialize_train() const {
        std::vector<Rgb> out;
        out.reserve(train_size());
        for (std::uint64_t k = 0; k < train_size(); ++k) out.push_back(train_color(k));
        return out;
    }

    /// All test colors in red-fastest order over the code lattice.
    std::vector<Rgb> materialize_test() const {
        std::vector<Rgb> out;
        out.reserve(test_size());
        for (int b = 0; b < levels_; ++b)
            for (int g = 0; g < levels_; ++g)
                for (int r = 0; r < levels_; ++r)
                    if (!is_train_code(r, g, b)) out.push_back({code_value(r), code_value(g), code_value(b)});
        return out;
    }

    /// Deterministic pseudo-random subset of the test set (with replacement).
    std::vector<Rgb> sample_test(std::size_t count, std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        std::vector<Rgb> out;
        out.reserve(count);
        while (out.size() < count) {
            const auto code = rng();
            const int r = static_cast<int>(code % levels_);
            const int g = static_cast<int>((code / levels_) % levels_);
            const int b = static_cast<int>((code / levels_ / levels_) % levels_);
            if (!is_train_code(r, g, b)) out.push_back({code_value(r), code_value(g), code_value(b)});
        }
        return out;
    }

private:
    static std::uint64_t cube(int v) { return static_cast<std::uint64_t>(v) * v * v; }
    int q_;
    int levels_;
    int stride_ = 1;
};

struct SplitInputs {
    std::vector<Rgb> train;
    std::vector<Rgb> test;
};

/// Materialized split. At the default 8-bit scale the test set holds 14.7M colors; prefer
/// LatticeSplit's counters and sampler there.
inline SplitInputs build_split(int q_train = 128, int levels = 256) {
    const LatticeSplit split(q_train, levels);
    return {split.materialize_train(), split.materialize_test()};
}

/// Paired input/target colors (equal lengths).
struct ColorPairSet {
    std::vector<Rgb> inputs;
    std::vector<Rgb> targets;

    std::size_t size() const { return inputs.size(); }
    void validate() const {
        if (inputs.size() != targets.size()) throw std::invalid_argument("pair set: length mismatch");
    }
};

/// Targets for `inputs` read off a grid LUT by trilinear interpolation.
inline ColorPairSet densify(const CubeLut& lut, std::span<const Rgb> inputs) {
    ColorPairSet out;
    out.inputs.assign(inputs.begin(), inputs.end());
    out.targets.reserve(inputs.size());
    for (const auto& x : inputs) out.targets.push_back(sample_unit(lut, x));
    return out;
}

}  // namespace glut
