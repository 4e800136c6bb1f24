#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "glut/glut_model.hpp"
#include "glut/io_error.hpp"

namespace glut {

/// Model file layout (little-endian):
///   "GLUT" | u16 version | u8 kind | kind-specific body
/// kind 0 (single GLUT): u32 N, then f32 means[3N], chol_raw[6N], opacity_raw[N],
///   local matrices[9N] (row-major), local biases[3N], global matrix[9] (row-major),
///   global bias[3], epsilon. Payload is 4 * (22N + 13) bytes after an 11-byte header.
/// kinds 1/2 (conditional) are documented with CglutModel.
enum class ModelKind : std::uint8_t { Glut = 0, CglutFull = 1, CglutShared = 2 };

inline constexpr std::uint16_t kModelFormatVersion = 1;
inline constexpr std::size_t kModelHeaderBytes = 4 + 2 + 1;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ByteWriter {
public:
    void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v & 0xff));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f32s(std::span<const double> vs) {
        for (double v : vs) f32(v);
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    void need(std::size_t n) const {
        if (pos_ + n > data_.size())
            throw FormatError("truncated model file: need " + std::to_string(pos_ + n) + " bytes, have " +
                              std::to_string(data_.size()));
    }
    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        const auto v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(data_[pos_ + static_cast<std::size_t>(k)]) << (8 * k);
        pos_ += 4;
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    void f32s(std::span<double> out) {
        need(4 * out.size());
        for (double& v : out) v = f32();
    }
    bool done() const { return pos_ == data_.size(); }
    std::size_t position() const { return pos_; }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

inline void write_model_header(ByteWriter& w, ModelKind kind) {
    w.bytes("GLUT");
    w.u16(kModelFormatVersion);
    w.u8(static_cast<std::uint8_t>(kind));
}

/// Validates magic and version and returns the model kind.
inline ModelKind read_model_header(ByteReader& r) {
    r.need(4);
    if (r.u8() != 'G' || r.u8() != 'L' || r.u8() != 'U' || r.u8() != 'T') throw FormatError("bad magic: not a GLUT model file");
    const std::uint16_t version = r.u16();
    if (version != kModelFormatVersion)
        throw FormatError("unsupported model format version " + std::to_string(version));
    const std::uint8_t kind = r.u8();
    if (kind > 2) throw FormatError("unknown model kind " + std::to_string(kind));
    return static_cast<ModelKind>(kind);
}

inline ModelKind peek_model_kind(std::span<const std::uint8_t> data) {
    ByteReader r(data);
    return read_model_header(r);
}

inline void write_glut_body(ByteWriter& w, const GlutModel& m) {
    w.u32(static_cast<std::uint32_t>(m.size()));
    w.f32s(m.params());
    w.f32(m.epsilon());
}

inline GlutModel read_glut_body(ByteReader& r) {
    const std::uint32_t n = r.u32();
    if (n == 0) throw FormatError("model has zero primitives");
    r.need(4 * (ParamLayout::count_for(n) + 1));
    GlutModel m(n);
    r.f32s(m.params());
    const double eps = r.f32();
    if (!(eps > 0.0)) throw FormatError("model epsilon must be positive");
    m.set_epsilon(eps);
    return m;
}

inline std::vector<std::uint8_t> serialize(const GlutModel& m) {
    ByteWriter w;
    write_model_header(w, ModelKind::Glut);
    write_glut_body(w, m);
    return w.take();
}

inline GlutModel deserialize_glut(std::span<const std::uint8_t> data) {
    ByteReader r(data);
    if (read_model_header(r) != ModelKind::Glut) throw FormatError("not a single-GLUT model file");
    GlutModel m = read_glut_body(r);
    if (!r.done()) throw FormatError("trailing bytes after model");
    m.validate();
    return m;
}

/// Rounds every parameter to the f32 storage precision, so serialize/deserialize is lossless.
inline void snap_to_storage_precision(GlutModel& m) {
    for (double& v : m.params()) v = static_cast<double>(static_cast<float>(v));
    m.set_epsilon(static_cast<double>(static_cast<float>(m.epsilon())));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace glut
