#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "glut/glut_model.hpp"

namespace glut {

/// Total selected influence below which an edit is refused.
inline constexpr double kEditEpsilon = 1e-12;

/// Malformed constraint (colors outside [0,1], K or strength out of range).
class InvalidEdit : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The K selected primitives carry (numerically) no weight at c_in.
class DegenerateEdit : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An undo record does not match the biases currently in the model.
class LineageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EditConstraint {
    Rgb c_in;
    Rgb c_out;
    std::size_t k = 1;
    double strength = 1.0;

    void validate(std::size_t n) const {
        auto in_box = [](const Rgb& c) {
            for (int i = 0; i < 3; ++i)
                if (!(c[i] >= 0.0 && c[i] <= 1.0)) return false;
            return true;
        };
        if (!in_box(c_in) || !in_box(c_out)) throw InvalidEdit("edit colors must lie in [0,1]^3");
        if (k < 1 || k > n) throw InvalidEdit("K must lie in [1, " + std::to_string(n) + "]");
        if (!(strength >= 0.0 && strength <= 1.0)) throw InvalidEdit("strength must lie in [0,1]");
    }
};

struct EditRecord {
    EditConstraint constraint;
    std::vector<std::uint32_t> touched;  // argtop-K, by decreasing weight
    std::vector<double> alphas;          // normalized influence over touched, sums to 1
    std::vector<Vec3> deltas;            // bias change applied to each touched primitive
    std::vector<Vec3> bias_before;
    std::vector<Vec3> bias_after;
    double movement = 0.0;  // m = sum_k w_k(c_in) alpha_k
    Vec3 residual_before;
    Vec3 residual_after;

    nlohmann::json to_json() const {
        auto vec = [](const Vec3& v) { return nlohmann::json::array({v[0], v[1], v[2]}); };
        auto vecs = [&](const std::vector<Vec3>& vs) {
            nlohmann::json a = nlohmann::json::array();
            for (const auto& v : vs) a.push_back(vec(v));
            return a;
        };
        return {{"c_in", vec(constraint.c_in)},
                {"c_out", vec(constraint.c_out)},
                {"K", constraint.k},
                {"s", constraint.strength},
                {"touched", touched},
                {"alphas", alphas},
                {"deltas", vecs(deltas)},
                {"m", movement},
                {"residual_before", vec(residual_before)},
                {"residual_after", vec(residual_after)}};
    }
};

/// c_out - f(c_in) against the unclamped mixture.
inline Vec3 residual(const GlutModel& model, const Rgb& c_in, const Rgb& c_out) { return c_out - evaluate_unclamped(model, c_in); }

/// Indices of the K largest weights at `weights`, largest first, lower index on ties.
inline std::vector<std::uint32_t> top_k_indices(std::span<const double> weights, std::size_t k) {
    if (k < 1 || k > weights.size()) throw InvalidEdit("K must lie in [1, " + std::to_string(weights.size()) + "]");
    std::vector<std::uint32_t> idx(weights.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        return weights[a] > weights[b] || (weights[a] == weights[b] && a < b);
    });
    idx.resize(k);
    return idx;
}

inline std::vector<std::uint32_t> select_topk(const GlutModel& model, const Rgb& c_in, std::size_t k) {
    const auto w = influence_weights(model, c_in);
    return top_k_indices(w, k);
}

/// Distributes s * delta over the K most influential primitives at c_in in proportion to their
/// weights; only those biases change. Returns the record needed for undo and diagnostics.
inline EditRecord apply_edit(GlutModel& model, const EditConstraint& c) {
    c.validate(model.size());
    const PreparedGlut prep(model);
    std::vector<double> w(model.size());
    prep.weights_into(c.c_in, [](std::size_t) { return true; }, std::span<double>(w));
    EditRecord rec;
    rec.constraint = c;
    rec.residual_before = c.c_out - prep.evaluate_unclamped(c.c_in, w);
    prep.weights_into(c.c_in, [](std::size_t) { return true; }, std::span<double>(w));
    rec.touched = top_k_indices(w, c.k);
    double total = 0.0;
    for (auto i : rec.touched) total += w[i];
    if (!(total >= kEditEpsilon))
        throw DegenerateEdit("selected primitives have negligible influence at c_in (sum of weights " + std::to_string(total) +
                             "); increase K");
    for (auto i : rec.touched) {
        const double alpha = w[i] / total;
        rec.alphas.push_back(alpha);
        rec.movement += w[i] * alpha;
        const Vec3 d = (c.strength * alpha) * rec.residual_before;
        const Vec3 before = model.local_bias(i);
        const Vec3 after = before + d;
        rec.deltas.push_back(d);
        rec.bias_before.push_back(before);
        rec.bias_after.push_back(after);
        model.set_local_bias(i, after);
    }
    rec.residual_after = residual(model, c.c_in, c.c_out);
    return rec;
}

/// Functional form: the edited copy and its record.
inline std::pair<GlutModel, EditRecord> edited(const GlutModel& model, const EditConstraint& c) {
    GlutModel out = model;
    EditRecord rec = apply_edit(out, c);
    return {std::move(out), std::move(rec)};
}

/// Exact output change the edit causes at each probe: sum_k w_k(c) * delta_k.
inline std::vector<Vec3> edit_influence_map(const GlutModel& model, const EditRecord& rec, std::span<const Rgb> probes) {
    const PreparedGlut prep(model);
    std::vector<double> w(model.size());
    std::vector<Vec3> out;
    out.reserve(probes.size());
    for (const auto& p : probes) {
        prep.weights_into(p, [](std::size_t) { return true; }, std::span<double>(w));
        Vec3 d;
        for (std::size_t j = 0; j < rec.touched.size(); ++j) d += w[rec.touched[j]] * rec.deltas[j];
        out.push_back(d);
    }
    return out;
}

/// Restores the pre-edit biases after checking that the model still holds the post-edit ones.
inline void undo(GlutModel& model, const EditRecord& rec) {
    for (std::size_t j = 0; j < rec.touched.size(); ++j) {
        const auto i = rec.touched[j];
        if (i >= model.size() || !(model.local_bias(i) == rec.bias_after[j]))
            throw LineageError("edit record does not match the model (primitive " + std::to_string(i) + ")");
    }
    for (std::size_t j = rec.touched.size(); j-- > 0;) model.set_local_bias(rec.touched[j], rec.bias_before[j]);
}

/// Ordered edits over a base model with LIFO undo.
class EditJournal {
public:
    explicit EditJournal(GlutModel base) : base_(std::move(base)), current_(base_) {}

    const GlutModel& base() const { return base_; }
    const GlutModel& current() const { return current_; }
    const std::vector<EditRecord>& records() const { return records_; }
    bool empty() const { return records_.empty(); }

    const EditRecord& apply(const EditConstraint& c) {
        GlutModel next = current_;
        EditRecord rec = apply_edit(next, c);
        current_ = std::move(next);
        records_.push_back(std::move(rec));
        return records_.back();
    }

    EditRecord undo_last() {
        if (records_.empty()) throw std::logic_error("nothing to undo");
        EditRecord rec = std::move(records_.back());
        glut::undo(current_, rec);
        records_.pop_back();
        return rec;
    }

    /// Starts over from a new base model.
    void reset(GlutModel base) {
        base_ = std::move(base);
        current_ = base_;
        records_.clear();
    }

    /// One JSON object per line, oldest first.
    std::string to_json_lines() const {
        std::string out;
        for (const auto& r : records_) out += r.to_json().dump() + "\n";
        return out;
    }

private:
    GlutModel base_;
    GlutModel current_;
    std::vector<EditRecord> records_;
};

inline EditConstraint constraint_from_json(const nlohmann::json& j) {
    auto color = [](const nlohmann::json& a) {
        if (!a.is_array() || a.size() != 3) throw InvalidEdit("colors must be [r,g,b] triplets");
        return Rgb{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
    };
    EditConstraint c;
    c.c_in = color(j.at("c_in"));
    c.c_out = color(j.at("c_out"));
    const auto& k = j.at("K");
    if (!k.is_number_integer() || k.get<long long>() < 1) throw InvalidEdit("K must be a positive integer");
    c.k = k.get<std::size_t>();
    c.strength = j.at("s").get<double>();
    return c;
}

/// Re-applies a journal (as produced by EditJournal::to_json_lines) to a base model.
inline GlutModel replay_journal(const GlutModel& base, const std::string& lines) {
    GlutModel m = base;
    std::istringstream in(lines);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        apply_edit(m, constraint_from_json(nlohmann::json::parse(line)));
    }
    return m;
}

}  // namespace glut
