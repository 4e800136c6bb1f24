#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace glut {

/// Adam moments for one parameter group.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    /// One bias-corrected update of params in place.
    void update(std::span<double> params, std::span<const double> grads, double lr) {
        if (params.size() != m.size() || grads.size() != m.size()) throw std::invalid_argument("adam: dimension mismatch");
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grads[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            const double mh = m[i] / c1;
            const double vh = v[i] / c2;
            params[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
};

inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr) {
    state.update(params, grads, lr);
}

/// Cosine annealing from base_lr at step 0 to 0 at total_steps.
inline double cosine_lr(long step, long total_steps, double base_lr) {
    if (total_steps <= 0) return base_lr;
    if (step < 0 || step > total_steps) throw std::invalid_argument("cosine_lr: step out of range");
    return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

}  // namespace glut
