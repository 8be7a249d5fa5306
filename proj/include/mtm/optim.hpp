#pragma once

// AdamW with decoupled weight decay over a flat parameter buffer.

#include <cstdint>
#include <span>
#include <vector>

namespace mtm {

struct AdamWOptions {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.1;
};

struct AdamState {
    std::int64_t step = 0;
    std::vector<float> m;
    std::vector<float> v;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0f), v(n, 0.0f) {}
    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One update:
///   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
///   p -= lr * m_hat / (sqrt(v_hat) + eps) + lr * wd * p   (wd where decay_mask = 1)
/// Throws TrainingError (leaving params and state untouched) if any gradient
/// is not finite. An empty decay mask applies decay everywhere.
void adamw_step(std::span<float> params, std::span<const float> grads, AdamState& state, const AdamWOptions& opts,
                std::span<const std::uint8_t> decay_mask = {});

/// Double-precision variant used for exact checks; the state is kept in
/// double as well.
struct AdamStateD {
    std::int64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
    explicit AdamStateD(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};
void adamw_step(std::span<double> params, std::span<const double> grads, AdamStateD& state,
                const AdamWOptions& opts, std::span<const std::uint8_t> decay_mask = {});

}  // namespace mtm
