#include "mtm/optim.hpp"

#include "mtm/errors.hpp"

#include <cmath>
#include <string>

namespace mtm {

namespace {

template <typename P, typename S>
void step_impl(std::span<P> params, std::span<const P> grads, std::int64_t& step, std::vector<S>& m,
               std::vector<S>& v, const AdamWOptions& o, std::span<const std::uint8_t> decay_mask) {
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
        throw ContractViolation("optimizer buffers differ in size");
    }
    if (!decay_mask.empty() && decay_mask.size() != params.size()) {
        throw ContractViolation("decay mask differs in size from the parameters");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw TrainingError("non-finite gradient at parameter index " + std::to_string(i));
        }
    }
    ++step;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        const double mi = o.beta1 * m[i] + (1.0 - o.beta1) * g;
        const double vi = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
        m[i] = static_cast<S>(mi);
        v[i] = static_cast<S>(vi);
        const double p = params[i];
        const double wd = decay_mask.empty() || decay_mask[i] ? o.weight_decay : 0.0;
        const double update = (mi / bc1) / (std::sqrt(vi / bc2) + o.eps);
        params[i] = static_cast<P>(p - o.lr * update - o.lr * wd * p);
    }
}

}  // namespace

void adamw_step(std::span<float> params, std::span<const float> grads, AdamState& state, const AdamWOptions& opts,
                std::span<const std::uint8_t> decay_mask) {
    step_impl(params, grads, state.step, state.m, state.v, opts, decay_mask);
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamStateD& state,
                const AdamWOptions& opts, std::span<const std::uint8_t> decay_mask) {
    step_impl(params, grads, state.step, state.m, state.v, opts, decay_mask);
}

}  // namespace mtm
