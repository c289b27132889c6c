#ifndef UQGAZE_ADAM_HPP
#define UQGAZE_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tensor.hpp"

namespace uqgaze {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update. Parameters stay in their storage type; the
/// moment estimates and the update itself are computed in double.
/// All gradients are validated before anything is modified.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const TensorF64* const> grads, AdamState& state,
               double lr)
{
    require_shape(params.size() == grads.size(), "adam_step: parameter and gradient counts differ");
    if (!(lr > 0.0)) fail(ErrorCode::BadConfig, "adam_step: learning rate must be positive");
    for (std::size_t p = 0; p < params.size(); ++p) {
        require_shape(params[p]->size() == grads[p]->size(), "adam_step: gradient size mismatch");
        for (double g : grads[p]->data())
            if (!std::isfinite(g)) fail(ErrorCode::NonFiniteGradient, "adam_step: non-finite gradient");
    }
    if (state.first_moment.empty()) {
        for (const Tensor<T>* param : params) {
            state.first_moment.emplace_back(param->size(), 0.0);
            state.second_moment.emplace_back(param->size(), 0.0);
        }
    }
    require_shape(state.first_moment.size() == params.size(), "adam_step: state tracks a different parameter set");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        std::vector<double>& m = state.first_moment[p];
        std::vector<double>& v = state.second_moment[p];
        require_shape(m.size() == params[p]->size(), "adam_step: moment shape mismatch");
        T* theta = params[p]->data().data();
        const std::span<const double> g = grads[p]->data();
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            theta[i] = static_cast<T>(static_cast<double>(theta[i]) - lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
        }
    }
}

} // namespace uqgaze

#endif
