#ifndef UQGAZE_LOSS_HPP
#define UQGAZE_LOSS_HPP

#include <algorithm>
#include <array>
#include <cmath>

namespace uqgaze {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

/// 0.5 d^2 inside the unit interval, |d| - 0.5 outside.
inline double smooth_l1(double d)
{
    const double a = std::abs(d);
    return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

inline double smooth_l1_derivative(double d)
{
    if (d >= 1.0) return 1.0;
    if (d <= -1.0) return -1.0;
    return d;
}

inline double clamp_log_variance(double s) { return std::clamp(s, kLogVarMin, kLogVarMax); }

struct GazeLabel {
    double pitch = 0.0;
    double yaw = 0.0;
};

/// Heteroskedastic loss for a single angle, written in the log-variance
/// s = ln(sigma^2): s/2 + smooth_l1(residual) * exp(-s) / 2.
inline double angle_nll(double residual, double log_var)
{
    return 0.5 * log_var + 0.5 * smooth_l1(residual) * std::exp(-log_var);
}

struct LossWithGradient {
    double value = 0.0;
    /// d loss / d raw network output (pitch, yaw, s_pitch, s_yaw).
    std::array<double, 4> grad{};
};

/// Loss summed over pitch and yaw, taking the raw 4-vector network output.
/// Log-variances are clamped first; the clamp passes no gradient when active.
inline LossWithGradient nll_loss_raw(const std::array<double, 4>& raw, const GazeLabel& label)
{
    LossWithGradient out;
    const double target[2] = {label.pitch, label.yaw};
    for (int a = 0; a < 2; ++a) {
        const double s = clamp_log_variance(raw[2 + a]);
        const double residual = raw[a] - target[a];
        const double l = smooth_l1(residual);
        const double inv_var = std::exp(-s);
        out.value += 0.5 * s + 0.5 * l * inv_var;
        out.grad[a] = 0.5 * smooth_l1_derivative(residual) * inv_var;
        const bool clamped = raw[2 + a] < kLogVarMin || raw[2 + a] > kLogVarMax;
        out.grad[2 + a] = clamped ? 0.0 : 0.5 - 0.5 * l * inv_var;
    }
    return out;
}

} // namespace uqgaze

#endif
