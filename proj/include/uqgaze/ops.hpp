#ifndef UQGAZE_OPS_HPP
#define UQGAZE_OPS_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "tensor.hpp"

// Layer primitives with explicit forward and backward passes.
// Reductions accumulate in double; gradients are always double buffers.
namespace uqgaze {

namespace detail {

// Dot product with four fixed lanes. The summation order is fixed, so the
// result does not depend on whether the compiler vectorizes the loop.
template <typename A, typename B>
inline double dot(const A* a, const B* b, std::size_t n)
{
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        lane[0] += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        lane[1] += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
        lane[2] += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
        lane[3] += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

// C x (H+2) x (W+2) zero-bordered copy in double.
template <typename T>
inline std::vector<double> pad_input(const Tensor<T>& input)
{
    const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
    const std::size_t ph = height + 2, pw = width + 2;
    std::vector<double> pad(channels * ph * pw, 0.0);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < height; ++y) {
            const T* src = &input.at(c, y, 0);
            double* dst = &pad[(c * ph + y + 1) * pw + 1];
            for (std::size_t x = 0; x < width; ++x) dst[x] = static_cast<double>(src[x]);
        }
    return pad;
}

template <typename T>
inline void check_conv_shapes(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias)
{
    require_shape(input.rank() == 3, "conv2d input must be CxHxW, got " + shape_string(input.shape()));
    require_shape(kernels.rank() == 4 && kernels.dim(2) == 3 && kernels.dim(3) == 3,
                  "conv2d kernels must be KxCx3x3, got " + shape_string(kernels.shape()));
    require_shape(kernels.dim(1) == input.dim(0), "conv2d channel count mismatch: input " +
                                                      shape_string(input.shape()) + ", kernels " +
                                                      shape_string(kernels.shape()));
    require_shape(bias.size() == kernels.dim(0), "conv2d bias length must equal kernel count");
}

} // namespace detail

/// 3x3 convolution, stride 1, zero padding 1. Output has the input's spatial size.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias)
{
    detail::check_conv_shapes(input, kernels, bias);
    const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
    const std::size_t count = kernels.dim(0);
    const std::size_t ph = height + 2, pw = width + 2;
    const std::vector<double> pad = detail::pad_input(input);

    // Accumulate on rows of stride pw: output (y, x) lives at y * pw + x and the
    // two trailing columns per row are scratch. Each tap is then one long axpy.
    const std::size_t span_len = height * pw;
    Tensor<T> out({count, height, width});
    std::vector<double> acc(span_len);
    for (std::size_t k = 0; k < count; ++k) {
        std::fill(acc.begin(), acc.end(), static_cast<double>(bias[k]));
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t dy = 0; dy < 3; ++dy)
                for (std::size_t dx = 0; dx < 3; ++dx) {
                    const double w = static_cast<double>(kernels[((k * channels + c) * 3 + dy) * 3 + dx]);
                    const double* src = &pad[c * ph * pw + dy * pw + dx];
                    double* dst = acc.data();
                    // Last row reads at most two elements past the plane; they stay inside `pad`
                    // except for the final channel, so clip the span on the last row.
                    const std::size_t n = (c + 1 == channels && dy == 2) ? span_len - dx : span_len;
                    for (std::size_t i = 0; i < n; ++i) dst[i] += w * src[i];
                }
        T* dst = &out[k * height * width];
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) dst[y * width + x] = static_cast<T>(acc[y * pw + x]);
    }
    return out;
}

/// Accumulates (+=) kernel and bias gradients; writes the input gradient when
/// `grad_input` is non-empty.
template <typename T>
void conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels, std::span<const double> grad_out,
                     std::span<double> grad_kernels, std::span<double> grad_bias, std::span<double> grad_input)
{
    const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
    const std::size_t count = kernels.dim(0);
    const std::size_t ph = height + 2, pw = width + 2;
    require_shape(grad_out.size() == count * height * width, "conv2d_backward grad_out size");
    require_shape(grad_kernels.size() == kernels.size(), "conv2d_backward grad_kernels size");
    require_shape(grad_bias.size() == count, "conv2d_backward grad_bias size");
    const std::vector<double> pad = detail::pad_input(input);

    // Output gradient re-laid on rows of stride pw, scratch columns zeroed.
    const std::size_t span_len = height * pw;
    std::vector<double> g(span_len);
    const bool want_input = !grad_input.empty();
    if (want_input) require_shape(grad_input.size() == input.size(), "conv2d_backward grad_input size");
    std::vector<double> gpad(want_input ? channels * ph * pw + 2 : 0, 0.0);

    for (std::size_t k = 0; k < count; ++k) {
        double bsum = 0.0;
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                const double v = grad_out[(k * height + y) * width + x];
                g[y * pw + x] = v;
                bsum += v;
            }
        grad_bias[k] += bsum;
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t dy = 0; dy < 3; ++dy)
                for (std::size_t dx = 0; dx < 3; ++dx) {
                    const std::size_t tap = ((k * channels + c) * 3 + dy) * 3 + dx;
                    const std::size_t offset = c * ph * pw + dy * pw + dx;
                    // The final channel's last row would read past `pad`; those
                    // positions are scratch columns with zero gradient.
                    const std::size_t n = std::min(span_len, pad.size() - offset);
                    grad_kernels[tap] += detail::dot(g.data(), &pad[offset], n);
                    if (want_input) {
                        const double w = static_cast<double>(kernels[tap]);
                        double* dst = &gpad[offset];
                        for (std::size_t i = 0; i < span_len; ++i) dst[i] += w * g[i];
                    }
                }
    }

    if (!want_input) return;
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < height; ++y)
            std::copy_n(&gpad[(c * ph + y + 1) * pw + 1], width, &grad_input[(c * height + y) * width]);
}

template <typename T>
struct PoolResult {
    Tensor<T> output;
    /// Flat input index of each output's winning element.
    std::vector<std::uint32_t> argmax;
};

/// 2x2 max pooling, stride 2. A trailing odd row/column is dropped; ties go to
/// the row-major first element of the window.
template <typename T>
PoolResult<T> maxpool2(const Tensor<T>& input)
{
    require_shape(input.rank() == 3, "maxpool2 input must be CxHxW, got " + shape_string(input.shape()));
    const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
    require_shape(height >= 2 && width >= 2, "maxpool2 needs H,W >= 2, got " + shape_string(input.shape()));
    const std::size_t oh = height / 2, ow = width / 2;

    PoolResult<T> result{Tensor<T>({channels, oh, ow}), std::vector<std::uint32_t>(channels * oh * ow)};
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) {
                std::size_t best = (c * height + 2 * y) * width + 2 * x;
                const std::size_t candidates[3] = {best + 1, best + width, best + width + 1};
                for (std::size_t idx : candidates)
                    if (input[idx] > input[best]) best = idx;
                const std::size_t o = (c * oh + y) * ow + x;
                result.output[o] = input[best];
                result.argmax[o] = static_cast<std::uint32_t>(best);
            }
    return result;
}

inline void maxpool2_backward(std::span<const std::uint32_t> argmax, std::span<const double> grad_out,
                              std::span<double> grad_input)
{
    require_shape(argmax.size() == grad_out.size(), "maxpool2_backward size mismatch");
    std::fill(grad_input.begin(), grad_input.end(), 0.0);
    for (std::size_t i = 0; i < grad_out.size(); ++i) grad_input[argmax[i]] += grad_out[i];
}

/// out = W x + b, with W stored m x n.
template <typename T>
Tensor<T> fully_connected(std::span<const std::type_identity_t<T>> x, const Tensor<T>& weights, const Tensor<T>& bias)
{
    require_shape(weights.rank() == 2, "fully_connected weights must be m x n");
    const std::size_t m = weights.dim(0), n = weights.dim(1);
    require_shape(x.size() == n, "fully_connected input length " + std::to_string(x.size()) +
                                     " does not match weights " + shape_string(weights.shape()));
    require_shape(bias.size() == m, "fully_connected bias length must equal output size");
    Tensor<T> out({m});
    for (std::size_t i = 0; i < m; ++i)
        out[i] = static_cast<T>(static_cast<double>(bias[i]) + detail::dot(&weights[i * n], x.data(), n));
    return out;
}

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias)
{
    return fully_connected(x.data(), weights, bias);
}

/// Accumulates (+=) weight and bias gradients; overwrites `grad_x` when non-empty.
template <typename T>
void fully_connected_backward(std::span<const std::type_identity_t<T>> x, const Tensor<T>& weights, std::span<const double> grad_out,
                              std::span<double> grad_weights, std::span<double> grad_bias, std::span<double> grad_x)
{
    const std::size_t m = weights.dim(0), n = weights.dim(1);
    require_shape(grad_out.size() == m && grad_weights.size() == m * n && grad_bias.size() == m,
                  "fully_connected_backward size mismatch");
    std::vector<double> xd(x.begin(), x.end());
    for (std::size_t i = 0; i < m; ++i) {
        const double g = grad_out[i];
        grad_bias[i] += g;
        double* gw = &grad_weights[i * n];
        for (std::size_t j = 0; j < n; ++j) gw[j] += g * xd[j];
    }
    if (grad_x.empty()) return;
    require_shape(grad_x.size() == n, "fully_connected_backward grad_x size");
    std::fill(grad_x.begin(), grad_x.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double g = grad_out[i];
        const T* w = &weights[i * n];
        for (std::size_t j = 0; j < n; ++j) grad_x[j] += g * static_cast<double>(w[j]);
    }
}

template <typename T>
Tensor<T> relu(Tensor<T> x)
{
    for (T& v : x.values()) v = v > T{0} ? v : T{0};
    return x;
}

/// Passes the gradient where the forward input was strictly positive.
template <typename T>
void relu_backward(std::span<const T> forward_input, std::span<double> grad)
{
    require_shape(forward_input.size() == grad.size(), "relu_backward size mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(forward_input[i] > T{0})) grad[i] = 0.0;
}

} // namespace uqgaze

#endif
