#ifndef UQGAZE_NETWORK_HPP
#define UQGAZE_NETWORK_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "loss.hpp"
#include "ops.hpp"
#include "sample.hpp"

// Two-branch confidence-aware gaze regressor:
//   eye patch 1x36x60 -> conv(1->8) relu pool -> conv(8->16) relu pool -> fc(2160->64) relu   (per eye)
//   concat(64+64) -> fc1(128->64) relu -> concat head angles (66) -> fc2(66->32) relu -> fc3(32->4)
// Outputs are (pitch, yaw, log-variance pitch, log-variance yaw).
namespace uqgaze {

inline constexpr std::size_t kConv1Channels = 8;
inline constexpr std::size_t kConv2Channels = 16;
inline constexpr std::size_t kPooledHeight = kPatchHeight / 4;
inline constexpr std::size_t kPooledWidth = kPatchWidth / 4;
inline constexpr std::size_t kFlattenSize = kConv2Channels * kPooledHeight * kPooledWidth;
inline constexpr std::size_t kEyeFeatures = 64;
inline constexpr std::size_t kFusionWidth = 64;
inline constexpr std::size_t kHeadAngles = 2;
inline constexpr std::size_t kHiddenWidth = 32;
inline constexpr std::size_t kOutputs = 4;

template <typename T>
struct Conv3x3Layer {
    Tensor<T> kernels;
    Tensor<T> bias;
    bool operator==(const Conv3x3Layer&) const = default;
};

template <typename T>
struct DenseLayer {
    Tensor<T> weights;
    Tensor<T> bias;
    bool operator==(const DenseLayer&) const = default;
};

template <typename T>
struct EyeBranchParams {
    Conv3x3Layer<T> conv1;
    Conv3x3Layer<T> conv2;
    DenseLayer<T> fc;
    bool operator==(const EyeBranchParams&) const = default;
};

/// Network weights. Left and right eye branches have separate weights.
/// Also used with T = double as the gradient container.
template <typename T>
struct ModelParams {
    EyeBranchParams<T> left;
    EyeBranchParams<T> right;
    DenseLayer<T> fc1;
    DenseLayer<T> fc2;
    DenseLayer<T> fc3;

    static ModelParams zeros()
    {
        auto conv = [](std::size_t k, std::size_t c) {
            return Conv3x3Layer<T>{Tensor<T>({k, c, 3, 3}), Tensor<T>({k})};
        };
        auto dense = [](std::size_t m, std::size_t n) { return DenseLayer<T>{Tensor<T>({m, n}), Tensor<T>({m})}; };
        auto branch = [&] {
            return EyeBranchParams<T>{conv(kConv1Channels, 1), conv(kConv2Channels, kConv1Channels),
                                      dense(kEyeFeatures, kFlattenSize)};
        };
        return ModelParams{branch(), branch(), dense(kFusionWidth, 2 * kEyeFeatures),
                           dense(kHiddenWidth, kFusionWidth + kHeadAngles), dense(kOutputs, kHiddenWidth)};
    }

    /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
    static ModelParams he_uniform(std::uint64_t seed)
    {
        ModelParams params = zeros();
        std::mt19937_64 rng(seed);
        auto fillw = [&](Tensor<T>& w, std::size_t fan_in) {
            std::uniform_real_distribution<double> dist(-1.0, 1.0);
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
            for (T& v : w.values()) v = static_cast<T>(limit * dist(rng));
        };
        for (EyeBranchParams<T>* eye : {&params.left, &params.right}) {
            fillw(eye->conv1.kernels, 9);
            fillw(eye->conv2.kernels, kConv1Channels * 9);
            fillw(eye->fc.weights, kFlattenSize);
        }
        fillw(params.fc1.weights, 2 * kEyeFeatures);
        fillw(params.fc2.weights, kFusionWidth + kHeadAngles);
        fillw(params.fc3.weights, kHiddenWidth);
        return params;
    }

    /// Every tensor in a fixed order (checkpoint layout, optimizer state order).
    std::vector<Tensor<T>*> parameters()
    {
        std::vector<Tensor<T>*> out;
        for (EyeBranchParams<T>* eye : {&left, &right})
            for (Tensor<T>* t : {&eye->conv1.kernels, &eye->conv1.bias, &eye->conv2.kernels, &eye->conv2.bias,
                                 &eye->fc.weights, &eye->fc.bias})
                out.push_back(t);
        for (DenseLayer<T>* layer : {&fc1, &fc2, &fc3}) {
            out.push_back(&layer->weights);
            out.push_back(&layer->bias);
        }
        return out;
    }

    std::vector<const Tensor<T>*> parameters() const
    {
        auto mutable_params = const_cast<ModelParams*>(this)->parameters();
        return {mutable_params.begin(), mutable_params.end()};
    }

    [[nodiscard]] std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const Tensor<T>* t : parameters()) n += t->size();
        return n;
    }

    template <typename U>
    [[nodiscard]] ModelParams<U> cast() const
    {
        ModelParams<U> out = ModelParams<U>::zeros();
        auto src = parameters();
        auto dst = out.parameters();
        for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
        return out;
    }

    void fill(T value)
    {
        for (Tensor<T>* t : parameters()) t->fill(value);
    }

    bool operator==(const ModelParams&) const = default;
};

template <typename T>
struct NetworkInput {
    Tensor<T> left;  // 1 x 36 x 60
    Tensor<T> right; // 1 x 36 x 60
    double head_pitch = 0.0;
    double head_yaw = 0.0;
};

template <typename T>
Tensor<T> patch_tensor(const ImageF32& patch)
{
    require_shape(patch.same_shape(kPatchHeight, kPatchWidth),
                  "eye patch must be 36x60, got " + std::to_string(patch.height) + "x" + std::to_string(patch.width));
    return Tensor<T>({1, kPatchHeight, kPatchWidth}, std::vector<T>(patch.pixels.begin(), patch.pixels.end()));
}

template <typename T>
NetworkInput<T> make_input(const EyeSample& sample)
{
    return {patch_tensor<T>(sample.left), patch_tensor<T>(sample.right), sample.head_pitch, sample.head_yaw};
}

template <typename T>
struct EyeTrace {
    Tensor<T> input;
    Tensor<T> conv1_pre;
    PoolResult<T> pool1;
    Tensor<T> conv2_pre;
    PoolResult<T> pool2;
    Tensor<T> fc_pre;
    Tensor<T> features;
};

/// Activations retained by `forward` for `backward`.
template <typename T>
struct ForwardTrace {
    bool valid = false;
    EyeTrace<T> left;
    EyeTrace<T> right;
    Tensor<T> fused;
    Tensor<T> fc1_pre;
    Tensor<T> hidden1; // relu(fc1) followed by the head angles
    Tensor<T> fc2_pre;
    Tensor<T> hidden2;
    std::array<double, 4> output{};
};

namespace detail {

template <typename T>
EyeTrace<T> eye_forward(const EyeBranchParams<T>& p, const Tensor<T>& input)
{
    EyeTrace<T> t;
    t.input = input;
    t.conv1_pre = conv2d(input, p.conv1.kernels, p.conv1.bias);
    t.pool1 = maxpool2(relu(t.conv1_pre));
    t.conv2_pre = conv2d(t.pool1.output, p.conv2.kernels, p.conv2.bias);
    t.pool2 = maxpool2(relu(t.conv2_pre));
    t.fc_pre = fully_connected(t.pool2.output.data(), p.fc.weights, p.fc.bias);
    t.features = relu(t.fc_pre);
    return t;
}

template <typename T>
void eye_backward(const EyeBranchParams<T>& p, const EyeTrace<T>& t, std::span<const double> grad_features,
                  EyeBranchParams<double>& g)
{
    std::vector<double> grad_fc(grad_features.begin(), grad_features.end());
    relu_backward(t.fc_pre.data(), std::span<double>(grad_fc));
    std::vector<double> grad_pool2(kFlattenSize);
    fully_connected_backward(t.pool2.output.data(), p.fc.weights, grad_fc, g.fc.weights.data(), g.fc.bias.data(),
                             std::span<double>(grad_pool2));

    std::vector<double> grad_conv2(t.conv2_pre.size());
    maxpool2_backward(t.pool2.argmax, grad_pool2, grad_conv2);
    relu_backward(t.conv2_pre.data(), std::span<double>(grad_conv2));
    std::vector<double> grad_pool1(t.pool1.output.size());
    conv2d_backward(t.pool1.output, p.conv2.kernels, grad_conv2, g.conv2.kernels.data(), g.conv2.bias.data(),
                    std::span<double>(grad_pool1));

    std::vector<double> grad_conv1(t.conv1_pre.size());
    maxpool2_backward(t.pool1.argmax, grad_pool1, grad_conv1);
    relu_backward(t.conv1_pre.data(), std::span<double>(grad_conv1));
    conv2d_backward(t.input, p.conv1.kernels, grad_conv1, g.conv1.kernels.data(), g.conv1.bias.data(),
                    std::span<double>{});
}

} // namespace detail

template <typename T>
ForwardTrace<T> forward(const ModelParams<T>& params, const NetworkInput<T>& input)
{
    ForwardTrace<T> t;
    t.left = detail::eye_forward(params.left, input.left);
    t.right = detail::eye_forward(params.right, input.right);

    t.fused = Tensor<T>({2 * kEyeFeatures});
    std::copy(t.left.features.values().begin(), t.left.features.values().end(), t.fused.values().begin());
    std::copy(t.right.features.values().begin(), t.right.features.values().end(),
              t.fused.values().begin() + kEyeFeatures);
    t.fc1_pre = fully_connected(t.fused, params.fc1.weights, params.fc1.bias);

    t.hidden1 = Tensor<T>({kFusionWidth + kHeadAngles});
    for (std::size_t i = 0; i < kFusionWidth; ++i) t.hidden1[i] = t.fc1_pre[i] > T{0} ? t.fc1_pre[i] : T{0};
    t.hidden1[kFusionWidth] = static_cast<T>(input.head_pitch);
    t.hidden1[kFusionWidth + 1] = static_cast<T>(input.head_yaw);

    t.fc2_pre = fully_connected(t.hidden1, params.fc2.weights, params.fc2.bias);
    t.hidden2 = relu(t.fc2_pre);
    const Tensor<T> out = fully_connected(t.hidden2, params.fc3.weights, params.fc3.bias);
    for (std::size_t i = 0; i < kOutputs; ++i) t.output[i] = static_cast<double>(out[i]);
    t.valid = true;
    return t;
}

/// Back-propagates d loss / d output through a recorded forward pass and
/// accumulates (+=) into `grads`.
template <typename T>
void backward(const ModelParams<T>& params, const ForwardTrace<T>& trace, const std::array<double, 4>& grad_output,
              ModelParams<double>& grads)
{
    if (!trace.valid) fail(ErrorCode::NoForwardPass, "backward called without a recorded forward pass");

    std::vector<double> grad_hidden2(kHiddenWidth);
    fully_connected_backward(trace.hidden2.data(), params.fc3.weights, grad_output, grads.fc3.weights.data(),
                             grads.fc3.bias.data(), std::span<double>(grad_hidden2));
    relu_backward(trace.fc2_pre.data(), std::span<double>(grad_hidden2));

    std::vector<double> grad_hidden1(kFusionWidth + kHeadAngles);
    fully_connected_backward(trace.hidden1.data(), params.fc2.weights, grad_hidden2, grads.fc2.weights.data(),
                             grads.fc2.bias.data(), std::span<double>(grad_hidden1));
    grad_hidden1.resize(kFusionWidth); // head angles are inputs, not parameters
    relu_backward(trace.fc1_pre.data(), std::span<double>(grad_hidden1));

    std::vector<double> grad_fused(2 * kEyeFeatures);
    fully_connected_backward(trace.fused.data(), params.fc1.weights, grad_hidden1, grads.fc1.weights.data(),
                             grads.fc1.bias.data(), std::span<double>(grad_fused));

    const std::span<const double> all(grad_fused);
    detail::eye_backward(params.left, trace.left, all.first(kEyeFeatures), grads.left);
    detail::eye_backward(params.right, trace.right, all.subspan(kEyeFeatures), grads.right);
}

/// Gaze angles in radians plus per-angle variance; the overall uncertainty is
/// the larger of the two variances.
struct GazeEstimate {
    double pitch = 0.0;
    double yaw = 0.0;
    double log_var_pitch = 0.0;
    double log_var_yaw = 0.0;
    double sigma2_pitch = 1.0;
    double sigma2_yaw = 1.0;
    double overall_uncertainty = 1.0;

    static GazeEstimate from_raw(const std::array<double, 4>& raw)
    {
        GazeEstimate e;
        e.pitch = raw[0];
        e.yaw = raw[1];
        e.log_var_pitch = clamp_log_variance(raw[2]);
        e.log_var_yaw = clamp_log_variance(raw[3]);
        e.sigma2_pitch = std::exp(e.log_var_pitch);
        e.sigma2_yaw = std::exp(e.log_var_yaw);
        e.overall_uncertainty = std::max(e.sigma2_pitch, e.sigma2_yaw);
        return e;
    }

    bool operator==(const GazeEstimate&) const = default;
};

template <typename T>
GazeEstimate predict(const ModelParams<T>& params, const EyeSample& sample)
{
    return GazeEstimate::from_raw(forward(params, make_input<T>(sample)).output);
}

inline double nll_loss(const GazeEstimate& pred, const GazeLabel& label)
{
    return angle_nll(pred.pitch - label.pitch, pred.log_var_pitch) + angle_nll(pred.yaw - label.yaw, pred.log_var_yaw);
}

inline GazeLabel label_of(const EyeSample& sample) { return {sample.gaze_pitch, sample.gaze_yaw}; }

} // namespace uqgaze

#endif
