#ifndef UQGAZE_TRAIN_HPP
#define UQGAZE_TRAIN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "adam.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "parallel.hpp"

namespace uqgaze {

struct BatchGradient {
    double mean_loss = 0.0;
    ModelParams<double> grads;
};

/// Items per gradient accumulation chunk. Chunks are summed in index order, so
/// the result is bit-identical for any thread count.
inline constexpr std::size_t kGradientChunk = 16;

/// Mean loss over the selected items and its gradient w.r.t. every parameter.
template <typename T>
BatchGradient batch_gradient(const ModelParams<T>& params, std::span<const NetworkInput<T>> inputs,
                             std::span<const GazeLabel> labels, std::span<const std::size_t> indices,
                             unsigned threads = 1)
{
    require_shape(inputs.size() == labels.size(), "batch_gradient: inputs and labels differ in length");
    if (indices.empty()) fail(ErrorCode::EmptyDataset, "batch_gradient: empty batch");
    const std::size_t chunks = (indices.size() + kGradientChunk - 1) / kGradientChunk;
    std::vector<ModelParams<double>> partial(chunks);
    std::vector<double> partial_loss(chunks, 0.0);

    parallel_for(chunks, threads, [&](std::size_t c) {
        partial[c] = ModelParams<double>::zeros();
        const std::size_t end = std::min(indices.size(), (c + 1) * kGradientChunk);
        for (std::size_t i = c * kGradientChunk; i < end; ++i) {
            const std::size_t idx = indices[i];
            const ForwardTrace<T> trace = forward(params, inputs[idx]);
            const LossWithGradient loss = nll_loss_raw(trace.output, labels[idx]);
            partial_loss[c] += loss.value;
            backward(params, trace, loss.grad, partial[c]);
        }
    });

    BatchGradient out{0.0, std::move(partial[0])};
    out.mean_loss = partial_loss[0];
    auto total = out.grads.parameters();
    for (std::size_t c = 1; c < chunks; ++c) {
        out.mean_loss += partial_loss[c];
        auto part = partial[c].parameters();
        for (std::size_t p = 0; p < total.size(); ++p) {
            auto dst = total[p]->data();
            auto src = part[p]->data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
    }
    const double scale = 1.0 / static_cast<double>(indices.size());
    out.mean_loss *= scale;
    for (Tensor<double>* t : total)
        for (double& v : t->values()) v *= scale;
    return out;
}

struct TrainConfig {
    double lr = 1e-4;
    std::size_t batch_size = 64;
    int epochs = 40;
    /// The learning rate is multiplied by `lr_decay_factor` from epoch lr_decay_epoch + 1 on.
    int lr_decay_epoch = 25;
    double lr_decay_factor = 0.1;
    std::uint64_t seed = 0;
    double validation_fraction = 0.2;
    unsigned threads = 1;

    void validate() const
    {
        if (!(lr > 0.0)) fail(ErrorCode::BadConfig, "lr must be > 0");
        if (batch_size < 1) fail(ErrorCode::BadConfig, "batch_size must be >= 1");
        if (epochs < 0) fail(ErrorCode::BadConfig, "epochs must be >= 0");
        if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0))
            fail(ErrorCode::BadConfig, "lr_decay_factor must be in (0, 1]");
        if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
            fail(ErrorCode::BadConfig, "validation_fraction must be in [0, 1)");
    }

    /// Learning rate in effect during a 1-based epoch.
    [[nodiscard]] double lr_at(int epoch) const { return epoch > lr_decay_epoch ? lr * lr_decay_factor : lr; }
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    double val_angular_error_deg = 0.0;
};

struct TrainResult {
    ModelParams<float> model;
    std::vector<EpochRecord> history;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> val_indices;
};

struct EvalSummary {
    double mean_loss = 0.0;
    double mean_angular_error_deg = 0.0;
};

template <typename T>
EvalSummary evaluate_loss(const ModelParams<T>& params, std::span<const NetworkInput<T>> inputs,
                          std::span<const GazeLabel> labels, std::span<const std::size_t> indices)
{
    EvalSummary s;
    if (indices.empty()) return {std::nan(""), std::nan("")};
    for (std::size_t idx : indices) {
        const GazeEstimate e = GazeEstimate::from_raw(forward(params, inputs[idx]).output);
        s.mean_loss += nll_loss(e, labels[idx]);
        s.mean_angular_error_deg += angular_error(e.pitch, e.yaw, labels[idx].pitch, labels[idx].yaw);
    }
    s.mean_loss /= static_cast<double>(indices.size());
    s.mean_angular_error_deg /= static_cast<double>(indices.size());
    return s;
}

/// Seeded shuffle split; validation gets floor(fraction * n) samples, at least
/// one when n >= 2 and the fraction is non-zero.
inline void split_indices(std::size_t n, double validation_fraction, std::uint64_t seed,
                          std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx)
{
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed ^ 0x5eed5911ULL);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(n)));
    if (n >= 2 && validation_fraction > 0.0) n_val = std::max<std::size_t>(n_val, 1);
    val_idx.assign(perm.begin(), perm.begin() + static_cast<long>(n_val));
    train_idx.assign(perm.begin() + static_cast<long>(n_val), perm.end());
}

/// Minibatch Adam on the mean heteroskedastic loss. Deterministic given the seed;
/// `config.threads` changes speed only, never the result.
inline TrainResult train(std::span<const EyeSample> dataset, const TrainConfig& config)
{
    config.validate();
    if (dataset.empty()) fail(ErrorCode::EmptyDataset, "training dataset is empty");

    std::vector<NetworkInput<float>> inputs;
    std::vector<GazeLabel> labels;
    inputs.reserve(dataset.size());
    labels.reserve(dataset.size());
    for (const EyeSample& s : dataset) {
        inputs.push_back(make_input<float>(s));
        labels.push_back(label_of(s));
    }

    TrainResult result;
    split_indices(dataset.size(), config.validation_fraction, config.seed, result.train_indices, result.val_indices);
    result.model = ModelParams<float>::he_uniform(config.seed);

    AdamState adam;
    std::mt19937_64 rng(config.seed ^ 0xba7c4e5ULL);
    std::vector<std::size_t> order = result.train_indices;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double lr = config.lr_at(epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, order.size() - start);
            const std::span<const std::size_t> batch(order.data() + start, len);
            BatchGradient g = batch_gradient<float>(result.model, inputs, labels, batch, config.threads);
            loss_sum += g.mean_loss * static_cast<double>(len);
            auto params = result.model.parameters();
            auto grad_ptrs = g.grads.parameters();
            std::vector<const TensorF64*> grads(grad_ptrs.begin(), grad_ptrs.end());
            adam_step<float>(params, grads, adam, lr);
        }
        const EvalSummary val = evaluate_loss<float>(result.model, inputs, labels, result.val_indices);
        result.history.push_back({epoch, loss_sum / static_cast<double>(order.size()), val.mean_loss, lr,
                                  val.mean_angular_error_deg});
    }
    return result;
}

} // namespace uqgaze

#endif
