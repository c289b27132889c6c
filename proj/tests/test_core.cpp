#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "uqgaze/uqgaze.hpp"

using namespace uqgaze;

namespace {

TensorF32 random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    TensorF32 t(std::move(shape));
    std::uniform_real_distribution<double> d(lo, hi);
    for (float& v : t.values()) v = static_cast<float>(d(rng));
    return t;
}

std::vector<double> conv_oracle(const TensorF32& in, const TensorF32& k, const TensorF32& b)
{
    const long C = static_cast<long>(in.dim(0)), H = static_cast<long>(in.dim(1)), W = static_cast<long>(in.dim(2));
    const long K = static_cast<long>(k.dim(0));
    std::vector<double> out(static_cast<std::size_t>(K * H * W));
    for (long kk = 0; kk < K; ++kk)
        for (long y = 0; y < H; ++y)
            for (long x = 0; x < W; ++x) {
                double acc = b[static_cast<std::size_t>(kk)];
                for (long c = 0; c < C; ++c)
                    for (long dy = 0; dy < 3; ++dy)
                        for (long dx = 0; dx < 3; ++dx) {
                            const long iy = y + dy - 1, ix = x + dx - 1;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            acc += in[static_cast<std::size_t>((c * H + iy) * W + ix)] *
                                   k[static_cast<std::size_t>(((kk * C + c) * 3 + dy) * 3 + dx)];
                        }
                out[static_cast<std::size_t>((kk * H + y) * W + x)] = acc;
            }
    return out;
}

} // namespace

TEST(Tensor, RejectsZeroDimensionsAndSizeMismatch)
{
    EXPECT_THROW(TensorF32({2, 0, 3}), Error);
    EXPECT_THROW(TensorF32({2, 3}, std::vector<float>(5)), Error);
    TensorF32 t({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
    EXPECT_EQ(t.at(1, 2), 6.0f);
    EXPECT_EQ(t.cast<double>().at(0, 1), 2.0);
}

TEST(Conv2d, IdentityKernelReproducesInput)
{
    TensorF32 in({1, 3, 3}, 1.0f);
    TensorF32 k({1, 1, 3, 3}, 0.0f);
    k[4] = 1.0f;
    const TensorF32 out = conv2d(in, k, TensorF32({1}, 0.0f));
    EXPECT_EQ(out, in);
}

TEST(Conv2d, ZeroKernelsGiveConstantBias)
{
    std::mt19937_64 rng(1);
    const TensorF32 in = random_tensor({2, 4, 5}, rng);
    const TensorF32 out = conv2d(in, TensorF32({3, 2, 3, 3}, 0.0f), TensorF32({3}, std::vector<float>{0.5f, -1, 2}));
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 5; ++x) {
            EXPECT_EQ(out.at(0, y, x), 0.5f);
            EXPECT_EQ(out.at(1, y, x), -1.0f);
            EXPECT_EQ(out.at(2, y, x), 2.0f);
        }
}

TEST(Conv2d, MatchesNestedLoopOracle)
{
    std::mt19937_64 rng(2);
    const TensorF32 in = random_tensor({2, 5, 5}, rng), k = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
    const TensorF32 out = conv2d(in, k, b);
    const std::vector<double> ref = conv_oracle(in, k, b);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out[i], ref[i], 1e-6);
}

TEST(Conv2d, MatchesOracleOnRandomShapes)
{
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> dim(1, 9), ch(1, 4);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t C = ch(rng), K = ch(rng), H = dim(rng), W = dim(rng);
        const TensorF32 in = random_tensor({C, H, W}, rng), k = random_tensor({K, C, 3, 3}, rng), b = random_tensor({K}, rng);
        const TensorF32 out = conv2d(in, k, b);
        ASSERT_EQ(out.shape(), (Shape{K, H, W}));
        const std::vector<double> ref = conv_oracle(in, k, b);
        for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(out[i], ref[i], 1e-5) << "trial " << trial;
    }
}

TEST(Conv2d, BackwardMatchesOracleAdjoint)
{
    // <conv(x), g> is linear in x and in k; its gradients are checked against the oracle.
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> dim(1, 7), ch(1, 3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t C = ch(rng), K = ch(rng), H = dim(rng), W = dim(rng);
        const TensorF32 in = random_tensor({C, H, W}, rng), k = random_tensor({K, C, 3, 3}, rng);
        const TensorF32 zero_b({K}, 0.0f);
        std::vector<double> g(K * H * W);
        std::uniform_real_distribution<double> gd(-1, 1);
        for (double& v : g) v = gd(rng);
        std::vector<double> gk(k.size(), 0.0), gb(K, 0.0), gx(in.size(), 0.0);
        conv2d_backward(in, k, g, gk, gb, gx);

        for (std::size_t i = 0; i < in.size(); ++i) {
            TensorF32 unit({C, H, W}, 0.0f);
            unit[i] = 1.0f;
            const std::vector<double> r = conv_oracle(unit, k, zero_b);
            double expect = 0.0;
            for (std::size_t j = 0; j < r.size(); ++j) expect += r[j] * g[j];
            ASSERT_NEAR(gx[i], expect, 1e-9);
        }
        for (std::size_t t = 0; t < k.size(); ++t) {
            TensorF32 unit({K, C, 3, 3}, 0.0f);
            unit[t] = 1.0f;
            const std::vector<double> r = conv_oracle(in, unit, zero_b);
            double expect = 0.0;
            for (std::size_t j = 0; j < r.size(); ++j) expect += r[j] * g[j];
            ASSERT_NEAR(gk[t], expect, 1e-6);
        }
        for (std::size_t kk = 0; kk < K; ++kk) {
            double expect = 0.0;
            for (std::size_t j = 0; j < H * W; ++j) expect += g[kk * H * W + j];
            ASSERT_NEAR(gb[kk], expect, 1e-9);
        }
    }
}

TEST(Conv2d, ShapeMismatchThrows)
{
    try {
        conv2d(TensorF32({2, 4, 4}), TensorF32({1, 3, 3, 3}), TensorF32({1}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
    EXPECT_THROW(conv2d(TensorF32({1, 4, 4}), TensorF32({1, 1, 3, 3}), TensorF32({2})), Error);
    EXPECT_THROW(conv2d(TensorF32({1, 4, 4}), TensorF32({1, 1, 5, 5}), TensorF32({1})), Error);
}

TEST(MaxPool, SmallWindow)
{
    const auto r = maxpool2(TensorF32({1, 2, 2}, std::vector<float>{1, 2, 3, 4}));
    ASSERT_EQ(r.output.shape(), (Shape{1, 1, 1}));
    EXPECT_EQ(r.output[0], 4.0f);
    EXPECT_EQ(r.argmax[0], 3u);
}

TEST(MaxPool, ConstantInputTakesRowMajorFirst)
{
    const auto r = maxpool2(TensorF32({2, 4, 6}, 0.5f));
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t y = 0; y < 2; ++y)
            for (std::size_t x = 0; x < 3; ++x) {
                EXPECT_EQ(r.output.at(c, y, x), 0.5f);
                EXPECT_EQ(r.argmax[(c * 2 + y) * 3 + x], (c * 4 + 2 * y) * 6 + 2 * x);
            }
}

TEST(MaxPool, MatchesWindowScanOnRandomShapes)
{
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> dim(2, 15), ch(1, 4), level(0, 3);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t C = trial == 0 ? 4 : ch(rng), H = trial == 0 ? 9 : dim(rng), W = trial == 0 ? 15 : dim(rng);
        TensorF32 in({C, H, W});
        for (float& v : in.values()) v = static_cast<float>(level(rng)) * 0.25f; // many ties
        const auto r = maxpool2(in);
        ASSERT_EQ(r.output.shape(), (Shape{C, H / 2, W / 2}));
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H / 2; ++y)
                for (std::size_t x = 0; x < W / 2; ++x) {
                    float best = -1.0f;
                    std::size_t arg = 0;
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t idx = (c * H + 2 * y + dy) * W + 2 * x + dx;
                            if (in[idx] > best) {
                                best = in[idx];
                                arg = idx;
                            }
                        }
                    const std::size_t o = (c * (H / 2) + y) * (W / 2) + x;
                    ASSERT_EQ(r.output[o], best);
                    ASSERT_EQ(r.argmax[o], arg);
                }
    }
}

TEST(MaxPool, TooSmallThrows)
{
    EXPECT_THROW(maxpool2(TensorF32({1, 1, 4})), Error);
    EXPECT_THROW(maxpool2(TensorF32({1, 4, 1})), Error);
}

TEST(MaxPool, BackwardRoutesToWinner)
{
    const auto r = maxpool2(TensorF32({1, 2, 4}, std::vector<float>{1, 5, 0, 0, 2, 3, 0, 7}));
    std::vector<double> g(8, 9.0);
    const std::vector<double> go{10.0, 20.0};
    maxpool2_backward(r.argmax, go, g);
    EXPECT_EQ(g, (std::vector<double>{0, 10, 0, 0, 0, 0, 0, 20}));
}

TEST(FullyConnected, IdentityAndZeroInput)
{
    TensorF32 eye({3, 3}, 0.0f);
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0f;
    const TensorF32 x({3}, std::vector<float>{1.5f, -2, 3});
    EXPECT_EQ(fully_connected(x, eye, TensorF32({3}, 0.0f)), x);
    const TensorF32 b({2}, std::vector<float>{0.25f, -4});
    EXPECT_EQ(fully_connected(TensorF32({5}, 0.0f), TensorF32({2, 5}, 1.0f), b), b);
}

TEST(FullyConnected, MatchesDotOracleOnRandomShapes)
{
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<std::size_t> dim(1, 40);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t m = trial == 0 ? 4 : dim(rng), n = trial == 0 ? 3 : dim(rng);
        const TensorF32 W = random_tensor({m, n}, rng), x = random_tensor({n}, rng), b = random_tensor({m}, rng);
        const TensorF32 out = fully_connected(x, W, b);
        for (std::size_t i = 0; i < m; ++i) {
            double ref = b[i];
            for (std::size_t j = 0; j < n; ++j) ref += static_cast<double>(W.at(i, j)) * x[j];
            ASSERT_NEAR(out[i], ref, 1e-6);
        }
    }
}

TEST(FullyConnected, MismatchThrows)
{
    EXPECT_THROW(fully_connected(TensorF32({4}), TensorF32({2, 3}), TensorF32({2})), Error);
    EXPECT_THROW(fully_connected(TensorF32({3}), TensorF32({2, 3}), TensorF32({3})), Error);
}

TEST(FullyConnected, LinearLayerSquaredLossClosedForm)
{
    // L = |Wx - t|^2, dL/dW = 2 (Wx - t) x^T.
    std::mt19937_64 rng(7);
    const TensorF64 W = random_tensor({3, 4}, rng).cast<double>(), x = random_tensor({4}, rng).cast<double>();
    const TensorF64 t = random_tensor({3}, rng).cast<double>();
    const TensorF64 y = fully_connected(x, W, TensorF64({3}, 0.0));
    std::vector<double> go(3), gw(12, 0.0), gb(3, 0.0), gx(4);
    for (std::size_t i = 0; i < 3; ++i) go[i] = 2.0 * (y[i] - t[i]);
    fully_connected_backward<double>(x.data(), W, go, gw, gb, gx);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(gw[i * 4 + j], 2.0 * (y[i] - t[i]) * x[j], 1e-12);
    for (std::size_t j = 0; j < 4; ++j) {
        double ref = 0.0;
        for (std::size_t i = 0; i < 3; ++i) ref += go[i] * W.at(i, j);
        EXPECT_NEAR(gx[j], ref, 1e-12);
    }
}

TEST(Relu, ForwardAndBackward)
{
    const TensorF32 x({3}, std::vector<float>{-1, 0, 2});
    EXPECT_EQ(relu(x), TensorF32({3}, std::vector<float>{0, 0, 2}));
    EXPECT_EQ(relu(TensorF32({4}, -3.0f)), TensorF32({4}, 0.0f));
    std::vector<double> g(3, 1.0);
    relu_backward(x.data(), std::span<double>(g));
    EXPECT_EQ(g, (std::vector<double>{0, 0, 1}));
}

TEST(Ops, Pure)
{
    std::mt19937_64 rng(8);
    const TensorF32 in = random_tensor({3, 12, 10}, rng), k = random_tensor({4, 3, 3, 3}, rng), b = random_tensor({4}, rng);
    EXPECT_EQ(conv2d(in, k, b), conv2d(in, k, b));
    EXPECT_EQ(maxpool2(in).argmax, maxpool2(in).argmax);
}

namespace {

struct Scalar {
    TensorF64 theta{{1}, 0.0};
    TensorF64 grad{{1}, 0.0};
    void step(AdamState& s, double lr, double g)
    {
        grad[0] = g;
        Tensor<double>* p[] = {&theta};
        const TensorF64* q[] = {&grad};
        adam_step<double>(p, q, s, lr);
    }
};

} // namespace

TEST(Adam, FirstStepHandCase)
{
    Scalar s;
    AdamState state;
    s.step(state, 1e-3, 1.0);
    EXPECT_NEAR(s.theta[0], -1e-3 / (1.0 + 1e-8), 1e-15);
    EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParams)
{
    TensorF32 theta({5}, std::vector<float>{1, -2, 3, 0.5f, 7});
    const TensorF32 before = theta;
    TensorF64 grad({5}, 0.0);
    AdamState state;
    Tensor<float>* p[] = {&theta};
    const TensorF64* q[] = {&grad};
    for (int i = 0; i < 10; ++i) adam_step<float>(p, q, state, 1e-2);
    EXPECT_EQ(theta, before);
}

TEST(Adam, TwoStepsMatchScriptedOracle)
{
    const double g = 0.37, lr = 5e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double theta = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        theta -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    }
    Scalar s;
    AdamState state;
    s.step(state, lr, g);
    s.step(state, lr, g);
    EXPECT_NEAR(s.theta[0], theta, 1e-9);
    EXPECT_EQ(state.step, 2u);
}

TEST(Adam, NonFiniteGradientThrowsBeforeUpdating)
{
    TensorF32 a({2}, 1.0f), b({2}, 1.0f);
    TensorF64 ga({2}, 0.5), gb({2}, std::vector<double>{0.0, std::nan("")});
    AdamState state;
    Tensor<float>* p[] = {&a, &b};
    const TensorF64* q[] = {&ga, &gb};
    try {
        adam_step<float>(p, q, state, 1e-3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteGradient);
    }
    EXPECT_EQ(a, TensorF32({2}, 1.0f));
    EXPECT_EQ(state.step, 0u);
}

TEST(Backward, FixedPatternFiniteDifferences)
{
    for (std::uint64_t seed : {11u, 12u}) {
        const auto r = gradcheck::check(seed);
        EXPECT_LT(r.max_relative_error, 1e-3) << r.worst;
        EXPECT_GT(r.checks, 50u);
    }
}

TEST(Backward, PlainNetworkFiniteDifferencesSmallStep)
{
    const auto r = gradcheck::check(21, 2, 1, 1e-6, false);
    EXPECT_LT(r.max_relative_error, 1e-2) << r.worst;
}

TEST(Backward, RequiresForwardPass)
{
    const auto params = ModelParams<float>::zeros();
    auto grads = ModelParams<double>::zeros();
    try {
        backward(params, ForwardTrace<float>{}, {0, 0, 0, 0}, grads);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoForwardPass);
    }
}

TEST(Backward, ZeroLossBatchHasVanishingGradient)
{
    // Labels equal the predictions and the log-variance outputs sit in the
    // clamp's flat region, so every parameter gradient vanishes.
    std::mt19937_64 rng(9);
    ModelParams<double> p = gradcheck::random_params(rng);
    p.fc3.bias[2] = p.fc3.bias[3] = -50.0;
    auto batch = gradcheck::random_batch(rng, 4);
    for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
        const auto out = forward(p, batch.inputs[i]).output;
        ASSERT_LT(out[2], kLogVarMin);
        ASSERT_LT(out[3], kLogVarMin);
        batch.labels[i] = {out[0], out[1]};
    }
    const std::vector<std::size_t> idx{0, 1, 2, 3};
    const BatchGradient g = batch_gradient<double>(p, batch.inputs, batch.labels, idx);
    for (const TensorF64* t : g.grads.parameters())
        for (double v : t->data()) ASSERT_NEAR(v, 0.0, 1e-6);
}

TEST(Parallel, ThreadCountDoesNotChangeGradients)
{
    std::mt19937_64 rng(10);
    const ModelParams<float> p = ModelParams<float>::he_uniform(3);
    std::vector<NetworkInput<float>> inputs;
    std::vector<GazeLabel> labels;
    const auto b = gradcheck::random_batch(rng, 40);
    for (std::size_t i = 0; i < 40; ++i) {
        inputs.push_back({b.inputs[i].left.cast<float>(), b.inputs[i].right.cast<float>(), b.inputs[i].head_pitch,
                          b.inputs[i].head_yaw});
        labels.push_back(b.labels[i]);
    }
    std::vector<std::size_t> idx(40);
    for (std::size_t i = 0; i < 40; ++i) idx[i] = 39 - i;
    const BatchGradient one = batch_gradient<float>(p, inputs, labels, idx, 1);
    const BatchGradient four = batch_gradient<float>(p, inputs, labels, idx, 4);
    EXPECT_EQ(one.mean_loss, four.mean_loss);
    EXPECT_TRUE(one.grads == four.grads);
}
