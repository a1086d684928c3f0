#include <gtest/gtest.h>

#include <cmath>

#include "evocnn/error.hpp"
#include "test_util.hpp"

using namespace evocnn;
using namespace evocnn::testing;

TEST(ConvLayer, AllOnesInputCountsOverlap) {
    Tensor4 x(1, 1, 3, 3, 1.0);
    LayerState l = LayerState::conv(1, 1, 2, 2, 1);
    l.weights = {1, 1, 1, 1};
    l.bias = {0};
    const Tensor4 y = conv_forward(x, l);
    ASSERT_EQ(y.dims(), (std::array<std::size_t, 4>{1, 1, 3, 3}));
    // pad 0 above/left for a 2x2 kernel: the window hangs off the bottom/right edge.
    EXPECT_EQ(y(0, 0, 0, 0), 4);
    EXPECT_EQ(y(0, 0, 0, 2), 2);
    EXPECT_EQ(y(0, 0, 2, 0), 2);
    EXPECT_EQ(y(0, 0, 2, 2), 1);
    for (double v : y.values()) EXPECT_GE(v, 0);
}

TEST(ConvLayer, IdentityFilterStrideTwoSamplesAndClamps) {
    Tensor4 x(1, 1, 4, 4);
    const double vals[16] = {1, -2, 3, 4, 5, 6, 7, 8, -9, 10, -11, 12, 13, 14, 15, 16};
    std::copy(vals, vals + 16, x.values().begin());
    LayerState l = LayerState::conv(1, 1, 1, 1, 2);
    l.weights = {1};
    l.bias = {0};
    const Tensor4 y = conv_forward(x, l);
    ASSERT_EQ(y.dims(), (std::array<std::size_t, 4>{1, 1, 2, 2}));
    EXPECT_EQ(y(0, 0, 0, 0), 1);
    EXPECT_EQ(y(0, 0, 0, 1), 3);
    EXPECT_EQ(y(0, 0, 1, 0), 0);  // -9 clamped
    EXPECT_EQ(y(0, 0, 1, 1), 0);  // -11 clamped
}

TEST(ConvLayer, ShapeMismatchNamesLayer) {
    Tensor4 x(1, 2, 4, 4);
    LayerState l = LayerState::conv(1, 3, 3, 3, 1);
    l.weights.assign(27, 0.0);
    l.bias = {0};
    try {
        conv_forward(x, l, 5);
        FAIL();
    } catch (const StructuralError& e) {
        EXPECT_NE(std::string(e.what()).find('5'), std::string::npos);
    }
}

TEST(ConvLayer, ZeroGradOutGivesZeroGradients) {
    Rng rng(3);
    LayerState l = LayerState::conv(3, 2, 3, 3, 1);
    init_params(l, rng);
    const Tensor4 x = random_tensor(2, 2, 4, 4, rng);
    const Tensor4 y = conv_forward(x, l);
    ParamGrads g;
    const Tensor4 gx = conv_backward(Tensor4(2, 3, 4, 4), x, y, l, g);
    for (double v : gx.values()) EXPECT_EQ(v, 0);
    for (double v : g.weights) EXPECT_EQ(v, 0);
    for (double v : g.bias) EXPECT_EQ(v, 0);
}

TEST(ConvLayer, SingleWeightGradientIsSumOfActiveInputs) {
    Rng rng(4);
    LayerState l = LayerState::conv(1, 1, 1, 1, 1);
    l.weights = {0.7};
    l.bias = {-0.1};
    const Tensor4 x = random_tensor(1, 1, 4, 4, rng);
    const Tensor4 y = conv_forward(x, l);
    ParamGrads g;
    conv_backward(Tensor4(1, 1, 4, 4, 1.0), x, y, l, g);
    double expect = 0;
    for (double v : x.values())
        if (0.7 * v - 0.1 > 0) expect += v;
    EXPECT_NEAR(g.weights[0], expect, 1e-12);
}

TEST(ConvLayer, FiniteDifferenceSmallCase) {
    Rng rng(5);
    for (int attempt = 0; attempt < 20; ++attempt) {
        Network net(Shape3{2, 4, 5}, {LayerState::conv(3, 2, 3, 2, 2, Activation::Relu)});
        net.init_params(rng);
        net.layers()[0].bias = random_vector(3, rng, -0.2, 0.2);
        LossHead head;
        head.projection = random_tensor(2, 3, 2, 3, rng);
        const auto r = grad_check(net, random_tensor(2, 2, 4, 5, rng), head);
        if (r.kink_crossed) continue;
        EXPECT_LT(r.max_rel_error, 1e-4);
        return;
    }
    FAIL() << "every draw crossed a kink";
}

TEST(MaxPoolLayer, PicksMaximum) {
    Tensor4 x(1, 1, 2, 2);
    x(0, 0, 0, 0) = 1;
    x(0, 0, 0, 1) = 2;
    x(0, 0, 1, 0) = 3;
    x(0, 0, 1, 1) = 4;
    const Tensor4 y = maxpool_forward(x, LayerState::maxpool(2, 2));
    ASSERT_EQ(y.size(), 1u);
    EXPECT_EQ(y.values()[0], 4);
}

TEST(MaxPoolLayer, TiesRouteGradientToFirstCell) {
    Tensor4 x(1, 1, 4, 4, 0.5);
    std::vector<std::size_t> arg;
    const Tensor4 y = maxpool_forward(x, LayerState::maxpool(2, 2), &arg);
    for (double v : y.values()) EXPECT_EQ(v, 0.5);
    const Tensor4 gx = maxpool_backward(Tensor4(1, 1, 2, 2, 1.0), Shape3{1, 4, 4}, arg);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(gx(0, 0, i, j), (i % 2 == 0 && j % 2 == 0) ? 1.0 : 0.0);
}

TEST(MaxPoolLayer, PartialWindowsAtEdges) {
    Rng rng(6);
    const Tensor4 x = random_tensor(1, 1, 5, 3, rng);
    const Tensor4 y = maxpool_forward(x, LayerState::maxpool(2, 2));
    EXPECT_EQ(y.height(), 3u);
    EXPECT_EQ(y.width(), 2u);
    EXPECT_EQ(y(0, 0, 2, 1), x(0, 0, 4, 2));
}

TEST(UpsampleLayer, ConstantBlocks) {
    Tensor4 x(1, 1, 2, 2);
    x(0, 0, 0, 0) = 1;
    x(0, 0, 0, 1) = 2;
    x(0, 0, 1, 0) = 3;
    x(0, 0, 1, 1) = 4;
    const Tensor4 y = upsample_forward(x, 2, 2);
    ASSERT_EQ(y.height(), 4u);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(y(0, 0, i, j), x(0, 0, i / 2, j / 2));
}

TEST(UpsampleLayer, ForwardBackwardFiniteDifference) {
    Rng rng(7);
    for (auto [fh, fw] : {std::pair<std::size_t, std::size_t>{2, 2}, {3, 1}, {1, 2}}) {
        const std::size_t th = 3 * fh - 1, tw = 2 * fw;
        Network net(Shape3{2, 3, 2}, {LayerState::upsample(fh, fw), LayerState::crop(th, tw)});
        LossHead head;
        head.projection = random_tensor(2, 2, th, tw, rng);
        const auto r = grad_check(net, random_tensor(2, 2, 3, 2, rng), head);
        EXPECT_FALSE(r.kink_crossed);
        EXPECT_LT(r.max_rel_error, 1e-6);
    }
}

TEST(CropLayer, KeepsTopLeft) {
    Rng rng(8);
    const Tensor4 x = random_tensor(1, 2, 4, 5, rng);
    const Tensor4 y = crop_forward(x, 3, 2);
    ASSERT_EQ(y.dims(), (std::array<std::size_t, 4>{1, 2, 3, 2}));
    EXPECT_EQ(y(0, 1, 2, 1), x(0, 1, 2, 1));
    const Tensor4 g = crop_backward(Tensor4(1, 2, 3, 2, 1.0), Shape3{2, 4, 5});
    EXPECT_EQ(g(0, 0, 3, 4), 0.0);
    EXPECT_EQ(g(0, 0, 2, 1), 1.0);
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLnClasses) {
    Tensor4 logits(3, 10, 1, 1, 0.25);
    const std::vector<std::uint8_t> labels{0, 4, 9};
    EXPECT_NEAR(softmax_cross_entropy(logits, labels).loss, std::log(10.0), 1e-12);
}

TEST(SoftmaxCrossEntropy, SaturatedTowardsTruthGoesToZero) {
    Tensor4 logits(1, 10, 1, 1, 0.0);
    logits(0, 3, 0, 0) = 200.0;
    const std::vector<std::uint8_t> labels{3};
    EXPECT_LT(softmax_cross_entropy(logits, labels).loss, 1e-12);
}

TEST(SoftmaxCrossEntropy, MatchesLogSumExpOracle) {
    Rng rng(9);
    const Tensor4 logits = random_tensor(4, 7, 1, 1, rng, -20, 20);
    const std::vector<std::uint8_t> labels{1, 6, 0, 3};
    double ref = 0;
    for (std::size_t n = 0; n < 4; ++n) {
        double m = -1e300;
        for (std::size_t c = 0; c < 7; ++c) m = std::max(m, logits(n, c, 0, 0));
        double s = 0;
        for (std::size_t c = 0; c < 7; ++c) s += std::exp(logits(n, c, 0, 0) - m);
        ref += m + std::log(s) - logits(n, labels[n], 0, 0);
    }
    ref /= 4;
    EXPECT_LT(rel_error(softmax_cross_entropy(logits, labels).loss, ref), 1e-6);
}

TEST(SoftmaxCrossEntropy, NonFiniteLogitsAbortTraining) {
    Tensor4 logits(1, 3, 1, 1, 0.0);
    logits(0, 1, 0, 0) = std::nan("");
    const std::vector<std::uint8_t> labels{0};
    EXPECT_THROW(softmax_cross_entropy(logits, labels), TrainingDiverged);
}

TEST(DenseHead, FiniteDifference) {
    Rng rng(10);
    Network net(Shape3{2, 2, 2}, {LayerState::flatten(), LayerState::dense(4, 8)});
    net.init_params(rng);
    LossHead head;
    head.kind = LossKind::CrossEntropy;
    head.labels = {2, 0, 3};
    const auto r = grad_check(net, random_tensor(3, 2, 2, 2, rng), head);
    EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(Reconstruction, Accuracy) {
    Rng rng(11);
    const Tensor4 x = random_tensor(2, 3, 4, 4, rng, 0, 1);
    EXPECT_EQ(reconstruction_accuracy(x, x), 1.0);
    EXPECT_EQ(reconstruction_accuracy(Tensor4(1, 1, 3, 3, 1.0), Tensor4(1, 1, 3, 3, 0.0)), 0.0);
    EXPECT_NEAR(reconstruction_accuracy(Tensor4(1, 2, 2, 2, 0.5), Tensor4(1, 2, 2, 2, 0.3)), 0.96, 1e-12);
    EXPECT_THROW(reconstruction_accuracy(Tensor4(1, 1, 2, 2), Tensor4(1, 1, 2, 3)), StructuralError);
}

TEST(SgdMomentum, FirstAndSecondStep) {
    std::vector<double> w{1.0}, v{0.0};
    const std::vector<double> g{1.0};
    sgd_momentum_step(w, g, v, 0.1, 0.9);
    EXPECT_NEAR(w[0], 0.9, 1e-15);
    EXPECT_NEAR(v[0], -0.1, 1e-15);
    sgd_momentum_step(w, g, v, 0.1, 0.9);
    EXPECT_NEAR(v[0], -0.19, 1e-15);
    EXPECT_NEAR(w[0], 0.9 - 0.19, 1e-15);
}
