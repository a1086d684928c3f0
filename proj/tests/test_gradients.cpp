#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace evocnn;
using namespace evocnn::testing;

TEST(Gradients, RandomStacksMatchFiniteDifferences) {
    Rng rng(2024);
    std::size_t checked = 0;
    for (int i = 0; i < 30; ++i) {
        RandomStack s = random_stack(rng);
        GradCheckResult r = grad_check(s.net, s.x, s.head);
        while (r.kink_crossed) {
            s = random_stack(rng);
            r = grad_check(s.net, s.x, s.head);
        }
        EXPECT_LT(r.max_rel_error, 1e-4) << "stack " << i;
        checked += r.checked;
    }
    EXPECT_GT(checked, 0u);
}

TEST(Gradients, AutoencoderStackMatchesFiniteDifferences) {
    Rng rng(7);
    Genome g = seed_genome(GenomeKind::Encoder, "ae", 0.01);
    g.layers = {LayerGene::conv(3, 3, 3, 2), LayerGene::pool(2, 2)};
    for (int attempt = 0; attempt < 10; ++attempt) {
        Network net = build_autoencoder(g, Shape3{2, 6, 5});
        net.init_params(rng);
        for (auto& l : net.layers())
            for (auto& b : l.bias) b = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
        const Tensor4 x = random_tensor(2, 2, 6, 5, rng, 0, 1);
        LossHead head;
        head.kind = LossKind::Mse;
        head.target = x;
        const auto r = grad_check(net, x, head);
        if (r.kink_crossed) continue;
        EXPECT_LT(r.max_rel_error, 1e-4);
        return;
    }
    FAIL() << "every draw crossed a kink";
}
