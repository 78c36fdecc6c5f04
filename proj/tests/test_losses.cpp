// SPDX-License-Identifier: Apache-2.0
//
// Training objectives: zero identities, hand-derived values, gradient
// checks against finite differences, and the additivity/weighting laws.

#include <catch2/catch_amalgamated.hpp>

#include "scgan/losses.hpp"
#include "support/gradcheck.hpp"

using namespace scgan;
using namespace scgan::testsupport;

namespace {

// Scalar reference SSIM used as the independent oracle for loss values.
double ssim_scalar_reference(const Tensor& a, const Tensor& b, const SsimParams& p) {
    const Tensor w = ssim_window(p);
    const double c1 = p.k1 * p.k1, c2 = p.k2 * p.k2;
    const int C = a.dim(0), H = a.dim(1), W = a.dim(2);
    double acc = 0.0;
    int count = 0;
    for (int c = 0; c < C; ++c)
        for (int oy = 0; oy + p.window <= H; ++oy)
            for (int ox = 0; ox + p.window <= W; ++ox) {
                double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                for (int ky = 0; ky < p.window; ++ky)
                    for (int kx = 0; kx < p.window; ++kx) {
                        const double wv = w[static_cast<std::size_t>(ky) * p.window + kx];
                        const double va = a.at(c, oy + ky, ox + kx);
                        const double vb = b.at(c, oy + ky, ox + kx);
                        ma += wv * va;
                        mb += wv * vb;
                        maa += wv * va * va;
                        mbb += wv * vb * vb;
                        mab += wv * va * vb;
                    }
                acc += ((2 * ma * mb + c1) * (2 * (mab - ma * mb) + c2)) /
                       ((ma * ma + mb * mb + c1) *
                        ((maa - ma * ma) + (mbb - mb * mb) + c2));
                ++count;
            }
    return acc / count;
}

}  // namespace

TEST_CASE("discriminator adversarial loss values", "[losses]") {
    auto score = [](double v) { return constant(Tensor({1, 3, 3}, v)); };
    REQUIRE(adv_loss_discriminator(score(1.0), score(0.0))->value.item() == 0.0);
    REQUIRE(adv_loss_discriminator(score(0.5), score(0.5))->value.item() ==
            Catch::Approx(0.5).margin(1e-15));
    REQUIRE(adv_loss_discriminator(score(0.0), score(1.0))->value.item() ==
            Catch::Approx(2.0).margin(1e-15));

    Tensor bad({1, 2, 2}, std::numeric_limits<double>::quiet_NaN());
    REQUIRE_THROWS_AS(adv_loss_discriminator(constant(bad), score(0.0)), ConfigError);
}

TEST_CASE("generator adversarial loss values", "[losses]") {
    auto score = [](double v) { return constant(Tensor({1, 3, 3}, v)); };
    REQUIRE(adv_loss_generator(score(1.0))->value.item() == 0.0);
    REQUIRE(adv_loss_generator(score(0.0))->value.item() == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(adv_loss_generator(score(0.5))->value.item() ==
            Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("gan loss sums the four path terms", "[losses]") {
    auto score = [](double v) { return constant(Tensor({1, 3, 3}, v)); };

    FakeScores perfect{score(0.0), score(0.0), score(0.0), score(0.0)};
    REQUIRE(gan_loss(score(1.0), perfect).total->value.item() == 0.0);

    FakeScores half{score(0.5), score(0.5), score(0.5), score(0.5)};
    const GanLoss g = gan_loss(score(0.5), half);
    REQUIRE(g.total->value.item() == Catch::Approx(2.0).margin(1e-15));

    // additivity, bit for bit
    const double sum = ((g.adv1->value.item() + g.adv2->value.item()) +
                        g.adv3->value.item()) + g.adv4->value.item();
    REQUIRE(g.total->value.item() == sum);

    // per-path decomposition: one perfect path plus three half paths
    const double one_perfect =
        adv_loss_discriminator(score(1.0), score(0.0))->value.item() +
        3.0 * adv_loss_discriminator(score(0.5), score(0.5))->value.item();
    REQUIRE(one_perfect == Catch::Approx(1.5).margin(1e-15));

    FakeScores missing{score(0.0), std::nullopt, score(0.0), score(0.0)};
    REQUIRE_THROWS_WITH(gan_loss(score(1.0), missing),
                        Catch::Matchers::ContainsSubstring("x_u-syn"));
}

TEST_CASE("bgm loss zero case, defaults, and uniform-offset closed form", "[losses]") {
    Rng rng(51);
    const LossWeights w;
    REQUIRE(w.bgm_levels.at(3) == 0.01);
    REQUIRE(w.bgm_levels.at(9) == 0.1);
    REQUIRE(w.bgm_levels.at(15) == 1.0);
    REQUIRE(w.lambda_bgm == 6.0);
    REQUIRE(w.lambda_ssim == 1.0);

    const Tensor x = random_tensor({3, 20, 20}, rng, 0.1, 0.8);
    REQUIRE(bgm_loss(constant(x), constant(x), w)->value.item() == 0.0);

    Tensor shifted = x;
    for (std::size_t i = 0; i < shifted.numel(); ++i) shifted[i] += 0.1;
    const double got = bgm_loss(constant(x), constant(shifted), w)->value.item();
    REQUIRE(got == Catch::Approx((0.01 + 0.1 + 1.0) * 0.1).margin(1e-6));

    const Tensor small = random_tensor({3, 10, 10}, rng);
    REQUIRE_THROWS_AS(bgm_loss(constant(x), constant(small), w), ConfigError);
}

TEST_CASE("res loss zero case and single-pair closed form", "[losses]") {
    Rng rng(52);
    const LossWeights w;
    const Tensor x = random_tensor({3, 16, 16}, rng, 0.1, 0.9);
    REQUIRE(res_loss({{constant(x), constant(x)}}, w)->value.item() == 0.0);

    Tensor rec = x;
    for (std::size_t i = 0; i < rec.numel(); ++i) rec[i] += 0.05;
    const double a = 0.05;  // uniform offset, so the L1 mean is exact
    const double s = ssim_scalar_reference(rec, x, fit_ssim_window(16, 16));
    const double expect = (a + w.lambda_ssim * (1.0 - s)) / 2.0;
    REQUIRE(res_loss({{constant(rec), constant(x)}}, w)->value.item() ==
            Catch::Approx(expect).margin(1e-9));

    REQUIRE_THROWS_AS(res_loss({}, w), ConfigError);
}

TEST_CASE("res-sc loss identities and synthetic value", "[losses]") {
    Rng rng(53);
    const LossWeights w;
    const Tensor x = random_tensor({3, 16, 16}, rng, 0.1, 0.9);
    const Tensor xr = random_tensor({3, 16, 16}, rng, 0.1, 0.9);
    const Tensor yr = random_tensor({3, 16, 16}, rng, 0.1, 0.9);

    // frozen-current agreement plus perfect base pairs -> exactly 0
    REQUIRE(res_sc_loss({{constant(x), constant(x)}}, constant(xr), constant(yr),
                        constant(xr), constant(yr), w)
                ->value.item() == 0.0);

    // when the frozen terms agree, res_sc equals res exactly
    const std::vector<std::pair<Var, Var>> pairs{{constant(xr), constant(x)}};
    REQUIRE(res_sc_loss(pairs, constant(xr), constant(yr), constant(xr), constant(yr), w)
                ->value.item() == res_loss(pairs, w)->value.item());

    // hand-built offset between x_r and R_fake1
    Tensor r1 = xr;
    for (std::size_t i = 0; i < r1.numel(); ++i) r1[i] -= 0.05;
    const double s = ssim_scalar_reference(xr, r1, fit_ssim_window(16, 16));
    const double expect = 0.05 + w.lambda_ssim * (1.0 - s);
    const double base = res_loss(pairs, w)->value.item();
    const double got = res_sc_loss(pairs, constant(xr), constant(yr), constant(r1),
                                   constant(yr), w)
                           ->value.item();
    REQUIRE(got - base == Catch::Approx(expect).margin(1e-9));

    REQUIRE_THROWS_AS(res_sc_loss(pairs, constant(xr), constant(yr),
                                  constant(random_tensor({3, 8, 8}, rng)), constant(yr), w),
                      ConfigError);
}

TEST_CASE("loss gradients match finite differences on random 8x8x3 inputs",
          "[losses][grad]") {
    Rng rng(54);
    const LossWeights w;
    const Tensor a = random_tensor({3, 8, 8}, rng, 0.15, 0.85);
    const Tensor b = random_tensor({3, 8, 8}, rng, 0.15, 0.85);
    const Tensor c = random_tensor({3, 8, 8}, rng, 0.15, 0.85);
    const Tensor d = random_tensor({3, 8, 8}, rng, 0.15, 0.85);
    const Tensor sreal = random_tensor({1, 5, 5}, rng, -0.5, 1.5);
    const Tensor sfake = random_tensor({1, 5, 5}, rng, -0.5, 1.5);

    REQUIRE(check_gradient(
                [&](const Var& v) { return adv_loss_discriminator(v, constant(sfake)); },
                sreal) < 1e-4);
    REQUIRE(check_gradient(
                [&](const Var& v) { return adv_loss_discriminator(constant(sreal), v); },
                sfake) < 1e-4);
    REQUIRE(check_gradient([&](const Var& v) { return adv_loss_generator(v); }, sfake) <
            1e-4);
    REQUIRE(check_gradient(
                [&](const Var& v) { return bgm_loss(v, constant(b), w); }, a) < 1e-4);
    REQUIRE(check_gradient(
                [&](const Var& v) { return bgm_loss(constant(a), v, w); }, b) < 1e-4);
    REQUIRE(check_gradient(
                [&](const Var& v) { return res_loss({{v, constant(b)}}, w); }, a) < 1e-4);
    REQUIRE(check_gradient(
                [&](const Var& v) { return res_loss({{constant(a), v}}, w); }, b) < 1e-4);
    REQUIRE(check_gradient(
                [&](const Var& v) {
                    return res_sc_loss({{constant(a), constant(b)}}, v, constant(c),
                                       constant(d), constant(a), w);
                },
                c) < 1e-4);
    REQUIRE(check_gradient(
                [&](const Var& v) {
                    return res_sc_loss({{constant(a), constant(b)}}, constant(c), v,
                                       constant(d), constant(a), w);
                },
                c) < 1e-4);
}

TEST_CASE("losses are nonnegative on random inputs", "[losses]") {
    Rng rng(55);
    const LossWeights w;
    for (int i = 0; i < 20; ++i) {
        const Tensor a = random_tensor({3, 12, 12}, rng, 0.0, 1.0);
        const Tensor b = random_tensor({3, 12, 12}, rng, 0.0, 1.0);
        const Tensor s1 = random_tensor({1, 4, 4}, rng, -2.0, 2.0);
        const Tensor s2 = random_tensor({1, 4, 4}, rng, -2.0, 2.0);
        REQUIRE(adv_loss_discriminator(constant(s1), constant(s2))->value.item() >= 0.0);
        REQUIRE(adv_loss_generator(constant(s1))->value.item() >= 0.0);
        REQUIRE(bgm_loss(constant(a), constant(b), w)->value.item() >= 0.0);
        REQUIRE(res_loss({{constant(a), constant(b)}}, w)->value.item() >= 0.0);
        REQUIRE(res_sc_loss({{constant(a), constant(b)}}, constant(a), constant(b),
                            constant(b), constant(a), w)
                    ->value.item() >= 0.0);
    }
}

TEST_CASE("the bgm contribution scales exactly with its weight", "[losses]") {
    Rng rng(56);
    LossWeights w;
    const Tensor x = random_tensor({3, 16, 16}, rng);
    const Tensor xs = random_tensor({3, 16, 16}, rng);
    const double bgm = bgm_loss(constant(x), constant(xs), w)->value.item();

    LossWeights w2 = w;
    w2.lambda_bgm = 2.0 * w.lambda_bgm;
    REQUIRE(w2.lambda_bgm * bgm == 2.0 * (w.lambda_bgm * bgm));

    const double total1 = compose_grand_total(1.25, bgm, 0.5, w);
    REQUIRE(total1 == 1.25 + w.lambda_bgm * bgm + 0.5);

    w.lambda_bgm = -1.0;
    REQUIRE_THROWS_AS(w.validate(), ConfigError);
}
