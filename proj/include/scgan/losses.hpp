// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scgan/autodiff.hpp"
#include "scgan/blur.hpp"
#include "scgan/metrics.hpp"

namespace scgan {

struct LossWeights {
    double lambda_bgm = 6.0;
    double lambda_ssim = 1.0;
    // blur level -> weight; ordered so evaluation order is deterministic
    std::map<int, double> bgm_levels{{3, 0.01}, {9, 0.1}, {15, 1.0}};

    void validate() const {
        require(lambda_bgm >= 0.0, "losses: lambda_bgm must be >= 0");
        require(lambda_ssim >= 0.0, "losses: lambda_ssim must be >= 0");
        for (const auto& [size, w] : bgm_levels) {
            require(size > 0 && size % 2 == 1, "losses: blur level sizes must be odd");
            require(w >= 0.0, "losses: blur level weights must be >= 0");
        }
    }
};

// Per-step decomposition of the objective, one record per optimizer step.
struct LossReport {
    double adv1 = 0, adv2 = 0, adv3 = 0, adv4 = 0;
    double gan_total = 0;
    double bgm = 0;
    double res = 0;
    double res_sc = 0;
    double grand_total = 0;
    long step = -1;
    int epoch = -1;
    int round = 0;
    int fold_count = 1;
    bool aborted = false;
    std::string stage = "basic";

    bool all_finite() const {
        for (double v : {adv1, adv2, adv3, adv4, gan_total, bgm, res, res_sc, grand_total})
            if (!std::isfinite(v)) return false;
        return true;
    }
};

namespace detail {
inline void check_finite_scores(const Var& s, const char* who) {
    if (!s->value.all_finite())
        throw NonFiniteError(std::string(who) + ": non-finite score map");
}
}  // namespace detail

// Least-squares discriminator objective: real scores are pulled toward 1,
// fake scores toward 0, mean over score-map cells.
inline Var adv_loss_discriminator(const Var& score_real, const Var& score_fake) {
    detail::check_finite_scores(score_real, "adv_loss_discriminator");
    detail::check_finite_scores(score_fake, "adv_loss_discriminator");
    return add(mean_all(square(add_c(score_real, -1.0))), mean_all(square(score_fake)));
}

// Non-saturating least-squares generator objective: fake scores are pulled
// toward the "real" target 1.
inline Var adv_loss_generator(const Var& score_fake) {
    detail::check_finite_scores(score_fake, "adv_loss_generator");
    return mean_all(square(add_c(score_fake, -1.0)));
}

// The four adversarial terms over the synthesis paths plus their sum. The
// real-image score map is computed once and shared by all four terms, so
// the real term is counted four times in the total (the literal reading of
// the summed per-path objectives); a deduplicated total is provided for
// the config-selectable variant.
struct GanLoss {
    Var adv1, adv2, adv3, adv4;
    Var total;
};

struct FakeScores {
    std::optional<Var> y_ssyn;  // adv1
    std::optional<Var> x_usyn;  // adv2
    std::optional<Var> y_usyn;  // adv3
    std::optional<Var> x_ssyn;  // adv4
};

inline GanLoss gan_loss(const Var& score_real, const FakeScores& fakes) {
    std::string missing;
    for (const auto& [v, name] :
         {std::pair{&fakes.y_ssyn, "y_s-syn"}, std::pair{&fakes.x_usyn, "x_u-syn"},
          std::pair{&fakes.y_usyn, "y_u-syn"}, std::pair{&fakes.x_ssyn, "x_s-syn"}})
        if (!v->has_value()) missing += std::string(missing.empty() ? "" : ", ") + name;
    if (!missing.empty())
        throw ConfigError("gan_loss: missing synthesis path(s): " + missing);
    GanLoss out;
    out.adv1 = adv_loss_discriminator(score_real, *fakes.y_ssyn);
    out.adv2 = adv_loss_discriminator(score_real, *fakes.x_usyn);
    out.adv3 = adv_loss_discriminator(score_real, *fakes.y_usyn);
    out.adv4 = adv_loss_discriminator(score_real, *fakes.x_ssyn);
    out.total = add(add(add(out.adv1, out.adv2), out.adv3), out.adv4);
    return out;
}

// Multi-scale background-consistency loss: mean-per-pixel L1 between
// Gaussian-blurred versions of the clean image and its synthesis, summed
// over blur levels with their weights.
inline Var bgm_loss(const Var& x, const Var& x_syn, const LossWeights& w) {
    check_same_shape(x, x_syn, "bgm_loss");
    w.validate();
    Var total;
    for (const auto& [size, weight] : w.bgm_levels) {
        const BlurKernel k = make_gaussian_kernel(size);
        Var term = mul_c(mean_all(abs_val(sub(blur_var(x, k), blur_var(x_syn, k)))), weight);
        total = total ? add(total, term) : term;
    }
    return total;
}

// Restorer supervision over pseudo-pairs: (1/2m) sum of per-pair L1 plus
// weighted SSIM loss. The SSIM window shrinks to fit small patches.
inline Var res_loss(const std::vector<std::pair<Var, Var>>& pairs, const LossWeights& w) {
    if (pairs.empty()) throw ConfigError("res_loss: empty pair list");
    w.validate();
    Var total;
    for (const auto& [x_rec, x] : pairs) {
        check_same_shape(x_rec, x, "res_loss");
        const auto& s = x->value.shape();
        const SsimParams sp = fit_ssim_window(s[1], s[2]);
        Var term = add(mean_all(abs_val(sub(x_rec, x))),
                       mul_c(add_c(mul_c(ssim_var(x_rec, x, sp), -1.0), 1.0), w.lambda_ssim));
        total = total ? add(total, term) : term;
    }
    return mul_c(total, 1.0 / (2.0 * static_cast<double>(pairs.size())));
}

// The consistency terms added on top of the base pseudo-pair loss: L1 and
// SSIM agreement of the live restorations with the frozen restorer's
// outputs on the same inputs.
inline Var res_sc_extra(const Var& x_r, const Var& y_r, const Var& r_fake1,
                        const Var& r_fake2, const LossWeights& w) {
    check_same_shape(x_r, r_fake1, "res_sc_loss");
    check_same_shape(y_r, r_fake2, "res_sc_loss");
    const auto& sx = x_r->value.shape();
    const auto& sy = y_r->value.shape();
    const SsimParams spx = fit_ssim_window(sx[1], sx[2]);
    const SsimParams spy = fit_ssim_window(sy[1], sy[2]);
    Var out = mean_all(abs_val(sub(x_r, r_fake1)));
    out = add(out, mean_all(abs_val(sub(y_r, r_fake2))));
    out = add(out, mul_c(add_c(mul_c(ssim_var(x_r, r_fake1, spx), -1.0), 1.0), w.lambda_ssim));
    out = add(out, mul_c(add_c(mul_c(ssim_var(y_r, r_fake2, spy), -1.0), 1.0), w.lambda_ssim));
    return out;
}

// SC-augmented restorer loss.
inline Var res_sc_loss(const std::vector<std::pair<Var, Var>>& base_pairs, const Var& x_r,
                       const Var& y_r, const Var& r_fake1, const Var& r_fake2,
                       const LossWeights& w) {
    return add(res_loss(base_pairs, w), res_sc_extra(x_r, y_r, r_fake1, r_fake2, w));
}

// Full objective: L_GAN + lambda_BGM * L_BGM + restorer loss.
inline double compose_grand_total(double gan_total, double bgm, double res_term,
                                  const LossWeights& w) {
    return gan_total + w.lambda_bgm * bgm + res_term;
}

}  // namespace scgan
