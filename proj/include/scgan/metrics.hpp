// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "scgan/autodiff.hpp"
#include "scgan/blur.hpp"
#include "scgan/image.hpp"

namespace scgan {

// Finite stand-in for "infinite" PSNR (MSE == 0). Real MSE values on [0,1]
// doubles top out near 160 dB, so the sentinel is unambiguous and keeps
// metric aggregation free of IEEE infinities.
inline constexpr double kInfinitePsnr = 1.0e9;
inline bool is_infinite_psnr(double v) { return v >= kInfinitePsnr; }

inline double mse(const Image& a, const Image& b) {
    if (!a.same_shape(b))
        throw ConfigError("mse: shape mismatch " + std::to_string(a.height) + "x" +
                          std::to_string(a.width) + "x" + std::to_string(a.channels) +
                          " vs " + std::to_string(b.height) + "x" +
                          std::to_string(b.width) + "x" + std::to_string(b.channels));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

// Peak signal-to-noise ratio in dB against peak value 1.0.
inline double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m == 0.0) return kInfinitePsnr;
    return 10.0 * std::log10(1.0 / m);
}

struct SsimParams {
    int window = 11;
    double window_stddev = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

inline Tensor ssim_window(const SsimParams& p) {
    if (p.window < 1 || p.window % 2 == 0)
        throw ConfigError("ssim: window must be odd and positive");
    Tensor w({p.window, p.window});
    const int r = p.window / 2;
    double total = 0.0;
    for (int y = 0; y < p.window; ++y)
        for (int x = 0; x < p.window; ++x) {
            const double dy = y - r, dx = x - r;
            const double v =
                std::exp(-(dy * dy + dx * dx) / (2.0 * p.window_stddev * p.window_stddev));
            w[static_cast<std::size_t>(y) * p.window + x] = v;
            total += v;
        }
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] /= total;
    return w;
}

// Differentiable mean SSIM over valid sliding windows, peak value 1.0.
// Both the quality metric and the SSIM loss term build on this graph, so
// the two can never drift apart.
inline Var ssim_var(const Var& a, const Var& b, const SsimParams& p = {}) {
    check_same_shape(a, b, "ssim");
    const auto& s = a->value.shape();
    if (s.size() != 3) throw ConfigError("ssim: expected {C,H,W}");
    if (s[1] < p.window || s[2] < p.window)
        throw ConfigError("ssim: image " + std::to_string(s[1]) + "x" +
                          std::to_string(s[2]) + " smaller than window " +
                          std::to_string(p.window));
    const Tensor w = ssim_window(p);
    const double c1 = p.k1 * p.k1;  // peak = 1
    const double c2 = p.k2 * p.k2;

    const Var mu_a = dw_valid_conv(a, w);
    const Var mu_b = dw_valid_conv(b, w);
    const Var e_aa = dw_valid_conv(mul(a, a), w);
    const Var e_bb = dw_valid_conv(mul(b, b), w);
    const Var e_ab = dw_valid_conv(mul(a, b), w);

    const Var mu_aa = mul(mu_a, mu_a);
    const Var mu_bb = mul(mu_b, mu_b);
    const Var mu_ab = mul(mu_a, mu_b);
    const Var var_a = sub(e_aa, mu_aa);
    const Var var_b = sub(e_bb, mu_bb);
    const Var cov_ab = sub(e_ab, mu_ab);

    const Var num = mul(add_c(mul_c(mu_ab, 2.0), c1), add_c(mul_c(cov_ab, 2.0), c2));
    const Var den = mul(add_c(add(mu_aa, mu_bb), c1), add_c(add(var_a, var_b), c2));
    return mean_all(divide(num, den));
}

inline double ssim(const Image& a, const Image& b, const SsimParams& p = {}) {
    return ssim_var(constant(a.to_tensor()), constant(b.to_tensor()), p)->value.item();
}

// Largest odd window not exceeding the image, capped at the default 11.
// Loss terms use this so gradient checks on small patches stay valid.
inline SsimParams fit_ssim_window(int h, int w, SsimParams p = {}) {
    int win = std::min({p.window, h, w});
    if (win % 2 == 0) --win;
    if (win < 1) throw ConfigError("ssim: image too small for any window");
    p.window = win;
    return p;
}

}  // namespace scgan
