// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "scgan/dataset.hpp"
#include "scgan/image.hpp"
#include "scgan/png_io.hpp"
#include "scgan/rng.hpp"

namespace scgan {

// Synthetic desk-scale degradations standing in for the real corpora:
// i.i.d. Gaussian noise, oriented rain streaks, and snow speckles.
enum class DegradationKind { GaussianNoise, RainStreaks, SnowSpeckles };

inline const char* degradation_kind_name(DegradationKind k) {
    switch (k) {
        case DegradationKind::GaussianNoise: return "gaussian_noise";
        case DegradationKind::RainStreaks: return "rain_streaks";
        case DegradationKind::SnowSpeckles: return "snow_speckles";
    }
    return "?";
}

inline DegradationKind degradation_kind_from_name(const std::string& s) {
    if (s == "gaussian_noise") return DegradationKind::GaussianNoise;
    if (s == "rain_streaks") return DegradationKind::RainStreaks;
    if (s == "snow_speckles") return DegradationKind::SnowSpeckles;
    throw ConfigError("unknown degradation kind: " + s);
}

struct DegradationSpec {
    DegradationKind kind = DegradationKind::GaussianNoise;
    // gaussian_noise
    double noise_stddev = 25.0 / 255.0;
    // rain_streaks
    int streak_count = 40;
    double angle_min_deg = 60.0;
    double angle_max_deg = 120.0;
    double opacity = 0.35;
    // snow_speckles
    double speckle_density = 0.002;  // speckles per pixel
    double radius_min = 1.0;
    double radius_max = 3.0;
    std::uint64_t seed = 0;

    void validate() const {
        require(noise_stddev >= 0.0, "degradation: noise stddev must be >= 0");
        require(streak_count >= 0, "degradation: streak count must be >= 0");
        require(angle_min_deg <= angle_max_deg, "degradation: angle range inverted");
        require(opacity >= 0.0 && opacity <= 1.0, "degradation: opacity must be in [0,1]");
        require(speckle_density >= 0.0, "degradation: speckle density must be >= 0");
        require(radius_min > 0.0 && radius_min <= radius_max,
                "degradation: radius range invalid");
    }
};

namespace detail {

constexpr double kSnowBrightness = 0.9;
constexpr double kStreakSigma = 0.7;           // Gaussian cross-section, px
constexpr double kStreakLenMinFrac = 0.15;     // of min(H,W)
constexpr double kStreakLenMaxFrac = 0.35;

// screen blending: 1 - (1-a)(1-b); commutative, stays in [0,1]
inline double screen(double a, double b) { return 1.0 - (1.0 - a) * (1.0 - b); }

inline void add_streak(std::vector<double>& layer, int h, int w, double cy, double cx,
                       double angle_rad, double len) {
    const double dy = std::sin(angle_rad), dx = std::cos(angle_rad);
    const double hy = 0.5 * len * dy, hx = 0.5 * len * dx;
    const double y0 = cy - hy, x0 = cx - hx, y1 = cy + hy, x1 = cx + hx;
    const double reach = 3.0 * kStreakSigma;
    const int ylo = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - reach)));
    const int yhi = std::min(h - 1, static_cast<int>(std::ceil(std::max(y0, y1) + reach)));
    const int xlo = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - reach)));
    const int xhi = std::min(w - 1, static_cast<int>(std::ceil(std::max(x0, x1) + reach)));
    const double seg_len2 = (y1 - y0) * (y1 - y0) + (x1 - x0) * (x1 - x0);
    for (int y = ylo; y <= yhi; ++y)
        for (int x = xlo; x <= xhi; ++x) {
            double t = seg_len2 > 0.0
                           ? ((y - y0) * (y1 - y0) + (x - x0) * (x1 - x0)) / seg_len2
                           : 0.0;
            t = std::min(std::max(t, 0.0), 1.0);
            const double py = y0 + t * (y1 - y0), px = x0 + t * (x1 - x0);
            const double d2 = (y - py) * (y - py) + (x - px) * (x - px);
            const double v = std::exp(-d2 / (2.0 * kStreakSigma * kStreakSigma));
            auto& cell = layer[static_cast<std::size_t>(y) * w + x];
            cell = screen(cell, v);
        }
}

inline void add_speckle(std::vector<double>& layer, int h, int w, double cy, double cx,
                        double radius) {
    const int ylo = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
    const int yhi = std::min(h - 1, static_cast<int>(std::ceil(cy + radius + 1)));
    const int xlo = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
    const int xhi = std::min(w - 1, static_cast<int>(std::ceil(cx + radius + 1)));
    for (int y = ylo; y <= yhi; ++y)
        for (int x = xlo; x <= xhi; ++x) {
            const double d = std::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx));
            const double v = std::min(std::max(radius - d + 0.5, 0.0), 1.0);  // 1px edge
            if (v > 0.0) {
                auto& cell = layer[static_cast<std::size_t>(y) * w + x];
                cell = screen(cell, v);
            }
        }
}

}  // namespace detail

// clean + degradation, clamped to [0,1]; identical spec and seed give a
// bit-identical result.
inline Image synth_degrade(const Image& clean, const DegradationSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Image out = clean;
    const int h = clean.height, w = clean.width;

    switch (spec.kind) {
        case DegradationKind::GaussianNoise: {
            if (spec.noise_stddev == 0.0) return out;
            for (auto& v : out.data) v += spec.noise_stddev * rng.normal();
            break;
        }
        case DegradationKind::RainStreaks: {
            if (spec.streak_count == 0) return out;
            std::vector<double> layer(static_cast<std::size_t>(h) * w, 0.0);
            const double mind = std::min(h, w);
            for (int i = 0; i < spec.streak_count; ++i) {
                const double cy = rng.uniform(0.0, h - 1.0);
                const double cx = rng.uniform(0.0, w - 1.0);
                const double ang =
                    rng.uniform(spec.angle_min_deg, spec.angle_max_deg) * M_PI / 180.0;
                const double len = rng.uniform(detail::kStreakLenMinFrac,
                                               detail::kStreakLenMaxFrac) * mind;
                detail::add_streak(layer, h, w, cy, cx, ang, len);
            }
            for (int c = 0; c < out.channels; ++c)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        out.at(c, y, x) = detail::screen(
                            out.at(c, y, x),
                            spec.opacity * layer[static_cast<std::size_t>(y) * w + x]);
            break;
        }
        case DegradationKind::SnowSpeckles: {
            const int count = static_cast<int>(std::llround(spec.speckle_density * h * w));
            if (count == 0) return out;
            std::vector<double> layer(static_cast<std::size_t>(h) * w, 0.0);
            for (int i = 0; i < count; ++i) {
                const double cy = rng.uniform(0.0, h - 1.0);
                const double cx = rng.uniform(0.0, w - 1.0);
                const double r = rng.uniform(spec.radius_min, spec.radius_max);
                detail::add_speckle(layer, h, w, cy, cx, r);
            }
            for (int c = 0; c < out.channels; ++c)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        out.at(c, y, x) = detail::screen(
                            out.at(c, y, x), detail::kSnowBrightness *
                                                 layer[static_cast<std::size_t>(y) * w + x]);
            break;
        }
    }
    return out.clamp01();
}

// Procedural clean image: smooth gradients, a low-frequency wave, and a
// few soft shapes. Gives the toy corpora enough structure for restoration
// metrics to be meaningful without shipping any external data.
inline Image synth_clean_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w, 3);
    const double gy = rng.uniform(-1.0, 1.0), gx = rng.uniform(-1.0, 1.0);
    double base[3], amp[3], phase;
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(0.25, 0.75);
        amp[c] = rng.uniform(0.05, 0.2);
    }
    const double freq = rng.uniform(1.0, 3.0);
    phase = rng.uniform(0.0, 2.0 * M_PI);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double u = (y + 0.5) / h - 0.5, v = (x + 0.5) / w - 0.5;
                img.at(c, y, x) = base[c] + amp[c] * (gy * u + gx * v) +
                                  0.08 * std::sin(2.0 * M_PI * freq * (u + v) + phase);
            }
    const int shapes = 2 + static_cast<int>(rng.below(3));
    for (int s = 0; s < shapes; ++s) {
        const double cy = rng.uniform(0.15, 0.85) * h;
        const double cx = rng.uniform(0.15, 0.85) * w;
        const double r = rng.uniform(0.08, 0.25) * std::min(h, w);
        double color[3];
        for (int c = 0; c < 3; ++c) color[c] = rng.uniform(0.1, 0.9);
        const bool disc = rng.below(2) == 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double m;
                if (disc) {
                    const double d = std::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx));
                    m = std::min(std::max(r - d + 1.0, 0.0), 1.0);
                } else {
                    const double dy = std::abs(y - cy), dx = std::abs(x - cx);
                    m = std::min(std::max(r - std::max(dy, dx) + 1.0, 0.0), 1.0);
                }
                if (m > 0.0)
                    for (int c = 0; c < 3; ++c)
                        img.at(c, y, x) = (1.0 - 0.85 * m) * img.at(c, y, x) +
                                          0.85 * m * color[c];
            }
    }
    return img.clamp01();
}

// Splits the sources into two disjoint halves under a seeded shuffle and
// degrades the second half, mirroring the disjoint-halves protocol used to
// build unpaired training sets from paired corpora. Layout:
// <out_root>/cleanA/*.png and <out_root>/degradedB/*.png.
inline std::pair<fs::path, fs::path> make_toy_corpus(const fs::path& source_dir,
                                                     const fs::path& out_root,
                                                     const DegradationSpec& spec,
                                                     std::uint64_t split_seed) {
    spec.validate();
    const auto files = detail::sorted_files(source_dir);
    std::vector<std::pair<std::string, LoadedPng>> sources;
    for (const auto& f : files) {
        try {
            sources.emplace_back(f.stem().string(), load_png(f));
        } catch (const std::exception& e) {
            std::fprintf(stderr, "warning: skipping undecodable file %s (%s)\n",
                         f.string().c_str(), e.what());
        }
    }
    if (sources.size() < 2)
        throw ConfigError("make_toy_corpus: need at least 2 decodable source images, got " +
                          std::to_string(sources.size()));

    std::vector<std::size_t> order(sources.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(split_seed);
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(i + 1)]);

    const fs::path clean_dir = out_root / "cleanA";
    const fs::path degraded_dir = out_root / "degradedB";
    fs::create_directories(clean_dir);
    fs::create_directories(degraded_dir);

    const std::size_t half = sources.size() / 2;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto& [stem, loaded] = sources[order[i]];
        if (i < half) {
            save_png(loaded.image, clean_dir / (stem + ".png"), loaded.bit_depth);
        } else {
            DegradationSpec per = spec;
            per.seed = hash_combine(spec.seed, order[i]);
            save_png(synth_degrade(loaded.image, per), degraded_dir / (stem + ".png"),
                     loaded.bit_depth);
        }
    }
    return {clean_dir, degraded_dir};
}

// Aligned clean/degraded pairs for validation or paired evaluation, in the
// load_paired layout.
inline void make_paired_corpus(const std::vector<Image>& cleans, const fs::path& out_dir,
                               const DegradationSpec& spec) {
    spec.validate();
    fs::create_directories(out_dir / "clean");
    fs::create_directories(out_dir / "degraded");
    for (std::size_t i = 0; i < cleans.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%04zu.png", i);
        DegradationSpec per = spec;
        per.seed = hash_combine(spec.seed, 0x9a1edULL, i);
        save_png(cleans[i], out_dir / "clean" / name);
        save_png(synth_degrade(cleans[i], per), out_dir / "degraded" / name);
    }
}

}  // namespace scgan
