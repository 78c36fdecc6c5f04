// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "scgan/autodiff.hpp"
#include "scgan/blur.hpp"
#include "scgan/rng.hpp"

namespace scgan {

using NamedParams = std::vector<std::pair<std::string, Var>>;

inline std::uint64_t params_hash(const NamedParams& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, p] : params) {
        h = fnv1a(name, h);
        h = fnv1a(p->value.data(), p->value.numel() * sizeof(double), h);
    }
    return h;
}

inline std::size_t params_count(const NamedParams& params) {
    std::size_t n = 0;
    for (const auto& [name, p] : params) n += p->value.numel();
    return n;
}

inline double grad_norm(const NamedParams& params) {
    double acc = 0.0;
    for (const auto& [name, p] : params)
        if (!p->grad.empty())
            for (std::size_t i = 0; i < p->grad.numel(); ++i)
                acc += p->grad[i] * p->grad[i];
    return std::sqrt(acc);
}

struct ConvLayer {
    int in_ch = 0, out_ch = 0, ksize = 0, stride = 1, pad = 0;
    Var weight, bias;

    ConvLayer() = default;
    ConvLayer(int in, int out, int k, int stride_, int pad_, Rng& rng, double init_std,
              bool trainable = true)
        : in_ch(in), out_ch(out), ksize(k), stride(stride_), pad(pad_) {
        Tensor w({out, in, k, k});
        if (init_std > 0.0) w.fill_normal(rng, init_std);
        weight = leaf(std::move(w), trainable);
        bias = leaf(Tensor({out}), trainable);
    }

    Var forward(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }

    void collect(NamedParams& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".weight", weight);
        out.emplace_back(prefix + ".bias", bias);
    }

    std::size_t parameter_count() const { return weight->value.numel() + bias->value.numel(); }
};

// He initialization for ReLU stacks.
inline double he_std(int in_ch, int k) { return std::sqrt(2.0 / (in_ch * k * k)); }

// ---------------------------------------------------------------------------
// Generator: prompt-conditioned residual CNN. The degradation prompt is
// concatenated channel-wise with the clean image, pushed through a conv
// stem, N residual blocks and a head, and squashed into [0,1].
// ---------------------------------------------------------------------------

struct GeneratorConfig {
    int residual_blocks = 6;
    int base_channels = 32;
    int image_channels = 3;
};

class Generator {
public:
    Generator() = default;
    Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        Rng rng(seed);
        const int f = cfg.base_channels, c = cfg.image_channels;
        // clean image + prompt share the channel axis at the input
        stem_ = ConvLayer(2 * c, f, 3, 1, 1, rng, 0.02);
        for (int i = 0; i < cfg.residual_blocks; ++i) {
            blocks_.emplace_back(ConvLayer(f, f, 3, 1, 1, rng, 0.02),
                                 ConvLayer(f, f, 3, 1, 1, rng, 0.02));
        }
        head_ = ConvLayer(f, c, 3, 1, 1, rng, 0.02);
    }

    const GeneratorConfig& config() const { return cfg_; }

    // clean image + spatially congruent prompt -> pseudo-degraded image
    Var forward(const Var& clean, const Var& prompt) const {
        const auto& sc = clean->value.shape();
        const auto& sp = prompt->value.shape();
        if (sc != sp)
            throw ConfigError("generator: clean " + Tensor::shape_str(sc) +
                              " and prompt " + Tensor::shape_str(sp) + " must be congruent");
        Var h = relu(stem_.forward(concat_ch(clean, prompt)));
        for (const auto& [c1, c2] : blocks_) h = add(h, c2.forward(relu(c1.forward(h))));
        return sigmoid(head_.forward(h));
    }

    NamedParams named_parameters() const {
        NamedParams out;
        stem_.collect(out, "gen.stem");
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            blocks_[i].first.collect(out, "gen.block" + std::to_string(i) + ".a");
            blocks_[i].second.collect(out, "gen.block" + std::to_string(i) + ".b");
        }
        head_.collect(out, "gen.head");
        return out;
    }

    std::size_t parameter_count() const { return params_count(named_parameters()); }

private:
    GeneratorConfig cfg_;
    ConvLayer stem_;
    std::vector<std::pair<ConvLayer, ConvLayer>> blocks_;
    ConvLayer head_;
};

// ---------------------------------------------------------------------------
// Discriminator: patch classifier built from stride-2 k4 conv layers with
// LeakyReLU, ending in a stride-1 k4 head that emits one unbounded score
// per overlapping patch (least-squares targets are applied by the losses).
// ---------------------------------------------------------------------------

struct DiscriminatorConfig {
    int base_channels = 64;
    int down_layers = 4;
    int image_channels = 3;
    int max_channels = 512;
};

class Discriminator {
public:
    Discriminator() = default;
    Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        Rng rng(seed);
        int in = cfg.image_channels;
        for (int i = 0; i < cfg.down_layers; ++i) {
            const int out = std::min(cfg.base_channels << i, cfg.max_channels);
            downs_.emplace_back(in, out, 4, 2, 1, rng, 0.02);
            in = out;
        }
        head_ = ConvLayer(in, 1, 4, 1, 1, rng, 0.02);
    }

    const DiscriminatorConfig& config() const { return cfg_; }

    // Smallest input side that still yields a non-empty score map.
    int min_input() const { return 2 << cfg_.down_layers; }

    int total_stride() const { return 1 << cfg_.down_layers; }

    int receptive_field() const {
        int rf = 1, jump = 1;
        for (int i = 0; i < cfg_.down_layers; ++i) {
            rf += 3 * jump;
            jump *= 2;
        }
        return rf + 3 * jump;  // head, stride 1
    }

    Var forward(const Var& img) const {
        const auto& s = img->value.shape();
        if (s.size() != 3 || s[1] < min_input() || s[2] < min_input())
            throw ConfigError("discriminator: input " + Tensor::shape_str(s) +
                              " smaller than minimum " + std::to_string(min_input()) +
                              " (receptive field " + std::to_string(receptive_field()) + ")");
        Var h = img;
        for (const auto& l : downs_) h = leaky_relu(l.forward(h), 0.2);
        return head_.forward(h);
    }

    NamedParams named_parameters() const {
        NamedParams out;
        for (std::size_t i = 0; i < downs_.size(); ++i)
            downs_[i].collect(out, "disc.down" + std::to_string(i));
        head_.collect(out, "disc.head");
        return out;
    }

private:
    DiscriminatorConfig cfg_;
    std::vector<ConvLayer> downs_;
    ConvLayer head_;
};

// ---------------------------------------------------------------------------
// Restorers. Three interchangeable backbones behind one interface; every
// backbone predicts the degradation residual and subtracts it, so a
// zero-initialized head makes the untrained network an exact identity.
// ---------------------------------------------------------------------------

enum class Backbone { TinyCnn, DncnnLike, UnetLike };

inline const char* backbone_name(Backbone b) {
    switch (b) {
        case Backbone::TinyCnn: return "tiny_cnn";
        case Backbone::DncnnLike: return "dncnn_like";
        case Backbone::UnetLike: return "unet_like";
    }
    return "?";
}

inline Backbone backbone_from_name(const std::string& s) {
    if (s == "tiny_cnn") return Backbone::TinyCnn;
    if (s == "dncnn_like") return Backbone::DncnnLike;
    if (s == "unet_like") return Backbone::UnetLike;
    throw ConfigError("unknown restorer backbone: " + s);
}

struct RestorerConfig {
    Backbone backbone = Backbone::TinyCnn;
    int depth = 3;   // conv layers for the plain stacks, scale levels for unet
    int width = 16;  // base feature channels
    int image_channels = 3;
};

class Restorer {
public:
    Restorer() = default;
    Restorer(const RestorerConfig& cfg, std::uint64_t seed, bool trainable = true)
        : cfg_(cfg) {
        Rng rng(seed);
        const int c = cfg.image_channels, w = cfg.width;
        switch (cfg.backbone) {
            case Backbone::TinyCnn:
            case Backbone::DncnnLike: {
                require(cfg.depth >= 2, "restorer: depth must be >= 2");
                stack_.emplace_back(c, w, 3, 1, 1, rng, he_std(c, 3), trainable);
                for (int i = 0; i < cfg.depth - 2; ++i)
                    stack_.emplace_back(w, w, 3, 1, 1, rng, he_std(w, 3), trainable);
                stack_.emplace_back(w, c, 3, 1, 1, rng, 0.0, trainable);  // zero head
                break;
            }
            case Backbone::UnetLike: {
                require(cfg.depth >= 1, "restorer: unet depth must be >= 1");
                enc_.emplace_back(c, w, 3, 1, 1, rng, he_std(c, 3), trainable);
                int ch = w;
                for (int i = 0; i < cfg.depth; ++i) {
                    downs_.emplace_back(ch, 2 * ch, 4, 2, 1, rng, he_std(ch, 4), trainable);
                    ch *= 2;
                }
                mid_ = ConvLayer(ch, ch, 3, 1, 1, rng, he_std(ch, 3), trainable);
                for (int i = 0; i < cfg.depth; ++i) {
                    ups_.emplace_back(ch, ch / 2, 3, 1, 1, rng, he_std(ch, 3), trainable);
                    merges_.emplace_back(ch, ch / 2, 3, 1, 1, rng, he_std(ch, 3), trainable);
                    ch /= 2;
                }
                head_ = ConvLayer(ch, c, 3, 1, 1, rng, 0.0, trainable);  // zero head
                break;
            }
        }
    }

    const RestorerConfig& config() const { return cfg_; }
    bool snapshot_backed() const { return snapshot_backed_; }

    // degraded image -> restored image, same shape, clamped to [0,1]
    Var forward(const Var& y) const {
        const auto& s = y->value.shape();
        if (s.size() != 3 || s[0] != cfg_.image_channels)
            throw ConfigError("restorer: expected {" + std::to_string(cfg_.image_channels) +
                              ",H,W} input, got " + Tensor::shape_str(s));
        Var residual;
        if (cfg_.backbone == Backbone::UnetLike) {
            const int div = 1 << cfg_.depth;
            if (s[1] % div != 0 || s[2] % div != 0)
                throw ConfigError("restorer: unet depth " + std::to_string(cfg_.depth) +
                                  " needs dimensions divisible by " + std::to_string(div));
            std::vector<Var> skips;
            Var h = relu(enc_[0].forward(y));
            for (const auto& d : downs_) {
                skips.push_back(h);
                h = relu(d.forward(h));
            }
            h = relu(mid_.forward(h));
            for (std::size_t i = 0; i < ups_.size(); ++i) {
                h = relu(ups_[i].forward(upsample_nearest2(h)));
                h = relu(merges_[i].forward(concat_ch(h, skips[skips.size() - 1 - i])));
            }
            residual = head_.forward(h);
        } else {
            Var h = y;
            for (std::size_t i = 0; i + 1 < stack_.size(); ++i)
                h = relu(stack_[i].forward(h));
            residual = stack_.back().forward(h);
        }
        return clamp_v(sub(y, residual), 0.0, 1.0);
    }

    NamedParams named_parameters() const {
        NamedParams out;
        const std::string p = "res";
        for (std::size_t i = 0; i < stack_.size(); ++i)
            stack_[i].collect(out, p + ".conv" + std::to_string(i));
        for (std::size_t i = 0; i < enc_.size(); ++i)
            enc_[i].collect(out, p + ".enc" + std::to_string(i));
        for (std::size_t i = 0; i < downs_.size(); ++i)
            downs_[i].collect(out, p + ".down" + std::to_string(i));
        if (cfg_.backbone == Backbone::UnetLike) mid_.collect(out, p + ".mid");
        for (std::size_t i = 0; i < ups_.size(); ++i)
            ups_[i].collect(out, p + ".up" + std::to_string(i));
        for (std::size_t i = 0; i < merges_.size(); ++i)
            merges_[i].collect(out, p + ".merge" + std::to_string(i));
        if (cfg_.backbone == Backbone::UnetLike) head_.collect(out, p + ".head");
        return out;
    }

    std::uint64_t hash() const { return params_hash(named_parameters()); }

    // Deep copy with the given trainability; parameter order is preserved.
    Restorer clone(bool trainable) const {
        Restorer out(cfg_, 0, trainable);
        auto src = named_parameters();
        auto dst = out.named_parameters();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i].second->value = src[i].second->value;
        return out;
    }

    void mark_snapshot_backed() { snapshot_backed_ = true; }

private:
    RestorerConfig cfg_;
    bool snapshot_backed_ = false;
    std::vector<ConvLayer> stack_;              // tiny_cnn / dncnn_like
    std::vector<ConvLayer> enc_, downs_, ups_, merges_;  // unet_like
    ConvLayer mid_, head_;
};

// Frozen, gradient-exempt copy of a restorer. Forward passes are pure
// reads; snapshots are terminal and cannot be snapshotted again.
class RestorerSnapshot {
public:
    RestorerSnapshot() = default;
    explicit RestorerSnapshot(const Restorer& source) : net_(source.clone(false)) {
        net_.mark_snapshot_backed();
    }

    const RestorerConfig& config() const { return net_.config(); }
    Var forward(const Var& y) const { return net_.forward(y); }
    std::uint64_t hash() const { return net_.hash(); }
    NamedParams named_parameters() const { return net_.named_parameters(); }

private:
    Restorer net_;
};

inline RestorerSnapshot snapshot(const Restorer& r) {
    if (r.snapshot_backed())
        throw ConfigError("snapshot: snapshots are terminal and cannot be re-snapshotted");
    return RestorerSnapshot(r);
}

inline RestorerSnapshot snapshot(const RestorerSnapshot&) {
    throw ConfigError("snapshot: snapshots are terminal and cannot be re-snapshotted");
}

// Image-level convenience used by evaluation paths.
inline Image restore_image(const Restorer& r, const Image& y) {
    return Image::from_tensor(r.forward(constant(y.to_tensor()))->value);
}
inline Image restore_image(const RestorerSnapshot& r, const Image& y) {
    return Image::from_tensor(r.forward(constant(y.to_tensor()))->value);
}

}  // namespace scgan
