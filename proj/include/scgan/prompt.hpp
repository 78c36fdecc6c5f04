// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "scgan/autodiff.hpp"
#include "scgan/blur.hpp"
#include "scgan/dihedral.hpp"
#include "scgan/networks.hpp"

namespace scgan {

// Differentiable dihedral transform: a pure pixel permutation, so the
// gradient is the inverse permutation of the output gradient.
inline Var dihedral_var(const Var& a, Dihedral t) {
    const Image out = dihedral_apply(Image::from_tensor(a->value), t);
    return make_node(out.to_tensor(), {a}, [t](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        const Image g = dihedral_apply(Image::from_tensor(self.grad), dihedral_inverse(t));
        Tensor& ga = pa.ensure_grad();
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g.data[i];
    });
}

// The restoration backend inside the prompt-learning module: either a
// frozen snapshot of the trainable restorer, or the stage-0 convolution.
class PlBackend {
public:
    virtual ~PlBackend() = default;
    virtual Var forward(const Var& y) const = 0;
    virtual NamedParams named_parameters() const = 0;
    virtual std::uint64_t hash() const { return params_hash(named_parameters()); }
    virtual bool trainable() const = 0;
    virtual const char* kind() const = 0;
};

using PlBackendPtr = std::shared_ptr<PlBackend>;

enum class Stage0Mode { LearnableConv, FixedGaussian };

inline const char* stage0_mode_name(Stage0Mode m) {
    return m == Stage0Mode::LearnableConv ? "learnable_conv" : "fixed_gaussian";
}
inline Stage0Mode stage0_mode_from_name(const std::string& s) {
    if (s == "learnable_conv") return Stage0Mode::LearnableConv;
    if (s == "fixed_gaussian") return Stage0Mode::FixedGaussian;
    throw ConfigError("unknown stage0 mode: " + s);
}

// Stage-0 restoration: one kxk convolution whose weights start as an exact
// per-channel Gaussian blur. In learnable mode it trains jointly with the
// generator; in fixed mode it stays a Gaussian filter. Reflect padding
// keeps it equivariant to the dihedral group at initialization.
class Stage0Conv : public PlBackend {
public:
    Stage0Conv(int channels, int ksize, Stage0Mode mode) : mode_(mode), ksize_(ksize) {
        const BlurKernel g = make_gaussian_kernel(ksize);
        Tensor w({channels, channels, ksize, ksize});
        for (int c = 0; c < channels; ++c)
            for (int y = 0; y < ksize; ++y)
                for (int x = 0; x < ksize; ++x)
                    w.at4(c, c, y, x) = g.weights[static_cast<std::size_t>(y) * ksize + x];
        weight_ = leaf(std::move(w), mode == Stage0Mode::LearnableConv);
        bias_ = leaf(Tensor({channels}), mode == Stage0Mode::LearnableConv);
    }

    Var forward(const Var& y) const override {
        return clamp_v(conv2d(reflect_pad(y, ksize_ / 2), weight_, bias_, 1, 0), 0.0, 1.0);
    }

    NamedParams named_parameters() const override {
        return {{"pl.stage0.weight", weight_}, {"pl.stage0.bias", bias_}};
    }

    bool trainable() const override { return mode_ == Stage0Mode::LearnableConv; }
    const char* kind() const override { return "stage0_conv"; }

private:
    Stage0Mode mode_;
    int ksize_;
    Var weight_, bias_;
};

class SnapshotBackend : public PlBackend {
public:
    explicit SnapshotBackend(RestorerSnapshot snap) : snap_(std::move(snap)) {}

    Var forward(const Var& y) const override { return snap_.forward(y); }
    NamedParams named_parameters() const override { return snap_.named_parameters(); }
    bool trainable() const override { return false; }
    const char* kind() const override { return "snapshot"; }
    const RestorerSnapshot& snapshot() const { return snap_; }

private:
    RestorerSnapshot snap_;
};

// Prompt learning: the degradation prompt is the residual between the
// degraded image and its frozen restoration, d = y - R(y), clamped to
// [-1,1]. With k > 1 folds the restoration is averaged over dihedral
// augmentations (each fold inverse-transformed before averaging so the
// maps stay spatially aligned).
class PromptExtractor {
public:
    PromptExtractor() = default;
    explicit PromptExtractor(PlBackendPtr backend, int fold_count = 1)
        : backend_(std::move(backend)) {
        set_fold_count(fold_count);
    }

    int fold_count() const { return fold_count_; }
    const std::vector<Dihedral>& fold_transforms() const { return fold_transforms_; }

    void set_fold_count(int k) {
        fold_transforms_ = dihedral_fold_set(k);
        fold_count_ = k;
    }

    const PlBackendPtr& backend() const { return backend_; }
    void replace_backend(PlBackendPtr b) { backend_ = std::move(b); }
    std::uint64_t frozen_hash() const { return backend_->hash(); }

    // Frozen restoration of y; with folds, the aligned fold average.
    Var restore_frozen(const Var& y) const { return backend_->forward(y); }

    Var restore_frozen_ensembled(const Var& y) const {
        Var acc;
        for (const Dihedral t : fold_transforms_) {
            Var r = dihedral_var(backend_->forward(dihedral_var(y, t)), dihedral_inverse(t));
            acc = acc ? add(acc, r) : r;
        }
        return mul_c(acc, 1.0 / fold_count_);
    }

    // Plain prompt; requires a single identity fold.
    Var extract(const Var& y) const {
        if (fold_count_ != 1)
            throw ConfigError("extract_prompt: plain extraction requires fold_count 1, have " +
                              std::to_string(fold_count_));
        return clamp_v(sub(y, restore_frozen(y)), -1.0, 1.0);
    }

    // Fold-ensembled prompt; k = 1 degenerates to extract() bit-for-bit.
    Var extract_ensembled(const Var& y) const {
        return clamp_v(sub(y, restore_frozen_ensembled(y)), -1.0, 1.0);
    }

private:
    PlBackendPtr backend_;
    int fold_count_ = 1;
    std::vector<Dihedral> fold_transforms_{Dihedral::Identity};
};

}  // namespace scgan
