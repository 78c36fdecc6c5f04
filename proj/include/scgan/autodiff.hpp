// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "scgan/tensor.hpp"

namespace scgan {

// Reverse-mode autodiff over Tensor. Graphs are built dynamically per
// training step and released when the roots go out of scope. Node ids are
// creation-ordered, so every parent id precedes its children; backward
// visits reachable nodes by descending id, which is a valid reverse
// topological order.
struct Node {
    Tensor value;
    Tensor grad;  // lazily allocated, same shape as value
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // accumulates into parents' grads
    bool requires_grad = false;
    std::int64_t id = 0;

    Tensor& ensure_grad() {
        if (grad.empty()) grad = Tensor(value.shape());
        return grad;
    }
    void zero_grad() {
        if (!grad.empty()) grad.fill(0.0);
    }
};

using Var = std::shared_ptr<Node>;

namespace detail {
inline std::int64_t next_node_id() {
    static std::int64_t counter = 0;
    return ++counter;
}
}  // namespace detail

inline Var make_node(Tensor value, std::vector<Var> parents = {},
                     std::function<void(Node&)> backprop = nullptr) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->id = detail::next_node_id();
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

inline Var leaf(Tensor value, bool requires_grad = false) {
    auto n = make_node(std::move(value));
    n->requires_grad = requires_grad;
    return n;
}

inline Var constant(Tensor value) { return leaf(std::move(value), false); }

inline Var detach(const Var& a) { return constant(a->value); }

// ---- elementwise ----

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw ConfigError(std::string(op) + ": shape mismatch " +
                          Tensor::shape_str(a->value.shape()) + " vs " +
                          Tensor::shape_str(b->value.shape()));
}

inline Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            Tensor& ga = pa.ensure_grad();
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            Tensor& gb = pb.ensure_grad();
            for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += self.grad[i];
        }
    });
}

inline Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            Tensor& ga = pa.ensure_grad();
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            Tensor& gb = pb.ensure_grad();
            for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] -= self.grad[i];
        }
    });
}

inline Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            Tensor& ga = pa.ensure_grad();
            for (std::size_t i = 0; i < ga.numel(); ++i)
                ga[i] += self.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            Tensor& gb = pb.ensure_grad();
            for (std::size_t i = 0; i < gb.numel(); ++i)
                gb[i] += self.grad[i] * pa.value[i];
        }
    });
}

inline Var divide(const Var& a, const Var& b) {
    check_same_shape(a, b, "divide");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= b->value[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            Tensor& ga = pa.ensure_grad();
            for (std::size_t i = 0; i < ga.numel(); ++i)
                ga[i] += self.grad[i] / pb.value[i];
        }
        if (pb.requires_grad) {
            Tensor& gb = pb.ensure_grad();
            for (std::size_t i = 0; i < gb.numel(); ++i)
                gb[i] -= self.grad[i] * pa.value[i] / (pb.value[i] * pb.value[i]);
        }
    });
}

inline Var add_c(const Var& a, double c) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += c;
    return make_node(std::move(out), {a}, [](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += self.grad[i];
    });
}

inline Var mul_c(const Var& a, double c) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
    return make_node(std::move(out), {a}, [c](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += c * self.grad[i];
    });
}

inline Var square(const Var& a) { return mul(a, a); }

inline Var abs_val(const Var& a) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::abs(out[i]);
    return make_node(std::move(out), {a}, [](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        for (std::size_t i = 0; i < ga.numel(); ++i) {
            const double v = pa.value[i];
            ga[i] += self.grad[i] * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
        }
    });
}

inline Var relu(const Var& a) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::max(out[i], 0.0);
    return make_node(std::move(out), {a}, [](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        for (std::size_t i = 0; i < ga.numel(); ++i)
            if (pa.value[i] > 0.0) ga[i] += self.grad[i];
    });
}

inline Var leaky_relu(const Var& a, double slope = 0.2) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i)
        if (out[i] < 0.0) out[i] *= slope;
    return make_node(std::move(out), {a}, [slope](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        for (std::size_t i = 0; i < ga.numel(); ++i)
            ga[i] += self.grad[i] * (pa.value[i] > 0.0 ? 1.0 : slope);
    });
}

inline Var sigmoid(const Var& a) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    return make_node(std::move(out), {a}, [](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        for (std::size_t i = 0; i < ga.numel(); ++i) {
            const double y = self.value[i];
            ga[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

// Gradient passes where lo <= x <= hi, zero outside.
inline Var clamp_v(const Var& a, double lo, double hi) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i)
        out[i] = std::min(std::max(out[i], lo), hi);
    return make_node(std::move(out), {a}, [lo, hi](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        for (std::size_t i = 0; i < ga.numel(); ++i) {
            const double v = pa.value[i];
            if (v >= lo && v <= hi) ga[i] += self.grad[i];
        }
    });
}

// ---- reductions ----

inline Var sum_all(const Var& a) {
    return make_node(Tensor::scalar(a->value.sum()), {a}, [](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        const double g = self.grad[0];
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
    });
}

inline Var mean_all(const Var& a) {
    const double n = static_cast<double>(a->value.numel());
    return make_node(Tensor::scalar(a->value.sum() / n), {a}, [n](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        const double g = self.grad[0] / n;
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
    });
}

// ---- structural ----

inline Var concat_ch(const Var& a, const Var& b) {
    const auto& sa = a->value.shape();
    const auto& sb = b->value.shape();
    if (sa.size() != 3 || sb.size() != 3 || sa[1] != sb[1] || sa[2] != sb[2])
        throw ConfigError("concat_ch: incompatible shapes " + Tensor::shape_str(sa) +
                          " vs " + Tensor::shape_str(sb));
    Tensor out({sa[0] + sb[0], sa[1], sa[2]});
    std::copy(a->value.data(), a->value.data() + a->value.numel(), out.data());
    std::copy(b->value.data(), b->value.data() + b->value.numel(),
              out.data() + a->value.numel());
    return make_node(std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const std::size_t na = pa.value.numel();
        if (pa.requires_grad) {
            Tensor& ga = pa.ensure_grad();
            for (std::size_t i = 0; i < na; ++i) ga[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            Tensor& gb = pb.ensure_grad();
            for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += self.grad[na + i];
        }
    });
}

// ---- spatial ops on {C,H,W} ----

// reflect-101 padding: border row/column is the mirror axis and is not
// repeated. Requires pad <= dim-1.
inline int reflect_index(int i, int n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return i;
}

inline Var reflect_pad(const Var& a, int pad) {
    const auto& s = a->value.shape();
    if (s.size() != 3) throw ConfigError("reflect_pad: expected {C,H,W}");
    const int C = s[0], H = s[1], W = s[2];
    if (pad < 0 || pad > H - 1 || pad > W - 1)
        throw ConfigError("reflect_pad: pad " + std::to_string(pad) +
                          " out of range for " + Tensor::shape_str(s));
    Tensor out({C, H + 2 * pad, W + 2 * pad});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H + 2 * pad; ++y) {
            const int sy = reflect_index(y - pad, H);
            for (int x = 0; x < W + 2 * pad; ++x)
                out.at(c, y, x) = a->value.at(c, sy, reflect_index(x - pad, W));
        }
    return make_node(std::move(out), {a}, [pad, C, H, W](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H + 2 * pad; ++y) {
                const int sy = reflect_index(y - pad, H);
                for (int x = 0; x < W + 2 * pad; ++x)
                    ga.at(c, sy, reflect_index(x - pad, W)) += self.grad.at(c, y, x);
            }
    });
}

// Depthwise valid convolution: every channel is convolved with the same
// fixed 2-D kernel (used for Gaussian blur and SSIM windows; the kernel is
// a constant, not a parameter).
inline Var dw_valid_conv(const Var& a, const Tensor& kernel) {
    const auto& s = a->value.shape();
    if (s.size() != 3 || kernel.rank() != 2)
        throw ConfigError("dw_valid_conv: expected {C,H,W} input and {kh,kw} kernel");
    const int C = s[0], H = s[1], W = s[2];
    const int kh = kernel.dim(0), kw = kernel.dim(1);
    if (kh > H || kw > W)
        throw ConfigError("dw_valid_conv: kernel larger than input");
    const int OH = H - kh + 1, OW = W - kw + 1;
    Tensor out({C, OH, OW});
    for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox) {
                double acc = 0.0;
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx)
                        acc += a->value.at(c, oy + ky, ox + kx) *
                               kernel[static_cast<std::size_t>(ky) * kw + kx];
                out.at(c, oy, ox) = acc;
            }
    return make_node(std::move(out), {a},
                     [kernel, C, OH, OW, kh, kw](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    const double g = self.grad.at(c, oy, ox);
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx)
                            ga.at(c, oy + ky, ox + kx) +=
                                g * kernel[static_cast<std::size_t>(ky) * kw + kx];
                }
    });
}

// Standard zero-padded strided convolution, weight {O,I,kh,kw}, bias {O}.
inline Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const auto& sx = x->value.shape();
    const auto& sw = w->value.shape();
    if (sx.size() != 3 || sw.size() != 4)
        throw ConfigError("conv2d: expected {C,H,W} input and {O,I,kh,kw} weight");
    const int C = sx[0], H = sx[1], W = sx[2];
    const int O = sw[0], I = sw[1], kh = sw[2], kw = sw[3];
    if (I != C)
        throw ConfigError("conv2d: input channels " + std::to_string(C) +
                          " != weight channels " + std::to_string(I));
    if (b->value.rank() != 1 || b->value.dim(0) != O)
        throw ConfigError("conv2d: bias shape mismatch");
    const int OH = (H + 2 * pad - kh) / stride + 1;
    const int OW = (W + 2 * pad - kw) / stride + 1;
    if (OH <= 0 || OW <= 0)
        throw ConfigError("conv2d: input " + Tensor::shape_str(sx) +
                          " too small for kernel " + std::to_string(kh));
    Tensor out({O, OH, OW});
    for (int o = 0; o < O; ++o) {
        const double bias = b->value[o];
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox) {
                double acc = bias;
                const int iy0 = oy * stride - pad;
                const int ix0 = ox * stride - pad;
                for (int c = 0; c < C; ++c)
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ix0 + kx;
                            if (ix < 0 || ix >= W) continue;
                            acc += x->value.at(c, iy, ix) * w->value.at4(o, c, ky, kx);
                        }
                    }
                out.at(o, oy, ox) = acc;
            }
    }
    return make_node(std::move(out), {x, w, b},
                     [stride, pad, C, H, W, O, kh, kw, OH, OW](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node& pb = *self.parents[2];
        const bool need_x = px.requires_grad;
        const bool need_w = pw.requires_grad;
        const bool need_b = pb.requires_grad;
        Tensor* gx = need_x ? &px.ensure_grad() : nullptr;
        Tensor* gw = need_w ? &pw.ensure_grad() : nullptr;
        Tensor* gb = need_b ? &pb.ensure_grad() : nullptr;
        for (int o = 0; o < O; ++o)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox) {
                    const double g = self.grad.at(o, oy, ox);
                    if (g == 0.0) continue;
                    if (need_b) (*gb)[o] += g;
                    const int iy0 = oy * stride - pad;
                    const int ix0 = ox * stride - pad;
                    for (int c = 0; c < C; ++c)
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ix0 + kx;
                                if (ix < 0 || ix >= W) continue;
                                if (need_x)
                                    gx->at(c, iy, ix) += g * pw.value.at4(o, c, ky, kx);
                                if (need_w)
                                    gw->at4(o, c, ky, kx) += g * px.value.at(c, iy, ix);
                            }
                        }
                }
    });
}

inline Var upsample_nearest2(const Var& a) {
    const auto& s = a->value.shape();
    if (s.size() != 3) throw ConfigError("upsample_nearest2: expected {C,H,W}");
    const int C = s[0], H = s[1], W = s[2];
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < 2 * H; ++y)
            for (int x = 0; x < 2 * W; ++x)
                out.at(c, y, x) = a->value.at(c, y / 2, x / 2);
    return make_node(std::move(out), {a}, [C, H, W](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        Tensor& ga = pa.ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < 2 * H; ++y)
                for (int x = 0; x < 2 * W; ++x)
                    ga.at(c, y / 2, x / 2) += self.grad.at(c, y, x);
    });
}

// ---- backward ----

inline void backward(const Var& root) {
    if (root->value.numel() != 1)
        throw RuntimeFailure("backward: root must be scalar");
    if (!root->requires_grad) return;
    std::vector<Node*> reachable;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        reachable.push_back(n);
        for (const auto& p : n->parents)
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(reachable.begin(), reachable.end(),
              [](const Node* a, const Node* b) { return a->id > b->id; });
    root->ensure_grad()[0] += 1.0;
    for (Node* n : reachable)
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
}

}  // namespace scgan
