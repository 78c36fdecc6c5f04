// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "scgan/autodiff.hpp"
#include "scgan/networks.hpp"

namespace scgan {

struct OptimizerConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        require(learning_rate > 0.0, "optimizer: learning rate must be > 0");
        require(beta1 > 0.0 && beta1 < 1.0, "optimizer: beta1 must be in (0,1)");
        require(beta2 > 0.0 && beta2 < 1.0, "optimizer: beta2 must be in (0,1)");
    }
};

// Adam with bias correction and per-parameter step counts. Parameters with
// an untouched (empty) gradient are skipped, matching the usual "no grad,
// no update" convention.
class Adam {
public:
    struct State {
        std::vector<Tensor> m, v;
        std::vector<long> t;
    };

    Adam() = default;
    Adam(const OptimizerConfig& cfg, NamedParams params)
        : cfg_(cfg), params_(std::move(params)) {
        cfg_.validate();
        state_.m.reserve(params_.size());
        state_.v.reserve(params_.size());
        for (const auto& [name, p] : params_) {
            state_.m.emplace_back(p->value.shape());
            state_.v.emplace_back(p->value.shape());
            state_.t.push_back(0);
        }
    }

    const NamedParams& params() const { return params_; }

    void step() {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Node& p = *params_[i].second;
            if (p.grad.empty()) continue;
            auto& m = state_.m[i];
            auto& v = state_.v[i];
            const long t = ++state_.t[i];
            const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
            const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
            for (std::size_t j = 0; j < p.value.numel(); ++j) {
                const double g = p.grad[j];
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
                p.value[j] -=
                    cfg_.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
            }
        }
    }

    void zero_grad() {
        for (auto& [name, p] : params_) p->zero_grad();
    }

    const State& state() const { return state_; }
    State& mutable_state() { return state_; }

    // Value snapshot for non-finite-step rollback: parameter tensors plus
    // the full optimizer state.
    struct Rollback {
        std::vector<Tensor> values;
        State state;
    };

    Rollback capture() const {
        Rollback r;
        r.values.reserve(params_.size());
        for (const auto& [name, p] : params_) r.values.push_back(p->value);
        r.state = state_;
        return r;
    }

    void restore(const Rollback& r) {
        for (std::size_t i = 0; i < params_.size(); ++i)
            params_[i].second->value = r.values[i];
        state_ = r.state;
    }

private:
    OptimizerConfig cfg_;
    NamedParams params_;
    State state_;
};

}  // namespace scgan
