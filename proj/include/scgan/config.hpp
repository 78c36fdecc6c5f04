// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scgan/degrade.hpp"
#include "scgan/losses.hpp"
#include "scgan/networks.hpp"
#include "scgan/optim.hpp"
#include "scgan/prompt.hpp"

namespace scgan {

using nlohmann::json;

// Epoch boundaries of the three training stages plus the replacement and
// fold schedule: the basic stage covers epochs [0,s1), the SC stage
// [s1,s2) split into sc_iterations replacement rounds, and the re-boosting
// stage [s2,s3) with one round per fold count.
struct StageSchedule {
    int s1 = 4;
    int s2 = 8;
    int s3 = 10;
    int sc_iterations = 8;
    std::vector<int> rebsc_folds{2, 4};
    // stop SC rounds once the round-over-round validation gain drops below
    // this many dB; disabled when unset
    std::optional<double> early_stop_gain_db;

    void validate() const {
        require(0 < s1 && s1 < s2 && s2 < s3,
                "schedule: need 0 < s1 < s2 < s3, got s1=" + std::to_string(s1) +
                    " s2=" + std::to_string(s2) + " s3=" + std::to_string(s3));
        require(sc_iterations >= 1, "schedule: sc_iterations must be >= 1");
        require(!rebsc_folds.empty(), "schedule: rebsc_folds must be nonempty");
        for (int k : rebsc_folds)
            require(k >= 1 && k <= 8, "schedule: fold counts must be in [1,8]");
    }
};

struct DataConfig {
    std::string clean_dir;
    std::string degraded_dir;
    std::string val_dir;  // paired layout; empty disables validation metrics
    int patch_size = 112;
    int batch_size = 6;
    int steps_per_epoch = 0;  // 0: one pass over the larger pool

    void validate() const {
        require(patch_size >= 8, "data: patch_size must be >= 8");
        require(batch_size >= 1, "data: batch_size must be >= 1");
        require(steps_per_epoch >= 0, "data: steps_per_epoch must be >= 0");
    }
};

struct NetworksConfig {
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    RestorerConfig restorer;
    int stage0_kernel = 5;
    Stage0Mode stage0_mode = Stage0Mode::LearnableConv;

    void validate() const {
        require(generator.residual_blocks >= 1, "networks: generator blocks must be >= 1");
        require(generator.base_channels >= 1, "networks: generator channels must be >= 1");
        require(discriminator.base_channels >= 1, "networks: discriminator channels >= 1");
        require(discriminator.down_layers >= 1, "networks: discriminator layers >= 1");
        require(restorer.depth >= 1 && restorer.width >= 1, "networks: restorer size invalid");
        require(stage0_kernel >= 1 && stage0_kernel % 2 == 1,
                "networks: stage0 kernel must be odd");
    }
};

// Table-style ablation axes. x_u-syn synthesis is always on; the flags add
// the background loss, the prompt module, the self-synthesis path, and the
// second (parallel) branch.
struct AblationFlags {
    bool self_synthesis_branch = true;
    bool bgm_loss = true;
    bool pl_module = true;
    bool parallel_branches = true;
};

struct TrainerOptions {
    bool stop_grad_dx = true;          // detach the synthetic prompt d_x
    bool rebsc_prompt_folds = false;   // fold-average prompts, not just R_fake
    bool dedup_real_term = false;      // count the real score term once in L_GAN
    bool include_self_pairs = false;   // add branch-1 reconstruction pairs to Eq-6 term
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "runs/exp";
    DataConfig data;
    DegradationSpec degradation;
    NetworksConfig networks;
    LossWeights losses;
    StageSchedule schedule;
    OptimizerConfig optimizer;
    AblationFlags ablation;
    TrainerOptions trainer;
    std::vector<std::string> ablate_variants{"V1", "V2", "V3", "V4", "V5"};

    void validate() const {
        data.validate();
        degradation.validate();
        networks.validate();
        losses.validate();
        schedule.validate();
        optimizer.validate();
        for (const auto& v : ablate_variants)
            require(v.size() == 2 && v[0] == 'V' && v[1] >= '1' && v[1] <= '5',
                    "config: unknown ablation variant " + v);
    }

    json to_json() const;
    static ExperimentConfig from_json(const json& j);
    static ExperimentConfig load(const std::filesystem::path& p);
    void save(const std::filesystem::path& p) const;

    // Canonical-form fingerprint: nlohmann::json keeps object keys sorted,
    // so semantically identical files (any key order) hash identically.
    // out_dir is bookkeeping, not experiment semantics, and is excluded so
    // a checkpoint can resume from a relocated run directory.
    std::uint64_t hash() const {
        json j = to_json();
        j.erase("out_dir");
        return fnv1a(j.dump());
    }
};

// Table-II variant presets.
inline AblationFlags variant_flags(const std::string& v) {
    if (v == "V1") return {false, false, false, false};
    if (v == "V2") return {false, true, false, false};
    if (v == "V3") return {false, true, true, false};
    if (v == "V4") return {true, true, true, false};
    if (v == "V5") return {true, true, true, true};
    throw ConfigError("unknown ablation variant: " + v + " (expected V1..V5)");
}

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown key \"" + key + "\" in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for \"" + std::string(key) + "\": " + e.what());
    }
}

}  // namespace detail

inline json ExperimentConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["data"] = {{"clean_dir", data.clean_dir},
                 {"degraded_dir", data.degraded_dir},
                 {"val_dir", data.val_dir},
                 {"patch_size", data.patch_size},
                 {"batch_size", data.batch_size},
                 {"steps_per_epoch", data.steps_per_epoch}};
    j["degradation"] = {{"kind", degradation_kind_name(degradation.kind)},
                        {"noise_stddev", degradation.noise_stddev},
                        {"streak_count", degradation.streak_count},
                        {"angle_min_deg", degradation.angle_min_deg},
                        {"angle_max_deg", degradation.angle_max_deg},
                        {"opacity", degradation.opacity},
                        {"speckle_density", degradation.speckle_density},
                        {"radius_min", degradation.radius_min},
                        {"radius_max", degradation.radius_max},
                        {"seed", degradation.seed}};
    j["networks"] = {
        {"generator",
         {{"residual_blocks", networks.generator.residual_blocks},
          {"base_channels", networks.generator.base_channels}}},
        {"discriminator",
         {{"base_channels", networks.discriminator.base_channels},
          {"down_layers", networks.discriminator.down_layers}}},
        {"restorer",
         {{"backbone", backbone_name(networks.restorer.backbone)},
          {"depth", networks.restorer.depth},
          {"width", networks.restorer.width}}},
        {"stage0_kernel", networks.stage0_kernel},
        {"stage0_mode", stage0_mode_name(networks.stage0_mode)}};
    json levels;
    for (const auto& [size, w] : losses.bgm_levels) levels[std::to_string(size)] = w;
    j["losses"] = {{"lambda_bgm", losses.lambda_bgm},
                   {"lambda_ssim", losses.lambda_ssim},
                   {"bgm_levels", levels}};
    j["schedule"] = {{"s1", schedule.s1},
                     {"s2", schedule.s2},
                     {"s3", schedule.s3},
                     {"sc_iterations", schedule.sc_iterations},
                     {"rebsc_folds", schedule.rebsc_folds}};
    if (schedule.early_stop_gain_db)
        j["schedule"]["early_stop_gain_db"] = *schedule.early_stop_gain_db;
    j["optimizer"] = {{"learning_rate", optimizer.learning_rate},
                      {"beta1", optimizer.beta1},
                      {"beta2", optimizer.beta2},
                      {"eps", optimizer.eps}};
    j["ablation"] = {{"self_synthesis_branch", ablation.self_synthesis_branch},
                     {"bgm_loss", ablation.bgm_loss},
                     {"pl_module", ablation.pl_module},
                     {"parallel_branches", ablation.parallel_branches}};
    j["trainer"] = {{"stop_grad_dx", trainer.stop_grad_dx},
                    {"rebsc_prompt_folds", trainer.rebsc_prompt_folds},
                    {"dedup_real_term", trainer.dedup_real_term},
                    {"include_self_pairs", trainer.include_self_pairs}};
    j["ablate_variants"] = ablate_variants;
    return j;
}

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
    using detail::check_keys;
    using detail::read;
    ExperimentConfig c;
    check_keys(j, {"seed", "out_dir", "data", "degradation", "networks", "losses",
                   "schedule", "optimizer", "ablation", "trainer", "ablate_variants"},
               "top level");
    read(j, "seed", c.seed);
    read(j, "out_dir", c.out_dir);

    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d, {"clean_dir", "degraded_dir", "val_dir", "patch_size", "batch_size",
                       "steps_per_epoch"}, "data");
        read(d, "clean_dir", c.data.clean_dir);
        read(d, "degraded_dir", c.data.degraded_dir);
        read(d, "val_dir", c.data.val_dir);
        read(d, "patch_size", c.data.patch_size);
        read(d, "batch_size", c.data.batch_size);
        read(d, "steps_per_epoch", c.data.steps_per_epoch);
    }
    if (j.contains("degradation")) {
        const auto& d = j.at("degradation");
        check_keys(d, {"kind", "noise_stddev", "streak_count", "angle_min_deg",
                       "angle_max_deg", "opacity", "speckle_density", "radius_min",
                       "radius_max", "seed"}, "degradation");
        std::string kind = degradation_kind_name(c.degradation.kind);
        read(d, "kind", kind);
        c.degradation.kind = degradation_kind_from_name(kind);
        read(d, "noise_stddev", c.degradation.noise_stddev);
        read(d, "streak_count", c.degradation.streak_count);
        read(d, "angle_min_deg", c.degradation.angle_min_deg);
        read(d, "angle_max_deg", c.degradation.angle_max_deg);
        read(d, "opacity", c.degradation.opacity);
        read(d, "speckle_density", c.degradation.speckle_density);
        read(d, "radius_min", c.degradation.radius_min);
        read(d, "radius_max", c.degradation.radius_max);
        read(d, "seed", c.degradation.seed);
    }
    if (j.contains("networks")) {
        const auto& n = j.at("networks");
        check_keys(n, {"generator", "discriminator", "restorer", "stage0_kernel",
                       "stage0_mode"}, "networks");
        if (n.contains("generator")) {
            const auto& g = n.at("generator");
            check_keys(g, {"residual_blocks", "base_channels"}, "networks.generator");
            read(g, "residual_blocks", c.networks.generator.residual_blocks);
            read(g, "base_channels", c.networks.generator.base_channels);
        }
        if (n.contains("discriminator")) {
            const auto& d = n.at("discriminator");
            check_keys(d, {"base_channels", "down_layers"}, "networks.discriminator");
            read(d, "base_channels", c.networks.discriminator.base_channels);
            read(d, "down_layers", c.networks.discriminator.down_layers);
        }
        if (n.contains("restorer")) {
            const auto& r = n.at("restorer");
            check_keys(r, {"backbone", "depth", "width"}, "networks.restorer");
            std::string backbone = backbone_name(c.networks.restorer.backbone);
            read(r, "backbone", backbone);
            c.networks.restorer.backbone = backbone_from_name(backbone);
            read(r, "depth", c.networks.restorer.depth);
            read(r, "width", c.networks.restorer.width);
        }
        read(n, "stage0_kernel", c.networks.stage0_kernel);
        std::string mode = stage0_mode_name(c.networks.stage0_mode);
        read(n, "stage0_mode", mode);
        c.networks.stage0_mode = stage0_mode_from_name(mode);
    }
    if (j.contains("losses")) {
        const auto& l = j.at("losses");
        check_keys(l, {"lambda_bgm", "lambda_ssim", "bgm_levels"}, "losses");
        read(l, "lambda_bgm", c.losses.lambda_bgm);
        read(l, "lambda_ssim", c.losses.lambda_ssim);
        if (l.contains("bgm_levels")) {
            c.losses.bgm_levels.clear();
            for (const auto& [key, value] : l.at("bgm_levels").items()) {
                try {
                    c.losses.bgm_levels[std::stoi(key)] = value.get<double>();
                } catch (const std::exception&) {
                    throw ConfigError("config: bad bgm level \"" + key + "\"");
                }
            }
        }
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        check_keys(s, {"s1", "s2", "s3", "sc_iterations", "rebsc_folds",
                       "early_stop_gain_db"}, "schedule");
        read(s, "s1", c.schedule.s1);
        read(s, "s2", c.schedule.s2);
        read(s, "s3", c.schedule.s3);
        read(s, "sc_iterations", c.schedule.sc_iterations);
        read(s, "rebsc_folds", c.schedule.rebsc_folds);
        if (s.contains("early_stop_gain_db") && !s.at("early_stop_gain_db").is_null())
            c.schedule.early_stop_gain_db = s.at("early_stop_gain_db").get<double>();
    }
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        check_keys(o, {"learning_rate", "beta1", "beta2", "eps"}, "optimizer");
        read(o, "learning_rate", c.optimizer.learning_rate);
        read(o, "beta1", c.optimizer.beta1);
        read(o, "beta2", c.optimizer.beta2);
        read(o, "eps", c.optimizer.eps);
    }
    if (j.contains("ablation")) {
        const auto& a = j.at("ablation");
        check_keys(a, {"self_synthesis_branch", "bgm_loss", "pl_module",
                       "parallel_branches"}, "ablation");
        read(a, "self_synthesis_branch", c.ablation.self_synthesis_branch);
        read(a, "bgm_loss", c.ablation.bgm_loss);
        read(a, "pl_module", c.ablation.pl_module);
        read(a, "parallel_branches", c.ablation.parallel_branches);
    }
    if (j.contains("trainer")) {
        const auto& t = j.at("trainer");
        check_keys(t, {"stop_grad_dx", "rebsc_prompt_folds", "dedup_real_term",
                       "include_self_pairs"}, "trainer");
        read(t, "stop_grad_dx", c.trainer.stop_grad_dx);
        read(t, "rebsc_prompt_folds", c.trainer.rebsc_prompt_folds);
        read(t, "dedup_real_term", c.trainer.dedup_real_term);
        read(t, "include_self_pairs", c.trainer.include_self_pairs);
    }
    read(j, "ablate_variants", c.ablate_variants);
    c.validate();
    return c;
}

inline ExperimentConfig ExperimentConfig::load(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("config: cannot read " + p.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: parse error in " + p.string() + ": " + e.what());
    }
    return from_json(j);
}

inline void ExperimentConfig::save(const std::filesystem::path& p) const {
    std::ofstream out(p);
    if (!out) throw RuntimeFailure("config: cannot write " + p.string());
    out << to_json().dump(2) << "\n";
}

}  // namespace scgan
