// SPDX-License-Identifier: Apache-2.0
//
// The two-branch step, the three-stage schedule, replacement boosting,
// rollback, determinism, and checkpoint-resume reproducibility.

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <sstream>

#include "scgan/costmodel.hpp"
#include "scgan/trainer.hpp"
#include "support/toy.hpp"

using namespace scgan;
using namespace scgan::testsupport;
namespace fs = std::filesystem;

namespace {

Trainer make_toy_trainer(const ExperimentConfig& cfg, int pool = 4, int img = 24,
                         int val_n = 2) {
    Trainer t(cfg);
    t.set_data(toy_unpaired(pool, pool, img, cfg.degradation, cfg.seed + 1000),
               toy_paired(val_n, cfg.data.patch_size, cfg.degradation, cfg.seed + 2000));
    return t;
}

PatchBatch toy_batch(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto ds = toy_unpaired(3, 3, 24, cfg.degradation, seed);
    return sample_batch(ds, cfg.data.batch_size, cfg.data.patch_size, seed);
}

std::vector<json> step_records(const std::string& history) {
    std::vector<json> out;
    std::istringstream in(history);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.at("type") == "step") out.push_back(std::move(j));
    }
    return out;
}

bool numeric_fields_equal(const json& a, const json& b) {
    for (const char* f : {"adv1", "adv2", "adv3", "adv4", "gan", "bgm", "res", "res_sc",
                          "total", "step", "round", "folds"})
        if (a.at(f) != b.at(f)) return false;
    return true;
}

}  // namespace

TEST_CASE("p2gan step produces a finite, deterministic report", "[trainer]") {
    const ExperimentConfig cfg = toy_config(11);
    const PatchBatch batch = toy_batch(cfg, 5);

    Trainer a = make_toy_trainer(cfg);
    a.enable_partition_check(true);
    const LossReport r1 = a.p2gan_step(batch);
    REQUIRE(r1.all_finite());
    REQUIRE_FALSE(r1.aborted);
    REQUIRE(r1.gan_total == ((r1.adv1 + r1.adv2) + r1.adv3) + r1.adv4);
    REQUIRE(r1.res_sc == 0.0);  // basic stage
    REQUIRE(r1.stage == "basic");
    REQUIRE(r1.bgm > 0.0);

    Trainer b = make_toy_trainer(cfg);
    const LossReport r2 = b.p2gan_step(batch);
    REQUIRE(r1.adv1 == r2.adv1);
    REQUIRE(r1.adv2 == r2.adv2);
    REQUIRE(r1.gan_total == r2.gan_total);
    REQUIRE(r1.bgm == r2.bgm);
    REQUIRE(r1.res == r2.res);
    REQUIRE(r1.grand_total == r2.grand_total);
}

TEST_CASE("paper-scale batch and patch smoke", "[trainer][slow]") {
    ExperimentConfig cfg = toy_config(12);
    cfg.data.patch_size = 112;
    cfg.data.batch_size = 6;
    cfg.networks.generator = {.residual_blocks = 1, .base_channels = 4};
    cfg.networks.discriminator = {.base_channels = 4, .down_layers = 4};
    cfg.networks.restorer = {.backbone = Backbone::TinyCnn, .depth = 2, .width = 4};

    Trainer t(cfg);
    const auto ds = toy_unpaired(1, 1, 120, cfg.degradation, 77);
    t.set_data(ds, std::nullopt);
    const PatchBatch batch = sample_batch(ds, 6, 112, 9);
    const LossReport rep = t.p2gan_step(batch);
    REQUIRE(rep.all_finite());
    REQUIRE_FALSE(rep.aborted);
}

TEST_CASE("ablation variants gate the synthesis paths", "[trainer]") {
    for (const char* variant : {"V1", "V2", "V3", "V4", "V5"}) {
        ExperimentConfig cfg = toy_config(13);
        cfg.ablation = variant_flags(variant);
        Trainer t = make_toy_trainer(cfg);
        const LossReport rep = t.p2gan_step(toy_batch(cfg, 3));
        REQUIRE(rep.all_finite());
        const AblationFlags f = cfg.ablation;
        REQUIRE((rep.adv1 != 0.0) == (f.parallel_branches && f.self_synthesis_branch));
        REQUIRE(rep.adv2 != 0.0);
        REQUIRE((rep.adv3 != 0.0) == f.parallel_branches);
        REQUIRE((rep.adv4 != 0.0) == f.self_synthesis_branch);
        REQUIRE((rep.bgm != 0.0) == f.bgm_loss);
    }
}

TEST_CASE("trainer option variants run a clean step", "[trainer]") {
    for (int mode = 0; mode < 4; ++mode) {
        ExperimentConfig cfg = toy_config(14 + mode);
        cfg.trainer.stop_grad_dx = mode != 0;
        cfg.trainer.dedup_real_term = mode == 1;
        cfg.trainer.include_self_pairs = mode == 2;
        if (mode == 3) cfg.networks.stage0_mode = Stage0Mode::FixedGaussian;
        Trainer t = make_toy_trainer(cfg);
        REQUIRE(t.p2gan_step(toy_batch(cfg, 4)).all_finite());
    }
}

TEST_CASE("every restorer backbone completes a full step", "[trainer]") {
    for (auto backbone : {Backbone::TinyCnn, Backbone::DncnnLike, Backbone::UnetLike}) {
        ExperimentConfig cfg = toy_config(15);
        cfg.networks.restorer.backbone = backbone;
        cfg.networks.restorer.depth = backbone == Backbone::UnetLike ? 1 : 3;
        Trainer t = make_toy_trainer(cfg);
        REQUIRE(t.p2gan_step(toy_batch(cfg, 6)).all_finite());
    }
}

TEST_CASE("basic stage bookkeeping and logging", "[trainer]") {
    const ExperimentConfig cfg = toy_config(16);
    Trainer t = make_toy_trainer(cfg);
    t.run_basic_stage();
    REQUIRE(t.epoch() == cfg.schedule.s1);
    REQUIRE(t.stage() == Stage::Sc);  // transition armed

    const auto steps = step_records(t.metrics().history());
    REQUIRE(static_cast<int>(steps.size()) == cfg.schedule.s1 * cfg.data.steps_per_epoch);

    // one validation record per epoch
    int vals = 0;
    std::istringstream in(t.metrics().history());
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && json::parse(line).at("type") == "val") ++vals;
    REQUIRE(vals == cfg.schedule.s1);
}

TEST_CASE("stage0 conv trains only in learnable mode", "[trainer]") {
    for (const bool learnable : {true, false}) {
        ExperimentConfig cfg = toy_config(17);
        cfg.networks.stage0_mode =
            learnable ? Stage0Mode::LearnableConv : Stage0Mode::FixedGaussian;
        Trainer t = make_toy_trainer(cfg);
        const std::uint64_t before = t.pl().frozen_hash();
        t.p2gan_step(toy_batch(cfg, 8));
        REQUIRE((t.pl().frozen_hash() != before) == learnable);
    }
}

TEST_CASE("sc_replace swaps in a snapshot of the live restorer", "[trainer]") {
    const ExperimentConfig cfg = toy_config(18);
    Trainer t = make_toy_trainer(cfg);
    t.run_basic_stage();
    REQUIRE_THROWS_AS(
        [&] {
            Trainer fresh = make_toy_trainer(cfg);
            fresh.sc_replace();  // basic stage: not allowed
        }(),
        ConfigError);

    t.sc_replace();
    REQUIRE(std::string(t.pl().backend()->kind()) == "snapshot");
    REQUIRE(t.replacement_count() == 1);
    REQUIRE(t.pl().frozen_hash() == t.res_hash());

    // frozen forward matches the live restorer on 10 probes at replacement
    Rng rng(99);
    for (int i = 0; i < 10; ++i) {
        Tensor probe({3, 16, 16});
        for (std::size_t j = 0; j < probe.numel(); ++j) probe[j] = rng.uniform();
        const Tensor a = t.pl().restore_frozen(constant(probe))->value;
        const Tensor b = t.restorer().forward(constant(probe))->value;
        for (std::size_t j = 0; j < a.numel(); ++j) REQUIRE(a[j] == b[j]);
    }

    // one more optimizer step moves the live restorer away from the frozen copy
    const std::uint64_t frozen = t.pl().frozen_hash();
    t.p2gan_step(toy_batch(cfg, 21));
    REQUIRE(t.pl().frozen_hash() == frozen);
    REQUIRE(t.res_hash() != frozen);
}

TEST_CASE("full schedule: stage monotonicity, replacements, and curve", "[trainer][slow]") {
    const ExperimentConfig cfg = toy_config(19);
    Trainer t = make_toy_trainer(cfg);
    t.enable_partition_check(true);

    t.run_basic_stage();
    const std::uint64_t pl_after_basic = t.pl().frozen_hash();
    t.run_sc_stage();
    REQUIRE(t.stage() == Stage::RebSc);
    REQUIRE(t.epoch() == cfg.schedule.s2);
    REQUIRE(t.replacement_count() == cfg.schedule.sc_iterations);
    REQUIRE(t.pl().frozen_hash() != pl_after_basic);

    t.run_rebsc_stage();
    REQUIRE(t.stage() == Stage::Done);
    REQUIRE(t.epoch() == cfg.schedule.s3);
    REQUIRE(t.replacement_count() ==
            cfg.schedule.sc_iterations + static_cast<int>(cfg.schedule.rebsc_folds.size()));
    REQUIRE(t.pl().fold_count() == cfg.schedule.rebsc_folds.back());

    // per-round validation series recorded with the right ordinals
    const auto& curve = t.round_psnr();
    REQUIRE(curve.size() ==
            cfg.schedule.sc_iterations + cfg.schedule.rebsc_folds.size());
    for (std::size_t i = 0; i < curve.size(); ++i)
        REQUIRE(curve[i].first == static_cast<int>(i) + 1);

    // sc/rebsc steps carry the res_sc decomposition
    bool saw_sc = false;
    for (const auto& rec : step_records(t.metrics().history()))
        if (rec.at("stage") == "sc") {
            REQUIRE(rec.at("res_sc").get<double>() != 0.0);
            saw_sc = true;
        }
    REQUIRE(saw_sc);
}

TEST_CASE("frozen PL is constant between replacements while nets move",
          "[trainer]") {
    const ExperimentConfig cfg = toy_config(20);
    Trainer t = make_toy_trainer(cfg);
    t.run_basic_stage();
    t.sc_replace();
    const std::uint64_t frozen = t.pl().frozen_hash();
    const std::uint64_t g0 = t.gen_hash(), d0 = t.disc_hash(), r0 = t.res_hash();
    t.run_epoch();
    REQUIRE(t.pl().frozen_hash() == frozen);
    REQUIRE(t.gen_hash() != g0);
    REQUIRE(t.disc_hash() != d0);
    REQUIRE(t.res_hash() != r0);
}

TEST_CASE("non-finite losses abort and roll back the step", "[trainer]") {
    const ExperimentConfig cfg = toy_config(21);
    Trainer t = make_toy_trainer(cfg);
    // poison one generator weight; every loss that sees synthesis goes NaN
    t.p2gan_step(toy_batch(cfg, 2));  // a healthy step first
    auto params = t.generator().named_parameters();
    params[0].second->value[0] = std::numeric_limits<double>::quiet_NaN();
    const std::uint64_t g = t.gen_hash(), d = t.disc_hash(), r = t.res_hash();

    const LossReport rep = t.p2gan_step(toy_batch(cfg, 3));
    REQUIRE(rep.aborted);
    REQUIRE(t.aborted_steps() == 1);
    REQUIRE(t.gen_hash() == g);
    REQUIRE(t.disc_hash() == d);
    REQUIRE(t.res_hash() == r);
}

TEST_CASE("two runs from one config produce identical logs and checkpoints",
          "[trainer][slow]") {
    const fs::path dir = fs::temp_directory_path() / "scgan_det_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    ExperimentConfig cfg = toy_config(22);
    cfg.out_dir = (dir / "run").string();

    auto run_once = [&](const fs::path& keep) {
        Trainer t = make_toy_trainer(cfg);
        t.open_artifacts();
        t.train();
        fs::rename(dir / "run", keep);
    };
    run_once(dir / "a");
    run_once(dir / "b");

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    REQUIRE(slurp(dir / "a" / "metrics.jsonl") == slurp(dir / "b" / "metrics.jsonl"));
    REQUIRE(slurp(dir / "a" / "checkpoints" / "final.ckpt") ==
            slurp(dir / "b" / "checkpoints" / "final.ckpt"));
    REQUIRE(fs::exists(dir / "a" / "sc_curve.svg"));

    // expected checkpoint census: stage boundaries + every replacement
    std::size_t count = 0;
    for (const auto& e : fs::directory_iterator(dir / "a" / "checkpoints")) {
        (void)e;
        ++count;
    }
    REQUIRE(count >= 1 + static_cast<std::size_t>(cfg.schedule.sc_iterations) +
                         cfg.schedule.rebsc_folds.size());
    fs::remove_all(dir);
}

TEST_CASE("checkpoint resume reproduces subsequent steps bit-for-bit",
          "[trainer][slow]") {
    const fs::path dir = fs::temp_directory_path() / "scgan_resume_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    ExperimentConfig cfg = toy_config(23);
    cfg.out_dir = (dir / "full").string();

    Trainer full = make_toy_trainer(cfg);
    full.open_artifacts();
    full.train();
    const auto full_steps = step_records(full.metrics().history());

    Trainer resumed = resume_trainer(cfg, dir / "full" / "checkpoints" / "stage_basic.ckpt");
    resumed.set_data(toy_unpaired(4, 4, 24, cfg.degradation, cfg.seed + 1000),
                     toy_paired(2, cfg.data.patch_size, cfg.degradation, cfg.seed + 2000));
    const std::size_t prior = step_records(resumed.metrics().history()).size();
    resumed.train();
    const auto resumed_steps = step_records(resumed.metrics().history());

    REQUIRE(resumed_steps.size() == full_steps.size());
    for (std::size_t i = prior; i < full_steps.size(); ++i)
        REQUIRE(numeric_fields_equal(full_steps[i], resumed_steps[i]));

    // mismatched config is refused without the override
    ExperimentConfig other = cfg;
    other.losses.lambda_bgm = 7.0;
    REQUIRE_THROWS_AS(
        resume_trainer(other, dir / "full" / "checkpoints" / "stage_basic.ckpt"),
        ConfigError);
    REQUIRE_NOTHROW(
        resume_trainer(other, dir / "full" / "checkpoints" / "stage_basic.ckpt", true));
    fs::remove_all(dir);
}

TEST_CASE("a fold-1 reboost round is bit-identical to an sc round", "[trainer][slow]") {
    // Two schedules that agree through epoch 2, then run the same epoch as
    // an SC round (cfg_b) versus a k=1 re-boosting round (cfg_a).
    ExperimentConfig cfg_a = toy_config(24);
    cfg_a.schedule = {.s1 = 1, .s2 = 2, .s3 = 3, .sc_iterations = 1, .rebsc_folds = {1}};
    ExperimentConfig cfg_b = toy_config(24);
    cfg_b.schedule = {.s1 = 1, .s2 = 3, .s3 = 4, .sc_iterations = 2, .rebsc_folds = {1}};

    Trainer a = make_toy_trainer(cfg_a);
    a.run_basic_stage();
    a.run_sc_stage();
    a.run_rebsc_stage();

    Trainer b = make_toy_trainer(cfg_b);
    b.run_basic_stage();
    b.run_sc_stage();

    const auto sa = step_records(a.metrics().history());
    const auto sb = step_records(b.metrics().history());
    const int spe = cfg_a.data.steps_per_epoch;
    // epoch 2 records: the rebsc round of A vs the second SC round of B
    for (int i = 2 * spe; i < 3 * spe; ++i) {
        REQUIRE(sa[i].at("stage") == "rebsc");
        REQUIRE(sb[i].at("stage") == "sc");
        REQUIRE(numeric_fields_equal(sa[i], sb[i]));
    }
}

TEST_CASE("early stop cuts sc rounds when the gain stalls", "[trainer][slow]") {
    ExperimentConfig cfg = toy_config(25);
    cfg.schedule = {.s1 = 1, .s2 = 5, .s3 = 6, .sc_iterations = 4, .rebsc_folds = {2},
                    .early_stop_gain_db = 1e9};  // impossible gain: stop after round 2
    Trainer t = make_toy_trainer(cfg);
    t.run_basic_stage();
    t.run_sc_stage();
    REQUIRE(t.replacement_count() == 2);  // round 1 has no prior round to compare
    REQUIRE(t.epoch() == cfg.schedule.s2);
    REQUIRE(t.stage() == Stage::RebSc);
}
