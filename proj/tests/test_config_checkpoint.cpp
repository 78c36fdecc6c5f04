// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: lossless round-trips, unknown-key rejection,
// order-independent hashing, variant presets; checkpoint container I/O.

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "scgan/checkpoint.hpp"
#include "scgan/config.hpp"
#include "support/toy.hpp"

using namespace scgan;
namespace fs = std::filesystem;

TEST_CASE("config round-trips losslessly through json", "[config]") {
    ExperimentConfig cfg = testsupport::toy_config(7);
    cfg.out_dir = "runs/x";
    cfg.data.clean_dir = "a";
    cfg.data.degraded_dir = "b";
    cfg.schedule.early_stop_gain_db = 0.03;
    cfg.trainer.dedup_real_term = true;
    cfg.ablate_variants = {"V1", "V5"};

    const json j = cfg.to_json();
    const ExperimentConfig back = ExperimentConfig::from_json(j);
    REQUIRE(back.to_json() == j);
    REQUIRE(back.hash() == cfg.hash());
    REQUIRE(back.schedule.early_stop_gain_db.has_value());
    REQUIRE(*back.schedule.early_stop_gain_db == 0.03);
}

TEST_CASE("config hash ignores key order", "[config]") {
    const char* a = R"({"seed": 3, "data": {"patch_size": 16, "batch_size": 2}})";
    const char* b = R"({"data": {"batch_size": 2, "patch_size": 16}, "seed": 3})";
    const auto ca = ExperimentConfig::from_json(json::parse(a));
    const auto cb = ExperimentConfig::from_json(json::parse(b));
    REQUIRE(ca.hash() == cb.hash());
}

TEST_CASE("config rejects unknown keys and bad values", "[config]") {
    REQUIRE_THROWS_WITH(ExperimentConfig::from_json(json::parse(R"({"sede": 1})")),
                        Catch::Matchers::ContainsSubstring("sede"));
    REQUIRE_THROWS_WITH(
        ExperimentConfig::from_json(json::parse(R"({"data": {"bogus_key": 1}})")),
        Catch::Matchers::ContainsSubstring("bogus_key"));
    REQUIRE_THROWS_AS(
        ExperimentConfig::from_json(json::parse(R"({"schedule": {"s1": "four"}})")),
        ConfigError);
    // violated stage ordering names the invariant
    REQUIRE_THROWS_WITH(
        ExperimentConfig::from_json(
            json::parse(R"({"schedule": {"s1": 6, "s2": 4, "s3": 8}})")),
        Catch::Matchers::ContainsSubstring("s1 < s2 < s3"));
    REQUIRE_THROWS_AS(
        ExperimentConfig::from_json(json::parse(R"({"networks": {"restorer": {"backbone":
        "resformer"}}})")),
        ConfigError);
}

TEST_CASE("config file load/save and parse errors", "[config]") {
    const fs::path dir = fs::temp_directory_path() / "scgan_cfg_test";
    fs::create_directories(dir);
    ExperimentConfig cfg = testsupport::toy_config(9);
    cfg.save(dir / "c.json");
    const ExperimentConfig back = ExperimentConfig::load(dir / "c.json");
    REQUIRE(back.hash() == cfg.hash());

    std::ofstream(dir / "broken.json") << "{ not json";
    REQUIRE_THROWS_AS(ExperimentConfig::load(dir / "broken.json"), ConfigError);
    REQUIRE_THROWS_AS(ExperimentConfig::load(dir / "missing.json"), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("variant presets match the published grid", "[config]") {
    const AblationFlags v1 = variant_flags("V1");
    REQUIRE_FALSE(v1.bgm_loss);
    REQUIRE_FALSE(v1.pl_module);
    REQUIRE_FALSE(v1.self_synthesis_branch);
    REQUIRE_FALSE(v1.parallel_branches);

    const AblationFlags v3 = variant_flags("V3");
    REQUIRE(v3.bgm_loss);
    REQUIRE(v3.pl_module);
    REQUIRE_FALSE(v3.self_synthesis_branch);

    const AblationFlags v4 = variant_flags("V4");
    REQUIRE(v4.self_synthesis_branch);
    REQUIRE_FALSE(v4.parallel_branches);

    const AblationFlags v5 = variant_flags("V5");
    REQUIRE(v5.self_synthesis_branch);
    REQUIRE(v5.parallel_branches);
    REQUIRE(v5.bgm_loss);
    REQUIRE(v5.pl_module);

    REQUIRE_THROWS_AS(variant_flags("V6"), ConfigError);
}

TEST_CASE("checkpoint container round-trips", "[config]") {
    const fs::path dir = fs::temp_directory_path() / "scgan_ckpt_test";
    fs::create_directories(dir);

    Checkpoint ck;
    ck.config_hash = 0xabcdef;
    ck.set_counter("epoch", 12);
    ck.set_counter("stage", 1);
    Rng rng(3);
    Tensor t({2, 3, 4});
    t.fill_normal(rng, 1.0);
    ck.tensors.emplace_back("gen.stem.weight", t);
    ck.metrics_history = "{\"type\":\"step\"}\n";
    ck.save(dir / "a.ckpt");

    const Checkpoint back = Checkpoint::load(dir / "a.ckpt");
    REQUIRE(back.config_hash == ck.config_hash);
    REQUIRE(back.counter("epoch") == 12);
    REQUIRE(back.counter("stage") == 1);
    REQUIRE(back.tensors.size() == 1);
    REQUIRE(back.tensors[0].first == "gen.stem.weight");
    for (std::size_t i = 0; i < t.numel(); ++i) REQUIRE(back.tensors[0].second[i] == t[i]);
    REQUIRE(back.metrics_history == ck.metrics_history);
    REQUIRE(back.file_hash() == ck.file_hash());

    std::ofstream(dir / "junk.ckpt") << "definitely not a checkpoint";
    REQUIRE_THROWS_AS(Checkpoint::load(dir / "junk.ckpt"), RuntimeFailure);
    REQUIRE_THROWS_AS(Checkpoint::load(dir / "missing.ckpt"), RuntimeFailure);
    REQUIRE_THROWS_AS(ck.counter("nope"), RuntimeFailure);
    fs::remove_all(dir);
}
