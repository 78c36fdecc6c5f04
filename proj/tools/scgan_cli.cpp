// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: corpus construction, training, evaluation,
// ablation sweeps, and the complexity report.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "scgan/config.hpp"
#include "scgan/costmodel.hpp"
#include "scgan/evaluate.hpp"
#include "scgan/trainer.hpp"

using namespace scgan;
namespace fs = std::filesystem;

namespace {

void check_device() {
    const char* dev = std::getenv("SCGAN_DEVICE");
    if (dev && *dev && std::string(dev) != "cpu")
        throw ConfigError(std::string("SCGAN_DEVICE=") + dev +
                          " is not supported (this build is cpu-only)");
}

ExperimentConfig load_config(const std::string& path) {
    return ExperimentConfig::load(path);
}

int cmd_make_corpus(const std::string& config_path, const std::string& data_dir,
                    const std::string& out_dir, std::uint64_t seed, int synthetic,
                    int synthetic_size, int eval_count) {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    DegradationSpec spec = cfg.degradation;
    if (seed) spec.seed = seed;

    fs::path source = data_dir;
    if (synthetic > 0) {
        require(synthetic >= 2 + eval_count,
                "make-corpus: --synthetic must cover the eval split plus two halves");
        source = fs::path(out_dir) / "sources";
        fs::create_directories(source);
        for (int i = 0; i < synthetic; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "synth%04d.png", i);
            save_png(synth_clean_image(synthetic_size, synthetic_size,
                                       hash_combine(spec.seed, 0x50a2ce5ULL, i)),
                     source / name);
        }
        std::cout << "generated " << synthetic << " synthetic sources in " << source << "\n";
    }
    require(!source.empty(), "make-corpus: provide --data or --synthetic");

    // hold out the eval slice first so it stays disjoint from both halves
    fs::path train_source = source;
    if (eval_count > 0) {
        const auto files = detail::sorted_files(source);
        require(static_cast<int>(files.size()) > eval_count + 1,
                "make-corpus: not enough sources for the eval split");
        std::vector<Image> eval_cleans;
        train_source = fs::path(out_dir) / "train_sources";
        fs::create_directories(train_source);
        for (std::size_t i = 0; i < files.size(); ++i) {
            if (static_cast<int>(i) < eval_count)
                eval_cleans.push_back(load_png(files[i]).image);
            else
                fs::copy_file(files[i], train_source / files[i].filename(),
                              fs::copy_options::overwrite_existing);
        }
        DegradationSpec eval_spec = spec;
        eval_spec.seed = hash_combine(spec.seed, 0xe7a1ULL);
        make_paired_corpus(eval_cleans, fs::path(out_dir) / "eval", eval_spec);
        std::cout << "wrote " << eval_count << " paired eval images under "
                  << (fs::path(out_dir) / "eval") << "\n";
    }

    const auto [clean_dir, degraded_dir] =
        make_toy_corpus(train_source, out_dir, spec, spec.seed);
    const auto ds = load_unpaired(clean_dir, degraded_dir);
    std::cout << "corpus ready: " << ds.clean.size() << " clean in " << clean_dir << ", "
              << ds.degraded.size() << " degraded in " << degraded_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_override,
              std::uint64_t seed_override, const std::string& resume_path,
              bool allow_mismatch, const std::string& folds_override, bool quiet) {
    ExperimentConfig cfg = load_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed_override) cfg.seed = seed_override;
    if (!folds_override.empty()) {
        cfg.schedule.rebsc_folds.clear();
        std::stringstream ss(folds_override);
        for (std::string tok; std::getline(ss, tok, ',');) {
            try {
                cfg.schedule.rebsc_folds.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw ConfigError("train: bad --folds entry \"" + tok + "\"");
            }
        }
        cfg.schedule.validate();
    }
    require(!cfg.out_dir.empty(), "train: out_dir is required");

    if (!resume_path.empty()) {
        Trainer t = resume_trainer(cfg, resume_path, allow_mismatch, quiet);
        t.load_data();
        t.open_artifacts();
        t.train();
    } else {
        train(cfg, quiet);
    }

    // final summary against the validation set, when present
    if (!cfg.data.val_dir.empty()) {
        const fs::path final_ckpt = fs::path(cfg.out_dir) / "checkpoints" / "final.ckpt";
        Trainer t = resume_trainer(cfg, final_ckpt, false);
        const PairedDataset val = load_paired(cfg.data.val_dir);
        const EvalResult r = evaluate_restorer(t.restorer(), val);
        MetricsTable table;
        table.rows.push_back({"validation", "trained", r.mean_psnr, r.mean_ssim,
                              Checkpoint::load(final_ckpt).file_hash(), cfg.hash()});
        std::ofstream(fs::path(cfg.out_dir) / "final_metrics.json")
            << table.to_json().dump(2) << "\n";
        std::cout << table.to_text();
    }
    std::cout << "training complete; artifacts in " << cfg.out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path,
             const std::string& data_dir, bool paired, int folds,
             const std::string& out_dir, bool allow_mismatch) {
    fs::path cfg_path = config_path;
    if (cfg_path.empty())
        cfg_path = fs::path(checkpoint_path).parent_path().parent_path() / "config.json";
    const ExperimentConfig cfg = load_config(cfg_path.string());
    Trainer t = resume_trainer(cfg, checkpoint_path, allow_mismatch);

    if (paired) {
        const PairedDataset ds = load_paired(data_dir);
        const EvalResult r = evaluate_restorer(t.restorer(), ds, folds);
        MetricsTable table;
        table.rows.push_back({fs::path(data_dir).filename().string(),
                              folds == 1 ? "restorer"
                                         : ("restorer+se" + std::to_string(folds)),
                              r.mean_psnr, r.mean_ssim,
                              Checkpoint::load(checkpoint_path).file_hash(), cfg.hash()});
        std::cout << table.to_text();
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
            std::ofstream(fs::path(out_dir) / "metrics.json")
                << table.to_json().dump(2) << "\n";
            json rows = json::array();
            for (const auto& row : r.rows)
                rows.push_back({{"name", row.name}, {"psnr", row.psnr}, {"ssim", row.ssim}});
            std::ofstream(fs::path(out_dir) / "per_image.json") << rows.dump(2) << "\n";
        }
    } else {
        require(!out_dir.empty(), "eval: unpaired evaluation writes images; pass --out");
        const auto files = detail::sorted_files(data_dir);
        require(!files.empty(), "eval: no inputs in " + data_dir);
        fs::create_directories(out_dir);
        int written = 0;
        for (const auto& f : files) {
            Image y;
            try {
                y = load_png(f).image;
            } catch (const std::exception& e) {
                std::fprintf(stderr, "warning: skipping %s (%s)\n", f.string().c_str(),
                             e.what());
                continue;
            }
            const Image restored = folds == 1
                                       ? restore_image(t.restorer(), y)
                                       : self_ensemble_infer(t.restorer(), y, folds);
            save_png(restored, fs::path(out_dir) / f.filename());
            ++written;
        }
        require(written > 0, "eval: no decodable inputs in " + data_dir);
        std::cout << "restored " << written << " images into " << out_dir << "\n";
    }
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_override,
               std::uint64_t seed_override, const std::string& variant, bool quiet) {
    ExperimentConfig base = load_config(config_path);
    if (!out_override.empty()) base.out_dir = out_override;
    if (seed_override) base.seed = seed_override;
    require(!base.data.val_dir.empty(), "ablate: data.val_dir is required for the table");

    std::vector<std::string> variants = base.ablate_variants;
    if (!variant.empty()) variants = {variant};
    require(!variants.empty(), "ablate: empty variant list");

    MetricsTable table;
    for (const auto& v : variants) {
        ExperimentConfig cfg = base;
        cfg.ablation = variant_flags(v);
        cfg.out_dir = (fs::path(base.out_dir) / v).string();
        const fs::path final_ckpt = train(cfg, quiet);
        Trainer t = resume_trainer(cfg, final_ckpt, false);
        const PairedDataset val = load_paired(cfg.data.val_dir);
        const EvalResult r = evaluate_restorer(t.restorer(), val);
        table.rows.push_back({"validation", v, r.mean_psnr, r.mean_ssim,
                              Checkpoint::load(final_ckpt).file_hash(), cfg.hash()});
    }
    std::cout << table.to_text();
    fs::create_directories(base.out_dir);
    std::ofstream(fs::path(base.out_dir) / "ablation_table.json")
        << table.to_json().dump(2) << "\n";

    // soft trend note: did each added module help at this scale?
    std::string trend = "trend:";
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        trend += " " + table.rows[i - 1].method +
                 (table.rows[i].psnr >= table.rows[i - 1].psnr ? "<=" : ">") +
                 table.rows[i].method;
    std::cout << trend << "\n";
    return 0;
}

int cmd_cost(double t0, double ts, double p0, double p_inf, int n,
             const std::string& config_path, bool empirical, int reps) {
    const CostParams params{.t0 = t0, .ts = ts, .p0 = p0, .p_inf = p_inf, .n = n};
    const CostBounds b = training_bounds(params);
    std::printf("symbolic training bounds: (T0+Ts+2)*P0 = %.6g < P_train < "
                "(T0+2*Ts+12)*P0 = %.6g\n",
                b.train_lower, b.train_upper);
    std::printf("symbolic inference: boosted restorer pass = %.6g, %d-fold self-ensemble = "
                "%.6g (ratio %.6g)\n",
                b.inference_sc, n, b.inference_se, b.inference_se / b.inference_sc);

    if (!empirical) return 0;
    require(!config_path.empty(), "cost: --config is required for --empirical");
    ExperimentConfig cfg = load_config(config_path);

    Trainer basic(cfg);
    basic.load_data();
    const UnpairedDataset probe = load_unpaired(cfg.data.clean_dir, cfg.data.degraded_dir);
    const PatchBatch batch = sample_batch(probe, cfg.data.batch_size, cfg.data.patch_size,
                                          hash_combine(cfg.seed, 0xc057ULL));
    const double t_basic = measure_step_cost(basic, batch, reps);

    Trainer sc(cfg);
    sc.load_data();
    sc.run_basic_stage();
    sc.sc_replace();
    const double t_sc = measure_step_cost(sc, batch, reps);

    const double ratio = t_sc / t_basic;
    std::printf("measured per-step cost: basic %.4fs, sc %.4fs, ratio %.3f ", t_basic, t_sc,
                ratio);
    std::printf("[%s: expected within (1x, 2x) +-20%%]\n",
                ratio > 0.8 && ratio < 2.4 ? "ok" : "OUT OF BAND");

    for (int k : {2, 4, 8}) {
        sc.pl().set_fold_count(k);
        std::printf("measured per-step cost with %d folds: %.4fs\n", k,
                    measure_step_cost(sc, batch, reps));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised restoration with a replacement-boosted prompt GAN"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, checkpoint_path, resume_path, variant,
        folds_csv;
    std::uint64_t seed = 0;
    bool paired = false, allow_mismatch = false, empirical = false, quiet = false;
    int folds = 1, synthetic = 0, synthetic_size = 96, eval_count = 0, reps = 5;
    double t0 = 100, ts = 8, p0 = 1, p_inf = 1;
    int n = 8;

    auto* mk = app.add_subcommand("make-corpus", "Build an unpaired toy corpus");
    mk->add_option("--config", config_path, "experiment config (degradation section)");
    mk->add_option("--data", data_dir, "directory of clean source images");
    mk->add_option("--out", out_dir, "corpus output root")->required();
    mk->add_option("--seed", seed, "degradation seed override");
    mk->add_option("--synthetic", synthetic,
                   "generate N procedural sources instead of --data");
    mk->add_option("--synthetic-size", synthetic_size, "side length of procedural sources");
    mk->add_option("--eval-count", eval_count, "hold out N sources as a paired eval set");

    auto* tr = app.add_subcommand("train", "Run the full three-stage training schedule");
    tr->add_option("--config", config_path, "experiment config")->required();
    tr->add_option("--out", out_dir, "output directory override");
    tr->add_option("--seed", seed, "seed override");
    tr->add_option("--resume", resume_path, "checkpoint to resume from");
    tr->add_option("--folds", folds_csv, "re-boosting fold counts, e.g. 2,4");
    tr->add_flag("--allow-config-mismatch", allow_mismatch,
                 "resume even if the checkpoint config hash differs");
    tr->add_flag("--quiet", quiet, "suppress per-epoch progress");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    ev->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    ev->add_option("--config", config_path,
                   "config (default: config.json beside the checkpoint dir)");
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_flag("--paired", paired, "dataset has clean/ references");
    ev->add_option("--folds", folds, "self-ensemble fold count (1,2,4,8)");
    ev->add_option("--out", out_dir, "output directory for tables or restored images");
    ev->add_flag("--allow-config-mismatch", allow_mismatch, "skip the config hash check");

    auto* ab = app.add_subcommand("ablate", "Train and compare ablation variants");
    ab->add_option("--config", config_path, "experiment config")->required();
    ab->add_option("--out", out_dir, "output directory override");
    ab->add_option("--seed", seed, "seed override");
    ab->add_option("--variant", variant, "run a single variant (V1..V5)");
    ab->add_flag("--quiet", quiet, "suppress per-epoch progress");

    auto* co = app.add_subcommand("cost", "Complexity bounds and measurements");
    co->add_option("--t0", t0, "baseline training epochs");
    co->add_option("--ts", ts, "replacement-stage epochs");
    co->add_option("--p0", p0, "cost units per baseline epoch");
    co->add_option("--pinf", p_inf, "cost units per restoration pass");
    co->add_option("--n", n, "self-ensemble fold count");
    co->add_option("--config", config_path, "config for empirical mode");
    co->add_flag("--empirical", empirical, "measure wall-clock step costs");
    co->add_option("--reps", reps, "repetitions per measurement");

    try {
        app.parse(argc, argv);
        check_device();
        if (mk->parsed())
            return cmd_make_corpus(config_path, data_dir, out_dir, seed, synthetic,
                                   synthetic_size, eval_count);
        if (tr->parsed())
            return cmd_train(config_path, out_dir, seed, resume_path, allow_mismatch,
                             folds_csv, quiet);
        if (ev->parsed())
            return cmd_eval(checkpoint_path, config_path, data_dir, paired, folds, out_dir,
                            allow_mismatch);
        if (ab->parsed()) return cmd_ablate(config_path, out_dir, seed, variant, quiet);
        if (co->parsed()) return cmd_cost(t0, ts, p0, p_inf, n, config_path, empirical, reps);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // help exits cleanly; parse errors are config errors
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
