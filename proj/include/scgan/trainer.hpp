// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scgan/checkpoint.hpp"
#include "scgan/config.hpp"
#include "scgan/dataset.hpp"
#include "scgan/evaluate.hpp"
#include "scgan/losses.hpp"
#include "scgan/networks.hpp"
#include "scgan/optim.hpp"
#include "scgan/plot.hpp"
#include "scgan/prompt.hpp"

namespace scgan {

enum class Stage { Basic = 0, Sc = 1, RebSc = 2, Done = 3 };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Basic: return "basic";
        case Stage::Sc: return "sc";
        case Stage::RebSc: return "rebsc";
        case Stage::Done: return "done";
    }
    return "?";
}

// Line-delimited metrics log with fixed field names. nlohmann emits sorted
// keys and shortest-round-trip doubles, so identical runs produce
// byte-identical logs.
class MetricsLog {
public:
    void open_file(const std::filesystem::path& p) {
        file_.open(p, std::ios::app);
        if (!file_) throw RuntimeFailure("metrics: cannot open " + p.string());
    }

    void append(const json& j) {
        const std::string line = j.dump();
        history_ += line;
        history_ += '\n';
        if (file_.is_open()) file_ << line << "\n" << std::flush;
    }

    void step_record(const LossReport& r) {
        append(json{{"type", "step"},    {"step", r.step},       {"epoch", r.epoch},
                    {"stage", r.stage},  {"round", r.round},     {"folds", r.fold_count},
                    {"adv1", r.adv1},    {"adv2", r.adv2},       {"adv3", r.adv3},
                    {"adv4", r.adv4},    {"gan", r.gan_total},   {"bgm", r.bgm},
                    {"res", r.res},      {"res_sc", r.res_sc},   {"total", r.grand_total},
                    {"aborted", r.aborted || !r.all_finite()}});
    }

    void val_record(std::int64_t epoch, Stage stage, int round, double psnr_v, double ssim_v) {
        append(json{{"type", "val"},
                    {"epoch", epoch},
                    {"stage", stage_name(stage)},
                    {"round", round},
                    {"psnr", psnr_v},
                    {"ssim", ssim_v}});
    }

    void replace_record(std::int64_t epoch, int round, std::uint64_t pre, std::uint64_t post,
                        int count) {
        char pre_s[19], post_s[19];
        std::snprintf(pre_s, sizeof(pre_s), "%016llx", static_cast<unsigned long long>(pre));
        std::snprintf(post_s, sizeof(post_s), "%016llx", static_cast<unsigned long long>(post));
        append(json{{"type", "replace"},
                    {"epoch", epoch},
                    {"round", round},
                    {"pre_hash", pre_s},
                    {"post_hash", post_s},
                    {"count", count}});
    }

    const std::string& history() const { return history_; }
    void set_history(std::string h) { history_ = std::move(h); }

private:
    std::string history_;
    std::ofstream file_;
};

// Orchestrates the parallel two-branch step, the three-stage schedule
// (basic -> SC -> Reb-SC), restorer replacement, and checkpointing.
class Trainer {
public:
    explicit Trainer(ExperimentConfig cfg, bool quiet = true) : cfg_(std::move(cfg)), quiet_(quiet) {
        cfg_.validate();
        const int c = 3;
        gen_ = Generator(cfg_.networks.generator, hash_combine(cfg_.seed, 0x6e6eULL));
        disc_ = Discriminator(cfg_.networks.discriminator, hash_combine(cfg_.seed, 0xd15cULL));
        res_ = Restorer(cfg_.networks.restorer, hash_combine(cfg_.seed, 0x4e5ULL));
        stage0_ = std::make_shared<Stage0Conv>(c, cfg_.networks.stage0_kernel,
                                               cfg_.networks.stage0_mode);
        pl_ = PromptExtractor(stage0_, 1);

        NamedParams gen_group = gen_.named_parameters();
        for (auto& p : stage0_->named_parameters()) gen_group.push_back(p);
        opt_g_ = Adam(cfg_.optimizer, std::move(gen_group));
        opt_d_ = Adam(cfg_.optimizer, disc_.named_parameters());
        opt_r_ = Adam(cfg_.optimizer, res_.named_parameters());
    }

    // ---- wiring ----

    void load_data() {
        require(!cfg_.data.clean_dir.empty() && !cfg_.data.degraded_dir.empty(),
                "trainer: data.clean_dir and data.degraded_dir are required");
        data_ = load_unpaired(cfg_.data.clean_dir, cfg_.data.degraded_dir);
        if (!cfg_.data.val_dir.empty()) val_ = load_paired(cfg_.data.val_dir);
    }

    void set_data(UnpairedDataset ds, std::optional<PairedDataset> val) {
        data_ = std::move(ds);
        val_ = std::move(val);
    }

    void open_artifacts() {
        namespace fs = std::filesystem;
        require(!cfg_.out_dir.empty(), "trainer: out_dir is required for artifacts");
        out_dir_ = cfg_.out_dir;
        fs::create_directories(out_dir_ / "checkpoints");
        log_.open_file(out_dir_ / "metrics.jsonl");
        emit_files_ = true;
    }

    // ---- accessors ----

    const ExperimentConfig& config() const { return cfg_; }
    Stage stage() const { return stage_; }
    std::int64_t epoch() const { return epoch_; }
    std::int64_t global_step() const { return global_step_; }
    std::int64_t aborted_steps() const { return aborted_steps_; }
    int replacement_count() const { return replacement_count_; }
    const Restorer& restorer() const { return res_; }
    Restorer& restorer() { return res_; }
    const Generator& generator() const { return gen_; }
    const Discriminator& discriminator() const { return disc_; }
    const PromptExtractor& pl() const { return pl_; }
    PromptExtractor& pl() { return pl_; }
    MetricsLog& metrics() { return log_; }
    const std::vector<std::pair<int, double>>& round_psnr() const { return round_psnr_; }

    std::uint64_t gen_hash() const { return params_hash(gen_.named_parameters()); }
    std::uint64_t disc_hash() const { return params_hash(disc_.named_parameters()); }
    std::uint64_t res_hash() const { return res_.hash(); }

    int steps_per_epoch() const {
        if (cfg_.data.steps_per_epoch > 0) return cfg_.data.steps_per_epoch;
        const std::size_t n = std::max(data_.clean.size(), data_.degraded.size());
        return static_cast<int>((n + cfg_.data.batch_size - 1) / cfg_.data.batch_size);
    }

    // ---- the P2GAN optimizer step ----

    LossReport p2gan_step(const PatchBatch& batch) {
        require(!batch.clean_patches.empty() &&
                    batch.degraded_patches.size() == batch.clean_patches.size(),
                "p2gan_step: batch must hold clean and degraded patches");

        const Adam::Rollback rb_g = opt_g_.capture();
        const Adam::Rollback rb_d = opt_d_.capture();
        const Adam::Rollback rb_r = opt_r_.capture();

        LossReport rep;
        rep.step = global_step_;
        rep.epoch = static_cast<int>(epoch_);
        rep.round = round_ordinal_;
        rep.fold_count = pl_.fold_count();
        rep.stage = stage_name(stage_);

        try {
            run_step_phases(batch, rep);
        } catch (const NonFiniteError&) {
            opt_g_.restore(rb_g);
            opt_d_.restore(rb_d);
            opt_r_.restore(rb_r);
            zero_all_grads();
            ++aborted_steps_;
            rep.aborted = true;
        }
        return rep;
    }

private:
    void run_step_phases(const PatchBatch& batch, LossReport& rep) {
        const std::size_t B = batch.clean_patches.size();
        const bool use_bgm = cfg_.ablation.bgm_loss;
        const bool use_self = cfg_.ablation.self_synthesis_branch;
        const bool use_par = cfg_.ablation.parallel_branches;
        const LossWeights& w = cfg_.losses;
        const std::uint64_t gen_h0 = partition_check_ ? gen_hash() : 0;
        const std::uint64_t res_h0 = partition_check_ ? res_hash() : 0;
        const std::uint64_t pl_h0 =
            partition_check_ && !pl_.backend()->trainable() ? pl_.frozen_hash() : 0;

        // ---- synthesis graphs (Fig. 3 paths) ----
        struct Sample {
            Var x, y, y_r, x_r, d_y, d_x, x_usyn, x_ssyn, y_ssyn, y_usyn;
        };
        std::vector<Sample> s(B);
        for (std::size_t i = 0; i < B; ++i) {
            s[i].x = constant(batch.clean_patches[i].to_tensor());
            s[i].y = constant(batch.degraded_patches[i].to_tensor());
            s[i].y_r = res_.forward(s[i].y);
            s[i].d_y = cfg_.ablation.pl_module ? prompt_of(s[i].y) : s[i].y;
            s[i].x_usyn = gen_.forward(s[i].x, s[i].d_y);
            Var dx = cfg_.ablation.pl_module ? prompt_of(s[i].x_usyn) : s[i].x_usyn;
            s[i].d_x = cfg_.trainer.stop_grad_dx ? detach(dx) : dx;
            s[i].x_r = res_.forward(detach(s[i].x_usyn));
            if (use_self) s[i].x_ssyn = gen_.forward(detach(s[i].x_r), s[i].d_x);
            if (use_par && use_self) s[i].y_ssyn = gen_.forward(detach(s[i].y_r), s[i].d_y);
            if (use_par) s[i].y_usyn = gen_.forward(detach(s[i].y_r), s[i].d_x);
        }
        const bool have1 = use_par && use_self, have2 = true, have3 = use_par,
                   have4 = use_self;

        // ---- discriminator update ----
        Var adv1, adv2, adv3, adv4, real_term;
        for (std::size_t i = 0; i < B; ++i) {
            const Var score_real = disc_.forward(s[i].y);
            auto acc = [&](Var& slot, const Var& fake) {
                Var term = adv_loss_discriminator(score_real, disc_.forward(detach(fake)));
                slot = slot ? add(slot, term) : term;
            };
            if (have1) acc(adv1, s[i].y_ssyn);
            if (have2) acc(adv2, s[i].x_usyn);
            if (have3) acc(adv3, s[i].y_usyn);
            if (have4) acc(adv4, s[i].x_ssyn);
            if (cfg_.trainer.dedup_real_term) {
                Var rt = mean_all(square(add_c(score_real, -1.0)));
                real_term = real_term ? add(real_term, rt) : rt;
            }
        }
        const double inv_b = 1.0 / static_cast<double>(B);
        for (Var* v : {&adv1, &adv2, &adv3, &adv4})
            if (*v) *v = mul_c(*v, inv_b);
        rep.adv1 = adv1 ? adv1->value.item() : 0.0;
        rep.adv2 = adv2 ? adv2->value.item() : 0.0;
        rep.adv3 = adv3 ? adv3->value.item() : 0.0;
        rep.adv4 = adv4 ? adv4->value.item() : 0.0;
        rep.gan_total = ((rep.adv1 + rep.adv2) + rep.adv3) + rep.adv4;

        Var d_loss;
        if (cfg_.trainer.dedup_real_term) {
            // count the shared real term once, then every fake term
            d_loss = mul_c(real_term, inv_b);
            for (std::size_t i = 0; i < B; ++i)
                for (const Var* fake : {have1 ? &s[i].y_ssyn : nullptr, &s[i].x_usyn,
                                        have3 ? &s[i].y_usyn : nullptr,
                                        have4 ? &s[i].x_ssyn : nullptr})
                    if (fake)
                        d_loss = add(d_loss, mul_c(mean_all(square(disc_.forward(
                                                       detach(*fake)))),
                                                   inv_b));
        } else {
            for (Var v : {adv1, adv2, adv3, adv4})
                if (v) d_loss = d_loss ? add(d_loss, v) : v;
        }
        if (!d_loss->value.all_finite()) throw NonFiniteError("p2gan_step: d_loss");
        backward(d_loss);
        opt_d_.step();
        zero_all_grads();
        if (partition_check_) check_partition("D", gen_h0, res_h0, pl_h0, gen_hash(), res_hash());

        // ---- generator update (scores recomputed under the new D) ----
        Var g_adv;
        for (std::size_t i = 0; i < B; ++i)
            for (const Var* fake :
                 {have1 ? &s[i].y_ssyn : nullptr, &s[i].x_usyn,
                  have3 ? &s[i].y_usyn : nullptr, have4 ? &s[i].x_ssyn : nullptr})
                if (fake) {
                    Var term = adv_loss_generator(disc_.forward(*fake));
                    g_adv = g_adv ? add(g_adv, term) : term;
                }
        g_adv = mul_c(g_adv, inv_b);
        Var g_loss = g_adv;
        if (use_bgm) {
            Var bgm;
            for (std::size_t i = 0; i < B; ++i) {
                Var term = bgm_loss(s[i].x, s[i].x_usyn, w);
                bgm = bgm ? add(bgm, term) : term;
            }
            bgm = mul_c(bgm, inv_b);
            rep.bgm = bgm->value.item();
            g_loss = add(g_loss, mul_c(bgm, w.lambda_bgm));
        }
        if (!g_loss->value.all_finite()) throw NonFiniteError("p2gan_step: g_loss");
        backward(g_loss);
        opt_g_.step();
        zero_all_grads();
        if (partition_check_) check_partition("G", 0, res_h0, pl_h0, 0, res_hash());

        // ---- restorer update ----
        std::vector<std::pair<Var, Var>> pairs;
        for (std::size_t i = 0; i < B; ++i) pairs.emplace_back(s[i].x_r, s[i].x);
        if (cfg_.trainer.include_self_pairs && have1)
            for (std::size_t i = 0; i < B; ++i)
                pairs.emplace_back(res_.forward(detach(s[i].y_ssyn)), detach(s[i].y_r));
        Var base = res_loss(pairs, w);
        rep.res = base->value.item();
        Var r_loss = base;
        if (stage_ == Stage::Sc || stage_ == Stage::RebSc) {
            Var extra;
            for (std::size_t i = 0; i < B; ++i) {
                const Var r_fake1 = pl_.restore_frozen_ensembled(detach(s[i].x_usyn));
                const Var r_fake2 = pl_.restore_frozen_ensembled(s[i].y);
                Var term = res_sc_extra(s[i].x_r, s[i].y_r, r_fake1, r_fake2, w);
                extra = extra ? add(extra, term) : term;
            }
            r_loss = add(base, mul_c(extra, inv_b));
            rep.res_sc = r_loss->value.item();
        }
        if (!r_loss->value.all_finite()) throw NonFiniteError("p2gan_step: r_loss");
        backward(r_loss);
        opt_r_.step();
        zero_all_grads();
        if (partition_check_) check_partition("Res", 0, 0, pl_h0, 0, 0);

        rep.grand_total = rep.gan_total + w.lambda_bgm * rep.bgm +
                          (stage_ == Stage::Basic ? rep.res : rep.res_sc);
    }

    // Debug invariant: the D sub-step must leave G/Res untouched, the G
    // sub-step must leave Res untouched, and the frozen PL backend must
    // never move. Hashes of 0 mean "not checked at this point".
    void check_partition(const char* phase, std::uint64_t gen_before,
                         std::uint64_t res_before, std::uint64_t pl_before,
                         std::uint64_t gen_now, std::uint64_t res_now) const {
        if (gen_before && gen_now != gen_before)
            throw RuntimeFailure(std::string("partition: generator moved during ") + phase);
        if (res_before && res_now != res_before)
            throw RuntimeFailure(std::string("partition: restorer moved during ") + phase);
        if (pl_before && pl_.frozen_hash() != pl_before)
            throw RuntimeFailure(std::string("partition: frozen PL moved during ") + phase);
    }

public:
    void enable_partition_check(bool on) { partition_check_ = on; }

    // ---- stage orchestration (Algorithm-1 shape) ----

    void run_epoch() {
        const int spe = steps_per_epoch();
        double total_acc = 0.0;
        int counted = 0;
        for (int i = 0; i < spe; ++i) {
            const PatchBatch b =
                sample_batch(data_, cfg_.data.batch_size, cfg_.data.patch_size,
                             hash_combine(cfg_.seed, 0xba7c4e5ULL, static_cast<std::uint64_t>(
                                                                       global_step_)));
            const LossReport rep = p2gan_step(b);
            log_.step_record(rep);
            if (!rep.aborted && rep.all_finite()) {
                total_acc += rep.grand_total;
                ++counted;
            }
            ++global_step_;
        }
        ++epoch_;
        const auto val = validate();
        if (val) log_.val_record(epoch_, stage_, round_ordinal_, val->first, val->second);
        if (!quiet_) {
            std::printf("epoch %3lld  stage %-5s round %2d  mean_total %.5f",
                        static_cast<long long>(epoch_), stage_name(stage_), round_ordinal_,
                        counted ? total_acc / counted : 0.0);
            if (val) std::printf("  val_psnr %.3f  val_ssim %.4f", val->first, val->second);
            std::printf("\n");
            std::fflush(stdout);
        }
    }

    // Replace the frozen restorer inside the PL module with a snapshot of
    // the current restorer.
    void sc_replace() {
        require(stage_ == Stage::Sc || stage_ == Stage::RebSc,
                "sc_replace: only valid in the sc/rebsc stages");
        const std::uint64_t pre = pl_.frozen_hash();
        const int folds = pl_.fold_count();
        pl_.replace_backend(std::make_shared<SnapshotBackend>(snapshot(res_)));
        pl_.set_fold_count(folds);
        ++replacement_count_;
        log_.replace_record(epoch_, round_ordinal_, pre, pl_.frozen_hash(),
                            replacement_count_);
    }

    void run_basic_stage() {
        require(stage_ == Stage::Basic, "run_basic_stage: stage must be basic");
        while (epoch_ < cfg_.schedule.s1) run_epoch();
        stage_ = Stage::Sc;
        save_checkpoint("stage_basic");
    }

    void run_sc_stage() {
        require(stage_ == Stage::Sc, "run_sc_stage: stage must be sc");
        const auto budgets =
            split_budget(cfg_.schedule.s2 - cfg_.schedule.s1, cfg_.schedule.sc_iterations);
        for (int r = sc_round_done_ + 1; r <= cfg_.schedule.sc_iterations; ++r) {
            round_ordinal_ = r;
            sc_replace();
            for (int e = 0; e < budgets[r - 1]; ++e) run_epoch();
            record_round_psnr();
            sc_round_done_ = r;
            save_checkpoint("sc_round_" + two_digits(r));
            if (early_stop_triggered()) {
                epoch_ = cfg_.schedule.s2;  // charge the skipped rounds' epochs
                break;
            }
        }
        stage_ = Stage::RebSc;
        save_checkpoint("stage_sc");
    }

    void run_rebsc_stage() {
        require(stage_ == Stage::RebSc, "run_rebsc_stage: stage must be rebsc");
        const int rounds = static_cast<int>(cfg_.schedule.rebsc_folds.size());
        const auto budgets = split_budget(cfg_.schedule.s3 - cfg_.schedule.s2, rounds);
        for (int r = rebsc_round_done_ + 1; r <= rounds; ++r) {
            round_ordinal_ = cfg_.schedule.sc_iterations + r;
            sc_replace();
            pl_.set_fold_count(cfg_.schedule.rebsc_folds[r - 1]);
            for (int e = 0; e < budgets[r - 1]; ++e) run_epoch();
            record_round_psnr();
            rebsc_round_done_ = r;
            save_checkpoint("rebsc_round_" + two_digits(r));
        }
        stage_ = Stage::Done;
        save_checkpoint("final");
        emit_curve_plot();
    }

    // Full Algorithm-1 run; resumable from any stage/round boundary.
    void train() {
        if (stage_ == Stage::Basic) run_basic_stage();
        if (stage_ == Stage::Sc) run_sc_stage();
        if (stage_ == Stage::RebSc) run_rebsc_stage();
    }

    std::optional<std::pair<double, double>> validate() const {
        if (!val_) return std::nullopt;
        const EvalResult r = evaluate_restorer(res_, *val_);
        return std::make_pair(r.mean_psnr, r.mean_ssim);
    }

    // ---- checkpointing ----

    Checkpoint make_checkpoint() const {
        Checkpoint ck;
        ck.config_hash = cfg_.hash();
        ck.set_counter("epoch", epoch_);
        ck.set_counter("stage", static_cast<int>(stage_));
        ck.set_counter("sc_round", sc_round_done_);
        ck.set_counter("rebsc_round", rebsc_round_done_);
        ck.set_counter("round_ordinal", round_ordinal_);
        ck.set_counter("global_step", global_step_);
        ck.set_counter("aborted_steps", aborted_steps_);
        ck.set_counter("replacement_count", replacement_count_);
        ck.set_counter("fold_count", pl_.fold_count());
        const bool snapshot_pl = std::string(pl_.backend()->kind()) == "snapshot";
        ck.set_counter("pl_kind", snapshot_pl ? 1 : 0);

        for (const auto& [name, p] : gen_.named_parameters()) ck.tensors.emplace_back(name, p->value);
        for (const auto& [name, p] : disc_.named_parameters()) ck.tensors.emplace_back(name, p->value);
        for (const auto& [name, p] : res_.named_parameters()) ck.tensors.emplace_back(name, p->value);
        for (const auto& [name, p] : stage0_->named_parameters()) ck.tensors.emplace_back(name, p->value);
        if (snapshot_pl)
            for (const auto& [name, p] : pl_.backend()->named_parameters())
                ck.tensors.emplace_back("snap." + name, p->value);
        append_adam(ck, "adam.g", opt_g_);
        append_adam(ck, "adam.d", opt_d_);
        append_adam(ck, "adam.r", opt_r_);

        if (!round_psnr_.empty()) {
            Tensor curve({static_cast<int>(round_psnr_.size()), 2});
            for (std::size_t i = 0; i < round_psnr_.size(); ++i) {
                curve[2 * i] = round_psnr_[i].first;
                curve[2 * i + 1] = round_psnr_[i].second;
            }
            ck.tensors.emplace_back("sc_curve", std::move(curve));
        }
        ck.metrics_history = log_.history();
        return ck;
    }

    void restore_checkpoint(const Checkpoint& ck) {
        epoch_ = ck.counter("epoch");
        stage_ = static_cast<Stage>(ck.counter("stage"));
        sc_round_done_ = static_cast<int>(ck.counter("sc_round"));
        rebsc_round_done_ = static_cast<int>(ck.counter("rebsc_round"));
        round_ordinal_ = static_cast<int>(ck.counter("round_ordinal"));
        global_step_ = ck.counter("global_step");
        aborted_steps_ = ck.counter("aborted_steps");
        replacement_count_ = static_cast<int>(ck.counter("replacement_count"));

        auto fetch = [&](const std::string& name) -> const Tensor& {
            for (const auto& [n, t] : ck.tensors)
                if (n == name) return t;
            throw RuntimeFailure("checkpoint: missing tensor " + name);
        };
        for (auto& [name, p] : gen_.named_parameters()) p->value = fetch(name);
        for (auto& [name, p] : disc_.named_parameters()) p->value = fetch(name);
        for (auto& [name, p] : res_.named_parameters()) p->value = fetch(name);
        for (auto& [name, p] : stage0_->named_parameters()) p->value = fetch(name);
        if (ck.counter("pl_kind") == 1) {
            Restorer tmp(cfg_.networks.restorer, 0, true);
            for (auto& [name, p] : tmp.named_parameters()) p->value = fetch("snap." + name);
            pl_.replace_backend(std::make_shared<SnapshotBackend>(snapshot(tmp)));
        } else {
            pl_.replace_backend(stage0_);
        }
        pl_.set_fold_count(static_cast<int>(ck.counter("fold_count")));
        restore_adam(ck, "adam.g", opt_g_);
        restore_adam(ck, "adam.d", opt_d_);
        restore_adam(ck, "adam.r", opt_r_);

        round_psnr_.clear();
        for (const auto& [n, t] : ck.tensors)
            if (n == "sc_curve")
                for (int i = 0; i < t.dim(0); ++i)
                    round_psnr_.emplace_back(static_cast<int>(t[2 * i]), t[2 * i + 1]);
        log_.set_history(ck.metrics_history);
    }

    void save_checkpoint(const std::string& label) {
        if (!emit_files_) return;
        make_checkpoint().save(out_dir_ / "checkpoints" / (label + ".ckpt"));
        log_.append(json{{"type", "checkpoint"}, {"label", label}, {"epoch", epoch_}});
    }

private:
    static std::string two_digits(int v) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%02d", v);
        return buf;
    }

    static std::vector<int> split_budget(int total, int parts) {
        require(total >= 0 && parts >= 1, "schedule: bad budget split");
        std::vector<int> out(parts, total / parts);
        out.back() += total % parts;  // remainder goes to the last round
        return out;
    }

    Var prompt_of(const Var& y) const {
        if (pl_.fold_count() == 1) return pl_.extract(y);
        if (cfg_.trainer.rebsc_prompt_folds) return pl_.extract_ensembled(y);
        PromptExtractor plain(pl_.backend(), 1);
        return plain.extract(y);
    }

    void zero_all_grads() {
        opt_g_.zero_grad();
        opt_d_.zero_grad();
        opt_r_.zero_grad();
    }

    void record_round_psnr() {
        const auto val = validate();
        if (val) round_psnr_.emplace_back(round_ordinal_, val->first);
    }

    bool early_stop_triggered() const {
        if (!cfg_.schedule.early_stop_gain_db || round_psnr_.size() < 2) return false;
        const double gain = round_psnr_[round_psnr_.size() - 1].second -
                            round_psnr_[round_psnr_.size() - 2].second;
        return gain < *cfg_.schedule.early_stop_gain_db;
    }

    void emit_curve_plot() {
        if (!emit_files_ || round_psnr_.empty()) return;
        PlotSeries series;
        series.label = "validation PSNR";
        for (const auto& [round, v] : round_psnr_) {
            series.x.push_back(round);
            series.y.push_back(v);
        }
        write_line_plot_svg(out_dir_ / "sc_curve.svg", "Validation PSNR per replacement round",
                            "round", "PSNR (dB)", {series});
    }

    static void append_adam(Checkpoint& ck, const std::string& prefix, const Adam& opt) {
        const auto& st = opt.state();
        const auto& params = opt.params();
        for (std::size_t i = 0; i < params.size(); ++i) {
            ck.tensors.emplace_back(prefix + ".m." + params[i].first, st.m[i]);
            ck.tensors.emplace_back(prefix + ".v." + params[i].first, st.v[i]);
            ck.set_counter(prefix + ".t." + params[i].first, st.t[i]);
        }
    }

    static void restore_adam(const Checkpoint& ck, const std::string& prefix, Adam& opt) {
        auto fetch = [&](const std::string& name) -> const Tensor& {
            for (const auto& [n, t] : ck.tensors)
                if (n == name) return t;
            throw RuntimeFailure("checkpoint: missing tensor " + name);
        };
        auto& st = opt.mutable_state();
        const auto& params = opt.params();
        for (std::size_t i = 0; i < params.size(); ++i) {
            st.m[i] = fetch(prefix + ".m." + params[i].first);
            st.v[i] = fetch(prefix + ".v." + params[i].first);
            st.t[i] = ck.counter(prefix + ".t." + params[i].first);
        }
    }

    ExperimentConfig cfg_;
    bool quiet_;
    UnpairedDataset data_;
    std::optional<PairedDataset> val_;
    Generator gen_;
    Discriminator disc_;
    Restorer res_;
    std::shared_ptr<Stage0Conv> stage0_;
    PromptExtractor pl_;
    Adam opt_g_, opt_d_, opt_r_;
    Stage stage_ = Stage::Basic;
    std::int64_t epoch_ = 0;
    int sc_round_done_ = 0;
    int rebsc_round_done_ = 0;
    int round_ordinal_ = 0;
    std::int64_t global_step_ = 0;
    std::int64_t aborted_steps_ = 0;
    int replacement_count_ = 0;
    bool partition_check_ = false;
    MetricsLog log_;
    std::vector<std::pair<int, double>> round_psnr_;
    std::filesystem::path out_dir_;
    bool emit_files_ = false;
};

// Builds a trainer from a config, loads data, runs the full three-stage
// schedule, and returns the final checkpoint path.
inline std::filesystem::path train(const ExperimentConfig& cfg, bool quiet = false) {
    Trainer t(cfg, quiet);
    t.load_data();
    t.open_artifacts();
    cfg.save(std::filesystem::path(cfg.out_dir) / "config.json");
    t.train();
    return std::filesystem::path(cfg.out_dir) / "checkpoints" / "final.ckpt";
}

// Resume from a checkpoint; the config hash must match unless explicitly
// overridden.
inline Trainer resume_trainer(const ExperimentConfig& cfg, const std::filesystem::path& ckpt,
                              bool allow_config_mismatch = false, bool quiet = true) {
    const Checkpoint ck = Checkpoint::load(ckpt);
    if (ck.config_hash != cfg.hash() && !allow_config_mismatch)
        throw ConfigError("resume: checkpoint config hash mismatch (pass the override flag "
                          "to load anyway)");
    Trainer t(cfg, quiet);
    t.restore_checkpoint(ck);
    return t;
}

}  // namespace scgan
