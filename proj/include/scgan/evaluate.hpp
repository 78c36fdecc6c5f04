// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

#include "scgan/dataset.hpp"
#include "scgan/dihedral.hpp"
#include "scgan/metrics.hpp"
#include "scgan/networks.hpp"

namespace scgan {

// Self-ensemble inference: average the restorations of n dihedral views,
// each inverse-transformed back into place. n = 1 is a plain restoration,
// bit for bit. Views with odd rotations (n > 4) need square inputs.
inline Image self_ensemble_infer(const Restorer& r, const Image& y, int n) {
    if (n != 1 && n != 2 && n != 4 && n != 8)
        throw ConfigError("self_ensemble_infer: n must be one of {1,2,4,8}, got " +
                          std::to_string(n));
    const auto transforms = dihedral_fold_set(n);
    Image acc;
    for (const Dihedral t : transforms) {
        const Image view = dihedral_apply(y, t);
        const Image restored = restore_image(r, view);
        const Image aligned = dihedral_apply(restored, dihedral_inverse(t));
        if (acc.numel() == 0) {
            acc = aligned;
        } else {
            for (std::size_t i = 0; i < acc.data.size(); ++i)
                acc.data[i] += aligned.data[i];
        }
    }
    for (auto& v : acc.data) v *= 1.0 / n;
    return acc;
}

struct EvalRow {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalResult {
    double mean_psnr = 0.0;  // sentinel-valued entries are excluded; if every
                             // image hits the sentinel, the mean is the sentinel
    double mean_ssim = 0.0;
    std::vector<EvalRow> rows;
};

inline EvalResult aggregate_rows(std::vector<EvalRow> rows) {
    EvalResult out;
    double psnr_acc = 0.0, ssim_acc = 0.0;
    std::size_t finite = 0;
    for (const auto& r : rows) {
        ssim_acc += r.ssim;
        if (!is_infinite_psnr(r.psnr)) {
            psnr_acc += r.psnr;
            ++finite;
        }
    }
    out.mean_psnr = finite ? psnr_acc / static_cast<double>(finite) : kInfinitePsnr;
    out.mean_ssim = rows.empty() ? 0.0 : ssim_acc / static_cast<double>(rows.size());
    out.rows = std::move(rows);
    return out;
}

// Full-reference evaluation of any restoration function over a paired set.
using RestoreFn = std::function<Image(const Image&)>;

inline EvalResult evaluate_restoration(const RestoreFn& restore_fn, const PairedDataset& ds) {
    std::vector<EvalRow> rows;
    for (std::size_t i = 0; i < ds.names.size(); ++i) {
        const Image restored = restore_fn(ds.degraded[i]);
        const auto& ref = ds.clean[i];
        const SsimParams sp = fit_ssim_window(ref.height, ref.width);
        rows.push_back({ds.names[i], psnr(restored, ref), ssim(restored, ref, sp)});
    }
    return aggregate_rows(std::move(rows));
}

inline EvalResult evaluate_restorer(const Restorer& r, const PairedDataset& ds,
                                    int se_folds = 1) {
    return evaluate_restoration(
        [&](const Image& y) {
            return se_folds == 1 ? restore_image(r, y) : self_ensemble_infer(r, y, se_folds);
        },
        ds);
}

// Input quality of a paired set (the identity-restorer baseline).
inline EvalResult evaluate_identity(const PairedDataset& ds) {
    return evaluate_restoration([](const Image& y) { return y; }, ds);
}

// Result table mirroring the PSNR/SSIM benchmark layout; every row carries
// the checkpoint and config fingerprints needed to reproduce it.
struct MetricsTable {
    struct Row {
        std::string dataset;
        std::string method;
        double psnr = 0.0;
        double ssim = 0.0;
        std::uint64_t checkpoint_hash = 0;
        std::uint64_t config_hash = 0;
    };
    std::vector<Row> rows;

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows) {
            char ck[19], cf[19];
            std::snprintf(ck, sizeof(ck), "%016llx",
                          static_cast<unsigned long long>(r.checkpoint_hash));
            std::snprintf(cf, sizeof(cf), "%016llx",
                          static_cast<unsigned long long>(r.config_hash));
            arr.push_back({{"dataset", r.dataset},
                           {"method", r.method},
                           {"psnr", r.psnr},
                           {"ssim", r.ssim},
                           {"checkpoint_hash", ck},
                           {"config_hash", cf}});
        }
        return arr;
    }

    std::string to_text() const {
        std::string out =
            "dataset                method                 PSNR      SSIM     checkpoint        config\n";
        for (const auto& r : rows) {
            char line[256];
            std::snprintf(line, sizeof(line), "%-22s %-20s %8.4f  %7.5f  %016llx  %016llx\n",
                          r.dataset.c_str(), r.method.c_str(), r.psnr, r.ssim,
                          static_cast<unsigned long long>(r.checkpoint_hash),
                          static_cast<unsigned long long>(r.config_hash));
            out += line;
        }
        return out;
    }
};

}  // namespace scgan
