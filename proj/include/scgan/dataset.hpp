// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "scgan/image.hpp"
#include "scgan/png_io.hpp"
#include "scgan/rng.hpp"

namespace scgan {

namespace fs = std::filesystem;

// Two unrelated image pools. No pairing relation exists or is ever
// assumed; samplers draw indices and crop offsets independently per pool.
struct UnpairedDataset {
    std::vector<Image> clean;
    std::vector<Image> degraded;
    std::vector<std::string> clean_names;
    std::vector<std::string> degraded_names;

    int min_dim() const {
        int m = INT32_MAX;
        for (const auto* pool : {&clean, &degraded})
            for (const auto& img : *pool) m = std::min({m, img.height, img.width});
        return m;
    }
};

struct PatchBatch {
    std::vector<Image> clean_patches;
    std::vector<Image> degraded_patches;
    int patch_size = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<fs::path> sorted_files(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw ConfigError("dataset: not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) {
                  return a.filename().string() < b.filename().string();
              });
    return files;
}

inline void load_pool(const fs::path& dir, std::vector<Image>& pool,
                      std::vector<std::string>& names) {
    const auto files = sorted_files(dir);
    if (files.empty()) throw ConfigError("dataset: empty directory: " + dir.string());
    for (const auto& f : files) {
        try {
            pool.push_back(load_png(f).image);
            names.push_back(f.filename().string());
        } catch (const std::exception& e) {
            std::fprintf(stderr, "warning: skipping undecodable file %s (%s)\n",
                         f.string().c_str(), e.what());
        }
    }
    if (pool.empty())
        throw ConfigError("dataset: no decodable images in " + dir.string());
}

}  // namespace detail

// Loads both domains in lexicographic filename order. Undecodable files
// are skipped with a warning; an empty result is an error.
inline UnpairedDataset load_unpaired(const fs::path& clean_dir, const fs::path& degraded_dir) {
    UnpairedDataset ds;
    detail::load_pool(clean_dir, ds.clean, ds.clean_names);
    detail::load_pool(degraded_dir, ds.degraded, ds.degraded_names);
    return ds;
}

// Uniform unpaired crops: indices and offsets per domain come from one
// seeded stream, so a seed pins the batch bit-for-bit.
inline PatchBatch sample_batch(const UnpairedDataset& ds, int batch, int patch,
                               std::uint64_t seed) {
    if (batch < 1) throw ConfigError("sample_batch: batch must be >= 1");
    if (patch < 1 || patch > ds.min_dim())
        throw ConfigError("sample_batch: patch size " + std::to_string(patch) +
                          " exceeds smallest image dimension " +
                          std::to_string(ds.min_dim()));
    Rng rng(seed);
    PatchBatch out;
    out.patch_size = patch;
    out.seed = seed;
    auto draw = [&](const std::vector<Image>& pool) {
        const Image& img = pool[rng.below(pool.size())];
        const int y0 = static_cast<int>(rng.below(img.height - patch + 1));
        const int x0 = static_cast<int>(rng.below(img.width - patch + 1));
        return crop(img, y0, x0, patch, patch);
    };
    for (int i = 0; i < batch; ++i) out.clean_patches.push_back(draw(ds.clean));
    for (int i = 0; i < batch; ++i) out.degraded_patches.push_back(draw(ds.degraded));
    return out;
}

// Aligned clean/degraded pairs for validation and paired evaluation.
// Layout: <dir>/clean/*.png and <dir>/degraded/*.png with matching names.
struct PairedDataset {
    std::vector<Image> clean;
    std::vector<Image> degraded;
    std::vector<std::string> names;
};

inline PairedDataset load_paired(const fs::path& dir) {
    const fs::path cdir = dir / "clean", ddir = dir / "degraded";
    if (!fs::is_directory(cdir) || !fs::is_directory(ddir))
        throw ConfigError("paired dataset: expected " + cdir.string() + " and " +
                          ddir.string());
    PairedDataset out;
    for (const auto& f : detail::sorted_files(ddir)) {
        const fs::path ref = cdir / f.filename();
        if (!fs::exists(ref)) {
            std::fprintf(stderr, "warning: no clean reference for %s\n",
                         f.string().c_str());
            continue;
        }
        out.degraded.push_back(load_png(f).image);
        out.clean.push_back(load_png(ref).image);
        out.names.push_back(f.filename().string());
        if (!out.degraded.back().same_shape(out.clean.back()))
            throw ConfigError("paired dataset: shape mismatch for " +
                              f.filename().string());
    }
    if (out.names.empty())
        throw ConfigError("paired dataset: no aligned pairs under " + dir.string());
    return out;
}

}  // namespace scgan
