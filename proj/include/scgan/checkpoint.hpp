// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "scgan/errors.hpp"
#include "scgan/rng.hpp"
#include "scgan/tensor.hpp"

namespace scgan {

// Versioned binary training-state container: named parameter and optimizer
// tensors, integer counters, and the metrics history. Doubles are stored
// raw (little-endian), which is what makes checkpoint-resume reproduce
// subsequent steps bit-for-bit.
struct Checkpoint {
    static constexpr char kMagic[8] = {'S', 'C', 'G', 'A', 'N', 'C', 'P', '1'};
    static constexpr std::uint32_t kVersion = 1;

    std::uint64_t config_hash = 0;
    std::vector<std::pair<std::string, std::int64_t>> counters;
    std::vector<std::pair<std::string, Tensor>> tensors;
    std::string metrics_history;

    void set_counter(const std::string& name, std::int64_t v) {
        for (auto& [n, old] : counters)
            if (n == name) {
                old = v;
                return;
            }
        counters.emplace_back(name, v);
    }

    std::int64_t counter(const std::string& name) const {
        for (const auto& [n, v] : counters)
            if (n == name) return v;
        throw RuntimeFailure("checkpoint: missing counter " + name);
    }

    bool has_tensor_prefix(const std::string& prefix) const {
        for (const auto& [n, t] : tensors)
            if (n.rfind(prefix, 0) == 0) return true;
        return false;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw RuntimeFailure("checkpoint: cannot write " + path.string());
        out.write(kMagic, sizeof(kMagic));
        write_u32(out, kVersion);
        write_u64(out, config_hash);

        write_u32(out, static_cast<std::uint32_t>(counters.size()));
        for (const auto& [name, v] : counters) {
            write_str(out, name);
            write_u64(out, static_cast<std::uint64_t>(v));
        }
        write_u32(out, static_cast<std::uint32_t>(tensors.size()));
        for (const auto& [name, t] : tensors) {
            write_str(out, name);
            write_u32(out, static_cast<std::uint32_t>(t.rank()));
            for (std::size_t i = 0; i < t.rank(); ++i)
                write_u32(out, static_cast<std::uint32_t>(t.dim(i)));
            out.write(reinterpret_cast<const char*>(t.data()),
                      static_cast<std::streamsize>(t.numel() * sizeof(double)));
        }
        write_str64(out, metrics_history);
        if (!out) throw RuntimeFailure("checkpoint: write failed for " + path.string());
    }

    static Checkpoint load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw RuntimeFailure("checkpoint: cannot read " + path.string());
        char magic[8];
        in.read(magic, sizeof(magic));
        if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
            throw RuntimeFailure("checkpoint: bad magic in " + path.string());
        Checkpoint ck;
        const std::uint32_t version = read_u32(in);
        if (version != kVersion)
            throw RuntimeFailure("checkpoint: unsupported version " +
                                 std::to_string(version));
        ck.config_hash = read_u64(in);
        const std::uint32_t n_counters = read_u32(in);
        for (std::uint32_t i = 0; i < n_counters; ++i) {
            std::string name = read_str(in);
            ck.counters.emplace_back(std::move(name),
                                     static_cast<std::int64_t>(read_u64(in)));
        }
        const std::uint32_t n_tensors = read_u32(in);
        for (std::uint32_t i = 0; i < n_tensors; ++i) {
            std::string name = read_str(in);
            const std::uint32_t rank = read_u32(in);
            if (rank == 0 || rank > 8)
                throw RuntimeFailure("checkpoint: corrupt tensor rank");
            std::vector<int> shape(rank);
            for (auto& d : shape) d = static_cast<int>(read_u32(in));
            Tensor t(shape);
            in.read(reinterpret_cast<char*>(t.data()),
                    static_cast<std::streamsize>(t.numel() * sizeof(double)));
            ck.tensors.emplace_back(std::move(name), std::move(t));
        }
        ck.metrics_history = read_str64(in);
        if (!in) throw RuntimeFailure("checkpoint: truncated file " + path.string());
        return ck;
    }

    std::uint64_t file_hash() const {
        std::uint64_t h = fnv1a(&config_hash, sizeof(config_hash));
        for (const auto& [n, v] : counters) {
            h = fnv1a(n, h);
            h = fnv1a(&v, sizeof(v), h);
        }
        for (const auto& [n, t] : tensors) {
            h = fnv1a(n, h);
            h = fnv1a(t.data(), t.numel() * sizeof(double), h);
        }
        return fnv1a(metrics_history, h);
    }

private:
    static void write_u32(std::ostream& out, std::uint32_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    static void write_u64(std::ostream& out, std::uint64_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    static void write_str(std::ostream& out, const std::string& s) {
        write_u32(out, static_cast<std::uint32_t>(s.size()));
        out.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    static void write_str64(std::ostream& out, const std::string& s) {
        write_u64(out, s.size());
        out.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    static std::uint32_t read_u32(std::istream& in) {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        return v;
    }
    static std::uint64_t read_u64(std::istream& in) {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        return v;
    }
    static std::string read_str(std::istream& in) {
        const std::uint32_t n = read_u32(in);
        if (n > (1u << 20)) throw RuntimeFailure("checkpoint: corrupt string length");
        std::string s(n, '\0');
        in.read(s.data(), n);
        return s;
    }
    static std::string read_str64(std::istream& in) {
        const std::uint64_t n = read_u64(in);
        if (n > (1ull << 32)) throw RuntimeFailure("checkpoint: corrupt blob length");
        std::string s(static_cast<std::size_t>(n), '\0');
        in.read(s.data(), static_cast<std::streamsize>(n));
        return s;
    }
};

}  // namespace scgan
