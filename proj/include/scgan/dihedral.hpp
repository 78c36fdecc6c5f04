// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>

#include "scgan/image.hpp"

namespace scgan {

// The 8 symmetries of the square: 4 rotations times an optional horizontal
// flip. Element (f, r) acts as "rotate CCW by r*90 degrees, then flip
// horizontally if f". Used for restoration-time self-ensembling and for
// fold augmentation of the frozen restorer's inputs.
enum class Dihedral : int {
    Identity = 0,
    Rot90 = 1,
    Rot180 = 2,
    Rot270 = 3,
    HFlip = 4,
    HFlipRot90 = 5,
    HFlipRot180 = 6,
    HFlipRot270 = 7,
};

inline int dihedral_rot(Dihedral t) { return static_cast<int>(t) & 3; }
inline bool dihedral_flip(Dihedral t) { return (static_cast<int>(t) & 4) != 0; }

inline Dihedral make_dihedral(int rot, bool flip) {
    return static_cast<Dihedral>((flip ? 4 : 0) | (rot & 3));
}

inline const char* dihedral_name(Dihedral t) {
    static const char* names[8] = {"identity", "rot90",       "rot180",
                                   "rot270",   "hflip",       "hflip_rot90",
                                   "hflip_rot180", "hflip_rot270"};
    return names[static_cast<int>(t)];
}

// Shape-preserving elements are the ones with an even rotation.
inline bool dihedral_preserves_shape(Dihedral t) { return (dihedral_rot(t) & 1) == 0; }

namespace detail {

inline Image rot90_ccw(const Image& img) {
    Image out(img.width, img.height, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                out.at(c, y, x) = img.at(c, x, img.width - 1 - y);
    return out;
}

inline Image hflip(const Image& img) {
    Image out(img.height, img.width, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    return out;
}

}  // namespace detail

// Exact pixel permutation; lossless. Rotation by an odd multiple of 90
// degrees swaps height and width, so those elements require square inputs.
inline Image dihedral_apply(const Image& img, Dihedral t) {
    if (!dihedral_preserves_shape(t) && img.height != img.width)
        throw ConfigError(std::string("dihedral_apply: ") + dihedral_name(t) +
                          " requires a square image, got " +
                          std::to_string(img.height) + "x" + std::to_string(img.width));
    Image out = img;
    for (int i = 0; i < dihedral_rot(t); ++i) out = detail::rot90_ccw(out);
    if (dihedral_flip(t)) out = detail::hflip(out);
    return out;
}

namespace detail {

// The composition table is derived once by applying element pairs to a
// labeled 4x4 probe; every element acts as a coordinate permutation, so a
// single probe identifies the product uniquely.
inline const std::array<std::array<Dihedral, 8>, 8>& dihedral_table() {
    static const std::array<std::array<Dihedral, 8>, 8> table = [] {
        Image probe(4, 4, 1);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) probe.at(0, y, x) = y * 4 + x;
        std::array<Image, 8> singles;
        for (int i = 0; i < 8; ++i)
            singles[i] = dihedral_apply(probe, static_cast<Dihedral>(i));
        std::array<std::array<Dihedral, 8>, 8> out{};
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) {
                const Image combined =
                    dihedral_apply(singles[i], static_cast<Dihedral>(j));
                bool found = false;
                for (int k = 0; k < 8; ++k)
                    if (bit_equal(combined, singles[k])) {
                        out[i][j] = static_cast<Dihedral>(k);
                        found = true;
                        break;
                    }
                if (!found) throw RuntimeFailure("dihedral: closure violated");
            }
        return out;
    }();
    return table;
}

}  // namespace detail

// compose(t1, t2): the element equal to applying t1 first, then t2.
inline Dihedral dihedral_compose(Dihedral t1, Dihedral t2) {
    return detail::dihedral_table()[static_cast<int>(t1)][static_cast<int>(t2)];
}

inline Dihedral dihedral_inverse(Dihedral t) {
    for (int k = 0; k < 8; ++k) {
        const auto cand = static_cast<Dihedral>(k);
        if (dihedral_compose(t, cand) == Dihedral::Identity) return cand;
    }
    throw RuntimeFailure("dihedral: no inverse found");  // unreachable
}

// Canonical fold ordering: the first four elements preserve shape, so fold
// counts up to 4 work on non-square images; counts above 4 need square
// inputs. Prefixes of this list give the nested k=2 / k=4 / k=8 sets.
inline const std::array<Dihedral, 8>& dihedral_fold_order() {
    static const std::array<Dihedral, 8> order = {
        Dihedral::Identity,   Dihedral::HFlip,       Dihedral::Rot180,
        Dihedral::HFlipRot180, Dihedral::Rot90,      Dihedral::Rot270,
        Dihedral::HFlipRot90, Dihedral::HFlipRot270,
    };
    return order;
}

inline std::vector<Dihedral> dihedral_fold_set(int k) {
    if (k < 1 || k > 8)
        throw ConfigError("fold count must be in [1,8], got " + std::to_string(k));
    const auto& order = dihedral_fold_order();
    return std::vector<Dihedral>(order.begin(), order.begin() + k);
}

}  // namespace scgan
