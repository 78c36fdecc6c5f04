// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "scgan/tensor.hpp"

namespace scgan {

// Planar {C,H,W} raster with intensities in [0,1]. The universal currency:
// clean images, degraded images, syntheses and restorations all use it.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;  // planar, channel-major

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {
        if (h <= 0 || w <= 0 || (c != 1 && c != 3))
            throw ConfigError("image: invalid shape h=" + std::to_string(h) +
                              " w=" + std::to_string(w) + " c=" + std::to_string(c));
    }

    double& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    std::size_t numel() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Image& clamp01() {
        for (double& v : data) v = std::min(std::max(v, 0.0), 1.0);
        return *this;
    }

    Tensor to_tensor() const {
        return Tensor({channels, height, width}, data);
    }

    static Image from_tensor(const Tensor& t) {
        if (t.rank() != 3) throw ConfigError("image: tensor must be {C,H,W}");
        Image img;
        img.channels = t.dim(0);
        img.height = t.dim(1);
        img.width = t.dim(2);
        img.data.assign(t.data(), t.data() + t.numel());
        if (img.channels != 1 && img.channels != 3)
            throw ConfigError("image: unsupported channel count " +
                              std::to_string(img.channels));
        return img;
    }
};

inline Image crop(const Image& img, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > img.height || x0 + w > img.width)
        throw ConfigError("crop: window out of bounds");
    Image out(h, w, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    return out;
}

inline bool bit_equal(const Image& a, const Image& b) {
    return a.same_shape(b) && a.data == b.data;
}

}  // namespace scgan
