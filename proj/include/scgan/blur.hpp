// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "scgan/autodiff.hpp"
#include "scgan/image.hpp"

namespace scgan {

// Isotropic Gaussian low-pass kernel. The size is the odd side length in
// pixels; the standard deviation follows the usual size-to-sigma
// convention 0.3*((size-1)/2 - 1) + 0.8 so a size alone pins the kernel.
struct BlurKernel {
    int size = 0;
    double stddev = 0.0;
    Tensor weights;  // {size, size}, nonnegative, sums to 1
};

inline BlurKernel make_gaussian_kernel(int size) {
    if (size < 1 || size % 2 == 0)
        throw ConfigError("blur kernel size must be odd and positive, got " +
                          std::to_string(size));
    BlurKernel k;
    k.size = size;
    k.stddev = 0.3 * ((size - 1) / 2 - 1) + 0.8;
    k.weights = Tensor({size, size});
    const int r = size / 2;
    double total = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dy = y - r, dx = x - r;
            const double w = std::exp(-(dy * dy + dx * dx) / (2.0 * k.stddev * k.stddev));
            k.weights[static_cast<std::size_t>(y) * size + x] = w;
            total += w;
        }
    for (std::size_t i = 0; i < k.weights.numel(); ++i) k.weights[i] /= total;
    return k;
}

// Differentiable blur: reflect-101 padding followed by a valid depthwise
// convolution, so output shape equals input shape and constants are
// preserved right up to the border.
inline Var blur_var(const Var& x, const BlurKernel& k) {
    return dw_valid_conv(reflect_pad(x, k.size / 2), k.weights);
}

inline Image gaussian_blur(const Image& img, const BlurKernel& k) {
    if (k.size < 1 || k.size % 2 == 0)
        throw ConfigError("gaussian_blur: kernel size must be odd");
    const Var out = blur_var(constant(img.to_tensor()), k);
    return Image::from_tensor(out->value);
}

}  // namespace scgan
