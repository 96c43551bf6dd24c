#pragma once

#include <functional>
#include <vector>

#include "cola/tensor.hpp"

namespace cola {

// Laplacian-pyramid reconstruction loss. `levels` is the number of band-pass
// levels; the low-pass residual participates in reconstruction but carries no
// loss weight of its own (the full-resolution term covers it).
struct PyramidConfig {
    int levels = 3;
    scalar gamma = 1.0;
};

// Gaussian smoothing with the binomial 5-tap [1,4,6,4,1]/16 applied
// separably, mirror-reflected at the borders. `scale` multiplies the kernel.
Tensor smooth2d(const Tensor& img, scalar scale = 1.0);

// Even-index decimation per spatial dim; output dims are ceil(n / 2).
Tensor down2d(const Tensor& img);

// Zero-stuff to (height, width) then smooth with the doubled kernel per dim.
Tensor expand2d(const Tensor& img, int height, int width);

// Returns [L_0, ..., L_{levels-1}, G_levels]: band-pass levels at decreasing
// resolution plus the low-pass residual.
std::vector<Tensor> laplacian_pyramid(const Tensor& img, int levels);

// Exact inverse of laplacian_pyramid up to floating-point roundoff.
Tensor collapse_pyramid(const std::vector<Tensor>& pyramid);

// loss = mean|x - y| + gamma * sum_i 2^{-2i} mean|L_i(x) - L_i(y)|
scalar lap_loss(const Tensor& x, const Tensor& y, const PyramidConfig& cfg);

// Same value; also accumulates d(loss)/dx into grad_x (which must already be
// shaped like x; contents are overwritten).
scalar lap_loss_grad(const Tensor& x, const Tensor& y, const PyramidConfig& cfg, Tensor& grad_x);

// One frozen feature map with its vector-Jacobian product: backward(x, g)
// returns d<g, forward(x)>/dx for a cotangent g shaped like forward(x).
// backward may be left empty when only loss values are needed.
struct PerceptualLayer {
    std::function<Tensor(const Tensor&)> forward;
    std::function<Tensor(const Tensor&, const Tensor&)> backward;
};

// Ordered frozen feature maps supplied by the caller (e.g. layers of an
// externally trained network); kept fixed during training. With no layers the
// loss reduces to plain pixel L1.
struct PerceptualExtractor {
    std::vector<PerceptualLayer> layers;
};

// loss = mean|x - y| + sum_i mean|l_i(x) - l_i(y)|
scalar perceptual_loss(const Tensor& x, const Tensor& y, const PerceptualExtractor& extractor);

// Same value; writes d(loss)/dx into grad_x (overwritten; must be shaped like
// x). Every layer needs its backward set.
scalar perceptual_loss_grad(const Tensor& x, const Tensor& y, const PerceptualExtractor& extractor,
                            Tensor& grad_x);

}  // namespace cola
