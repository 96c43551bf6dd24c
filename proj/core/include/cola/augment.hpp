#pragma once

#include "cola/rng.hpp"
#include "cola/tensor.hpp"

namespace cola {

// Quarter-turn counter-clockwise: out(y, x) = in(x, N-1-y). Square images only.
Tensor rotate90(const Tensor& img);

// k quarter turns, k in [0, 3].
Tensor rotate_k(const Tensor& img, int k);

// Expands a batch (N,C,H,W) to (4N,C,H,W) grouped by rotation: the first N
// entries are the originals, the next N rotated once, and so on. rotation
// labels (0..3) are written to `labels`.
Tensor rotate_batch(const Tensor& batch, std::vector<int>& labels);

struct AugmentConfig {
    int pad = 4;               // reflect pad before random crop
    bool random_crop = true;
    bool hflip = true;
    scalar jitter = 0.25;      // brightness/contrast/saturation strength, 0 disables
};

// One randomly augmented view of a CHW image.
Tensor augment_image(const Tensor& img, const AugmentConfig& cfg, Rng& rng);

// Reflect-pad by `pad` on each side, then crop HxW at (oy, ox) of the padded image.
Tensor pad_crop(const Tensor& img, int pad, int oy, int ox);

Tensor hflip(const Tensor& img);

// Brightness, contrast, saturation scaled by independent factors in
// [1-strength, 1+strength], applied in that order, clamped to [0,1].
Tensor color_jitter(const Tensor& img, scalar brightness, scalar contrast, scalar saturation);

}  // namespace cola
