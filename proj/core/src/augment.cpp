#include "cola/augment.hpp"

#include <algorithm>
#include <cmath>

#include "cola/common.hpp"

namespace cola {

Tensor rotate90(const Tensor& img) {
    if (img.rank() != 3 || img.dim(1) != img.dim(2))
        throw ConfigError("rotate90 expects square CHW image");
    const int C = img.dim(0), N = img.dim(1);
    Tensor out({C, N, N});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x) out.at3(c, y, x) = img.at3(c, x, N - 1 - y);
    return out;
}

Tensor rotate_k(const Tensor& img, int k) {
    if (k < 0 || k > 3) throw ConfigError("rotate_k: k must be in [0, 3]");
    Tensor out = img;
    for (int i = 0; i < k; ++i) out = rotate90(out);
    return out;
}

Tensor rotate_batch(const Tensor& batch, std::vector<int>& labels) {
    if (batch.rank() != 4) throw ConfigError("rotate_batch expects NCHW");
    const int N = batch.dim(0), C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
    if (H != W) throw ConfigError("rotate_batch expects square images");
    Tensor out({4 * N, C, H, W});
    labels.assign(static_cast<std::size_t>(4) * N, 0);
    const std::size_t imsz = static_cast<std::size_t>(C) * H * W;
    for (int k = 0; k < 4; ++k)
        for (int n = 0; n < N; ++n) {
            Tensor img({C, H, W});
            std::copy_n(batch.data() + n * imsz, imsz, img.data());
            Tensor rot = rotate_k(img, k);
            std::copy_n(rot.data(), imsz, out.data() + (static_cast<std::size_t>(k) * N + n) * imsz);
            labels[static_cast<std::size_t>(k) * N + n] = k;
        }
    return out;
}

Tensor pad_crop(const Tensor& img, int pad, int oy, int ox) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (pad < 0 || pad >= std::min(H, W))
        throw ConfigError("pad_crop: pad out of range");
    if (oy < 0 || ox < 0 || oy > 2 * pad || ox > 2 * pad)
        throw ConfigError("pad_crop: offset out of range");
    auto reflect = [](int i, int n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
        return i;
    };
    Tensor out({C, H, W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                out.at3(c, y, x) =
                    img.at3(c, reflect(y + oy - pad, H), reflect(x + ox - pad, W));
    return out;
}

Tensor hflip(const Tensor& img) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Tensor out({C, H, W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) out.at3(c, y, x) = img.at3(c, y, W - 1 - x);
    return out;
}

Tensor color_jitter(const Tensor& img, scalar brightness, scalar contrast, scalar saturation) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Tensor out = img;
    for (scalar& v : out.vec()) v *= brightness;

    scalar mean = 0;
    for (scalar v : out.vec()) mean += v;
    mean /= out.size();
    for (scalar& v : out.vec()) v = mean + contrast * (v - mean);

    if (C == 3) {
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                scalar gray = (out.at3(0, y, x) + out.at3(1, y, x) + out.at3(2, y, x)) / 3.0;
                for (int c = 0; c < C; ++c)
                    out.at3(c, y, x) = gray + saturation * (out.at3(c, y, x) - gray);
            }
    }
    for (scalar& v : out.vec()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

Tensor augment_image(const Tensor& img, const AugmentConfig& cfg, Rng& rng) {
    Tensor out = img;
    if (cfg.random_crop && cfg.pad > 0) {
        int oy = static_cast<int>(rng.index(2 * cfg.pad + 1));
        int ox = static_cast<int>(rng.index(2 * cfg.pad + 1));
        out = pad_crop(out, cfg.pad, oy, ox);
    }
    if (cfg.hflip && rng.bernoulli(0.5)) out = hflip(out);
    if (cfg.jitter > 0) {
        scalar b = rng.uniform(1.0 - cfg.jitter, 1.0 + cfg.jitter);
        scalar c = rng.uniform(1.0 - cfg.jitter, 1.0 + cfg.jitter);
        scalar s = rng.uniform(1.0 - cfg.jitter, 1.0 + cfg.jitter);
        out = color_jitter(out, b, c, s);
    }
    return out;
}

}  // namespace cola
