#include "cola/pyramid.hpp"

#include <algorithm>
#include <cmath>

#include "cola/common.hpp"

namespace cola {

namespace {

constexpr scalar kTap[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

// y[i] = scale * sum_t kTap[t+2] * x[reflect(i+t)]
void smooth_line(const scalar* x, int n, int sx, scalar* y, int sy, scalar scale) {
    for (int i = 0; i < n; ++i) {
        scalar acc = 0;
        for (int t = -2; t <= 2; ++t) acc += kTap[t + 2] * x[reflect(i + t, n) * sx];
        y[i * sy] = acc * scale;
    }
}

// Exact transpose of smooth_line: adj[reflect(i+t)] += scale * kTap * g[i].
void smooth_line_adj(const scalar* g, int n, int sg, scalar* adj, int sa, scalar scale) {
    for (int i = 0; i < n; ++i) {
        scalar gv = g[i * sg] * scale;
        for (int t = -2; t <= 2; ++t) adj[reflect(i + t, n) * sa] += kTap[t + 2] * gv;
    }
}

void check_chw(const Tensor& img, const char* who) {
    if (img.rank() != 3) throw ConfigError(std::string(who) + " expects a CHW tensor");
}

Tensor smooth_height(const Tensor& img, scalar scale, bool adjoint) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Tensor out({C, H, W});
    if (adjoint) out.fill(0.0);
    for (int c = 0; c < C; ++c)
        for (int x = 0; x < W; ++x) {
            const scalar* src = img.data() + (static_cast<std::size_t>(c) * H) * W + x;
            scalar* dst = out.data() + (static_cast<std::size_t>(c) * H) * W + x;
            if (adjoint)
                smooth_line_adj(src, H, W, dst, W, scale);
            else
                smooth_line(src, H, W, dst, W, scale);
        }
    return out;
}

Tensor smooth_width(const Tensor& img, scalar scale, bool adjoint) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Tensor out({C, H, W});
    if (adjoint) out.fill(0.0);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y) {
            const scalar* src = img.data() + (static_cast<std::size_t>(c) * H + y) * W;
            scalar* dst = out.data() + (static_cast<std::size_t>(c) * H + y) * W;
            if (adjoint)
                smooth_line_adj(src, W, 1, dst, 1, scale);
            else
                smooth_line(src, W, 1, dst, 1, scale);
        }
    return out;
}

Tensor smooth2d_adj(const Tensor& g, scalar scale) {
    return smooth_height(smooth_width(g, scale, true), 1.0, true);
}

Tensor down2d_adj(const Tensor& g, int height, int width) {
    const int C = g.dim(0), h = g.dim(1), w = g.dim(2);
    Tensor out({C, height, width});
    out.fill(0.0);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at3(c, 2 * y, 2 * x) = g.at3(c, y, x);
    return out;
}

Tensor zero_stuff(const Tensor& img, int height, int width) {
    const int C = img.dim(0), h = img.dim(1), w = img.dim(2);
    Tensor out({C, height, width});
    out.fill(0.0);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at3(c, 2 * y, 2 * x) = img.at3(c, y, x);
    return out;
}

// adjoint of expand2d: gather even indices of the doubled-kernel smooth adjoint
Tensor expand2d_adj(const Tensor& g) {
    const int C = g.dim(0), H = g.dim(1), W = g.dim(2);
    Tensor z = smooth_height(smooth_width(g, 2.0, true), 2.0, true);
    const int h = (H + 1) / 2, w = (W + 1) / 2;
    Tensor out({C, h, w});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at3(c, y, x) = z.at3(c, 2 * y, 2 * x);
    return out;
}

scalar mean_abs_diff(const Tensor& a, const Tensor& b) {
    scalar acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.vec()[i] - b.vec()[i]);
    return acc / static_cast<scalar>(a.size());
}

// d(mean|a - b|)/da, written into g (overwrites), scaled by weight
void sign_grad(const Tensor& a, const Tensor& b, scalar weight, Tensor& g) {
    scalar s = weight / static_cast<scalar>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        scalar d = a.vec()[i] - b.vec()[i];
        g.vec()[i] = d > 0 ? s : (d < 0 ? -s : 0.0);
    }
}

}  // namespace

Tensor smooth2d(const Tensor& img, scalar scale) {
    check_chw(img, "smooth2d");
    return smooth_width(smooth_height(img, scale, false), 1.0, false);
}

Tensor down2d(const Tensor& img) {
    check_chw(img, "down2d");
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    const int h = (H + 1) / 2, w = (W + 1) / 2;
    Tensor out({C, h, w});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at3(c, y, x) = img.at3(c, 2 * y, 2 * x);
    return out;
}

Tensor expand2d(const Tensor& img, int height, int width) {
    check_chw(img, "expand2d");
    if (img.dim(1) != (height + 1) / 2 || img.dim(2) != (width + 1) / 2)
        throw ConfigError("expand2d: input dims do not halve the target dims");
    Tensor z = zero_stuff(img, height, width);
    return smooth_width(smooth_height(z, 2.0, false), 2.0, false);
}

std::vector<Tensor> laplacian_pyramid(const Tensor& img, int levels) {
    check_chw(img, "laplacian_pyramid");
    if (levels < 1) throw ConfigError("laplacian_pyramid needs levels >= 1");
    if (std::min(img.dim(1), img.dim(2)) < (1 << levels))
        throw ConfigError("image too small for " + std::to_string(levels) + " pyramid levels");
    std::vector<Tensor> pyramid;
    Tensor g = img;
    for (int i = 0; i < levels; ++i) {
        Tensor next = down2d(smooth2d(g));
        Tensor up = expand2d(next, g.dim(1), g.dim(2));
        Tensor band({g.dim(0), g.dim(1), g.dim(2)});
        for (std::size_t j = 0; j < g.size(); ++j) band.vec()[j] = g.vec()[j] - up.vec()[j];
        pyramid.push_back(std::move(band));
        g = std::move(next);
    }
    pyramid.push_back(std::move(g));
    return pyramid;
}

Tensor collapse_pyramid(const std::vector<Tensor>& pyramid) {
    if (pyramid.size() < 2) throw ConfigError("collapse_pyramid needs bands plus residual");
    Tensor g = pyramid.back();
    for (int i = static_cast<int>(pyramid.size()) - 2; i >= 0; --i) {
        const Tensor& band = pyramid[i];
        Tensor up = expand2d(g, band.dim(1), band.dim(2));
        for (std::size_t j = 0; j < up.size(); ++j) up.vec()[j] += band.vec()[j];
        g = std::move(up);
    }
    return g;
}

scalar lap_loss(const Tensor& x, const Tensor& y, const PyramidConfig& cfg) {
    check_chw(x, "lap_loss");
    if (!x.same_shape(y)) throw ConfigError("lap_loss: shape mismatch");
    if (cfg.gamma <= 0) throw ConfigError("pyramid gamma must be positive");
    auto px = laplacian_pyramid(x, cfg.levels);
    auto py = laplacian_pyramid(y, cfg.levels);
    scalar loss = mean_abs_diff(x, y);
    for (int i = 0; i < cfg.levels; ++i)
        loss += cfg.gamma * std::pow(2.0, -2.0 * i) * mean_abs_diff(px[i], py[i]);
    return loss;
}

scalar lap_loss_grad(const Tensor& x, const Tensor& y, const PyramidConfig& cfg, Tensor& grad_x) {
    check_chw(x, "lap_loss_grad");
    if (!x.same_shape(y) || !x.same_shape(grad_x))
        throw ConfigError("lap_loss_grad: shape mismatch");
    if (cfg.gamma <= 0) throw ConfigError("pyramid gamma must be positive");
    auto px = laplacian_pyramid(x, cfg.levels);
    auto py = laplacian_pyramid(y, cfg.levels);

    scalar loss = mean_abs_diff(x, y);
    sign_grad(x, y, 1.0, grad_x);

    // Cotangents per Gaussian level; band L_i = G_i - expand(G_{i+1}) feeds
    // gG_i directly and gG_{i+1} through the expand adjoint.
    std::vector<Tensor> gg;
    gg.reserve(px.size());
    for (const auto& level : px) {
        Tensor z({level.dim(0), level.dim(1), level.dim(2)});
        z.fill(0.0);
        gg.push_back(std::move(z));
    }
    for (int i = 0; i < cfg.levels; ++i) {
        scalar weight = cfg.gamma * std::pow(2.0, -2.0 * i);
        loss += weight * mean_abs_diff(px[i], py[i]);
        Tensor gl({px[i].dim(0), px[i].dim(1), px[i].dim(2)});
        sign_grad(px[i], py[i], weight, gl);
        for (std::size_t j = 0; j < gl.size(); ++j) gg[i].vec()[j] += gl.vec()[j];
        Tensor down = expand2d_adj(gl);
        for (std::size_t j = 0; j < down.size(); ++j) gg[i + 1].vec()[j] -= down.vec()[j];
    }
    // Pull cotangents down the chain G_{j+1} = down(smooth(G_j)).
    for (int j = cfg.levels - 1; j >= 0; --j) {
        Tensor up = smooth2d_adj(down2d_adj(gg[j + 1], gg[j].dim(1), gg[j].dim(2)), 1.0);
        for (std::size_t i = 0; i < up.size(); ++i) gg[j].vec()[i] += up.vec()[i];
    }
    for (std::size_t i = 0; i < grad_x.size(); ++i) grad_x.vec()[i] += gg[0].vec()[i];
    return loss;
}

scalar perceptual_loss(const Tensor& x, const Tensor& y, const PerceptualExtractor& extractor) {
    if (!x.same_shape(y)) throw ConfigError("perceptual_loss: shape mismatch");
    scalar loss = mean_abs_diff(x, y);
    for (const auto& layer : extractor.layers) {
        if (!layer.forward) throw ConfigError("perceptual layer has no forward map");
        Tensor fx = layer.forward(x), fy = layer.forward(y);
        if (!fx.same_shape(fy)) throw ConfigError("perceptual layer output shapes differ");
        loss += mean_abs_diff(fx, fy);
    }
    return loss;
}

scalar perceptual_loss_grad(const Tensor& x, const Tensor& y, const PerceptualExtractor& extractor,
                            Tensor& grad_x) {
    if (!x.same_shape(y) || !x.same_shape(grad_x))
        throw ConfigError("perceptual_loss_grad: shape mismatch");
    scalar loss = mean_abs_diff(x, y);
    sign_grad(x, y, 1.0, grad_x);
    for (const auto& layer : extractor.layers) {
        if (!layer.forward || !layer.backward)
            throw ConfigError("perceptual layer needs forward and backward for training");
        Tensor fx = layer.forward(x), fy = layer.forward(y);
        if (!fx.same_shape(fy)) throw ConfigError("perceptual layer output shapes differ");
        loss += mean_abs_diff(fx, fy);
        Tensor g(fx.shape());
        sign_grad(fx, fy, 1.0, g);
        Tensor down = layer.backward(x, g);
        if (!down.same_shape(x)) throw ConfigError("perceptual backward returned a wrong shape");
        for (std::size_t i = 0; i < grad_x.size(); ++i) grad_x.vec()[i] += down.vec()[i];
    }
    return loss;
}

}  // namespace cola
