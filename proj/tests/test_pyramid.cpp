#include <cmath>
#include <vector>

#include "doctest.h"

#include "cola/pyramid.hpp"
#include "cola/rng.hpp"

using namespace cola;

namespace {

Tensor random_image(int c, int h, int w, Rng& rng) {
    Tensor t({c, h, w});
    for (scalar& v : t.vec()) v = rng.uniform(0.0, 1.0);
    return t;
}

scalar max_abs(const Tensor& a, const Tensor& b) {
    scalar m = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.vec()[i] - b.vec()[i]));
    return m;
}

// ------------------------------------------------------------------ reference
// Independent pyramid written as direct (non-separable) 2D convolutions so a
// bug shared with the production code is unlikely.

int ref_reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
    return i;
}

Tensor ref_smooth(const Tensor& img, scalar scale) {
    static const scalar tap[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Tensor out({C, H, W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                scalar acc = 0;
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx)
                        acc += tap[dy + 2] * tap[dx + 2] *
                               img.at3(c, ref_reflect(y + dy, H), ref_reflect(x + dx, W));
                out.at3(c, y, x) = acc * scale;
            }
    return out;
}

Tensor ref_down(const Tensor& img) {
    const int C = img.dim(0), h = (img.dim(1) + 1) / 2, w = (img.dim(2) + 1) / 2;
    Tensor out({C, h, w});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at3(c, y, x) = img.at3(c, 2 * y, 2 * x);
    return out;
}

Tensor ref_expand(const Tensor& img, int H, int W) {
    Tensor stuffed({img.dim(0), H, W});
    stuffed.fill(0.0);
    for (int c = 0; c < img.dim(0); ++c)
        for (int y = 0; y < img.dim(1); ++y)
            for (int x = 0; x < img.dim(2); ++x) stuffed.at3(c, 2 * y, 2 * x) = img.at3(c, y, x);
    return ref_smooth(stuffed, 4.0);  // doubled kernel per dimension
}

std::vector<Tensor> ref_pyramid(const Tensor& img, int levels) {
    std::vector<Tensor> out;
    Tensor g = img;
    for (int i = 0; i < levels; ++i) {
        Tensor next = ref_down(ref_smooth(g, 1.0));
        Tensor up = ref_expand(next, g.dim(1), g.dim(2));
        Tensor band(g.shape());
        for (std::size_t j = 0; j < g.size(); ++j) band.vec()[j] = g.vec()[j] - up.vec()[j];
        out.push_back(std::move(band));
        g = std::move(next);
    }
    out.push_back(std::move(g));
    return out;
}

scalar ref_mean_abs(const Tensor& a, const Tensor& b) {
    scalar acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.vec()[i] - b.vec()[i]);
    return acc / static_cast<scalar>(a.size());
}

scalar ref_lap_loss(const Tensor& x, const Tensor& y, int levels, scalar gamma) {
    auto px = ref_pyramid(x, levels), py = ref_pyramid(y, levels);
    scalar loss = ref_mean_abs(x, y);
    for (int i = 0; i < levels; ++i)
        loss += gamma * std::pow(2.0, -2.0 * i) * ref_mean_abs(px[i], py[i]);
    return loss;
}

}  // namespace

TEST_CASE("smoothing preserves constants and stays in range") {
    Tensor img({1, 6, 6});
    img.fill(0.3);
    Tensor s = smooth2d(img);
    for (scalar v : s.vec()) CHECK(v == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("down takes even indices, expand needs halved dims") {
    Tensor img({1, 5, 7});
    for (std::size_t i = 0; i < img.size(); ++i) img.vec()[i] = static_cast<scalar>(i);
    Tensor d = down2d(img);
    CHECK(d.dim(1) == 3);
    CHECK(d.dim(2) == 4);
    CHECK(d.at3(0, 1, 2) == img.at3(0, 2, 4));
    CHECK_THROWS_AS(expand2d(d, 10, 7), ConfigError);
}

TEST_CASE("constant image has all-zero bands and a constant residual") {
    Tensor img({2, 8, 8});
    img.fill(0.25);
    auto pyr = laplacian_pyramid(img, 2);
    REQUIRE(pyr.size() == 3);
    for (int lvl = 0; lvl < 2; ++lvl)
        for (scalar v : pyr[lvl].vec()) CHECK(v == 0.0);
    for (scalar v : pyr[2].vec()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("one-level pyramid of the 4x4 ramp matches the hand computation") {
    // x(y, x) = (4y + x) / 15. Worked by hand:
    //   smooth([0,1,2,3])       = [0.75, 1.125, 1.875, 2.25]
    //   even decimation         = [0.75, 1.875]
    //   expand profile          = [1.03125, 1.3125, 1.734375, 1.875]
    // so L_0(y,x) = (4*(r[y]-u[y]) + (r[x]-u[x])) / 15 with r = [0,1,2,3].
    Tensor img({1, 4, 4});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) img.at3(0, y, x) = (4.0 * y + x) / 15.0;

    const scalar u[4] = {1.03125, 1.3125, 1.734375, 1.875};
    const scalar s_even[2] = {0.75, 1.875};

    auto pyr = laplacian_pyramid(img, 1);
    REQUIRE(pyr.size() == 2);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            scalar want = (4.0 * (y - u[y]) + (x - u[x])) / 15.0;
            CHECK(pyr[0].at3(0, y, x) == doctest::Approx(want).epsilon(1e-12));
        }
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            scalar want = (4.0 * s_even[y] + s_even[x]) / 15.0;
            CHECK(pyr[1].at3(0, y, x) == doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("collapse inverts the pyramid on random images") {
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor img = random_image(3, 32, 32, rng);
        auto pyr = laplacian_pyramid(img, 3);
        CHECK(max_abs(collapse_pyramid(pyr), img) <= 1e-5);
    }
    // odd sizes exercise the ceil-halving path
    Tensor odd = random_image(1, 17, 23, rng);
    CHECK(max_abs(collapse_pyramid(laplacian_pyramid(odd, 2)), odd) <= 1e-5);
}

TEST_CASE("pyramid matches the independent reference") {
    Rng rng(32);
    Tensor img = random_image(2, 16, 12, rng);
    auto got = laplacian_pyramid(img, 2);
    auto want = ref_pyramid(img, 2);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        REQUIRE(got[i].same_shape(want[i]));
        CHECK(max_abs(got[i], want[i]) <= 1e-12);
    }
}

TEST_CASE("loss is zero on identical images and symmetric") {
    Rng rng(33);
    Tensor x = random_image(3, 16, 16, rng), y = random_image(3, 16, 16, rng);
    PyramidConfig cfg;
    cfg.levels = 2;
    CHECK(lap_loss(x, x, cfg) == 0.0);
    CHECK(lap_loss(x, y, cfg) == doctest::Approx(lap_loss(y, x, cfg)).epsilon(1e-12));
    CHECK(lap_loss(x, y, cfg) > 0.0);
}

TEST_CASE("constant images reduce the loss to the pixel term") {
    Tensor x({1, 8, 8}), y({1, 8, 8});
    x.fill(0.25);
    y.fill(0.75);
    PyramidConfig cfg;
    cfg.levels = 2;
    CHECK(lap_loss(x, y, cfg) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("two 8x8 images, two levels, match the step-by-step oracle") {
    Rng rng(34);
    Tensor x = random_image(1, 8, 8, rng), y = random_image(1, 8, 8, rng);
    PyramidConfig cfg;
    cfg.levels = 2;
    cfg.gamma = 1.0;
    CHECK(lap_loss(x, y, cfg) == doctest::Approx(ref_lap_loss(x, y, 2, 1.0)).epsilon(1e-10));

    cfg.gamma = 2.5;
    CHECK(lap_loss(x, y, cfg) == doctest::Approx(ref_lap_loss(x, y, 2, 2.5)).epsilon(1e-10));
}

TEST_CASE("config invariants are enforced") {
    Tensor x({1, 4, 4}), y({1, 4, 4});
    PyramidConfig cfg;
    cfg.levels = 3;  // 2^3 > 4
    CHECK_THROWS_AS(lap_loss(x, y, cfg), ConfigError);
    cfg.levels = 1;
    cfg.gamma = 0.0;
    CHECK_THROWS_AS(lap_loss(x, y, cfg), ConfigError);
    Tensor z({1, 8, 8});
    cfg.gamma = 1.0;
    CHECK_THROWS_AS(lap_loss(x, z, cfg), ConfigError);
}

TEST_CASE("loss gradient matches central finite differences") {
    Rng rng(35);
    Tensor x = random_image(1, 8, 8, rng), y = random_image(1, 8, 8, rng);
    PyramidConfig cfg;
    cfg.levels = 2;
    cfg.gamma = 0.7;

    Tensor grad({1, 8, 8});
    lap_loss_grad(x, y, cfg, grad);

    const scalar h = 1e-6;
    for (std::size_t i = 0; i < x.size(); i += 7) {  // probe a spread of pixels
        Tensor xp = x, xm = x;
        xp.vec()[i] += h;
        xm.vec()[i] -= h;
        scalar fd = (lap_loss(xp, y, cfg) - lap_loss(xm, y, cfg)) / (2 * h);
        CHECK(std::abs(grad.vec()[i] - fd) <= 1e-6 + 1e-4 * std::abs(fd));
    }
}

TEST_CASE("grad entry point returns the same loss value") {
    Rng rng(36);
    Tensor x = random_image(2, 8, 8, rng), y = random_image(2, 8, 8, rng);
    PyramidConfig cfg;
    Tensor grad({2, 8, 8});
    cfg.levels = 2;
    CHECK(lap_loss_grad(x, y, cfg, grad) == doctest::Approx(lap_loss(x, y, cfg)).epsilon(1e-12));
}

TEST_CASE("perceptual loss: empty extractor is pixel L1, identity layer doubles it") {
    Rng rng(37);
    Tensor x = random_image(1, 6, 6, rng), y = random_image(1, 6, 6, rng);

    PerceptualExtractor none;
    CHECK(perceptual_loss(x, x, none) == 0.0);
    CHECK(perceptual_loss(x, y, none) == doctest::Approx(ref_mean_abs(x, y)).epsilon(1e-12));

    PerceptualExtractor ident;
    ident.layers.push_back({[](const Tensor& t) { return t; },
                            [](const Tensor&, const Tensor& g) { return g; }});
    CHECK(perceptual_loss(x, x, ident) == 0.0);
    CHECK(perceptual_loss(x, y, ident) ==
          doctest::Approx(2.0 * ref_mean_abs(x, y)).epsilon(1e-12));
}

TEST_CASE("perceptual gradient matches finite differences through a linear layer") {
    Rng rng(38);
    Tensor x = random_image(1, 6, 6, rng), y = random_image(1, 6, 6, rng);

    // layer l(x) = smooth2d(x); its adjoint is smoothing with the same kernel
    // run through the grad entry of lap-style machinery: use doubling instead,
    // whose adjoint is itself times two.
    PerceptualExtractor ext;
    ext.layers.push_back({[](const Tensor& t) {
                              Tensor o = t;
                              for (scalar& v : o.vec()) v *= 2.0;
                              return o;
                          },
                          [](const Tensor&, const Tensor& g) {
                              Tensor o = g;
                              for (scalar& v : o.vec()) v *= 2.0;
                              return o;
                          }});

    Tensor grad({1, 6, 6});
    scalar loss = perceptual_loss_grad(x, y, ext, grad);
    CHECK(loss == doctest::Approx(perceptual_loss(x, y, ext)).epsilon(1e-12));

    const scalar h = 1e-6;
    for (std::size_t i = 0; i < x.size(); i += 5) {
        Tensor xp = x, xm = x;
        xp.vec()[i] += h;
        xm.vec()[i] -= h;
        scalar fd = (perceptual_loss(xp, y, ext) - perceptual_loss(xm, y, ext)) / (2 * h);
        CHECK(std::abs(grad.vec()[i] - fd) <= 1e-6 + 1e-4 * std::abs(fd));
    }
}
