#include <cmath>
#include <vector>

#include "doctest.h"

#include "cola/nn/layers.hpp"
#include "cola/nn/models.hpp"
#include "cola/rng.hpp"

using namespace cola;
using namespace cola::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, scalar sd = 1.0) {
    Tensor t(std::move(shape));
    for (scalar& v : t.vec()) v = rng.normal(0.0, sd);
    return t;
}

scalar dot(const Tensor& a, const Tensor& b) {
    scalar acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.vec()[i] * b.vec()[i];
    return acc;
}

// Probes d(w . layer(x))/dx against central differences.
void check_input_grad(Layer& layer, const Tensor& x, std::size_t probe_step,
                      scalar atol = 1e-6, scalar rtol = 1e-5) {
    Rng wr(99);
    for (auto p : layer.params()) p.grad->fill(0.0);
    Tensor out = layer.forward(x, true);
    Tensor w = random_tensor(out.shape(), wr);
    Tensor gin = layer.backward(w);
    REQUIRE(gin.same_shape(x));

    const scalar h = 1e-6;
    for (std::size_t i = 0; i < x.size(); i += probe_step) {
        Tensor xp = x, xm = x;
        xp.vec()[i] += h;
        xm.vec()[i] -= h;
        scalar fd = (dot(layer.forward(xp, true), w) - dot(layer.forward(xm, true), w)) / (2 * h);
        CHECK(std::abs(gin.vec()[i] - fd) <= atol + rtol * std::abs(fd));
    }
}

// Probes accumulated parameter gradients the same way.
void check_param_grads(Layer& layer, const Tensor& x, std::size_t probe_step,
                       scalar atol = 1e-6, scalar rtol = 1e-5) {
    Rng wr(98);
    for (auto p : layer.params()) p.grad->fill(0.0);
    Tensor out = layer.forward(x, true);
    Tensor w = random_tensor(out.shape(), wr);
    layer.backward(w);

    const scalar h = 1e-6;
    for (auto p : layer.params()) {
        for (std::size_t i = 0; i < p.value->size(); i += probe_step) {
            scalar keep = p.value->vec()[i];
            p.value->vec()[i] = keep + h;
            scalar fp = dot(layer.forward(x, true), w);
            p.value->vec()[i] = keep - h;
            scalar fm = dot(layer.forward(x, true), w);
            p.value->vec()[i] = keep;
            scalar fd = (fp - fm) / (2 * h);
            CHECK_MESSAGE(std::abs(p.grad->vec()[i] - fd) <= atol + rtol * std::abs(fd),
                          "param ", p.name, " entry ", i);
        }
    }
}

}  // namespace

TEST_CASE("linear gradients") {
    Rng rng(1);
    Linear layer(5, 3, rng);
    Tensor x = random_tensor({4, 5}, rng);
    check_input_grad(layer, x, 1);
    check_param_grads(layer, x, 1);
}

TEST_CASE("conv2d shapes and gradients") {
    Rng rng(2);
    Conv2d layer(2, 3, 3, 2, 1, rng);
    Tensor x = random_tensor({2, 2, 8, 8}, rng);
    Tensor out = layer.forward(x, true);
    CHECK(out.shape() == std::vector<int>{2, 3, 4, 4});  // (8 + 2*1 - 3)/2 + 1
    check_input_grad(layer, x, 3);
    check_param_grads(layer, x, 2);
}

TEST_CASE("conv transpose shapes and gradients") {
    Rng rng(3);
    ConvTranspose2d layer(3, 2, 4, 2, 1, rng);
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor out = layer.forward(x, true);
    CHECK(out.shape() == std::vector<int>{2, 2, 8, 8});  // (4-1)*2 - 2*1 + 4
    check_input_grad(layer, x, 3);
    check_param_grads(layer, x, 5);
}

TEST_CASE("batch norm: train stats, eval running stats, gradients") {
    Rng rng(4);
    BatchNorm2d bn(2);
    Tensor x = random_tensor({3, 2, 4, 4}, rng);
    for (scalar& v : x.vec()) v = 2.0 * v + 1.0;  // mean 1, sd 2-ish

    Tensor y = bn.forward(x, true);
    // train output is normalized per channel with batch statistics
    const std::size_t plane = 3 * 4 * 4;
    for (int c = 0; c < 2; ++c) {
        scalar mean = 0, var = 0;
        for (int n = 0; n < 3; ++n)
            for (int i = 0; i < 16; ++i) mean += y.at4(n, c, i / 4, i % 4);
        mean /= static_cast<scalar>(plane);
        for (int n = 0; n < 3; ++n)
            for (int i = 0; i < 16; ++i) {
                scalar d = y.at4(n, c, i / 4, i % 4) - mean;
                var += d * d;
            }
        var /= static_cast<scalar>(plane);
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shifts it slightly
    }

    // momentum 0.1 from (0, 1) initial running stats, one train pass
    BatchNorm2d fresh(2);
    fresh.forward(x, true);
    scalar batch_mean0 = 0;
    for (int n = 0; n < 3; ++n)
        for (int i = 0; i < 16; ++i) batch_mean0 += x.at4(n, 0, i / 4, i % 4);
    batch_mean0 /= static_cast<scalar>(plane);
    CHECK(fresh.buffers()[0].value->vec()[0] ==
          doctest::Approx(0.1 * batch_mean0).epsilon(1e-9));

    // eval mode must use running stats: constant input maps through affine
    Tensor c1({1, 2, 2, 2});
    c1.fill(0.5);
    Tensor e1 = fresh.forward(c1, false);
    Tensor e2 = fresh.forward(c1, false);
    CHECK(e1.vec() == e2.vec());  // eval pass does not mutate state

    check_input_grad(bn, x, 5, 1e-6, 1e-4);
    check_param_grads(bn, x, 1, 1e-6, 1e-4);
}

TEST_CASE("conditional batch norm selects affine rows by class") {
    Rng rng(5);
    ConditionalBatchNorm2d cbn(2, 3);
    // distinct per-class gammas
    for (auto p : cbn.params())
        if (p.name == "gamma")
            for (std::size_t i = 0; i < p.value->size(); ++i)
                p.value->vec()[i] = 1.0 + 0.5 * static_cast<scalar>(i);

    Tensor x = random_tensor({2, 2, 4, 4}, rng);
    cbn.set_class_ids({0, 2});
    Tensor y02 = cbn.forward(x, true);
    cbn.set_class_ids({0, 0});
    Tensor y00 = cbn.forward(x, true);

    // sample 0 (same class both times) agrees; sample 1 differs
    bool first_same = true, second_differs = false;
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 16; ++i) {
            first_same = first_same &&
                         y02.at4(0, c, i / 4, i % 4) == doctest::Approx(y00.at4(0, c, i / 4, i % 4));
            second_differs = second_differs ||
                             std::abs(y02.at4(1, c, i / 4, i % 4) - y00.at4(1, c, i / 4, i % 4)) > 1e-9;
        }
    CHECK(first_same);
    CHECK(second_differs);

    cbn.set_class_ids({1, 2});
    check_input_grad(cbn, x, 5, 1e-6, 1e-4);
    check_param_grads(cbn, x, 1, 1e-6, 1e-4);
}

TEST_CASE("activation gradients") {
    Rng rng(6);
    Tensor x = random_tensor({3, 7}, rng);
    {
        ReLU layer;
        check_input_grad(layer, x, 1);
    }
    {
        LeakyReLU layer(0.2);
        check_input_grad(layer, x, 1);
    }
    {
        Sigmoid layer;
        check_input_grad(layer, x, 1);
    }
    {
        Tanh layer;
        check_input_grad(layer, x, 1);
    }
}

TEST_CASE("relu and leaky relu forward values") {
    Tensor x({1, 4});
    x.vec() = {-2.0, -0.5, 0.5, 2.0};
    ReLU relu;
    Tensor yr = relu.forward(x, true);
    CHECK(yr.vec() == std::vector<scalar>{0.0, 0.0, 0.5, 2.0});
    LeakyReLU leaky(0.1);
    Tensor yl = leaky.forward(x, true);
    CHECK(yl.vec()[0] == doctest::Approx(-0.2));
    CHECK(yl.vec()[3] == doctest::Approx(2.0));
}

TEST_CASE("max pool picks maxima and routes gradients") {
    Tensor x({1, 1, 2, 2});
    x.vec() = {1.0, 3.0, 2.0, 0.5};
    MaxPool2d pool;
    Tensor y = pool.forward(x, true);
    CHECK(y.shape() == std::vector<int>{1, 1, 1, 1});
    CHECK(y.vec()[0] == 3.0);
    Tensor g({1, 1, 1, 1});
    g.vec() = {1.0};
    Tensor gin = pool.backward(g);
    CHECK(gin.vec() == std::vector<scalar>{0.0, 1.0, 0.0, 0.0});

    Rng rng(7);
    Tensor big = random_tensor({2, 3, 6, 6}, rng);
    MaxPool2d pool2;
    check_input_grad(pool2, big, 4);
}

TEST_CASE("global average pool and flatten") {
    Rng rng(8);
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    GlobalAvgPool gap;
    Tensor y = gap.forward(x, true);
    CHECK(y.shape() == std::vector<int>{2, 3});
    scalar mean = 0;
    for (int i = 0; i < 16; ++i) mean += x.at4(1, 2, i / 4, i % 4);
    CHECK(y.at2(1, 2) == doctest::Approx(mean / 16.0));
    check_input_grad(gap, x, 5);

    Flatten flat;
    Tensor f = flat.forward(x, true);
    CHECK(f.shape() == std::vector<int>{2, 48});
    CHECK(f.at2(1, 17) == x.vec()[48 + 17]);
    check_input_grad(flat, x, 7);
}

TEST_CASE("upsample2x repeats pixels") {
    Tensor x({1, 1, 2, 2});
    x.vec() = {1.0, 2.0, 3.0, 4.0};
    Upsample2x up;
    Tensor y = up.forward(x, true);
    CHECK(y.shape() == std::vector<int>{1, 1, 4, 4});
    CHECK(y.at4(0, 0, 0, 0) == 1.0);
    CHECK(y.at4(0, 0, 0, 1) == 1.0);
    CHECK(y.at4(0, 0, 1, 1) == 1.0);
    CHECK(y.at4(0, 0, 2, 3) == 4.0);
    Rng rng(9);
    Tensor big = random_tensor({2, 2, 3, 3}, rng);
    Upsample2x up2;
    check_input_grad(up2, big, 2);
}

TEST_CASE("residual block keeps shape or projects, gradients flow") {
    Rng rng(10);
    {
        ResidualBlock block(3, 3, 1, rng);
        Tensor x = random_tensor({2, 3, 6, 6}, rng);
        CHECK(block.forward(x, true).shape() == std::vector<int>{2, 3, 6, 6});
        check_input_grad(block, x, 17, 1e-6, 1e-4);
    }
    {
        ResidualBlock block(3, 6, 2, rng);
        Tensor x = random_tensor({2, 3, 6, 6}, rng);
        CHECK(block.forward(x, true).shape() == std::vector<int>{2, 6, 3, 3});
        check_input_grad(block, x, 17, 1e-6, 1e-4);
        check_param_grads(block, x, 23, 1e-6, 1e-4);
    }
}

TEST_CASE("softmax cross entropy oracle values and gradient") {
    Tensor logits({1, 2});
    logits.vec() = {0.0, 0.0};
    Tensor grad({1, 2});
    scalar loss = softmax_xent(logits, {0}, grad);
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(grad.vec()[0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(grad.vec()[1] == doctest::Approx(0.5).epsilon(1e-12));

    Tensor uniform({3, 4});
    uniform.fill(1.7);  // any constant row: uniform softmax
    Tensor g4({3, 4});
    CHECK(softmax_xent(uniform, {0, 1, 3}, g4) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    // finite differences on random logits
    Rng rng(11);
    Tensor z = random_tensor({3, 5}, rng);
    std::vector<int> labels{2, 0, 4};
    Tensor gz({3, 5});
    softmax_xent(z, labels, gz);
    const scalar h = 1e-6;
    for (std::size_t i = 0; i < z.size(); ++i) {
        Tensor zp = z, zm = z;
        zp.vec()[i] += h;
        zm.vec()[i] -= h;
        Tensor tmp({3, 5});
        scalar fd = (softmax_xent(zp, labels, tmp) - softmax_xent(zm, labels, tmp)) / (2 * h);
        CHECK(std::abs(gz.vec()[i] - fd) <= 1e-8 + 1e-6 * std::abs(fd));
    }

    // grad rows sum to zero (softmax minus one-hot)
    for (int n = 0; n < 3; ++n) {
        scalar row = 0;
        for (int k = 0; k < 5; ++k) row += gz.at2(n, k);
        CHECK(row == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("argmax rows") {
    Tensor t({2, 3});
    t.vec() = {0.1, 0.9, 0.3, 2.0, -1.0, 1.5};
    CHECK(argmax_rows(t) == std::vector<int>{1, 0});
}

TEST_CASE("generator outputs [0,1] images and routes gradients to z") {
    Rng rng(12);
    Generator gen("tiny", 3, 16, 10, 4, rng);
    CHECK(gen.latent_dim() == 10);

    Tensor z = random_tensor({5, 10}, rng);
    Tensor imgs = gen.forward(z, true);
    CHECK(imgs.shape() == std::vector<int>{5, 3, 16, 16});
    for (scalar v : imgs.vec()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    Tensor w = random_tensor(imgs.shape(), rng);
    Tensor gz = gen.backward(w);
    REQUIRE(gz.same_shape(z));

    // finite differences through the whole generator on a few latent entries
    const scalar h = 1e-6;
    for (std::size_t i = 0; i < z.size(); i += 13) {
        Tensor zp = z, zm = z;
        zp.vec()[i] += h;
        zm.vec()[i] -= h;
        scalar fd = (dot(gen.forward(zp, true), w) - dot(gen.forward(zm, true), w)) / (2 * h);
        CHECK(std::abs(gz.vec()[i] - fd) <= 1e-5 + 1e-3 * std::abs(fd));
    }
}

TEST_CASE("conditional generator responds to the class block") {
    Rng rng(13);
    Generator gen("tiny-cbn", 1, 16, 8, 4, rng);
    Tensor z({1, 8});
    for (scalar& v : z.vec()) v = 0.1;
    z.at2(0, 1) = 1.0;  // class 1 dominates
    Tensor a = gen.forward(z, false);
    z.at2(0, 1) = 0.1;
    z.at2(0, 3) = 1.0;  // class 3 dominates
    Tensor b = gen.forward(z, false);
    scalar diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a.vec()[i] - b.vec()[i]);
    CHECK(diff > 1e-6);  // conditional affines must change the output
}

TEST_CASE("same seed builds identical generators") {
    Rng r1(14), r2(14), r3(15);
    Generator a("tiny", 3, 16, 10, 4, r1), b("tiny", 3, 16, 10, 4, r2),
        c("tiny", 3, 16, 10, 4, r3);
    Rng xr(16);
    Tensor z = random_tensor({2, 10}, xr);
    Tensor ya = a.forward(z, false), yb = b.forward(z, false), yc = c.forward(z, false);
    CHECK(ya.vec() == yb.vec());
    CHECK(ya.vec() != yc.vec());
}

TEST_CASE("dual head encoder shapes and trunk sharing") {
    Rng rng(17);
    DualHeadEncoder enc("tiny", 3, 16, 6, rng);
    CHECK(enc.embed_dim() == 6);
    Tensor x = random_tensor({4, 3, 16, 16}, rng, 0.2);
    for (scalar& v : x.vec()) v = std::abs(v);
    Tensor e = enc.embed(x, false);
    CHECK(e.shape() == std::vector<int>{4, 6});
    Tensor r = enc.rotation_logits(x, false);
    CHECK(r.shape() == std::vector<int>{4, 4});

    DualHeadEncoder res("resnet", 3, 16, 6, rng);
    CHECK(res.embed(x, false).shape() == std::vector<int>{4, 6});
}

TEST_CASE("classifier backbones produce logits and features") {
    Rng rng(18);
    Tensor x = random_tensor({3, 3, 16, 16}, rng, 0.2);
    for (const char* backbone : {"tiny", "flatten", "resnet"}) {
        Classifier clf(backbone, 3, 16, 5, rng);
        CHECK(clf.num_classes() == 5);
        Tensor logits = clf.logits(x, false);
        CHECK(logits.shape() == std::vector<int>{3, 5});
        Tensor feats = clf.penultimate(x);
        CHECK(feats.dim(0) == 3);
        CHECK(feats.dim(1) == clf.feature_dim());
    }
    CHECK_THROWS_AS(Classifier("nope", 3, 16, 5, rng), ConfigError);
}

TEST_CASE("classifier training step reduces loss on a tiny problem") {
    // two linearly separable blobs; a couple of hand-rolled SGD steps on the
    // classifier's own gradients must reduce the loss
    Rng rng(19);
    Tensor x({8, 1, 8, 8});
    std::vector<int> labels(8);
    for (int n = 0; n < 8; ++n) {
        labels[n] = n % 2;
        for (int i = 0; i < 64; ++i)
            x.vec()[n * 64 + i] = (labels[n] ? 0.8 : 0.2) + rng.normal(0.0, 0.02);
    }
    Classifier clf("tiny", 1, 8, 2, rng);
    Tensor grad({8, 2});
    scalar first = 0, last = 0;
    for (int step = 0; step < 30; ++step) {
        for (auto p : clf.params()) p.grad->fill(0.0);
        Tensor logits = clf.logits(x, true);
        scalar loss = softmax_xent(logits, labels, grad);
        if (step == 0) first = loss;
        last = loss;
        clf.backward(grad);
        for (auto p : clf.params())
            for (std::size_t i = 0; i < p.value->size(); ++i)
                p.value->vec()[i] -= 0.05 * p.grad->vec()[i];
    }
    CHECK(last < 0.5 * first);
}
