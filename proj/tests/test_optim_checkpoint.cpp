#include <cstdio>
#include <filesystem>

#include "doctest.h"

#include "cola/nn/checkpoint.hpp"
#include "cola/nn/models.hpp"
#include "cola/nn/optim.hpp"
#include "cola/rng.hpp"

using namespace cola;
using namespace cola::nn;

namespace {

std::string temp_file(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() / ("cola_ckpt_" + tag + ".bin");
    std::filesystem::remove(p);
    return p.string();
}

}  // namespace

TEST_CASE("lr schedule: closed form, examples, monotone") {
    CHECK(scheduled_lr(0.01, 0.5, 50, 100) == doctest::Approx(0.0025).epsilon(1e-12));
    CHECK(scheduled_lr(0.01, 0.5, 50, 0) == doctest::Approx(0.01));
    CHECK(scheduled_lr(0.01, 0.5, 50, 49) == doctest::Approx(0.01));
    CHECK(scheduled_lr(0.01, 0.5, 50, 50) == doctest::Approx(0.005));
    CHECK(scheduled_lr(0.3, 0.5, 0, 1000) == doctest::Approx(0.3));  // 0 disables

    scalar prev = 1e9;
    for (int e = 0; e < 200; ++e) {
        scalar lr = scheduled_lr(0.05, 0.5, 30, e);
        CHECK(lr <= prev);
        prev = lr;
    }
    CHECK_THROWS_AS(scheduled_lr(0.1, 0.5, 10, -1), ConfigError);
}

TEST_CASE("sgd: one plain step on the quadratic gives theta (1 - 2 lr)") {
    Tensor theta({1, 4}), grad({1, 4});
    theta.vec() = {1.0, -2.0, 0.5, 3.0};
    const std::vector<scalar> before = theta.vec();

    OptimConfig cfg;
    cfg.kind = OptimConfig::Kind::sgd;
    cfg.lr = 0.1;
    cfg.momentum = 0.0;
    Optimizer opt({{"theta", &theta, &grad}}, cfg);

    // d(||theta||^2)/dtheta = 2 theta
    for (std::size_t i = 0; i < 4; ++i) grad.vec()[i] = 2.0 * before[i];
    opt.step();
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(theta.vec()[i] == doctest::Approx(before[i] * (1.0 - 2.0 * 0.1)).epsilon(1e-12));
}

TEST_CASE("sgd: zero gradient leaves parameters unchanged without weight decay") {
    Tensor theta({2, 2}), grad({2, 2});
    theta.vec() = {1.0, 2.0, 3.0, 4.0};
    grad.fill(0.0);

    OptimConfig cfg;
    cfg.kind = OptimConfig::Kind::sgd;
    cfg.lr = 0.5;
    cfg.momentum = 0.9;
    Optimizer opt({{"theta", &theta, &grad}}, cfg);
    opt.step();
    CHECK(theta.vec() == std::vector<scalar>{1.0, 2.0, 3.0, 4.0});

    // with weight decay the step shrinks parameters toward zero
    cfg.weight_decay = 0.1;
    Optimizer opt_wd({{"theta", &theta, &grad}}, cfg);
    opt_wd.step();
    CHECK(theta.vec()[0] == doctest::Approx(1.0 * (1.0 - 0.5 * 0.1)));
}

TEST_CASE("sgd momentum accumulates velocity") {
    Tensor theta({1, 1}), grad({1, 1});
    theta.vec() = {0.0};
    OptimConfig cfg;
    cfg.kind = OptimConfig::Kind::sgd;
    cfg.lr = 1.0;
    cfg.momentum = 0.5;
    Optimizer opt({{"theta", &theta, &grad}}, cfg);

    grad.vec() = {1.0};
    opt.step();  // v = 1, theta = -1
    CHECK(theta.vec()[0] == doctest::Approx(-1.0));
    opt.step();  // v = 0.5 + 1 = 1.5, theta = -2.5
    CHECK(theta.vec()[0] == doctest::Approx(-2.5));
}

TEST_CASE("adam bias correction makes the first step lr-sized") {
    Tensor theta({1, 1}), grad({1, 1});
    theta.vec() = {1.0};
    OptimConfig cfg;
    cfg.kind = OptimConfig::Kind::adam;
    cfg.lr = 0.01;
    Optimizer opt({{"theta", &theta, &grad}}, cfg);
    grad.vec() = {7.0};  // any positive gradient: first Adam step is ~lr
    opt.step();
    CHECK(theta.vec()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
}

TEST_CASE("optimizer epoch schedule changes the applied rate") {
    Tensor theta({1, 1}), grad({1, 1});
    theta.vec() = {1.0};
    OptimConfig cfg;
    cfg.kind = OptimConfig::Kind::sgd;
    cfg.lr = 0.1;
    cfg.momentum = 0.0;
    cfg.decay = 0.5;
    cfg.decay_interval = 10;
    Optimizer opt({{"theta", &theta, &grad}}, cfg);
    opt.set_epoch(20);
    CHECK(opt.current_lr() == doctest::Approx(0.025));
    grad.vec() = {1.0};
    opt.step();
    CHECK(theta.vec()[0] == doctest::Approx(1.0 - 0.025));
}

TEST_CASE("row adam: untouched rows stay bit-identical") {
    OptimConfig cfg;
    cfg.kind = OptimConfig::Kind::adam;
    cfg.lr = 0.05;

    Rng rng(41);
    Tensor table({5, 3});
    for (scalar& v : table.vec()) v = rng.normal(0.0, 1.0);
    const std::vector<scalar> before = table.vec();

    RowAdam opt(5, 3, cfg);
    Tensor grows({1, 3});
    grows.vec() = {0.3, -0.2, 1.0};
    opt.step_rows(table, grows, {3});

    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c) {
            if (r == 3)
                CHECK(table.at2(r, c) != before[r * 3 + c]);
            else
                CHECK(table.at2(r, c) == before[r * 3 + c]);  // bit-identical
        }
}

TEST_CASE("row adam: zero rate leaves the table unchanged") {
    OptimConfig cfg;
    cfg.kind = OptimConfig::Kind::adam;
    cfg.lr = 0.0;
    Tensor table({2, 2});
    table.vec() = {1.0, 2.0, 3.0, 4.0};
    RowAdam opt(2, 2, cfg);
    Tensor grows({2, 2});
    grows.vec() = {5.0, -5.0, 1.0, 1.0};
    opt.step_rows(table, grows, {0, 1});
    CHECK(table.vec() == std::vector<scalar>{1.0, 2.0, 3.0, 4.0});
}

TEST_CASE("row adam: per-row step counts give sparse-friendly bias correction") {
    // Row stepped once must get the same update whether or not other rows
    // trained before: per-row step counts, not a global counter.
    OptimConfig cfg;
    cfg.kind = OptimConfig::Kind::adam;
    cfg.lr = 0.01;

    Tensor fresh({2, 1});
    fresh.vec() = {1.0, 1.0};
    RowAdam solo(2, 1, cfg);
    Tensor g({1, 1});
    g.vec() = {2.0};
    solo.step_rows(fresh, g, {1});
    const scalar after_solo = fresh.at2(1, 0);

    Tensor busy({2, 1});
    busy.vec() = {1.0, 1.0};
    RowAdam shared(2, 1, cfg);
    for (int i = 0; i < 5; ++i) shared.step_rows(busy, g, {0});  // row 0 trains a lot
    shared.step_rows(busy, g, {1});
    CHECK(busy.at2(1, 0) == after_solo);
}

TEST_CASE("row adam validates shapes and indices") {
    OptimConfig cfg;
    cfg.kind = OptimConfig::Kind::adam;
    RowAdam opt(3, 2, cfg);
    Tensor table({3, 2}), bad_dim({3, 3}), g({1, 2});
    g.fill(0.1);
    CHECK_THROWS_AS(opt.step_rows(bad_dim, g, {0}), ConfigError);
    CHECK_THROWS_AS(opt.step_rows(table, g, {0, 1}), ConfigError);
    CHECK_THROWS_AS(opt.step_rows(table, g, {7}), ConfigError);
}

TEST_CASE("blob round-trips tensors, ints and metadata") {
    Blob blob;
    blob.meta_json = R"({"backbone":"tiny","epoch":12})";
    Rng rng(42);
    Tensor a({2, 3, 4});
    for (scalar& v : a.vec()) v = rng.normal(0.0, 1.0);
    Tensor b({5});
    for (scalar& v : b.vec()) v = rng.uniform(-1.0, 1.0);
    blob.tensors = {{"a", a}, {"b", b}};
    blob.ints = {{"membership", {0, 1, 2, 2, 1}}};

    const std::string path = temp_file("roundtrip");
    save_blob(path, blob);
    Blob back = load_blob(path);

    CHECK(back.meta_json == blob.meta_json);
    REQUIRE(back.has_tensor("a"));
    REQUIRE(back.has_tensor("b"));
    CHECK(back.tensor("a").shape() == a.shape());
    CHECK(back.tensor("a").vec() == a.vec());  // bit-exact
    CHECK(back.tensor("b").vec() == b.vec());
    REQUIRE(back.has_ints("membership"));
    CHECK(back.int_block("membership") == std::vector<std::int64_t>{0, 1, 2, 2, 1});
    CHECK_FALSE(back.has_tensor("missing"));
    CHECK_THROWS(back.tensor("missing"));
}

TEST_CASE("blob rejects corrupted files") {
    const std::string path = temp_file("corrupt");
    {
        Blob blob;
        Tensor t({2, 2});
        t.fill(1.0);
        blob.tensors = {{"t", t}};
        save_blob(path, blob);
    }
    // flip a magic byte
    {
        std::FILE* f = std::fopen(path.c_str(), "r+b");
        REQUIRE(f != nullptr);
        std::fputc('X', f);
        std::fclose(f);
    }
    CHECK_THROWS(load_blob(path));
    CHECK_THROWS(load_blob(path + ".does_not_exist"));
}

TEST_CASE("store and load params round-trip a generator bit-exactly") {
    Rng r1(43);
    Generator gen("tiny", 1, 16, 8, 4, r1);

    Blob blob;
    store_params(blob, "gen/", gen.params());
    store_params(blob, "gen/", gen.buffers());
    const std::string path = temp_file("gen");
    save_blob(path, blob);

    Rng r2(999);  // different init; loading must overwrite it
    Generator other("tiny", 1, 16, 8, 4, r2);
    Blob back = load_blob(path);
    load_params(back, "gen/", other.params());
    load_params(back, "gen/", other.buffers());

    Rng xr(44);
    Tensor z({3, 8});
    for (scalar& v : z.vec()) v = xr.normal(0.0, 1.0);
    Tensor ya = gen.forward(z, false), yb = other.forward(z, false);
    CHECK(ya.vec() == yb.vec());
}

TEST_CASE("load params demands presence and matching shapes") {
    Rng rng(45);
    Generator gen("tiny", 1, 16, 8, 4, rng);
    Blob empty;
    CHECK_THROWS(load_params(empty, "gen/", gen.params()));

    Blob wrong;
    store_params(wrong, "gen/", gen.params());
    Generator bigger("tiny", 1, 16, 12, 4, rng);
    CHECK_THROWS(load_params(wrong, "gen/", bigger.params()));
}
