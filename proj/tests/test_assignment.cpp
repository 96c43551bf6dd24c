#include <algorithm>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "cola/assignment.hpp"
#include "cola/rng.hpp"

using namespace cola;

namespace {

// Exhaustive minimum over all n! permutations, for cross-checking the solver.
scalar brute_force_cost(const CostMatrix& cost) {
    std::vector<int> perm(cost.n);
    std::iota(perm.begin(), perm.end(), 0);
    scalar best = std::numeric_limits<scalar>::infinity();
    do {
        scalar total = 0.0;
        for (int i = 0; i < cost.n; ++i) total += cost.at(i, perm[i]);
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

scalar assignment_cost(const CostMatrix& cost, const std::vector<int>& row_to_col) {
    scalar total = 0.0;
    for (int i = 0; i < cost.n; ++i) total += cost.at(i, row_to_col[i]);
    return total;
}

bool is_permutation_of_columns(const std::vector<int>& row_to_col, int n) {
    std::vector<bool> seen(n, false);
    for (int j : row_to_col) {
        if (j < 0 || j >= n || seen[j]) return false;
        seen[j] = true;
    }
    return static_cast<int>(row_to_col.size()) == n;
}

}  // namespace

TEST_CASE("2x2 with zero diagonal keeps the identity matching") {
    CostMatrix c(2);
    c.at(0, 0) = 0;
    c.at(0, 1) = 1;
    c.at(1, 0) = 1;
    c.at(1, 1) = 0;
    Assignment a = solve_assignment(c);
    CHECK(a.row_to_col == std::vector<int>{0, 1});
    CHECK(a.total_cost == doctest::Approx(0.0));
}

TEST_CASE("2x2 where the swap wins") {
    CostMatrix c(2);
    c.at(0, 0) = 4;
    c.at(0, 1) = 1;
    c.at(1, 0) = 2;
    c.at(1, 1) = 3;
    Assignment a = solve_assignment(c);
    CHECK(a.row_to_col == std::vector<int>{1, 0});
    CHECK(a.total_cost == doctest::Approx(3.0));
}

TEST_CASE("1x1 matches the only pair") {
    CostMatrix c(1);
    c.at(0, 0) = 5.5;
    Assignment a = solve_assignment(c);
    CHECK(a.row_to_col == std::vector<int>{0});
    CHECK(a.total_cost == doctest::Approx(5.5));
}

TEST_CASE("random 6x6 instances match exhaustive search") {
    Rng rng(21);
    for (int trial = 0; trial < 25; ++trial) {
        CostMatrix c(6);
        for (scalar& v : c.cost) v = rng.uniform(0.0, 10.0);
        Assignment a = solve_assignment(c);
        REQUIRE(is_permutation_of_columns(a.row_to_col, 6));
        CHECK(assignment_cost(c, a.row_to_col) == doctest::Approx(a.total_cost));
        CHECK(a.total_cost == doctest::Approx(brute_force_cost(c)));
    }
}

TEST_CASE("negative costs are handled exactly") {
    Rng rng(22);
    for (int trial = 0; trial < 10; ++trial) {
        CostMatrix c(5);
        for (scalar& v : c.cost) v = rng.uniform(-5.0, 5.0);
        Assignment a = solve_assignment(c);
        REQUIRE(is_permutation_of_columns(a.row_to_col, 5));
        CHECK(a.total_cost == doctest::Approx(brute_force_cost(c)));
    }
}

TEST_CASE("squared distance costs have the documented layout") {
    Tensor e({2, 2});
    e.at2(0, 0) = 1.0;
    e.at2(0, 1) = 0.0;
    e.at2(1, 0) = 0.0;
    e.at2(1, 1) = 2.0;
    Tensor t({2, 2});
    t.at2(0, 0) = 0.0;
    t.at2(0, 1) = 0.0;
    t.at2(1, 0) = 1.0;
    t.at2(1, 1) = 1.0;
    CostMatrix c = squared_distance_costs(e, t);
    CHECK(c.at(0, 0) == doctest::Approx(1.0));   // (1,0) vs (0,0)
    CHECK(c.at(0, 1) == doctest::Approx(1.0));   // (1,0) vs (1,1)
    CHECK(c.at(1, 0) == doctest::Approx(4.0));   // (0,2) vs (0,0)
    CHECK(c.at(1, 1) == doctest::Approx(2.0));   // (0,2) vs (1,1)
}

TEST_CASE("embeddings equal to shuffled targets recover the shuffle") {
    Rng rng(23);
    const int b = 12, d = 7;
    Tensor targets({b, d});
    for (scalar& v : targets.vec()) v = rng.normal(0.0, 1.0);
    std::vector<int> sigma = rng.permutation(b);

    Tensor embeddings({b, d});
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < d; ++j) embeddings.at2(i, j) = targets.at2(sigma[i], j);

    Assignment a = solve_assignment(squared_distance_costs(embeddings, targets));
    CHECK(a.row_to_col == sigma);
    CHECK(a.total_cost == doctest::Approx(0.0));
}

TEST_CASE("batch of one maps to the only target") {
    Rng rng(24);
    Tensor e({1, 4}), t({1, 4});
    for (scalar& v : e.vec()) v = rng.normal(0.0, 1.0);
    for (scalar& v : t.vec()) v = rng.normal(0.0, 1.0);
    Assignment a = solve_assignment(squared_distance_costs(e, t));
    CHECK(a.row_to_col == std::vector<int>{0});
}

TEST_CASE("mismatched rows are rejected") {
    Tensor e({3, 4}), t({2, 4});
    CHECK_THROWS_AS(squared_distance_costs(e, t), ConfigError);
    Tensor t2({3, 5});
    CHECK_THROWS_AS(squared_distance_costs(e, t2), ConfigError);
}

TEST_CASE("larger random instances stay consistent under row permutation") {
    // Permuting the rows of the cost matrix permutes the optimal matching but
    // preserves the optimal value.
    Rng rng(25);
    CostMatrix c(40);
    for (scalar& v : c.cost) v = rng.uniform(0.0, 1.0);
    Assignment base = solve_assignment(c);
    REQUIRE(is_permutation_of_columns(base.row_to_col, 40));

    std::vector<int> rows = rng.permutation(40);
    CostMatrix shuffled(40);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j) shuffled.at(i, j) = c.at(rows[i], j);
    Assignment moved = solve_assignment(shuffled);
    CHECK(moved.total_cost == doctest::Approx(base.total_cost));
    for (int i = 0; i < 40; ++i) CHECK(moved.row_to_col[i] == base.row_to_col[rows[i]]);
}
