#pragma once

#include <vector>

#include "cola/tensor.hpp"

namespace cola {

// Square cost matrix, row-major. cost(i, j) is the price of matching row i
// (an image) to column j (a target).
struct CostMatrix {
    int n = 0;
    std::vector<scalar> cost;

    explicit CostMatrix(int size) : n(size), cost(static_cast<std::size_t>(size) * size, 0.0) {}
    scalar& at(int i, int j) { return cost[static_cast<std::size_t>(i) * n + j]; }
    scalar at(int i, int j) const { return cost[static_cast<std::size_t>(i) * n + j]; }
};

struct Assignment {
    std::vector<int> row_to_col;  // row i matched with column row_to_col[i]
    scalar total_cost = 0.0;
};

// Exact minimum-cost perfect matching via the potentials (Hungarian)
// algorithm, O(n^3). Deterministic: ties broken by column scan order.
Assignment solve_assignment(const CostMatrix& cost);

// Pairwise squared Euclidean costs between embedding rows (b, d) and target
// rows (b, d), laid out as cost(i, j) = ||e_i - t_j||^2.
CostMatrix squared_distance_costs(const Tensor& embeddings, const Tensor& targets);

}  // namespace cola
