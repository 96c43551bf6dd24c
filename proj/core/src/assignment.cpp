#include "cola/assignment.hpp"

#include <limits>

#include "cola/common.hpp"

namespace cola {

Assignment solve_assignment(const CostMatrix& cost) {
    const int n = cost.n;
    if (n <= 0) throw ConfigError("assignment needs a non-empty cost matrix");
    constexpr scalar kInf = std::numeric_limits<scalar>::infinity();

    // Potentials over rows (u) and columns (v), 1-indexed with a dummy row 0.
    std::vector<scalar> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0);   // match[j] = row assigned to column j
    std::vector<int> way(n + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<scalar> minv(n + 1, kInf);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            int i0 = match[j0], j1 = 0;
            scalar delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                scalar cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }

    Assignment result;
    result.row_to_col.assign(n, -1);
    for (int j = 1; j <= n; ++j)
        if (match[j] > 0) result.row_to_col[match[j] - 1] = j - 1;
    for (int i = 0; i < n; ++i) result.total_cost += cost.at(i, result.row_to_col[i]);
    return result;
}

CostMatrix squared_distance_costs(const Tensor& embeddings, const Tensor& targets) {
    if (embeddings.rank() != 2 || targets.rank() != 2)
        throw ConfigError("squared_distance_costs expects 2-D inputs");
    if (embeddings.dim(0) != targets.dim(0) || embeddings.dim(1) != targets.dim(1))
        throw ConfigError("embedding and target blocks must have matching shape");
    const int b = embeddings.dim(0), d = embeddings.dim(1);
    CostMatrix cost(b);
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j) {
            scalar acc = 0;
            for (int k = 0; k < d; ++k) {
                scalar diff = embeddings.at2(i, k) - targets.at2(j, k);
                acc += diff * diff;
            }
            cost.at(i, j) = acc;
        }
    return cost;
}

}  // namespace cola
