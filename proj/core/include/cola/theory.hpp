#pragma once

#include <string>
#include <vector>

#include "cola/rng.hpp"

namespace cola::theory {

// Hoeffding bound for n iid draws supported on [0, 1]:
// P(|sample mean - mu| >= r) <= 2 exp(-2 n r^2).
scalar hoeffding_bound(long long n, scalar r);

// Smallest proxy-sample size n with E[Err(Z)] <= E[Err(X)], where Err is the
// squared deviation of the sample mean from the real mean and the proxy mean
// sits `bias` away. Infeasible when var_x <= m * bias^2: no amount of proxy
// data compensates for the bias.
struct Prop1Threshold {
    bool feasible = false;
    long long n = 0;
};
Prop1Threshold prop1_threshold(scalar var_x, scalar var_z, scalar bias, int m);

// Smallest n with B(Z) = 2exp(-2n(eps-bias)^2) <= B(X) = 2exp(-2m eps^2).
// Requires eps > bias.
long long prop2_threshold(scalar eps, scalar bias, int m);

// Algebraic form of B(Z) <= B(X): since exp is monotone, the bound ordering
// is exactly n r_z^2 >= m r_x^2. Compared with a few-ulp relative guard so
// thresholds that land on exact equality verify cleanly; any real violation
// (n one below the threshold) moves the product by >= r_z^2, far above the
// guard.
bool bound_dominates(long long n, scalar r_z, int m, scalar r_x);

// Scalar distribution with closed-form moments, for Monte Carlo checks.
struct Source {
    enum class Kind { gaussian, coin, uniform };
    Kind kind = Kind::gaussian;
    // gaussian: a = mean, b = stddev
    // coin:     +a w.p. 1-b, -a w.p. b
    // uniform:  on [a, b]
    scalar a = 0.0;
    scalar b = 1.0;

    scalar mean() const;
    scalar variance() const;
    scalar draw(Rng& rng) const;
};

// "gaussian:mu,sigma" | "coin:theta,lambda" | "uniform:lo,hi"
Source parse_source(const std::string& text);

struct ErrEstimate {
    scalar mean = 0;
    scalar se = 0;  // standard error of the Monte Carlo mean
    long long trials = 0;
};

// Monte Carlo estimate of E[(mean of n draws - mu_ref)^2].
ErrEstimate monte_carlo_err(const Source& src, scalar mu_ref, int n, long long trials, Rng& rng);

struct SweepRow {
    int n;
    scalar bound_z, bound_x;
    scalar expected_err_z, expected_err_x;
};

// Per-n Hoeffding bounds and exact expected errors for the proxy (Z) against
// the fixed real sample (X of size m).
std::vector<SweepRow> threshold_sweep(scalar var_x, scalar var_z, scalar bias, scalar eps, int m,
                                      int n_max);

}  // namespace cola::theory
