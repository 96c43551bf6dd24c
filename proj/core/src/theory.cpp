#include "cola/theory.hpp"

#include <cmath>

#include "cola/common.hpp"

namespace cola::theory {

scalar hoeffding_bound(long long n, scalar r) {
    if (n < 1) throw ConfigError("hoeffding_bound: n must be >= 1");
    if (r < 0) throw ConfigError("hoeffding_bound: r must be >= 0");
    return 2.0 * std::exp(-2.0 * static_cast<scalar>(n) * r * r);
}

Prop1Threshold prop1_threshold(scalar var_x, scalar var_z, scalar bias, int m) {
    if (var_x <= 0 || var_z <= 0) throw ConfigError("prop1_threshold: variances must be positive");
    if (m < 1) throw ConfigError("prop1_threshold: m must be >= 1");
    const scalar slack = var_x - static_cast<scalar>(m) * bias * bias;
    if (slack <= 0) return {false, 0};
    return {true, static_cast<long long>(std::ceil(static_cast<scalar>(m) * var_z / slack))};
}

long long prop2_threshold(scalar eps, scalar bias, int m) {
    if (m < 1) throw ConfigError("prop2_threshold: m must be >= 1");
    if (!(eps > bias)) throw ConfigError("prop2_threshold requires eps > bias");
    if (bias < 0) throw ConfigError("prop2_threshold: bias must be >= 0");
    const scalar ratio = eps / (eps - bias);
    return static_cast<long long>(std::ceil(static_cast<scalar>(m) * ratio * ratio));
}

bool bound_dominates(long long n, scalar r_z, int m, scalar r_x) {
    if (n < 1 || m < 1) throw ConfigError("bound_dominates: sample sizes must be >= 1");
    if (r_z < 0 || r_x < 0) throw ConfigError("bound_dominates: radii must be >= 0");
    const scalar exp_z = static_cast<scalar>(n) * r_z * r_z;
    const scalar exp_x = static_cast<scalar>(m) * r_x * r_x;
    return exp_z >= exp_x * (1.0 - 1e-12);
}

scalar Source::mean() const {
    switch (kind) {
        case Kind::gaussian: return a;
        case Kind::coin: return a * (1.0 - 2.0 * b);
        default: return (a + b) / 2.0;
    }
}

scalar Source::variance() const {
    switch (kind) {
        case Kind::gaussian: return b * b;
        case Kind::coin: {
            const scalar mu = mean();
            return a * a - mu * mu;
        }
        default: {
            const scalar w = b - a;
            return w * w / 12.0;
        }
    }
}

scalar Source::draw(Rng& rng) const {
    switch (kind) {
        case Kind::gaussian: return rng.normal(a, b);
        case Kind::coin: return rng.bernoulli(b) ? -a : a;
        default: return rng.uniform(a, b);
    }
}

Source parse_source(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        throw ConfigError("source spec needs kind:params, got " + text);
    const std::string kind = text.substr(0, colon);
    const std::string args = text.substr(colon + 1);
    auto comma = args.find(',');
    if (comma == std::string::npos)
        throw ConfigError("source spec needs two comma-separated parameters: " + text);
    Source src;
    try {
        src.a = std::stod(args.substr(0, comma));
        src.b = std::stod(args.substr(comma + 1));
    } catch (const std::exception&) {
        throw ConfigError("bad number in source spec: " + text);
    }
    if (kind == "gaussian") {
        src.kind = Source::Kind::gaussian;
        if (src.b <= 0) throw ConfigError("gaussian source needs sigma > 0");
    } else if (kind == "coin") {
        src.kind = Source::Kind::coin;
        if (src.b < 0 || src.b > 1) throw ConfigError("coin source needs lambda in [0, 1]");
    } else if (kind == "uniform") {
        src.kind = Source::Kind::uniform;
        if (src.b <= src.a) throw ConfigError("uniform source needs lo < hi");
    } else {
        throw ConfigError("unknown source kind: " + kind);
    }
    return src;
}

ErrEstimate monte_carlo_err(const Source& src, scalar mu_ref, int n, long long trials, Rng& rng) {
    if (n < 1 || trials < 2) throw ConfigError("monte_carlo_err: need n >= 1, trials >= 2");
    scalar sum = 0, sum_sq = 0;
    for (long long t = 0; t < trials; ++t) {
        scalar acc = 0;
        for (int i = 0; i < n; ++i) acc += src.draw(rng);
        const scalar err = (acc / n - mu_ref) * (acc / n - mu_ref);
        sum += err;
        sum_sq += err * err;
    }
    ErrEstimate est;
    est.trials = trials;
    est.mean = sum / static_cast<scalar>(trials);
    const scalar var = (sum_sq - sum * sum / static_cast<scalar>(trials)) /
                       static_cast<scalar>(trials - 1);
    est.se = std::sqrt(std::max(var, 0.0) / static_cast<scalar>(trials));
    return est;
}

std::vector<SweepRow> threshold_sweep(scalar var_x, scalar var_z, scalar bias, scalar eps, int m,
                                      int n_max) {
    if (n_max < 1) throw ConfigError("threshold_sweep: n_max must be >= 1");
    if (!(eps > bias)) throw ConfigError("threshold_sweep requires eps > bias");
    std::vector<SweepRow> rows;
    rows.reserve(static_cast<std::size_t>(n_max));
    const scalar bx = hoeffding_bound(m, eps);
    const scalar ex = var_x / static_cast<scalar>(m);
    for (int n = 1; n <= n_max; ++n)
        rows.push_back({n, hoeffding_bound(n, eps - bias), bx,
                        var_z / static_cast<scalar>(n) + bias * bias, ex});
    return rows;
}

}  // namespace cola::theory
