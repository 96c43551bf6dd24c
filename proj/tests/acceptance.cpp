// End-to-end acceptance suite. Each criterion prints exactly one line:
//
//   [PASS] 01 assignment-optimality    1000/1000 exact (0.4 s)
//
// The exit code is the number of failed criteria. Passing criterion numbers
// as arguments runs just those (e.g. `acceptance 4 9`), which keeps tuning
// loops cheap; with no arguments everything runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cola/assignment.hpp"
#include "cola/clustering.hpp"
#include "cola/experiments.hpp"
#include "cola/generation.hpp"
#include "cola/metrics.hpp"
#include "cola/pyramid.hpp"
#include "cola/theory.hpp"

using namespace cola;

namespace {

struct Verdict {
    bool ok = false;
    std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), pattern, args...);
    return std::string(buf);
}

LabeledImageSet toy_split(const std::string& spec_text, std::uint64_t seed,
                          const std::string& stream, int spc = 0) {
    return load_from_spec(parse_dataset_spec(spec_text), seed, stream, spc);
}

// ---------------------------------------------------------------- criterion 1

Verdict check_assignment_optimality() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(11);
    int exact = 0;
    const int total = 1000;
    for (int t = 0; t < total; ++t) {
        const int b = 2 + t % 6;  // cycle sizes 2..7
        CostMatrix cost(b);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < b; ++j) cost.at(i, j) = rng.uniform(0.0, 10.0);

        Assignment got = solve_assignment(cost);
        scalar got_sum = 0;
        for (int i = 0; i < b; ++i) got_sum += cost.at(i, got.row_to_col[i]);

        std::vector<int> perm(b);
        std::iota(perm.begin(), perm.end(), 0);
        scalar best = std::numeric_limits<scalar>::infinity();
        do {
            scalar s = 0;
            for (int i = 0; i < b; ++i) s += cost.at(i, perm[i]);
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));

        exact += got_sum == best;
    }
    const scalar secs =
        std::chrono::duration<scalar>(std::chrono::steady_clock::now() - start).count();
    return {exact == total && secs < 5.0, fmt("%d/%d exact in %.2f s", exact, total, secs)};
}

// ---------------------------------------------------------------- criterion 2

Verdict check_pyramid() {
    Rng rng(12);
    scalar worst_recon = 0;
    for (int t = 0; t < 100; ++t) {
        Tensor img({3, 32, 32});
        for (scalar& v : img.vec()) v = rng.uniform(0.0, 1.0);
        Tensor back = collapse_pyramid(laplacian_pyramid(img, 3));
        for (int i = 0; i < img.size(); ++i)
            worst_recon = std::max(worst_recon, std::abs(img.vec()[i] - back.vec()[i]));
    }
    if (worst_recon > 1e-5)
        return {false, fmt("reconstruction linf %.2e > 1e-5", worst_recon)};

    PyramidConfig cfg;
    scalar worst_rel = 0;
    const scalar h = 1e-6;
    for (int t = 0; t < 10; ++t) {
        Tensor x({3, 16, 16}), y({3, 16, 16});
        for (scalar& v : x.vec()) v = rng.uniform(0.0, 1.0);
        for (scalar& v : y.vec()) v = rng.uniform(0.0, 1.0);
        Tensor grad(x.shape());
        lap_loss_grad(x, y, cfg, grad);
        for (int s = 0; s < 8; ++s) {
            const int i = static_cast<int>(rng.index(x.size()));
            const scalar keep = x.vec()[i];
            x.vec()[i] = keep + h;
            const scalar up = lap_loss(x, y, cfg);
            x.vec()[i] = keep - h;
            const scalar dn = lap_loss(x, y, cfg);
            x.vec()[i] = keep;
            const scalar fd = (up - dn) / (2 * h);
            const scalar ana = grad.vec()[i];
            const scalar rel =
                std::abs(ana - fd) / std::max({std::abs(fd), std::abs(ana), scalar(1e-6)});
            worst_rel = std::max(worst_rel, rel);
        }
    }
    return {worst_rel <= 1e-4,
            fmt("recon linf %.1e, grad rel err %.1e", worst_recon, worst_rel)};
}

// ---------------------------------------------------------------- criterion 3

Verdict check_norm_invariant() {
    LabeledImageSet data = toy_split("toy:2x10@16", 3, "train");
    Rng zrng = Rng::forked(33, "accept/latents");
    LatentTable latents = latent_from_labels(data.labels, data.class_count, 4, zrng);

    GenerationConfig cfg;
    cfg.noise_dim = 4;
    cfg.epochs = 1;
    cfg.batch_size = 10;

    scalar worst = 0;
    std::optional<Step2Result> run;
    for (int epoch = 0; epoch < 50; ++epoch) {
        cfg.epoch_offset = epoch;
        if (!run)
            run.emplace(train_generation(data.images, latents, cfg, 33));
        else
            run.emplace(train_generation(data.images, latents, cfg, 33,
                                         std::move(run->generator)));
        for (int r = 0; r < latents.rows(); ++r) {
            scalar cls = 0, noise = 0;
            for (int j = 0; j < latents.class_dim; ++j)
                cls += latents.z.vec()[r * latents.z.dim(1) + j] *
                       latents.z.vec()[r * latents.z.dim(1) + j];
            for (int j = latents.class_dim; j < latents.z.dim(1); ++j)
                noise += latents.z.vec()[r * latents.z.dim(1) + j] *
                         latents.z.vec()[r * latents.z.dim(1) + j];
            worst = std::max({worst, std::abs(std::sqrt(cls) - 1.0),
                              std::abs(std::sqrt(noise) - 1.0)});
        }
    }
    return {worst <= 1e-6, fmt("max block-norm deviation %.2e over 50 epochs", worst)};
}

// ---------------------------------------------------------------- criterion 4

Verdict check_clustering_purity() {
    const auto start = std::chrono::steady_clock::now();
    ClusterConfig cfg = desk_pipeline_config(LatentMode::cola).cluster;
    std::ostringstream detail;
    detail.precision(3);
    bool ok = true;
    for (std::uint64_t seed : {1, 2, 3}) {
        LabeledImageSet data = toy_split("toy:4x100@32", seed, "train");
        Step1Result result = train_clustering(data, cfg, seed);
        const scalar purity = cluster_purity(result.memberships(), data.labels, cfg.clusters);
        ok = ok && purity >= 0.9;
        detail << (seed > 1 ? " " : "") << purity;
    }
    const scalar secs =
        std::chrono::duration<scalar>(std::chrono::steady_clock::now() - start).count();
    return {ok && secs < 600.0, "purity per seed: " + detail.str()};
}

// ------------------------------------------------- criteria 5 and 11 (shared)

struct ConsistencySeed {
    scalar oracle_on_scola = 0;  // fraction of sCOLA samples scored as requested
    scalar cas_scola = 0;
    scalar cas_glo = 0;
};

const std::vector<ConsistencySeed>& consistency_results() {
    static std::optional<std::vector<ConsistencySeed>> cache;
    if (cache) return *cache;

    std::vector<ConsistencySeed> rows;
    for (std::uint64_t seed : {1, 2, 3}) {
        LabeledImageSet train = toy_split("toy:4x40@16", seed, "train");
        LabeledImageSet test = toy_split("toy:4x40@16", seed, "test", 50);

        TrainedPipeline scola =
            train_pipeline(train, desk_pipeline_config(LatentMode::scola), seed);
        TrainedPipeline glo = train_pipeline(train, desk_pipeline_config(LatentMode::glo), seed);

        Rng srng = Rng::forked(seed, "accept/synth");
        LabeledImageSet synth_scola = synthesize_set(scola, 40, 1.0, srng);
        LabeledImageSet synth_glo = synthesize_set(glo, 40, 1.0, srng);

        TrainEvalResult oracle = train_eval_classifier(train, test, desk_classifier_config(),
                                                       derive_seed(seed, "accept/oracle"));

        ConsistencySeed row;
        row.oracle_on_scola = eval_accuracy(*oracle.classifier, synth_scola);
        row.cas_scola = train_eval_classifier(synth_scola, test, desk_classifier_config(),
                                              derive_seed(seed, "accept/cas_scola"))
                            .accuracy;
        row.cas_glo = train_eval_classifier(synth_glo, test, desk_classifier_config(),
                                            derive_seed(seed, "accept/cas_glo"))
                          .accuracy;
        rows.push_back(row);
    }
    cache = std::move(rows);
    return *cache;
}

Verdict check_class_consistency() {
    const auto& rows = consistency_results();
    scalar mean = 0;
    std::ostringstream per;
    per.precision(3);
    for (const auto& row : rows) {
        mean += row.oracle_on_scola / rows.size();
        per << " " << row.oracle_on_scola;
    }
    return {mean >= 0.80, fmt("oracle-consistency mean %.3f (per seed:%s)", mean,
                              per.str().c_str())};
}

Verdict check_glo_ordering() {
    const auto& rows = consistency_results();
    int wins = 0;
    std::ostringstream per;
    per.precision(3);
    for (const auto& row : rows) {
        wins += row.cas_scola > row.cas_glo;
        per << " " << row.cas_scola << ">" << row.cas_glo;
    }
    return {wins >= 2, fmt("scola beats glo CAS in %d/3 seeds (%s)", wins, per.str().c_str())};
}

// ---------------------------------------------------------------- criterion 6

Verdict check_frechet() {
    Rng rng(14);
    const int d = 5;

    auto random_moments = [&](scalar shift) {
        GaussianMoments m;
        m.mean = Tensor(std::vector<int>{d});
        for (scalar& v : m.mean.vec()) v = rng.uniform(-1.0, 1.0) + shift;
        Tensor a(std::vector<int>{d, d});
        for (scalar& v : a.vec()) v = rng.uniform(-1.0, 1.0);
        m.cov = Tensor(std::vector<int>{d, d});
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                scalar s = i == j ? 0.5 : 0.0;
                for (int k = 0; k < d; ++k)
                    s += a.vec()[i * d + k] * a.vec()[j * d + k];
                m.cov.vec()[i * d + j] = s;
            }
        m.count = 100;
        return m;
    };

    GaussianMoments same = random_moments(0.0);
    const scalar self = frechet_distance(same, same);
    if (!(std::abs(self) <= 1e-8)) return {false, fmt("self-distance %.2e > 1e-8", self)};

    // diagonal closed form
    GaussianMoments da, db;
    da.mean = Tensor(std::vector<int>{d});
    db.mean = Tensor(std::vector<int>{d});
    da.cov = Tensor(std::vector<int>{d, d});
    db.cov = Tensor(std::vector<int>{d, d});
    da.count = db.count = 100;
    scalar closed = 0;
    for (int i = 0; i < d; ++i) {
        const scalar mu_a = rng.uniform(-1.0, 1.0), mu_b = rng.uniform(-1.0, 1.0);
        const scalar va = rng.uniform(0.2, 2.0), vb = rng.uniform(0.2, 2.0);
        da.mean.vec()[i] = mu_a;
        db.mean.vec()[i] = mu_b;
        da.cov.vec()[i * d + i] = va;
        db.cov.vec()[i * d + i] = vb;
        closed += (mu_a - mu_b) * (mu_a - mu_b) +
                  (std::sqrt(va) - std::sqrt(vb)) * (std::sqrt(va) - std::sqrt(vb));
    }
    const scalar diag_err = std::abs(frechet_distance(da, db) - closed);
    if (!(diag_err <= 1e-8)) return {false, fmt("diagonal closed-form err %.2e > 1e-8", diag_err)};

    // invariance under a common orthogonal change of basis (d = 3 rotation)
    const scalar c1 = std::cos(0.7), s1 = std::sin(0.7);
    const scalar c2 = std::cos(-1.2), s2 = std::sin(-1.2);
    const scalar rz[3][3] = {{c1, -s1, 0}, {s1, c1, 0}, {0, 0, 1}};
    const scalar ry[3][3] = {{c2, 0, s2}, {0, 1, 0}, {-s2, 0, c2}};
    scalar q[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            q[i][j] = 0;
            for (int k = 0; k < 3; ++k) q[i][j] += rz[i][k] * ry[k][j];
        }

    auto random3 = [&] {
        GaussianMoments m;
        m.mean = Tensor(std::vector<int>{3});
        for (scalar& v : m.mean.vec()) v = rng.uniform(-1.0, 1.0);
        Tensor a(std::vector<int>{3, 3});
        for (scalar& v : a.vec()) v = rng.uniform(-1.0, 1.0);
        m.cov = Tensor(std::vector<int>{3, 3});
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                scalar s = i == j ? 0.1 : 0.0;
                for (int k = 0; k < 3; ++k) s += a.vec()[i * 3 + k] * a.vec()[j * 3 + k];
                m.cov.vec()[i * 3 + j] = s;
            }
        m.count = 100;
        return m;
    };
    auto rotate = [&](const GaussianMoments& m) {
        GaussianMoments r = m;
        for (int i = 0; i < 3; ++i) {
            r.mean.vec()[i] = 0;
            for (int k = 0; k < 3; ++k) r.mean.vec()[i] += q[i][k] * m.mean.vec()[k];
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                scalar s = 0;
                for (int k = 0; k < 3; ++k)
                    for (int l = 0; l < 3; ++l)
                        s += q[i][k] * m.cov.vec()[k * 3 + l] * q[j][l];
                r.cov.vec()[i * 3 + j] = s;
            }
        return r;
    };

    GaussianMoments ma = random3(), mb = random3();
    const scalar plain = frechet_distance(ma, mb);
    const scalar rotated = frechet_distance(rotate(ma), rotate(mb));
    const scalar rot_err = std::abs(plain - rotated);
    return {rot_err <= 1e-6,
            fmt("self %.1e, diag err %.1e, rotation err %.1e", self, diag_err, rot_err)};
}

// ---------------------------------------------------------------- criterion 7

Verdict check_prop2_grid() {
    int checked = 0, violations = 0;
    for (int mi = 1; mi <= 10; ++mi)
        for (int ei = 1; ei <= 10; ++ei)
            for (int di = 0; di <= 9; ++di) {
                const int m = 13 * mi;
                const scalar eps = 0.04 * ei;
                const scalar delta = eps * di / 10.0;
                const long long n = theory::prop2_threshold(eps, delta, m);
                ++checked;
                // exp is monotone, so B(Z) <= B(X) iff n(eps-delta)^2 >= m eps^2
                violations += !theory::bound_dominates(n, eps - delta, m, eps);
            }
    return {checked == 1000 && violations == 0,
            fmt("%d grid points, %d violations", checked, violations)};
}

// ---------------------------------------------------------------- criterion 8

Verdict check_prop1_monte_carlo() {
    const scalar delta = 0.05;
    const int m = 20;
    const long long trials = 100000;

    theory::Prop1Threshold thr = theory::prop1_threshold(1.0, 1.0, delta, m);
    if (!thr.feasible) return {false, "threshold unexpectedly infeasible"};

    theory::Source real;  // mean 0, stddev 1
    theory::Source proxy = real;
    proxy.a = delta;  // biased mean, same variance

    Rng rng_z = Rng::forked(77, "accept/p1z");
    Rng rng_x = Rng::forked(77, "accept/p1x");
    theory::ErrEstimate ez =
        theory::monte_carlo_err(proxy, 0.0, static_cast<int>(thr.n), trials, rng_z);
    theory::ErrEstimate ex = theory::monte_carlo_err(real, 0.0, m, trials, rng_x);

    const scalar se = 3.0 * std::sqrt(ez.se * ez.se + ex.se * ex.se);
    const bool ordered = ez.mean <= ex.mean + se;

    const scalar predicted = 1.0 / static_cast<scalar>(thr.n) + delta * delta;
    const bool decomposed = std::abs(ez.mean - predicted) <= 3.0 * ez.se;

    return {ordered && decomposed,
            fmt("n*=%lld, Err(Z)=%.6f vs Err(X)=%.6f (+3SE %.6f), decomposition |%.6f-%.6f|<=%.6f",
                thr.n, ez.mean, ex.mean, ex.mean + se, ez.mean, predicted, 3.0 * ez.se)};
}

// ---------------------------------------------------------------- criterion 9

Verdict check_discrepancy() {
    int ok_seeds = 0;
    std::ostringstream per;
    per.precision(3);
    for (std::uint64_t seed : {1, 2, 3}) {
        LabeledImageSet train = toy_split("toy2:4x40@16", seed, "train");
        LabeledImageSet test = toy_split("toy2:4x40@16", seed, "test", 50);
        DiscrepancyResult r = fid_cas_discrepancy(train, test, desk_discrepancy_config(), seed);

        const scalar fid_hi = std::max(r.fid_concentrated, r.fid_sparse);
        const scalar fid_gap =
            fid_hi > 0 ? std::abs(r.fid_concentrated - r.fid_sparse) / fid_hi : 0.0;
        const scalar cas_gap = r.cas_sparse - r.cas_concentrated;
        const bool ok = cas_gap >= 0.10 && fid_gap < 0.25;
        ok_seeds += ok;
        per << (seed > 1 ? "; " : "") << "cas+" << cas_gap << " fid " << fid_gap;
    }
    return {ok_seeds >= 2, fmt("%d/3 seeds show the split (%s)", ok_seeds, per.str().c_str())};
}

// --------------------------------------------------------------- criterion 10

Verdict check_mix_benefit() {
    int wins = 0;
    std::ostringstream per;
    per.precision(3);
    for (std::uint64_t seed : {1, 2, 3}) {
        LabeledImageSet real = toy_split("toy:4x5@16", seed, "train");
        LabeledImageSet test = toy_split("toy:4x5@16", seed, "test", 50);

        TrainedPipeline pipe =
            train_pipeline(real, desk_pipeline_config(LatentMode::scola), seed);
        Rng srng = Rng::forked(seed, "accept/mix_synth");
        LabeledImageSet synth = synthesize_set(pipe, 8, 1.0, srng);

        const std::uint64_t clf_seed = derive_seed(seed, "accept/mix_clf");
        MixResult mixed = train_mixed(real, synth, 0.5, test, desk_classifier_config(), clf_seed);
        MixResult alone = train_mixed(real, synth, 1.0, test, desk_classifier_config(), clf_seed);

        wins += mixed.accuracy >= alone.accuracy;
        per << (seed > 1 ? "; " : "") << mixed.accuracy << " vs " << alone.accuracy;
    }
    return {wins >= 2, fmt("mix >= real-only in %d/3 seeds (%s)", wins, per.str().c_str())};
}

// -------------------------------------------------------------------- harness

struct Criterion {
    int number;
    const char* name;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "assignment-optimality", check_assignment_optimality},
        {2, "laplacian-pyramid", check_pyramid},
        {3, "normalization-invariant", check_norm_invariant},
        {4, "step1-clustering-purity", check_clustering_purity},
        {5, "class-consistency", check_class_consistency},
        {6, "frechet-distance", check_frechet},
        {7, "prop2-exact-grid", check_prop2_grid},
        {8, "prop1-monte-carlo", check_prop1_monte_carlo},
        {9, "fid-cas-discrepancy", check_discrepancy},
        {10, "small-sample-mix", check_mix_benefit},
        {11, "glo-ablation-ordering", check_glo_ordering},
    };

    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        if (!wanted.empty() &&
            std::find(wanted.begin(), wanted.end(), criterion.number) == wanted.end())
            continue;
        const auto start = std::chrono::steady_clock::now();
        Verdict verdict;
        try {
            verdict = criterion.run();
        } catch (const std::exception& e) {
            verdict = {false, std::string("exception: ") + e.what()};
        }
        const scalar secs =
            std::chrono::duration<scalar>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %02d %-26s %s (%.1f s)\n", verdict.ok ? "PASS" : "FAIL",
                    criterion.number, criterion.name, verdict.detail.c_str(), secs);
        std::fflush(stdout);
        failures += !verdict.ok;
    }
    return failures;
}
