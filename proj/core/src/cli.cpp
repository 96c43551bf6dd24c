#include "cola/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cola/artifacts.hpp"
#include "cola/experiments.hpp"
#include "cola/image_io.hpp"
#include "cola/theory.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace cola::cli {

namespace {

// Reports round floating-point values to six decimals so reruns with the same
// seed compare byte-identically.
scalar round6(scalar v) { return std::round(v * 1e6) / 1e6; }

json round6(const std::vector<scalar>& v) {
    json arr = json::array();
    for (scalar x : v) arr.push_back(round6(x));
    return arr;
}

void write_report_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

LabeledImageSet load_train_set(const std::string& spec_text, std::uint64_t seed, int spc) {
    DatasetSpec spec = parse_dataset_spec(spec_text);
    LabeledImageSet data = load_from_spec(spec, seed, "train");
    if (spc > 0) data = subsample_spc(data, spc, derive_seed(seed, "spc"));
    data.validate();
    return data;
}

// The data-describing part of an identity; stage commands fill in their own
// hyperparameter fields on top.
DataIdentity base_identity(const std::string& dataset, const LabeledImageSet& data,
                           std::uint64_t seed, int spc) {
    DataIdentity id;
    id.dataset = dataset;
    id.classes = data.class_count;
    id.noise_dim = 0;
    id.height = data.height();
    id.width = data.width();
    id.channels = data.channels();
    id.per_class = spc;  // subsample knob as given; 0 = full dataset
    id.mode = "cola";
    id.seed = seed;
    id.target_sigma = 0;
    id.pyramid_levels = 0;
    id.gamma = 0;
    return id;
}

// Reconstructs the exact training set an artifact identity points at.
LabeledImageSet reload_train_set(const DataIdentity& id) {
    return load_train_set(id.dataset, id.seed, id.per_class);
}

Step2Artifact load_step2_checked(const RunPaths& paths) {
    if (!fs::exists(paths.step2_file()))
        throw ConfigError("no generator artifact at " + paths.step2_file() +
                          "; run `cola gen` first");
    return load_step2_artifact(paths.step2_file());
}

// Loads the cached posterior when it matches the generator's identity (and,
// if required, the requested fit configuration); refits and rewrites the
// cache otherwise.
Posterior obtain_posterior(const RunPaths& paths, const Step2Artifact& art,
                           const PosteriorConfig& cfg, bool require_config_match) {
    const std::string file = paths.posterior_file();
    if (fs::exists(file)) {
        PosteriorArtifact saved = load_posterior_artifact(file);
        const bool id_ok = saved.identity.hash() == art.identity.hash();
        const bool cfg_ok = !require_config_match ||
                            (saved.config.full_covariance == cfg.full_covariance &&
                             saved.config.ridge == cfg.ridge);
        if (id_ok && cfg_ok) return std::move(saved.posterior);
    }
    Posterior posterior = fit_posterior(art.latents, cfg);
    save_posterior_artifact(file, posterior, cfg, art.identity);
    return posterior;
}

void clamp_unit(std::vector<Tensor>& images) {
    for (auto& img : images)
        for (scalar& v : img.vec()) v = std::clamp(v, 0.0, 1.0);
}

void write_grid_png(const std::string& path, const std::vector<Tensor>& images,
                    const std::vector<int>& rows, int row_count) {
    write_png(path, raw_from_image(make_grid(images, rows, row_count)));
}

std::pair<scalar, scalar> mean_std(const std::vector<scalar>& v) {
    if (v.empty()) return {0.0, 0.0};
    scalar mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    scalar ss = 0;
    for (scalar x : v) ss += (x - mean) * (x - mean);
    return {mean, v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0};
}

std::vector<scalar> iota_epochs(std::size_t count, int offset) {
    std::vector<scalar> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<scalar>(offset + i);
    return out;
}

}  // namespace

// ------------------------------------------------------------------ cluster

void cmd_cluster(const ClusterOptions& opt) {
    if (opt.mode != "cola")
        throw ConfigError("Step I skipped in supervised mode: `cluster` only applies to "
                          "--mode cola; run `cola gen --mode " +
                          opt.mode + "` directly");
    LabeledImageSet data = load_train_set(opt.dataset, opt.seed, opt.spc);

    ClusterConfig cfg;
    cfg.clusters = opt.clusters > 0 ? opt.clusters : data.class_count;
    cfg.target_sigma = opt.target_sigma;
    cfg.backbone = opt.backbone;
    cfg.epochs = opt.epochs;
    cfg.batch_size = opt.batch;
    cfg.extra_views = opt.extra_views;
    cfg.rotation_batches = opt.rotation_batches;
    cfg.log_every = opt.log_every;

    Step1Result result = train_clustering(data, cfg, opt.seed);

    RunPaths paths = run_paths(opt.run);
    ensure_run_dirs(paths);

    DataIdentity id = base_identity(opt.dataset, data, opt.seed, opt.spc);
    id.target_sigma = opt.target_sigma;
    save_step1_artifact(paths.step1_file(), result.encoder, result.table, opt.backbone,
                        data.channels(), data.height(), id);

    write_series_csv(paths.reports + "/step1_loss.csv",
                     {{"epoch", iota_epochs(result.assign_loss.size(), 0)},
                      {"assign_loss", result.assign_loss},
                      {"rot_loss", result.rot_loss},
                      {"rot_acc", result.rot_acc}});

    json config{{"dataset", opt.dataset}, {"seed", opt.seed},
                {"spc", opt.spc},         {"clusters", cfg.clusters},
                {"backbone", opt.backbone}, {"epochs", opt.epochs},
                {"batch", opt.batch},     {"target_sigma", opt.target_sigma},
                {"extra_views", opt.extra_views}, {"rotation_batches", opt.rotation_batches}};
    write_manifest(paths, id, "cluster", config.dump());

    if (data.labeled()) {
        scalar purity = cluster_purity(result.memberships(), data.labels, cfg.clusters);
        std::printf("cluster purity: %.4f\n", purity);
    }
    std::printf("assignment loss: %.6f\n", result.assign_loss.back());
    std::printf("wrote %s\n", paths.step1_file().c_str());
}

// ---------------------------------------------------------------------- gen

void cmd_gen(const GenOptions& opt) {
    const LatentMode mode = parse_latent_mode(opt.mode);
    LabeledImageSet data = load_train_set(opt.dataset, opt.seed, opt.spc);

    RunPaths paths = run_paths(opt.run);
    ensure_run_dirs(paths);

    DataIdentity id = base_identity(opt.dataset, data, opt.seed, opt.spc);
    id.mode = opt.mode;
    id.noise_dim = opt.noise_dim;
    id.pyramid_levels = opt.pyramid_levels;
    id.gamma = opt.gamma;
    if (mode == LatentMode::cola) id.target_sigma = opt.target_sigma;

    GenerationConfig cfg;
    cfg.backbone = opt.backbone;
    cfg.noise_dim = opt.noise_dim;
    cfg.epochs = opt.epochs;
    cfg.batch_size = opt.batch;
    cfg.loss = parse_recon_loss(opt.loss);  // perceptual throws in train_generation: no extractor
    cfg.pyramid.levels = opt.pyramid_levels;
    cfg.pyramid.gamma = opt.gamma;
    cfg.log_every = opt.log_every;

    LatentTable latents;
    int epoch_offset = 0;
    std::optional<Step2Result> result;

    if (opt.resume) {
        Step2Artifact prev = load_step2_checked(paths);
        require_same_identity(id, prev.identity, "gen --resume");
        latents = std::move(prev.latents);
        epoch_offset = prev.epochs_completed;
        cfg.epoch_offset = epoch_offset;
        nn::Generator warm = restore_generator(prev);
        result.emplace(train_generation(data.images, latents, cfg, opt.seed, std::move(warm)));
    } else {
        Rng latent_rng = Rng::forked(opt.seed, "pipeline/latents");
        switch (mode) {
            case LatentMode::cola: {
                if (!fs::exists(paths.step1_file()))
                    throw ConfigError("cola mode needs a clustering artifact at " +
                                      paths.step1_file() + "; run `cola cluster` first");
                Step1Artifact step1 = load_step1_artifact(paths.step1_file());
                DataIdentity expected = base_identity(opt.dataset, data, opt.seed, opt.spc);
                expected.target_sigma = opt.target_sigma;
                require_same_identity(expected, step1.identity, "gen");
                latents = latent_from_targets(step1.table, opt.noise_dim, latent_rng);
                break;
            }
            case LatentMode::scola:
                if (!data.labeled()) throw ConfigError("scola mode needs a labeled dataset");
                latents = latent_from_labels(data.labels, data.class_count, opt.noise_dim,
                                             latent_rng);
                break;
            case LatentMode::glo:
                if (!data.labeled()) throw ConfigError("glo mode needs a labeled dataset");
                latents = latent_random_sphere(data.labels, data.class_count, opt.noise_dim,
                                               latent_rng);
                break;
        }
        result.emplace(train_generation(data.images, latents, cfg, opt.seed));
    }

    const int total_epochs = epoch_offset + opt.epochs;
    save_step2_artifact(paths.step2_file(), result->generator, latents, opt.backbone,
                        data.channels(), data.height(), id, total_epochs);

    const std::string loss_csv = paths.reports + "/step2_loss.csv";
    if (opt.resume && fs::exists(loss_csv)) {
        std::ofstream out(loss_csv, std::ios::app);
        out.precision(10);
        for (std::size_t i = 0; i < result->loss.size(); ++i)
            out << epoch_offset + static_cast<int>(i) << "," << result->loss[i] << "\n";
    } else {
        write_series_csv(loss_csv, {{"epoch", iota_epochs(result->loss.size(), epoch_offset)},
                                    {"loss", result->loss}});
    }

    // Side-by-side grids: up to eight reconstructions per class row, plus the
    // matching originals.
    const int K = latents.class_dim;
    std::vector<int> indices, rows;
    std::vector<int> taken(K, 0);
    for (int i = 0; i < latents.rows(); ++i) {
        const int c = latents.membership[i];
        if (c >= 0 && c < K && taken[c] < 8) {
            indices.push_back(i);
            rows.push_back(c);
            ++taken[c];
        }
    }
    std::vector<Tensor> recon = decode_rows(result->generator, latents, indices);
    clamp_unit(recon);
    write_grid_png(paths.reports + "/recon_grid.png", recon, rows, K);
    std::vector<Tensor> originals;
    for (int i : indices) originals.push_back(data.images[i]);
    write_grid_png(paths.reports + "/real_grid.png", originals, rows, K);

    json config{{"dataset", opt.dataset}, {"seed", opt.seed},
                {"spc", opt.spc},         {"mode", opt.mode},
                {"backbone", opt.backbone}, {"noise_dim", opt.noise_dim},
                {"epochs", opt.epochs},   {"batch", opt.batch},
                {"pyramid_levels", opt.pyramid_levels}, {"gamma", opt.gamma},
                {"resume", opt.resume},   {"epochs_completed", total_epochs}};
    write_manifest(paths, id, "gen", config.dump());

    std::printf("reconstruction loss: %.6f (epoch %d)\n", result->loss.back(),
                total_epochs - 1);
    std::printf("wrote %s\n", paths.step2_file().c_str());
}

// ------------------------------------------------------------------- sample

void cmd_sample(const SampleOptions& opt) {
    if (opt.count < 1) throw ConfigError("--count must be >= 1");
    if (opt.tau < 0) throw ConfigError("--tau must be >= 0");
    RunPaths paths = run_paths(opt.run);
    Step2Artifact art = load_step2_checked(paths);
    ensure_run_dirs(paths);
    nn::Generator generator = restore_generator(art);

    PosteriorConfig pcfg;
    pcfg.full_covariance = opt.full_cov;
    pcfg.ridge = opt.ridge;
    Posterior posterior = obtain_posterior(paths, art, pcfg, true);
    const int K = posterior.clusters();

    const std::uint64_t seed = opt.seed ? opt.seed : derive_seed(art.identity.hash(), "sample");
    Rng rng(seed);

    Tensor codes;
    std::vector<int> components;
    if (opt.per_class) {
        if (opt.count % K != 0)
            throw ConfigError("--per-class needs --count divisible by the " +
                              std::to_string(K) + " clusters");
        const int per = opt.count / K;
        codes = Tensor({opt.count, posterior.dim()});
        for (int c = 0; c < K; ++c) {
            Tensor block = sample_component_codes(posterior, c, per, opt.tau, rng);
            for (int i = 0; i < per; ++i) {
                components.push_back(c);
                for (int k = 0; k < posterior.dim(); ++k)
                    codes.at2(c * per + i, k) = block.at2(i, k);
            }
        }
    } else {
        codes = sample_codes(posterior, opt.count, opt.tau, rng, &components);
    }

    std::vector<Tensor> images = decode_codes(generator, codes);
    clamp_unit(images);
    write_grid_png(paths.reports + "/samples_grid.png", images, components, K);

    LabeledImageSet synth;
    synth.images = images;
    synth.labels = components;
    synth.class_count = K;
    const std::string out_dir = opt.out_dir.empty() ? paths.reports + "/samples" : opt.out_dir;
    std::vector<int> per_class_count(K, 0);
    for (int c : components) ++per_class_count[c];
    const bool all_present =
        std::all_of(per_class_count.begin(), per_class_count.end(), [](int n) { return n > 0; });
    if (all_present) {
        save_dataset(synth, out_dir);
        std::printf("wrote %d images under %s\n", synth.size(), out_dir.c_str());
    } else {
        std::printf("skipped directory export: some cluster drew zero samples "
                    "(use --per-class or a larger --count)\n");
    }

    json config{{"count", opt.count},   {"per_class", opt.per_class},
                {"tau", opt.tau},       {"full_cov", opt.full_cov},
                {"ridge", opt.ridge},   {"seed", seed}};
    write_manifest(paths, art.identity, "sample", config.dump());
    std::printf("wrote %s\n", (paths.reports + "/samples_grid.png").c_str());
}

// --------------------------------------------------------------------- eval

void cmd_eval(const EvalOptions& opt) {
    if (opt.repeats < 1) throw ConfigError("--repeats must be >= 1");
    RunPaths paths = run_paths(opt.run);
    Step2Artifact art = load_step2_checked(paths);
    ensure_run_dirs(paths);
    nn::Generator generator = restore_generator(art);
    LabeledImageSet real = reload_train_set(art.identity);
    Posterior posterior = obtain_posterior(paths, art, PosteriorConfig{}, false);

    const std::uint64_t seed = opt.seed ? opt.seed : art.identity.seed;

    FeatureFn features;
    scalar oracle_acc = -1;
    if (opt.features == "flatten") {
        features = flatten_features();
    } else if (opt.features == "pca") {
        features = pca_features(real.images, opt.pca_dims);
    } else if (opt.features == "penultimate") {
        TrainEvalConfig ocfg = desk_classifier_config();
        ocfg.epochs = opt.oracle_epochs;
        TrainEvalResult oracle =
            train_eval_classifier(real, real, ocfg, derive_seed(seed, "eval/oracle"));
        oracle_acc = oracle.accuracy;
        features = penultimate_features(oracle.classifier);
    } else {
        throw ConfigError("unknown --features " + opt.features +
                          " (expected flatten, pca or penultimate)");
    }

    auto sampler = [&](Rng& rng) {
        Tensor codes = sample_codes(posterior, real.size(), opt.tau, rng);
        std::vector<Tensor> images = decode_codes(generator, codes);
        clamp_unit(images);
        return images;
    };
    Rng fid_rng = Rng::forked(seed, "eval/fid");
    FidResult fid = fid_score(real.images, sampler, opt.repeats, features, fid_rng);

    json report{{"tau", opt.tau},
                {"repeats", opt.repeats},
                {"features", opt.features},
                {"fid_mean", round6(fid.mean)},
                {"fid_values", round6(fid.values)}};
    if (oracle_acc >= 0) report["oracle_train_accuracy"] = round6(oracle_acc);
    write_report_json(paths.reports + "/fid.json", report);

    json config{{"tau", opt.tau},       {"repeats", opt.repeats},
                {"features", opt.features}, {"pca_dims", opt.pca_dims},
                {"oracle_epochs", opt.oracle_epochs}, {"seed", seed}};
    write_manifest(paths, art.identity, "eval", config.dump());

    std::printf("FID (features=%s, tau=%.2f, %d repeats): %.6f\n", opt.features.c_str(),
                opt.tau, opt.repeats, fid.mean);
    std::printf("wrote %s\n", (paths.reports + "/fid.json").c_str());
}

// ----------------------------------------------------------------- classify

void cmd_classify(const ClassifyOptions& opt) {
    if (opt.ratio <= 0 || opt.ratio > 1) throw ConfigError("--ratio must be in (0, 1]");
    if (opt.seeds < 1) throw ConfigError("--seeds must be >= 1");
    RunPaths paths = run_paths(opt.run);
    Step2Artifact art = load_step2_checked(paths);
    ensure_run_dirs(paths);
    nn::Generator generator = restore_generator(art);
    LabeledImageSet real = reload_train_set(art.identity);
    Posterior posterior = obtain_posterior(paths, art, PosteriorConfig{}, false);
    const int K = posterior.clusters();

    DatasetSpec spec = parse_dataset_spec(art.identity.dataset);
    LabeledImageSet test;
    if (spec.kind == DatasetSpec::Kind::directory) {
        if (opt.test_dir.empty())
            throw ConfigError("directory datasets need --test-dir for the held-out split");
        test = load_dataset(opt.test_dir);
    } else {
        test = load_from_spec(spec, art.identity.seed, "test", opt.test_spc);
    }
    test.validate();
    if (test.class_count != real.class_count)
        throw ConfigError("held-out set has " + std::to_string(test.class_count) +
                          " classes, train has " + std::to_string(real.class_count));

    const std::uint64_t base_seed = opt.seed ? opt.seed : art.identity.seed;

    TrainEvalConfig ccfg;
    ccfg.backbone = opt.backbone;
    ccfg.epochs = opt.epochs;
    ccfg.batch_size = opt.batch;
    // Pin the same per-epoch step count in every regime, matching the mix
    // harness, so accuracies compare at equal optimization budgets.
    ccfg.steps_per_epoch = (2 * real.size() + opt.batch - 1) / opt.batch;

    const int per_class =
        opt.per_class > 0 ? opt.per_class : std::max(1, real.size() / real.class_count);
    const long long mix_needed =
        std::llround(real.size() * (1.0 - opt.ratio) / opt.ratio);
    const int pool_per_class = static_cast<int>(
        std::max<long long>(per_class, (mix_needed + K - 1) / K));

    struct Row {
        std::string regime;
        int seed_index;
        scalar accuracy;
        int real_count, synth_count;
    };
    std::vector<Row> rows;

    for (int s = 0; s < opt.seeds; ++s) {
        const std::uint64_t seed_s =
            derive_seed(base_seed, "classify/seed" + std::to_string(s));

        Rng synth_rng = Rng::forked(seed_s, "classify/synth");
        LabeledImageSet pool;
        pool.class_count = K;
        for (int c = 0; c < K; ++c) {
            Tensor codes =
                sample_component_codes(posterior, c, pool_per_class, opt.tau, synth_rng);
            std::vector<Tensor> images = decode_codes(generator, codes);
            clamp_unit(images);
            for (auto& img : images) {
                pool.images.push_back(std::move(img));
                pool.labels.push_back(c);
            }
        }
        LabeledImageSet synth_only;
        synth_only.class_count = K;
        for (int c = 0; c < K; ++c)
            for (int i = 0; i < per_class; ++i) {
                synth_only.images.push_back(pool.images[c * pool_per_class + i]);
                synth_only.labels.push_back(c);
            }

        scalar real_acc =
            train_eval_classifier(real, test, ccfg, derive_seed(seed_s, "classify/real"))
                .accuracy;
        rows.push_back({"real", s, real_acc, real.size(), 0});

        scalar synth_acc =
            train_eval_classifier(synth_only, test, ccfg,
                                  derive_seed(seed_s, "classify/synthetic"))
                .accuracy;
        rows.push_back({"synthetic", s, synth_acc, 0, synth_only.size()});

        MixResult mix =
            train_mixed(real, pool, opt.ratio, test, ccfg, derive_seed(seed_s, "classify/mix"));
        rows.push_back({"mix", s, mix.accuracy, mix.real_count, mix.synth_count});
    }

    json jrows = json::array();
    std::printf("%-10s %-5s %-9s %-6s %-6s\n", "regime", "seed", "accuracy", "real", "synth");
    for (const Row& r : rows) {
        std::printf("%-10s %-5d %-9.4f %-6d %-6d\n", r.regime.c_str(), r.seed_index,
                    r.accuracy, r.real_count, r.synth_count);
        jrows.push_back({{"regime", r.regime},
                         {"seed", r.seed_index},
                         {"accuracy", round6(r.accuracy)},
                         {"real", r.real_count},
                         {"synth", r.synth_count}});
    }
    json aggregates;
    for (const char* regime : {"real", "synthetic", "mix"}) {
        std::vector<scalar> accs;
        for (const Row& r : rows)
            if (r.regime == regime) accs.push_back(r.accuracy);
        auto [mean, stdev] = mean_std(accs);
        std::printf("%-10s mean %.4f +- %.4f over %zu runs\n", regime, mean, stdev,
                    accs.size());
        aggregates[regime] = {{"mean", round6(mean)}, {"std", round6(stdev)}};
    }

    json report{{"tau", opt.tau},       {"ratio", opt.ratio},
                {"per_class", per_class}, {"seeds", opt.seeds},
                {"backbone", opt.backbone}, {"epochs", opt.epochs},
                {"rows", jrows},        {"aggregates", aggregates}};
    write_report_json(paths.reports + "/classify.json", report);

    json config{{"tau", opt.tau},   {"ratio", opt.ratio}, {"per_class", opt.per_class},
                {"test_spc", opt.test_spc}, {"backbone", opt.backbone},
                {"epochs", opt.epochs}, {"batch", opt.batch}, {"seeds", opt.seeds},
                {"seed", base_seed}};
    write_manifest(paths, art.identity, "classify", config.dump());
    std::printf("wrote %s\n", (paths.reports + "/classify.json").c_str());
}

// ------------------------------------------------------------------- theory

void cmd_theory(const TheoryOptions& opt) {
    if (opt.prop != 1 && opt.prop != 2) throw ConfigError("--prop must be 1 or 2");
    if (opt.var_x <= 0) throw ConfigError("--var-x must be > 0");
    RunPaths paths = run_paths(opt.run);
    ensure_run_dirs(paths);

    long long max_threshold = 1;
    int passed = 0, total = 0;
    int row_index = 0;

    if (opt.prop == 1) {
        std::vector<scalar> col_m, col_delta, col_varz, col_feasible, col_n;
        std::vector<scalar> col_err_x, col_err_z, col_mc_z, col_mc_z_se, col_mc_x, col_mc_x_se;
        std::vector<scalar> col_verdict, col_decomp;
        for (int m : opt.m_grid)
            for (scalar delta : opt.delta_grid)
                for (scalar varz : opt.varz_grid) {
                    theory::Prop1Threshold th =
                        theory::prop1_threshold(opt.var_x, varz, delta, m);
                    col_m.push_back(m);
                    col_delta.push_back(delta);
                    col_varz.push_back(varz);
                    col_feasible.push_back(th.feasible ? 1 : 0);
                    col_n.push_back(static_cast<scalar>(th.n));
                    const scalar err_x = opt.var_x / m;
                    const scalar err_z = th.feasible ? varz / th.n + delta * delta : -1;
                    col_err_x.push_back(err_x);
                    col_err_z.push_back(err_z);

                    scalar mc_z = -1, mc_z_se = -1, mc_x = -1, mc_x_se = -1;
                    scalar verdict = -1, decomp = -1;
                    if (th.feasible) {
                        max_threshold = std::max(max_threshold, th.n);
                        ++total;
                        if (opt.trials > 0) {
                            theory::Source zsrc;
                            zsrc.kind = theory::Source::Kind::gaussian;
                            zsrc.a = delta;
                            zsrc.b = std::sqrt(varz);
                            theory::Source xsrc;
                            xsrc.kind = theory::Source::Kind::gaussian;
                            xsrc.a = 0.0;
                            xsrc.b = std::sqrt(opt.var_x);
                            Rng rng = Rng::forked(
                                opt.seed, "theory/p1/" + std::to_string(row_index));
                            theory::ErrEstimate ez = theory::monte_carlo_err(
                                zsrc, 0.0, static_cast<int>(th.n), opt.trials, rng);
                            theory::ErrEstimate ex =
                                theory::monte_carlo_err(xsrc, 0.0, m, opt.trials, rng);
                            mc_z = ez.mean;
                            mc_z_se = ez.se;
                            mc_x = ex.mean;
                            mc_x_se = ex.se;
                            const scalar band =
                                3 * std::sqrt(ez.se * ez.se + ex.se * ex.se);
                            verdict = ez.mean <= ex.mean + band ? 1 : 0;
                            decomp = std::abs(ez.mean - err_z) <= 3 * ez.se ? 1 : 0;
                        } else {
                            verdict = err_z <= err_x ? 1 : 0;
                            decomp = 1;
                        }
                        if (verdict == 1) ++passed;
                    }
                    col_mc_z.push_back(mc_z);
                    col_mc_z_se.push_back(mc_z_se);
                    col_mc_x.push_back(mc_x);
                    col_mc_x_se.push_back(mc_x_se);
                    col_verdict.push_back(verdict);
                    col_decomp.push_back(decomp);
                    ++row_index;
                }
        write_series_csv(paths.reports + "/prop1_phase.csv",
                         {{"m", col_m},
                          {"delta", col_delta},
                          {"var_z", col_varz},
                          {"feasible", col_feasible},
                          {"n_star", col_n},
                          {"expected_err_x", col_err_x},
                          {"expected_err_z", col_err_z},
                          {"mc_err_z", col_mc_z},
                          {"mc_se_z", col_mc_z_se},
                          {"mc_err_x", col_mc_x},
                          {"mc_se_x", col_mc_x_se},
                          {"verdict", col_verdict},
                          {"decomposition_ok", col_decomp}});
    } else {
        std::vector<scalar> col_m, col_delta, col_eps, col_feasible, col_n;
        std::vector<scalar> col_bx, col_bz, col_verdict;
        for (int m : opt.m_grid)
            for (scalar delta : opt.delta_grid)
                for (scalar eps : opt.eps_grid) {
                    col_m.push_back(m);
                    col_delta.push_back(delta);
                    col_eps.push_back(eps);
                    if (eps <= delta || eps <= 0) {
                        col_feasible.push_back(0);
                        col_n.push_back(0);
                        col_bx.push_back(-1);
                        col_bz.push_back(-1);
                        col_verdict.push_back(-1);
                        continue;
                    }
                    const long long n_star = theory::prop2_threshold(eps, delta, m);
                    max_threshold = std::max(max_threshold, n_star);
                    const scalar bx = theory::hoeffding_bound(m, eps);
                    const scalar bz = theory::hoeffding_bound(n_star, eps - delta);
                    ++total;
                    const bool ok = theory::bound_dominates(n_star, eps - delta, m, eps);
                    if (ok) ++passed;
                    col_feasible.push_back(1);
                    col_n.push_back(static_cast<scalar>(n_star));
                    col_bx.push_back(bx);
                    col_bz.push_back(bz);
                    col_verdict.push_back(ok ? 1 : 0);
                }
        write_series_csv(paths.reports + "/prop2_phase.csv",
                         {{"m", col_m},
                          {"delta", col_delta},
                          {"eps", col_eps},
                          {"feasible", col_feasible},
                          {"n_star", col_n},
                          {"bound_x", col_bx},
                          {"bound_z", col_bz},
                          {"verdict", col_verdict}});
    }

    // Plot-ready sweep over n at the first grid point.
    {
        const int m0 = opt.m_grid.front();
        const scalar delta0 = opt.delta_grid.front();
        const scalar varz0 = opt.varz_grid.front();
        const scalar eps0 = opt.eps_grid.front();
        const int n_max = opt.sweep_n_max > 0
                              ? opt.sweep_n_max
                              : static_cast<int>(std::min<long long>(4 * max_threshold + 25,
                                                                     100000));
        std::vector<theory::SweepRow> sweep =
            theory::threshold_sweep(opt.var_x, varz0, delta0, eps0, m0, n_max);
        std::vector<scalar> n, bz, bx, ez, ex;
        for (const auto& r : sweep) {
            n.push_back(r.n);
            bz.push_back(r.bound_z);
            bx.push_back(r.bound_x);
            ez.push_back(r.expected_err_z);
            ex.push_back(r.expected_err_x);
        }
        write_series_csv(paths.reports + "/theory_sweep.csv", {{"n", n},
                                                               {"bound_z", bz},
                                                               {"bound_x", bx},
                                                               {"expected_err_z", ez},
                                                               {"expected_err_x", ex}});
    }

    DataIdentity id;
    id.dataset = "none";
    id.mode = "prop" + std::to_string(opt.prop);
    id.seed = opt.seed;
    id.target_sigma = 0;
    id.pyramid_levels = 0;
    id.gamma = 0;
    json config{{"prop", opt.prop},   {"m_grid", opt.m_grid},
                {"delta_grid", opt.delta_grid}, {"varz_grid", opt.varz_grid},
                {"eps_grid", opt.eps_grid}, {"var_x", opt.var_x},
                {"trials", opt.trials}, {"seed", opt.seed}};
    write_manifest(paths, id, "theory", config.dump());

    json report{{"prop", opt.prop}, {"rows", total}, {"passed", passed}};
    write_report_json(paths.reports + "/theory.json", report);
    std::printf("proposition %d: %d/%d grid points verified\n", opt.prop, passed, total);
    if (passed != total) throw NumericalError("a proposition verdict failed on the grid");
    std::printf("wrote %s\n", (paths.reports + (opt.prop == 1 ? "/prop1_phase.csv"
                                                              : "/prop2_phase.csv"))
                                  .c_str());
}

// --------------------------------------------------------------------- demo

void cmd_demo(const DemoOptions& opt) {
    RunPaths paths = run_paths(opt.run);
    ensure_run_dirs(paths);
    DatasetSpec spec = parse_dataset_spec(opt.dataset);
    if (spec.kind == DatasetSpec::Kind::directory)
        throw ConfigError("demo expects a toy dataset spec (toy:... or toy2:...)");
    LabeledImageSet train = load_from_spec(spec, opt.seed, "train");
    LabeledImageSet test = load_from_spec(spec, opt.seed, "test", opt.test_spc);

    DiscrepancyConfig cfg = desk_discrepancy_config();
    DiscrepancyResult r = fid_cas_discrepancy(train, test, cfg, opt.seed);

    const scalar fid_hi = std::max(r.fid_concentrated, r.fid_sparse);
    const scalar fid_gap =
        fid_hi > 0 ? std::abs(r.fid_concentrated - r.fid_sparse) / fid_hi : 0.0;
    const scalar cas_gap = r.cas_sparse - r.cas_concentrated;

    std::printf("sampling regime    concentrated (tau=%.2f)  sparse (tau=%.2f)\n",
                cfg.tau_concentrated, cfg.tau_sparse);
    std::printf("FID                %-24.6f %-24.6f\n", r.fid_concentrated, r.fid_sparse);
    std::printf("CAS                %-24.4f %-24.4f\n", r.cas_concentrated, r.cas_sparse);
    std::printf("FID relative gap   %.1f%%\n", 100.0 * fid_gap);
    std::printf("CAS gap            %.1f points (sparse - concentrated)\n", 100.0 * cas_gap);
    std::printf("oracle accuracy    %.4f\n", r.oracle_accuracy);

    json report{{"tau_concentrated", cfg.tau_concentrated},
                {"tau_sparse", cfg.tau_sparse},
                {"fid_concentrated", round6(r.fid_concentrated)},
                {"fid_sparse", round6(r.fid_sparse)},
                {"fid_relative_gap", round6(fid_gap)},
                {"cas_concentrated", round6(r.cas_concentrated)},
                {"cas_sparse", round6(r.cas_sparse)},
                {"cas_gap", round6(cas_gap)},
                {"oracle_accuracy", round6(r.oracle_accuracy)}};
    write_report_json(paths.reports + "/discrepancy.json", report);

    DataIdentity id = base_identity(opt.dataset, train, opt.seed, 0);
    id.mode = latent_mode_name(cfg.pipeline.mode);
    id.noise_dim = cfg.pipeline.gen.noise_dim;
    id.pyramid_levels = cfg.pipeline.gen.pyramid.levels;
    id.gamma = cfg.pipeline.gen.pyramid.gamma;
    json config{{"dataset", opt.dataset}, {"seed", opt.seed}, {"test_spc", opt.test_spc}};
    write_manifest(paths, id, "demo", config.dump());
    std::printf("wrote %s\n", (paths.reports + "/discrepancy.json").c_str());
}

}  // namespace cola::cli
