// cola: train, sample and evaluate class-conditional generators without a
// discriminator, plus the accompanying sample-complexity checks.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 1 other.

#include <cstdio>
#include <exception>

#include "CLI11.hpp"

#include "cola/cli.hpp"
#include "cola/common.hpp"

namespace {

constexpr const char* kFooter =
    "Artifacts land under $COLA_RUNS_DIR (default ./runs), one directory per\n"
    "--run with step1/, step2/, posterior/ and reports/ inside. A TOML file\n"
    "passed as --config may hold any option in a [command] section; flags\n"
    "override file values.";

void add_cluster(CLI::App& app, cola::cli::ClusterOptions& opt) {
    CLI::App* cmd = app.add_subcommand("cluster", "Step I: cluster images in latent space");
    cmd->fallthrough();
    cmd->add_option("--run", opt.run, "run name under the runs root")->capture_default_str();
    cmd->add_option("--dataset", opt.dataset,
                    "toy:<K>x<spc>@<H>, toy2:<K>x<spc>@<H> or a dataset directory")
        ->capture_default_str();
    cmd->add_option("--mode", opt.mode, "must be cola; Step I is unsupervised")
        ->capture_default_str();
    cmd->add_option("--seed", opt.seed, "master seed")->capture_default_str();
    cmd->add_option("--spc", opt.spc, "per-class subsample; 0 = all")->capture_default_str();
    cmd->add_option("--clusters", opt.clusters, "target count K; 0 = dataset classes")
        ->capture_default_str();
    cmd->add_option("--backbone", opt.backbone, "encoder trunk: tiny | resnet")
        ->capture_default_str();
    cmd->add_option("--epochs", opt.epochs)->capture_default_str();
    cmd->add_option("--batch", opt.batch)->capture_default_str();
    cmd->add_option("--target-sigma", opt.target_sigma, "spread of spherical targets")
        ->capture_default_str();
    cmd->add_option("--extra-views", opt.extra_views, "augmented views per image")
        ->capture_default_str();
    cmd->add_option("--rotation-batches", opt.rotation_batches,
                    "rotation-head batches per epoch; 0 = full pass")
        ->capture_default_str();
    cmd->add_option("--log-every", opt.log_every)->capture_default_str();
}

void add_gen(CLI::App& app, cola::cli::GenOptions& opt) {
    CLI::App* cmd = app.add_subcommand("gen", "Step II: fit the generator and latent codes");
    cmd->fallthrough();
    cmd->add_option("--run", opt.run)->capture_default_str();
    cmd->add_option("--dataset", opt.dataset)->capture_default_str();
    cmd->add_option("--seed", opt.seed)->capture_default_str();
    cmd->add_option("--spc", opt.spc, "per-class subsample; 0 = all")->capture_default_str();
    cmd->add_option("--mode", opt.mode, "cola | scola | glo")->capture_default_str();
    cmd->add_option("--backbone", opt.backbone, "generator: tiny | tiny-cbn")
        ->capture_default_str();
    cmd->add_option("--noise-dim", opt.noise_dim)->capture_default_str();
    cmd->add_option("--epochs", opt.epochs)->capture_default_str();
    cmd->add_option("--batch", opt.batch)->capture_default_str();
    cmd->add_option("--loss", opt.loss, "reconstruction loss: lap | perceptual")
        ->capture_default_str();
    cmd->add_option("--pyramid-levels", opt.pyramid_levels)->capture_default_str();
    cmd->add_option("--gamma", opt.gamma, "pyramid level weight")->capture_default_str();
    cmd->add_option("--target-sigma", opt.target_sigma,
                    "must match the cluster run (cola mode)")
        ->capture_default_str();
    cmd->add_flag("--resume", opt.resume, "continue the saved run for --epochs more epochs");
    cmd->add_option("--log-every", opt.log_every)->capture_default_str();
}

void add_sample(CLI::App& app, cola::cli::SampleOptions& opt) {
    CLI::App* cmd =
        app.add_subcommand("sample", "Step III: draw from the fitted latent mixture");
    cmd->fallthrough();
    cmd->add_option("--run", opt.run)->capture_default_str();
    cmd->add_option("--count", opt.count, "total images to draw")->capture_default_str();
    cmd->add_flag("--per-class", opt.per_class, "split --count evenly over clusters");
    cmd->add_option("--tau", opt.tau, "temperature; 1 = fitted spread")->capture_default_str();
    cmd->add_flag("--full-cov", opt.full_cov,
                  "full covariance fit (needs >= 2 members per cluster)");
    cmd->add_option("--ridge", opt.ridge)->capture_default_str();
    cmd->add_option("--out", opt.out_dir, "image directory (default <run>/reports/samples)");
    cmd->add_option("--seed", opt.seed, "0 = derive from the artifact identity")
        ->capture_default_str();
}

void add_eval(CLI::App& app, cola::cli::EvalOptions& opt) {
    CLI::App* cmd = app.add_subcommand("eval", "feature-space distance of samples vs training data");
    cmd->fallthrough();
    cmd->add_option("--run", opt.run)->capture_default_str();
    cmd->add_option("--tau", opt.tau)->capture_default_str();
    cmd->add_option("--repeats", opt.repeats, "resamples averaged into the score")
        ->capture_default_str();
    cmd->add_option("--features", opt.features, "flatten | pca | penultimate")
        ->capture_default_str();
    cmd->add_option("--pca-dims", opt.pca_dims)->capture_default_str();
    cmd->add_option("--oracle-epochs", opt.oracle_epochs,
                    "training epochs for the penultimate-feature classifier")
        ->capture_default_str();
    cmd->add_option("--seed", opt.seed, "0 = derive from the artifact identity")
        ->capture_default_str();
}

void add_classify(CLI::App& app, cola::cli::ClassifyOptions& opt) {
    CLI::App* cmd = app.add_subcommand(
        "classify", "train classifiers on real / synthetic / mixed data and compare");
    cmd->fallthrough();
    cmd->add_option("--run", opt.run)->capture_default_str();
    cmd->add_option("--tau", opt.tau)->capture_default_str();
    cmd->add_option("--ratio", opt.ratio, "real fraction in the mix regime, in (0,1]")
        ->capture_default_str();
    cmd->add_option("--per-class", opt.per_class,
                    "synthetic images per class; 0 = real per-class count")
        ->capture_default_str();
    cmd->add_option("--test-spc", opt.test_spc, "held-out toy images per class")
        ->capture_default_str();
    cmd->add_option("--test-dir", opt.test_dir, "held-out set for directory datasets");
    cmd->add_option("--backbone", opt.backbone, "tiny | flatten | resnet")
        ->capture_default_str();
    cmd->add_option("--epochs", opt.epochs)->capture_default_str();
    cmd->add_option("--batch", opt.batch)->capture_default_str();
    cmd->add_option("--seeds", opt.seeds, "independent training runs per regime")
        ->capture_default_str();
    cmd->add_option("--seed", opt.seed, "0 = derive from the artifact identity")
        ->capture_default_str();
}

void add_theory(CLI::App& app, cola::cli::TheoryOptions& opt) {
    CLI::App* cmd = app.add_subcommand(
        "theory", "verify the proxy-sample-size propositions on a grid");
    cmd->fallthrough();
    cmd->add_option("--run", opt.run)->capture_default_str();
    cmd->add_option("--prop", opt.prop, "1 (expected error) or 2 (Hoeffding bounds)")
        ->capture_default_str();
    cmd->add_option("--m", opt.m_grid, "real sample sizes")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--delta", opt.delta_grid, "proxy mean gaps")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--varz", opt.varz_grid, "proxy variances (prop 1)")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--eps", opt.eps_grid, "deviation thresholds (prop 2)")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--var-x", opt.var_x, "real-data variance")->capture_default_str();
    cmd->add_option("--trials", opt.trials, "Monte-Carlo trials; 0 = formulas only")
        ->capture_default_str();
    cmd->add_option("--sweep-n-max", opt.sweep_n_max, "sweep length; 0 = auto")
        ->capture_default_str();
    cmd->add_option("--seed", opt.seed)->capture_default_str();
}

void add_demo(CLI::App& app, cola::cli::DemoOptions& opt) {
    CLI::App* cmd = app.add_subcommand(
        "demo", "feature-distance vs classification-accuracy discrepancy report");
    cmd->fallthrough();
    cmd->add_option("--run", opt.run)->capture_default_str();
    cmd->add_option("--dataset", opt.dataset, "toy spec with position as nuisance factor")
        ->capture_default_str();
    cmd->add_option("--seed", opt.seed)->capture_default_str();
    cmd->add_option("--test-spc", opt.test_spc)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cola: non-adversarial class-conditional image generation"};
    app.footer(kFooter);
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML config file; one [command] section per subcommand");

    cola::cli::ClusterOptions cluster_opts;
    cola::cli::GenOptions gen_opts;
    cola::cli::SampleOptions sample_opts;
    cola::cli::EvalOptions eval_opts;
    cola::cli::ClassifyOptions classify_opts;
    cola::cli::TheoryOptions theory_opts;
    cola::cli::DemoOptions demo_opts;

    add_cluster(app, cluster_opts);
    add_gen(app, gen_opts);
    add_sample(app, sample_opts);
    add_eval(app, eval_opts);
    add_classify(app, classify_opts);
    add_theory(app, theory_opts);
    add_demo(app, demo_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // parse problems are configuration errors
    }

    try {
        if (app.got_subcommand("cluster")) cola::cli::cmd_cluster(cluster_opts);
        if (app.got_subcommand("gen")) cola::cli::cmd_gen(gen_opts);
        if (app.got_subcommand("sample")) cola::cli::cmd_sample(sample_opts);
        if (app.got_subcommand("eval")) cola::cli::cmd_eval(eval_opts);
        if (app.got_subcommand("classify")) cola::cli::cmd_classify(classify_opts);
        if (app.got_subcommand("theory")) cola::cli::cmd_theory(theory_opts);
        if (app.got_subcommand("demo")) cola::cli::cmd_demo(demo_opts);
    } catch (const cola::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const cola::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
