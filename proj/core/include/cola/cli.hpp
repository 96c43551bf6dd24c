#pragma once

#include <string>
#include <vector>

#include "cola/tensor.hpp"

namespace cola::cli {

struct ClusterOptions {
    std::string run = "default";
    std::string dataset = "toy:4x100@32";
    std::string mode = "cola";  // anything else is refused: Step I is unsupervised
    std::uint64_t seed = 1;
    int spc = 0;       // per-class subsample; 0 keeps the whole dataset
    int clusters = 0;  // number of targets K; 0 = dataset class count
    std::string backbone = "tiny";
    int epochs = 200;
    int batch = 128;
    scalar target_sigma = 0.15;
    int extra_views = 2;
    int rotation_batches = 0;  // 0 = full rotation pass per epoch
    int log_every = 10;
};

struct GenOptions {
    std::string run = "default";
    std::string dataset = "toy:4x100@32";
    std::uint64_t seed = 1;
    int spc = 0;
    std::string mode = "cola";  // cola | scola | glo
    std::string backbone = "tiny";
    int noise_dim = 16;
    int epochs = 500;
    int batch = 64;
    std::string loss = "lap";  // perceptual needs an extractor and is refused here
    int pyramid_levels = 3;
    scalar gamma = 1.0;
    scalar target_sigma = 0.15;  // must match the cluster run (cola mode)
    bool resume = false;         // continue a saved run for `epochs` more epochs
    int log_every = 20;
};

struct SampleOptions {
    std::string run = "default";
    int count = 64;
    bool per_class = false;  // split count evenly over clusters
    scalar tau = 1.0;
    bool full_cov = false;  // diagonal covariance unless requested
    scalar ridge = 1e-4;
    std::string out_dir;     // image directory; default <run>/reports/samples
    std::uint64_t seed = 0;  // 0 derives from the artifact identity
};

struct EvalOptions {
    std::string run = "default";
    scalar tau = 1.0;
    int repeats = 10;
    std::string features = "penultimate";  // flatten | pca | penultimate
    int pca_dims = 16;
    int oracle_epochs = 30;
    std::uint64_t seed = 0;  // 0 derives from the artifact identity
};

struct ClassifyOptions {
    std::string run = "default";
    scalar tau = 1.0;
    scalar ratio = 0.5;  // real fraction in the mix regime
    int per_class = 0;   // synthetic images per class; 0 = real per-class count
    int test_spc = 50;   // held-out toy images per class
    std::string test_dir;  // held-out set for directory datasets
    std::string backbone = "tiny";
    int epochs = 40;
    int batch = 32;
    int seeds = 3;
    std::uint64_t seed = 0;  // base seed; 0 derives from the artifact identity
};

struct TheoryOptions {
    std::string run = "theory";
    int prop = 1;  // 1 or 2
    std::vector<int> m_grid{20};
    std::vector<scalar> delta_grid{0.05};  // proxy mean gap
    std::vector<scalar> varz_grid{1.0};    // prop 1: proxy variance
    std::vector<scalar> eps_grid{0.2};     // prop 2: deviation threshold
    scalar var_x = 1.0;
    long long trials = 100000;  // Monte-Carlo trials; 0 skips simulation
    int sweep_n_max = 0;        // plot-data sweep length; 0 = 4x largest threshold
    std::uint64_t seed = 7;
};

struct DemoOptions {
    std::string run = "demo";
    std::string dataset = "toy2:4x40@16";
    std::uint64_t seed = 1;
    int test_spc = 50;
};

void cmd_cluster(const ClusterOptions& opt);
void cmd_gen(const GenOptions& opt);
void cmd_sample(const SampleOptions& opt);
void cmd_eval(const EvalOptions& opt);
void cmd_classify(const ClassifyOptions& opt);
void cmd_theory(const TheoryOptions& opt);
void cmd_demo(const DemoOptions& opt);

}  // namespace cola::cli
