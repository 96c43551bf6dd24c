#pragma once

#include <functional>
#include <memory>

#include "cola/augment.hpp"
#include "cola/data.hpp"
#include "cola/nn/models.hpp"
#include "cola/nn/optim.hpp"

namespace cola {

struct GaussianMoments {
    Tensor mean;  // (F)
    Tensor cov;   // (F, F), unbiased
    int count = 0;
};

// Mean and unbiased covariance of feature rows (N, F), N >= 2.
GaussianMoments feature_moments(const Tensor& features);

// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}), computed through the
// symmetric product sqrt(Sa) Sb sqrt(Sa). Eigenvalues in [-1e-8, 0) are
// treated as roundoff and clipped; anything more negative raises.
scalar frechet_distance(const GaussianMoments& a, const GaussianMoments& b);

using FeatureFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Raw pixels, one row per image.
FeatureFn flatten_features();
// Penultimate activations of a trained classifier, eval mode.
FeatureFn penultimate_features(std::shared_ptr<nn::Classifier> classifier, int batch_size = 64);
// Projection onto the top principal components of `reference` pixels.
FeatureFn pca_features(const std::vector<Tensor>& reference, int dims);

struct FidResult {
    scalar mean = 0;
    std::vector<scalar> values;  // one per resample
};

// Frechet distance between fixed real features and `repeats` fresh synthetic
// sets, averaged.
FidResult fid_score(const std::vector<Tensor>& real,
                    const std::function<std::vector<Tensor>(Rng&)>& sample_set, int repeats,
                    const FeatureFn& features, Rng& rng);

// Classifier training recipe shared by CAS, the oracle classifier and the
// small-sample mixes.
struct TrainEvalConfig {
    std::string backbone = "tiny";
    int epochs = 40;
    int batch_size = 32;
    nn::OptimConfig optim;
    bool augment = true;
    AugmentConfig augment_cfg;
    // Fixed batches per epoch; 0 derives ceil(N / batch). The mix harness
    // pins this so every regime takes identical step counts.
    int steps_per_epoch = 0;
    int log_every = 0;

    TrainEvalConfig() {
        optim.kind = nn::OptimConfig::Kind::sgd;
        optim.lr = 0.05;
        optim.momentum = 0.9;
        optim.weight_decay = 5e-4;
        optim.decay = 0.5;
        optim.decay_interval = 15;
    }
};

struct TrainEvalResult {
    scalar accuracy = 0;
    int steps_per_epoch = 0;
    long total_steps = 0;
    std::vector<scalar> train_loss;
    std::shared_ptr<nn::Classifier> classifier;
};

TrainEvalResult train_eval_classifier(const LabeledImageSet& train, const LabeledImageSet& test,
                                      const TrainEvalConfig& cfg, std::uint64_t seed);

scalar eval_accuracy(nn::Classifier& classifier, const LabeledImageSet& test,
                     int batch_size = 64);

// Small-sample mix: keeps all real images and adds synthetic ones so the real
// fraction is `ratio`; ratio 1 trains on the real set alone. Step counts per
// epoch are pinned to ceil(2 * |real| / batch) in every regime.
struct MixResult {
    scalar accuracy = 0;
    int real_count = 0;
    int synth_count = 0;
    int steps_per_epoch = 0;
    long total_steps = 0;
};

MixResult train_mixed(const LabeledImageSet& real, const LabeledImageSet& synthetic, scalar ratio,
                      const LabeledImageSet& test, TrainEvalConfig cfg, std::uint64_t seed);

}  // namespace cola
