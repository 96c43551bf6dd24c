#pragma once

#include "cola/augment.hpp"
#include "cola/data.hpp"
#include "cola/nn/models.hpp"
#include "cola/nn/optim.hpp"

namespace cola {

// One spherical target per image, drawn from a K-component mixture on the
// unit sphere in R^K. Target values and their generating component stay
// fixed; training permutes which image holds which target.
struct TargetTable {
    Tensor targets;              // (N, K) unit rows
    std::vector<int> component;  // target row -> mixture component
    std::vector<int> of_image;   // image index -> target row
};

TargetTable init_targets(int count, int clusters, scalar sigma, Rng& rng);

struct ClusterConfig {
    int clusters = 4;
    scalar target_sigma = 0.15;
    std::string backbone = "tiny";
    int epochs = 200;
    int batch_size = 128;
    // Augmented views averaged into the embedding loss on top of the
    // identity view used for matching.
    int extra_views = 2;
    AugmentConfig augment;
    // Rotation-prediction batches per epoch over 4x rotated stacks;
    // 0 runs a full pass.
    int rotation_batches = 0;
    nn::OptimConfig optim;
    int log_every = 0;  // epochs between progress lines; 0 silences

    ClusterConfig() {
        optim.kind = nn::OptimConfig::Kind::sgd;
        optim.lr = 0.05;
        optim.momentum = 0.9;
        optim.weight_decay = 5e-4;
        optim.decay = 0.5;
        optim.decay_interval = 50;
    }
};

struct Step1Result {
    nn::DualHeadEncoder encoder;
    TargetTable table;
    std::vector<scalar> assign_loss;  // per epoch, mean over batches and views
    std::vector<scalar> rot_loss;
    std::vector<scalar> rot_acc;

    // image -> cluster id (the component of its matched target)
    std::vector<int> memberships() const;
};

Step1Result train_clustering(const LabeledImageSet& data, const ClusterConfig& cfg,
                             std::uint64_t seed);

// Fraction of images whose cluster's majority label matches their own.
scalar cluster_purity(const std::vector<int>& memberships, const std::vector<int>& labels,
                      int clusters);

// Stacks image tensors (each CHW) into an NCHW batch.
Tensor stack_images(const std::vector<Tensor>& images, const std::vector<int>& indices);

}  // namespace cola
