#pragma once

#include "cola/clustering.hpp"
#include "cola/data.hpp"
#include "cola/nn/models.hpp"
#include "cola/nn/optim.hpp"
#include "cola/pyramid.hpp"

namespace cola {

enum class LatentMode { cola, scola, glo };

LatentMode parse_latent_mode(const std::string& text);
std::string latent_mode_name(LatentMode mode);

// Per-image code z_i = (class block, noise block), each block unit-norm.
struct LatentTable {
    Tensor z;                     // (N, class_dim + noise_dim)
    int class_dim = 0;
    int noise_dim = 0;
    std::vector<int> membership;  // per row: cluster (cola) or label (scola/glo)

    int rows() const { return z.dim(0); }
    // Rescales both blocks of every row to unit norm.
    void renormalize();
};

// cola: class block = the image's matched spherical target.
LatentTable latent_from_targets(const TargetTable& table, int noise_dim, Rng& rng);
// scola: class block = one-hot label.
LatentTable latent_from_labels(const std::vector<int>& labels, int classes, int noise_dim,
                               Rng& rng);
// glo ablation: class block = uniform random point on the sphere; labels kept
// only as membership for the posterior stage.
LatentTable latent_random_sphere(const std::vector<int>& labels, int classes, int noise_dim,
                                 Rng& rng);

enum class ReconLoss { lap, perceptual };

ReconLoss parse_recon_loss(const std::string& text);

struct GenerationConfig {
    std::string backbone = "tiny";
    int noise_dim = 16;
    int epochs = 500;
    // First epoch number; resumed runs continue numbering (and the lr
    // schedule) where the checkpoint stopped.
    int epoch_offset = 0;
    int batch_size = 64;
    ReconLoss loss = ReconLoss::lap;
    PyramidConfig pyramid;
    // Required when loss == perceptual. The feature maps come from outside
    // the training data, so small-sample runs have none to offer.
    const PerceptualExtractor* extractor = nullptr;
    nn::OptimConfig theta_optim;   // generator parameters
    nn::OptimConfig latent_optim;  // per-image codes
    int log_every = 0;

    GenerationConfig() {
        theta_optim.kind = nn::OptimConfig::Kind::adam;
        theta_optim.lr = 0.001;
        theta_optim.decay = 0.5;
        theta_optim.decay_interval = 50;
        latent_optim.kind = nn::OptimConfig::Kind::adam;
        latent_optim.lr = 0.01;
        latent_optim.decay = 0.5;
        latent_optim.decay_interval = 50;
    }
};

struct Step2Result {
    nn::Generator generator;
    std::vector<scalar> loss;  // per epoch, mean over batches
};

// Joint descent on generator weights and latent rows under the pyramid loss;
// every epoch ends with a per-block renormalization of all rows.
Step2Result train_generation(const std::vector<Tensor>& images, LatentTable& latents,
                             const GenerationConfig& cfg, std::uint64_t seed);

// Same, continuing from an existing generator (optimizer moments restart;
// epoch numbering and the lr schedule pick up at cfg.epoch_offset).
Step2Result train_generation(const std::vector<Tensor>& images, LatentTable& latents,
                             const GenerationConfig& cfg, std::uint64_t seed,
                             nn::Generator&& warm_start);

// Decodes selected latent rows, returning one CHW image per index.
std::vector<Tensor> decode_rows(nn::Generator& generator, const LatentTable& latents,
                                const std::vector<int>& indices, int batch_size = 64);

}  // namespace cola
