#pragma once

#include "cola/generation.hpp"

namespace cola {

struct PosteriorConfig {
    // Diagonal by default: small-sample clusters rarely have enough members
    // for a well-conditioned full covariance. Full mode needs >= 2 members
    // per cluster.
    bool full_covariance = false;
    scalar ridge = 1e-4;  // added to the covariance diagonal before factoring
};

struct ClusterGaussian {
    Tensor mean;  // (D)
    Tensor chol;  // (D, D) lower factor of cov + ridge * I
    int count = 0;
};

// Per-cluster Gaussian over full latent rows, one component per cluster,
// sampled as a uniform mixture.
struct Posterior {
    int class_dim = 0;
    int noise_dim = 0;
    std::vector<ClusterGaussian> components;

    int dim() const { return class_dim + noise_dim; }
    int clusters() const { return static_cast<int>(components.size()); }
};

Posterior fit_posterior(const LatentTable& latents, const PosteriorConfig& cfg);

// Draws `count` codes from the uniform mixture: c ~ U[K], z ~ N(mu_c,
// tau^2 Sigma_c), then per-block renormalization. Low tau concentrates
// samples near the cluster means; tau = 1 reproduces the fitted spread.
// components_out, when given, receives the sampled component per row.
Tensor sample_codes(const Posterior& posterior, int count, scalar tau, Rng& rng,
                    std::vector<int>* components_out = nullptr);

// Same draw restricted to one mixture component.
Tensor sample_component_codes(const Posterior& posterior, int component, int count, scalar tau,
                              Rng& rng);

// Decodes arbitrary code rows (N, latent_dim) into CHW images.
std::vector<Tensor> decode_codes(nn::Generator& generator, const Tensor& codes,
                                 int batch_size = 64);

}  // namespace cola
