#include "cola/experiments.hpp"

#include <algorithm>
#include <cmath>

namespace cola {

TrainedPipeline train_pipeline(const LabeledImageSet& train, const PipelineConfig& cfg,
                               std::uint64_t seed) {
    train.validate();
    Rng latent_rng = Rng::forked(seed, "pipeline/latents");

    LatentTable latents;
    switch (cfg.mode) {
        case LatentMode::cola: {
            Step1Result step1 = train_clustering(train, cfg.cluster, seed);
            latents = latent_from_targets(step1.table, cfg.gen.noise_dim, latent_rng);
            break;
        }
        case LatentMode::scola:
            if (!train.labeled()) throw ConfigError("scola mode needs a labeled dataset");
            latents = latent_from_labels(train.labels, train.class_count, cfg.gen.noise_dim,
                                         latent_rng);
            break;
        case LatentMode::glo:
            if (!train.labeled()) throw ConfigError("glo mode needs a labeled dataset");
            latents = latent_random_sphere(train.labels, train.class_count, cfg.gen.noise_dim,
                                           latent_rng);
            break;
    }

    Step2Result step2 = train_generation(train.images, latents, cfg.gen, seed);
    Posterior posterior = fit_posterior(latents, cfg.posterior);
    return {std::move(step2.generator), std::move(latents), std::move(posterior),
            std::move(step2.loss)};
}

LabeledImageSet synthesize_set(TrainedPipeline& pipeline, int per_class, scalar tau, Rng& rng) {
    if (per_class < 1) throw ConfigError("synthesize_set: per_class must be >= 1");
    LabeledImageSet out;
    out.class_count = pipeline.posterior.clusters();
    for (int c = 0; c < out.class_count; ++c) {
        Tensor codes = sample_component_codes(pipeline.posterior, c, per_class, tau, rng);
        for (auto& img : decode_codes(pipeline.generator, codes)) {
            for (scalar& v : img.vec()) v = std::clamp(v, 0.0, 1.0);
            out.images.push_back(std::move(img));
            out.labels.push_back(c);
        }
    }
    return out;
}

DiscrepancyResult fid_cas_discrepancy(const LabeledImageSet& train, const LabeledImageSet& test,
                                      const DiscrepancyConfig& cfg, std::uint64_t seed) {
    TrainedPipeline pipeline = train_pipeline(train, cfg.pipeline, seed);

    TrainEvalResult oracle =
        train_eval_classifier(train, test, cfg.oracle, derive_seed(seed, "discrepancy/oracle"));
    FeatureFn features = penultimate_features(oracle.classifier);

    const int per_class = cfg.per_class > 0 ? cfg.per_class : train.size() / train.class_count;
    DiscrepancyResult result;
    result.oracle_accuracy = oracle.accuracy;

    Rng fid_rng = Rng::forked(seed, "discrepancy/fid");
    auto fid_for = [&](scalar tau) {
        auto sampler = [&pipeline, per_class, tau](Rng& rng) {
            TrainedPipeline& p = pipeline;
            LabeledImageSet set = synthesize_set(p, per_class, tau, rng);
            return set.images;
        };
        return fid_score(train.images, sampler, cfg.fid_repeats, features, fid_rng).mean;
    };
    result.fid_concentrated = fid_for(cfg.tau_concentrated);
    result.fid_sparse = fid_for(cfg.tau_sparse);

    Rng cas_rng = Rng::forked(seed, "discrepancy/cas");
    auto cas_for = [&](scalar tau, const char* stream) {
        LabeledImageSet synth = synthesize_set(pipeline, per_class, tau, cas_rng);
        return train_eval_classifier(synth, test, cfg.cas, derive_seed(seed, stream)).accuracy;
    };
    result.cas_concentrated = cas_for(cfg.tau_concentrated, "discrepancy/cas_c");
    result.cas_sparse = cas_for(cfg.tau_sparse, "discrepancy/cas_s");
    return result;
}

PipelineConfig desk_pipeline_config(LatentMode mode) {
    PipelineConfig cfg;
    cfg.mode = mode;
    cfg.cluster.clusters = 4;
    cfg.cluster.epochs = 40;
    cfg.cluster.batch_size = 64;
    cfg.cluster.extra_views = 2;
    cfg.cluster.rotation_batches = 1;
    cfg.cluster.optim.decay_interval = 15;
    cfg.gen.backbone = "tiny";
    cfg.gen.noise_dim = 8;
    cfg.gen.epochs = 150;
    cfg.gen.batch_size = 32;
    return cfg;
}

TrainEvalConfig desk_classifier_config() {
    TrainEvalConfig cfg;
    cfg.backbone = "tiny";
    cfg.epochs = 30;
    cfg.batch_size = 32;
    cfg.optim.decay_interval = 12;
    return cfg;
}

DiscrepancyConfig desk_discrepancy_config() {
    DiscrepancyConfig cfg;
    cfg.pipeline = desk_pipeline_config(LatentMode::scola);
    cfg.oracle = desk_classifier_config();
    cfg.cas = desk_classifier_config();
    cfg.cas.backbone = "flatten";
    cfg.fid_repeats = 5;
    return cfg;
}

}  // namespace cola
