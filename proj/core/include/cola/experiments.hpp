#pragma once

#include "cola/artifacts.hpp"
#include "cola/metrics.hpp"

namespace cola {

// One configuration for the full train-generate-fit pipeline. The cluster
// stage only runs in cola mode; scola reads labels and glo draws random
// class directions.
struct PipelineConfig {
    LatentMode mode = LatentMode::scola;
    ClusterConfig cluster;
    GenerationConfig gen;
    PosteriorConfig posterior;
};

struct TrainedPipeline {
    nn::Generator generator;
    LatentTable latents;
    Posterior posterior;
    std::vector<scalar> gen_loss;
};

TrainedPipeline train_pipeline(const LabeledImageSet& train, const PipelineConfig& cfg,
                               std::uint64_t seed);

// Balanced synthetic set: per_class draws from each mixture component at the
// given temperature, labeled by component.
LabeledImageSet synthesize_set(TrainedPipeline& pipeline, int per_class, scalar tau, Rng& rng);

// The FID-vs-CAS probe: between a concentrated (low tau) and a sparse
// (tau = 1) sampling regime, feature-space FID barely moves while a
// classifier trained on the concentrated samples generalizes much worse.
struct DiscrepancyConfig {
    PipelineConfig pipeline;
    TrainEvalConfig oracle;  // trained on real data; its penultimate feeds FID
    TrainEvalConfig cas;     // trained on synthetic samples, scored on real
    int per_class = 0;       // synthetic draws per class; 0 = real per-class count
    scalar tau_concentrated = 0.25;
    scalar tau_sparse = 1.0;
    int fid_repeats = 5;
};

struct DiscrepancyResult {
    scalar fid_concentrated = 0, fid_sparse = 0;
    scalar cas_concentrated = 0, cas_sparse = 0;
    scalar oracle_accuracy = 0;
};

DiscrepancyResult fid_cas_discrepancy(const LabeledImageSet& train, const LabeledImageSet& test,
                                      const DiscrepancyConfig& cfg, std::uint64_t seed);

// Desk-scale recipes (16x16 toy images, a few hundred samples) shared by the
// demo command and the regression suite.
PipelineConfig desk_pipeline_config(LatentMode mode);
TrainEvalConfig desk_classifier_config();
DiscrepancyConfig desk_discrepancy_config();

}  // namespace cola
