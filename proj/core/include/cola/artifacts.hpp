#pragma once

#include "cola/clustering.hpp"
#include "cola/generation.hpp"
#include "cola/nn/checkpoint.hpp"
#include "cola/posterior.hpp"

namespace cola {

// Everything that pins which data and pipeline configuration an artifact
// belongs to. Downstream stages refuse artifacts whose identity differs.
struct DataIdentity {
    std::string dataset;  // canonical dataset spec string
    int classes = 0;
    int noise_dim = 0;
    int height = 0, width = 0, channels = 0;
    int per_class = 0;
    std::string mode = "cola";
    std::uint64_t seed = 0;
    scalar target_sigma = 0.15;
    int pyramid_levels = 3;
    scalar gamma = 1.0;

    std::string canonical() const;
    std::uint64_t hash() const;
};

// Raises (naming `stage`) unless the identities hash equal.
void require_same_identity(const DataIdentity& expected, const DataIdentity& found,
                           const std::string& stage);

// Run directory layout: <runs root>/<name>/{step1,step2,posterior,reports}.
// The root comes from COLA_RUNS_DIR, defaulting to ./runs.
struct RunPaths {
    std::string root, step1, step2, posterior, reports;

    std::string step1_file() const { return step1 + "/step1.cola"; }
    std::string step2_file() const { return step2 + "/step2.cola"; }
    std::string posterior_file() const { return posterior + "/posterior.cola"; }
};

RunPaths run_paths(const std::string& run_name);
void ensure_run_dirs(const RunPaths& paths);

// First line of .git/HEAD resolved to a commit hash; "unknown" outside a
// repository.
std::string git_head_hash();

void write_manifest(const RunPaths& paths, const DataIdentity& id, const std::string& command,
                    const std::string& config_json);

// Named columns of equal length, written as CSV with a header row.
void write_series_csv(const std::string& path,
                      const std::vector<std::pair<std::string, std::vector<scalar>>>& series);

// ------------------------------------------------------------ step artifacts

void save_step1_artifact(const std::string& path, nn::DualHeadEncoder& encoder,
                         const TargetTable& table, const std::string& backbone, int channels,
                         int image_size, const DataIdentity& id);

struct Step1Artifact {
    std::string backbone;
    int channels = 0, image_size = 0;
    DataIdentity identity;
    TargetTable table;
    Blob blob;
};

Step1Artifact load_step1_artifact(const std::string& path);
nn::DualHeadEncoder restore_encoder(const Step1Artifact& artifact);

void save_step2_artifact(const std::string& path, nn::Generator& generator,
                         const LatentTable& latents, const std::string& backbone, int channels,
                         int image_size, const DataIdentity& id, int epochs_completed = 0);

struct Step2Artifact {
    std::string backbone;
    int channels = 0, image_size = 0;
    int epochs_completed = 0;
    DataIdentity identity;
    LatentTable latents;
    Blob blob;
};

Step2Artifact load_step2_artifact(const std::string& path);
nn::Generator restore_generator(const Step2Artifact& artifact);

void save_posterior_artifact(const std::string& path, const Posterior& posterior,
                             const PosteriorConfig& cfg, const DataIdentity& id);

struct PosteriorArtifact {
    DataIdentity identity;
    PosteriorConfig config;
    Posterior posterior;
};

PosteriorArtifact load_posterior_artifact(const std::string& path);

}  // namespace cola
