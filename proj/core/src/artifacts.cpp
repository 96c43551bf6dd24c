#include "cola/artifacts.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace cola {

namespace {

json identity_to_json(const DataIdentity& id) {
    return json{{"dataset", id.dataset},
                {"classes", id.classes},
                {"noise_dim", id.noise_dim},
                {"height", id.height},
                {"width", id.width},
                {"channels", id.channels},
                {"per_class", id.per_class},
                {"mode", id.mode},
                {"seed", id.seed},
                {"target_sigma", id.target_sigma},
                {"pyramid_levels", id.pyramid_levels},
                {"gamma", id.gamma}};
}

DataIdentity identity_from_json(const json& j) {
    DataIdentity id;
    id.dataset = j.at("dataset").get<std::string>();
    id.classes = j.at("classes").get<int>();
    id.noise_dim = j.at("noise_dim").get<int>();
    id.height = j.at("height").get<int>();
    id.width = j.at("width").get<int>();
    id.channels = j.at("channels").get<int>();
    id.per_class = j.at("per_class").get<int>();
    id.mode = j.at("mode").get<std::string>();
    id.seed = j.at("seed").get<std::uint64_t>();
    id.target_sigma = j.at("target_sigma").get<scalar>();
    id.pyramid_levels = j.at("pyramid_levels").get<int>();
    id.gamma = j.at("gamma").get<scalar>();
    return id;
}

json parse_meta(const Blob& blob, const std::string& path, const std::string& kind) {
    json meta = json::parse(blob.meta_json, nullptr, false);
    if (meta.is_discarded()) throw std::runtime_error(path + ": artifact meta is not JSON");
    if (meta.value("kind", "") != kind)
        throw std::runtime_error(path + " is not a " + kind + " artifact");
    return meta;
}

}  // namespace

std::string DataIdentity::canonical() const {
    std::ostringstream out;
    out << "dataset=" << dataset << "|classes=" << classes << "|noise_dim=" << noise_dim
        << "|height=" << height << "|width=" << width << "|channels=" << channels
        << "|per_class=" << per_class << "|mode=" << mode << "|seed=" << seed
        << "|target_sigma=" << target_sigma << "|pyramid_levels=" << pyramid_levels
        << "|gamma=" << gamma;
    return out.str();
}

std::uint64_t DataIdentity::hash() const { return fnv1a64(canonical()); }

void require_same_identity(const DataIdentity& expected, const DataIdentity& found,
                           const std::string& stage) {
    if (expected.hash() != found.hash())
        throw ConfigError(stage + ": artifact identity mismatch\n  expected " +
                          expected.canonical() + "\n  found    " + found.canonical());
}

RunPaths run_paths(const std::string& run_name) {
    if (run_name.empty() || run_name.find('/') != std::string::npos)
        throw ConfigError("run name must be a plain directory name");
    const char* env = std::getenv("COLA_RUNS_DIR");
    const std::string base = env && *env ? env : "runs";
    RunPaths p;
    p.root = base + "/" + run_name;
    p.step1 = p.root + "/step1";
    p.step2 = p.root + "/step2";
    p.posterior = p.root + "/posterior";
    p.reports = p.root + "/reports";
    return p;
}

void ensure_run_dirs(const RunPaths& paths) {
    for (const auto& d : {paths.root, paths.step1, paths.step2, paths.posterior, paths.reports})
        fs::create_directories(d);
}

std::string git_head_hash() {
    std::ifstream head(".git/HEAD");
    if (!head) return "unknown";
    std::string line;
    std::getline(head, line);
    if (line.rfind("ref: ", 0) == 0) {
        std::ifstream ref(".git/" + line.substr(5));
        if (!ref) return "unknown";
        std::getline(ref, line);
    }
    return line.empty() ? "unknown" : line;
}

void write_manifest(const RunPaths& paths, const DataIdentity& id, const std::string& command,
                    const std::string& config_json) {
    json config = json::parse(config_json, nullptr, false);
    json manifest{{"command", command},
                  {"git", git_head_hash()},
                  {"identity", identity_to_json(id)},
                  {"identity_hash", hex64(id.hash())},
                  {"config", config.is_discarded() ? json(config_json) : config}};
    std::ofstream out(paths.root + "/manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + paths.root);
    out << manifest.dump(2) << "\n";
}

void write_series_csv(const std::string& path,
                      const std::vector<std::pair<std::string, std::vector<scalar>>>& series) {
    if (series.empty()) throw ConfigError("write_series_csv: no columns");
    const std::size_t rows = series[0].second.size();
    for (const auto& [name, col] : series)
        if (col.size() != rows) throw ConfigError("write_series_csv: ragged columns");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t c = 0; c < series.size(); ++c)
        out << (c ? "," : "") << series[c].first;
    out << "\n";
    out.precision(10);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < series.size(); ++c)
            out << (c ? "," : "") << series[c].second[r];
        out << "\n";
    }
}

// -------------------------------------------------------------------- step 1

void save_step1_artifact(const std::string& path, nn::DualHeadEncoder& encoder,
                         const TargetTable& table, const std::string& backbone, int channels,
                         int image_size, const DataIdentity& id) {
    Blob blob;
    json meta{{"kind", "step1"},
              {"backbone", backbone},
              {"channels", channels},
              {"image_size", image_size},
              {"clusters", table.targets.dim(1)},
              {"identity", identity_to_json(id)},
              {"identity_hash", hex64(id.hash())}};
    blob.meta_json = meta.dump();
    blob.tensors.emplace_back("targets", table.targets);
    blob.ints.emplace_back("component",
                           std::vector<std::int64_t>(table.component.begin(),
                                                     table.component.end()));
    blob.ints.emplace_back("of_image", std::vector<std::int64_t>(table.of_image.begin(),
                                                                 table.of_image.end()));
    store_params(blob, "enc.", encoder.params());
    store_params(blob, "enc.", encoder.buffers());
    save_blob(path, blob);
}

Step1Artifact load_step1_artifact(const std::string& path) {
    Step1Artifact art;
    art.blob = load_blob(path);
    json meta = parse_meta(art.blob, path, "step1");
    art.backbone = meta.at("backbone").get<std::string>();
    art.channels = meta.at("channels").get<int>();
    art.image_size = meta.at("image_size").get<int>();
    art.identity = identity_from_json(meta.at("identity"));
    art.table.targets = art.blob.tensor("targets");
    for (auto v : art.blob.int_block("component")) art.table.component.push_back(static_cast<int>(v));
    for (auto v : art.blob.int_block("of_image")) art.table.of_image.push_back(static_cast<int>(v));
    return art;
}

nn::DualHeadEncoder restore_encoder(const Step1Artifact& artifact) {
    Rng dummy(0);
    nn::DualHeadEncoder encoder(artifact.backbone, artifact.channels, artifact.image_size,
                                artifact.table.targets.dim(1), dummy);
    load_params(artifact.blob, "enc.", encoder.params());
    load_params(artifact.blob, "enc.", encoder.buffers());
    return encoder;
}

// -------------------------------------------------------------------- step 2

void save_step2_artifact(const std::string& path, nn::Generator& generator,
                         const LatentTable& latents, const std::string& backbone, int channels,
                         int image_size, const DataIdentity& id, int epochs_completed) {
    Blob blob;
    json meta{{"kind", "step2"},
              {"backbone", backbone},
              {"channels", channels},
              {"image_size", image_size},
              {"class_dim", latents.class_dim},
              {"noise_dim", latents.noise_dim},
              {"epochs_completed", epochs_completed},
              {"identity", identity_to_json(id)},
              {"identity_hash", hex64(id.hash())}};
    blob.meta_json = meta.dump();
    blob.tensors.emplace_back("latents", latents.z);
    blob.ints.emplace_back("membership",
                           std::vector<std::int64_t>(latents.membership.begin(),
                                                     latents.membership.end()));
    store_params(blob, "gen.", generator.params());
    store_params(blob, "gen.", generator.buffers());
    save_blob(path, blob);
}

Step2Artifact load_step2_artifact(const std::string& path) {
    Step2Artifact art;
    art.blob = load_blob(path);
    json meta = parse_meta(art.blob, path, "step2");
    art.backbone = meta.at("backbone").get<std::string>();
    art.channels = meta.at("channels").get<int>();
    art.image_size = meta.at("image_size").get<int>();
    art.epochs_completed = meta.value("epochs_completed", 0);
    art.identity = identity_from_json(meta.at("identity"));
    art.latents.class_dim = meta.at("class_dim").get<int>();
    art.latents.noise_dim = meta.at("noise_dim").get<int>();
    art.latents.z = art.blob.tensor("latents");
    for (auto v : art.blob.int_block("membership"))
        art.latents.membership.push_back(static_cast<int>(v));
    return art;
}

nn::Generator restore_generator(const Step2Artifact& artifact) {
    Rng dummy(0);
    nn::Generator generator(artifact.backbone, artifact.channels, artifact.image_size,
                            artifact.latents.class_dim + artifact.latents.noise_dim,
                            artifact.latents.class_dim, dummy);
    load_params(artifact.blob, "gen.", generator.params());
    load_params(artifact.blob, "gen.", generator.buffers());
    return generator;
}

// ----------------------------------------------------------------- posterior

void save_posterior_artifact(const std::string& path, const Posterior& posterior,
                             const PosteriorConfig& cfg, const DataIdentity& id) {
    Blob blob;
    json meta{{"kind", "posterior"},
              {"class_dim", posterior.class_dim},
              {"noise_dim", posterior.noise_dim},
              {"clusters", posterior.clusters()},
              {"full_covariance", cfg.full_covariance},
              {"ridge", cfg.ridge},
              {"identity", identity_to_json(id)},
              {"identity_hash", hex64(id.hash())}};
    blob.meta_json = meta.dump();
    std::vector<std::int64_t> counts;
    for (int c = 0; c < posterior.clusters(); ++c) {
        blob.tensors.emplace_back("mean." + std::to_string(c), posterior.components[c].mean);
        blob.tensors.emplace_back("chol." + std::to_string(c), posterior.components[c].chol);
        counts.push_back(posterior.components[c].count);
    }
    blob.ints.emplace_back("count", std::move(counts));
    save_blob(path, blob);
}

PosteriorArtifact load_posterior_artifact(const std::string& path) {
    PosteriorArtifact art;
    Blob blob = load_blob(path);
    json meta = parse_meta(blob, path, "posterior");
    art.identity = identity_from_json(meta.at("identity"));
    art.config.full_covariance = meta.at("full_covariance").get<bool>();
    art.config.ridge = meta.at("ridge").get<scalar>();
    art.posterior.class_dim = meta.at("class_dim").get<int>();
    art.posterior.noise_dim = meta.at("noise_dim").get<int>();
    const int clusters = meta.at("clusters").get<int>();
    const auto& counts = blob.int_block("count");
    for (int c = 0; c < clusters; ++c) {
        ClusterGaussian g;
        g.mean = blob.tensor("mean." + std::to_string(c));
        g.chol = blob.tensor("chol." + std::to_string(c));
        g.count = static_cast<int>(counts[c]);
        art.posterior.components.push_back(std::move(g));
    }
    return art;
}

}  // namespace cola
