#include "cola/generation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cola {

LatentMode parse_latent_mode(const std::string& text) {
    if (text == "cola") return LatentMode::cola;
    if (text == "scola") return LatentMode::scola;
    if (text == "glo") return LatentMode::glo;
    throw ConfigError("unknown mode: " + text + " (expected cola, scola or glo)");
}

std::string latent_mode_name(LatentMode mode) {
    switch (mode) {
        case LatentMode::cola: return "cola";
        case LatentMode::scola: return "scola";
        default: return "glo";
    }
}

ReconLoss parse_recon_loss(const std::string& text) {
    if (text == "lap") return ReconLoss::lap;
    if (text == "perceptual") return ReconLoss::perceptual;
    throw ConfigError("unknown reconstruction loss: " + text + " (expected lap or perceptual)");
}

namespace {

void renorm_block(Tensor& z, int row, int begin, int end) {
    scalar norm2 = 0;
    for (int k = begin; k < end; ++k) norm2 += z.at2(row, k) * z.at2(row, k);
    if (norm2 <= 1e-300) throw NumericalError("latent block collapsed to zero");
    const scalar inv = 1.0 / std::sqrt(norm2);
    for (int k = begin; k < end; ++k) z.at2(row, k) *= inv;
}

void fill_noise_block(LatentTable& table, Rng& rng) {
    for (int i = 0; i < table.rows(); ++i)
        for (int k = 0; k < table.noise_dim; ++k)
            table.z.at2(i, table.class_dim + k) = rng.normal(0.0, 1.0);
}

}  // namespace

void LatentTable::renormalize() {
    for (int i = 0; i < rows(); ++i) {
        renorm_block(z, i, 0, class_dim);
        renorm_block(z, i, class_dim, class_dim + noise_dim);
    }
}

LatentTable latent_from_targets(const TargetTable& table, int noise_dim, Rng& rng) {
    if (noise_dim < 1) throw ConfigError("noise_dim must be >= 1");
    const int N = static_cast<int>(table.of_image.size());
    const int K = table.targets.dim(1);
    LatentTable out;
    out.class_dim = K;
    out.noise_dim = noise_dim;
    out.z = Tensor({N, K + noise_dim});
    out.membership.resize(N);
    for (int i = 0; i < N; ++i) {
        const int row = table.of_image[i];
        out.membership[i] = table.component[row];
        for (int k = 0; k < K; ++k) out.z.at2(i, k) = table.targets.at2(row, k);
    }
    fill_noise_block(out, rng);
    out.renormalize();
    return out;
}

LatentTable latent_from_labels(const std::vector<int>& labels, int classes, int noise_dim,
                               Rng& rng) {
    if (noise_dim < 1) throw ConfigError("noise_dim must be >= 1");
    if (labels.empty()) throw ConfigError("latent_from_labels needs labels");
    const int N = static_cast<int>(labels.size());
    LatentTable out;
    out.class_dim = classes;
    out.noise_dim = noise_dim;
    out.z = Tensor({N, classes + noise_dim});
    out.z.fill(0.0);
    out.membership = labels;
    for (int i = 0; i < N; ++i) {
        if (labels[i] < 0 || labels[i] >= classes)
            throw ConfigError("label out of range in latent_from_labels");
        out.z.at2(i, labels[i]) = 1.0;
    }
    fill_noise_block(out, rng);
    out.renormalize();
    return out;
}

LatentTable latent_random_sphere(const std::vector<int>& labels, int classes, int noise_dim,
                                 Rng& rng) {
    if (noise_dim < 1) throw ConfigError("noise_dim must be >= 1");
    if (labels.empty()) throw ConfigError("latent_random_sphere needs labels");
    const int N = static_cast<int>(labels.size());
    LatentTable out;
    out.class_dim = classes;
    out.noise_dim = noise_dim;
    out.z = Tensor({N, classes + noise_dim});
    out.membership = labels;
    for (int i = 0; i < N; ++i)
        for (int k = 0; k < classes; ++k) out.z.at2(i, k) = rng.normal(0.0, 1.0);
    fill_noise_block(out, rng);
    out.renormalize();
    return out;
}

namespace {

Step2Result run_generation(const std::vector<Tensor>& images, LatentTable& latents,
                           const GenerationConfig& cfg, std::uint64_t seed,
                           nn::Generator generator) {
    const int N = static_cast<int>(images.size());
    const int C = images[0].dim(0), H = images[0].dim(1), W = images[0].dim(2);
    const int zdim = latents.class_dim + latents.noise_dim;

    Step2Result result{std::move(generator), {}};
    nn::Optimizer theta(result.generator.params(), cfg.theta_optim);
    nn::RowAdam zopt(N, zdim, cfg.latent_optim);

    const std::size_t imsz = static_cast<std::size_t>(C) * H * W;
    for (int e = 0; e < cfg.epochs; ++e) {
        const int epoch = cfg.epoch_offset + e;
        theta.set_epoch(epoch);
        zopt.set_epoch(epoch);
        scalar epoch_loss = 0;
        int batches = 0;

        // Forked per absolute epoch so a resumed run shuffles exactly like an
        // uninterrupted one.
        Rng epoch_rng = Rng::forked(seed, "step2/epoch" + std::to_string(epoch));
        std::vector<int> order = epoch_rng.permutation(N);
        for (int start = 0; start < N; start += cfg.batch_size) {
            const int b = std::min(cfg.batch_size, N - start);
            std::vector<int> batch_idx(order.begin() + start, order.begin() + start + b);

            Tensor zrows({b, zdim});
            for (int i = 0; i < b; ++i)
                for (int k = 0; k < zdim; ++k) zrows.at2(i, k) = latents.z.at2(batch_idx[i], k);

            Tensor out = result.generator.forward(zrows, true);

            Tensor grad_out({b, C, H, W});
            scalar batch_loss = 0;
            for (int i = 0; i < b; ++i) {
                Tensor gen_img({C, H, W}), g({C, H, W});
                std::copy_n(out.data() + i * imsz, imsz, gen_img.data());
                batch_loss +=
                    cfg.loss == ReconLoss::lap
                        ? lap_loss_grad(gen_img, images[batch_idx[i]], cfg.pyramid, g)
                        : perceptual_loss_grad(gen_img, images[batch_idx[i]], *cfg.extractor, g);
                for (std::size_t j = 0; j < imsz; ++j)
                    grad_out.vec()[i * imsz + j] = g.vec()[j] / b;
            }
            batch_loss /= b;
            if (!std::isfinite(batch_loss) || batch_loss > 1e6)
                throw NumericalError("reconstruction loss exploded at epoch " +
                                     std::to_string(epoch));

            theta.zero_grad();
            Tensor grad_z = result.generator.backward(grad_out);
            theta.step();
            zopt.step_rows(latents.z, grad_z, batch_idx);

            epoch_loss += batch_loss;
            ++batches;
        }
        latents.renormalize();
        result.loss.push_back(batches ? epoch_loss / batches : 0.0);
        if (cfg.log_every > 0 && (epoch % cfg.log_every == 0 || e + 1 == cfg.epochs))
            std::printf("[step2] epoch %3d  loss %.5f  lr_z %.5f\n", epoch, result.loss.back(),
                        zopt.current_lr());
    }
    return result;
}

void check_generation_inputs(const std::vector<Tensor>& images, const LatentTable& latents,
                             const GenerationConfig& cfg) {
    if (images.empty()) throw ConfigError("train_generation: no images");
    if (latents.rows() != static_cast<int>(images.size()))
        throw ConfigError("latent rows do not match image count");
    if (cfg.loss == ReconLoss::perceptual && cfg.extractor == nullptr)
        throw ConfigError(
            "perceptual loss needs an externally supplied feature extractor; "
            "small-sample runs must use the laplacian loss");
}

}  // namespace

Step2Result train_generation(const std::vector<Tensor>& images, LatentTable& latents,
                             const GenerationConfig& cfg, std::uint64_t seed) {
    check_generation_inputs(images, latents, cfg);
    Rng init_rng = Rng::forked(seed, "step2/init");
    nn::Generator generator(cfg.backbone, images[0].dim(0), images[0].dim(1),
                            latents.class_dim + latents.noise_dim, latents.class_dim, init_rng);
    return run_generation(images, latents, cfg, seed, std::move(generator));
}

Step2Result train_generation(const std::vector<Tensor>& images, LatentTable& latents,
                             const GenerationConfig& cfg, std::uint64_t seed,
                             nn::Generator&& warm_start) {
    check_generation_inputs(images, latents, cfg);
    return run_generation(images, latents, cfg, seed, std::move(warm_start));
}

std::vector<Tensor> decode_rows(nn::Generator& generator, const LatentTable& latents,
                                const std::vector<int>& indices, int batch_size) {
    std::vector<Tensor> out;
    out.reserve(indices.size());
    const int zdim = latents.class_dim + latents.noise_dim;
    for (std::size_t start = 0; start < indices.size();
         start += static_cast<std::size_t>(batch_size)) {
        const int b =
            static_cast<int>(std::min<std::size_t>(batch_size, indices.size() - start));
        Tensor zrows({b, zdim});
        for (int i = 0; i < b; ++i)
            for (int k = 0; k < zdim; ++k)
                zrows.at2(i, k) = latents.z.at2(indices[start + i], k);
        Tensor imgs = generator.forward(zrows, false);
        const std::size_t imsz = imgs.size() / b;
        for (int i = 0; i < b; ++i) {
            Tensor img({imgs.dim(1), imgs.dim(2), imgs.dim(3)});
            std::copy_n(imgs.data() + i * imsz, imsz, img.data());
            out.push_back(std::move(img));
        }
    }
    return out;
}

}  // namespace cola
