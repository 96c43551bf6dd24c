#include "cola/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cola/assignment.hpp"
#include "cola/augment.hpp"

namespace cola {

TargetTable init_targets(int count, int clusters, scalar sigma, Rng& rng) {
    if (count < clusters) throw ConfigError("need at least one target per cluster");
    TargetTable table;
    table.targets = Tensor({count, clusters});
    table.component.resize(count);
    table.of_image.resize(count);
    for (int i = 0; i < count; ++i) {
        const int c = static_cast<int>(rng.index(static_cast<std::size_t>(clusters)));
        table.component[i] = c;
        scalar norm2 = 0;
        for (int k = 0; k < clusters; ++k) {
            scalar v = (k == c ? 1.0 : 0.0) + rng.normal(0.0, sigma);
            table.targets.at2(i, k) = v;
            norm2 += v * v;
        }
        if (norm2 <= 0) throw NumericalError("degenerate target draw");
        const scalar inv = 1.0 / std::sqrt(norm2);
        for (int k = 0; k < clusters; ++k) table.targets.at2(i, k) *= inv;
        table.of_image[i] = i;
    }
    return table;
}

Tensor stack_images(const std::vector<Tensor>& images, const std::vector<int>& indices) {
    if (indices.empty()) throw ConfigError("stack_images: empty batch");
    const Tensor& first = images[indices[0]];
    Tensor batch({static_cast<int>(indices.size()), first.dim(0), first.dim(1), first.dim(2)});
    const std::size_t sz = first.size();
    for (std::size_t n = 0; n < indices.size(); ++n)
        std::copy_n(images[indices[n]].data(), sz, batch.data() + n * sz);
    return batch;
}

std::vector<int> Step1Result::memberships() const {
    std::vector<int> out(table.of_image.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = table.component[table.of_image[i]];
    return out;
}

scalar cluster_purity(const std::vector<int>& memberships, const std::vector<int>& labels,
                      int clusters) {
    if (memberships.size() != labels.size() || memberships.empty())
        throw ConfigError("purity: size mismatch");
    int label_max = *std::max_element(labels.begin(), labels.end());
    std::vector<std::vector<int>> counts(clusters, std::vector<int>(label_max + 1, 0));
    for (std::size_t i = 0; i < memberships.size(); ++i) {
        if (memberships[i] < 0 || memberships[i] >= clusters)
            throw ConfigError("purity: membership out of range");
        ++counts[memberships[i]][labels[i]];
    }
    long majority = 0;
    for (const auto& row : counts)
        majority += *std::max_element(row.begin(), row.end());
    return static_cast<scalar>(majority) / static_cast<scalar>(memberships.size());
}

namespace {

// Mean squared distance between embedding rows and their matched targets,
// with d(loss)/d(embed) written into grad.
scalar matched_loss(const Tensor& embed, const TargetTable& table,
                    const std::vector<int>& batch_idx, scalar view_weight, Tensor& grad) {
    const int b = embed.dim(0), K = embed.dim(1);
    scalar loss = 0;
    for (int i = 0; i < b; ++i) {
        const int row = table.of_image[batch_idx[i]];
        for (int k = 0; k < K; ++k) {
            const scalar diff = embed.at2(i, k) - table.targets.at2(row, k);
            loss += diff * diff;
            grad.at2(i, k) = view_weight * 2.0 * diff / b;
        }
    }
    return loss / b;
}

}  // namespace

Step1Result train_clustering(const LabeledImageSet& data, const ClusterConfig& cfg,
                             std::uint64_t seed) {
    data.validate();
    const int N = data.size();
    const int K = cfg.clusters;
    if (cfg.batch_size < 2) throw ConfigError("clustering batch_size must be >= 2");

    Rng init_rng = Rng::forked(seed, "step1/init");
    Rng epoch_rng = Rng::forked(seed, "step1/epochs");
    Rng aug_rng = Rng::forked(seed, "step1/augment");

    Step1Result result{
        nn::DualHeadEncoder(cfg.backbone, data.channels(), data.height(), K, init_rng),
        init_targets(N, K, cfg.target_sigma, init_rng),
        {},
        {},
        {}};

    nn::Optimizer optim(result.encoder.params(), cfg.optim);
    const int views = 1 + std::max(0, cfg.extra_views);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        optim.set_epoch(epoch);
        scalar epoch_assign = 0, epoch_rot = 0;
        long rot_hits = 0, rot_total = 0;
        int assign_batches = 0, rot_batches = 0;

        // Assignment pass: rematch targets within the batch, then descend on
        // the matched squared distances averaged over identity + extra views.
        std::vector<int> order = epoch_rng.permutation(N);
        for (int start = 0; start < N; start += cfg.batch_size) {
            const int b = std::min(cfg.batch_size, N - start);
            if (b < 2) break;
            std::vector<int> batch_idx(order.begin() + start, order.begin() + start + b);
            Tensor batch = stack_images(data.images, batch_idx);

            Tensor embed = result.encoder.embed(batch, true);

            // Hungarian over current batch targets.
            Tensor batch_targets({b, K});
            for (int i = 0; i < b; ++i) {
                const int row = result.table.of_image[batch_idx[i]];
                for (int k = 0; k < K; ++k)
                    batch_targets.at2(i, k) = result.table.targets.at2(row, k);
            }
            Assignment match = solve_assignment(squared_distance_costs(embed, batch_targets));
            std::vector<int> old_rows(b);
            for (int i = 0; i < b; ++i) old_rows[i] = result.table.of_image[batch_idx[i]];
            for (int i = 0; i < b; ++i)
                result.table.of_image[batch_idx[i]] = old_rows[match.row_to_col[i]];

            optim.zero_grad();
            Tensor grad({b, K});
            scalar batch_loss = matched_loss(embed, result.table, batch_idx, 1.0 / views, grad);
            result.encoder.embed_backward(grad);
            for (int v = 1; v < views; ++v) {
                std::vector<Tensor> views_imgs;
                views_imgs.reserve(b);
                std::vector<int> view_idx(b);
                for (int i = 0; i < b; ++i) {
                    views_imgs.push_back(
                        augment_image(data.images[batch_idx[i]], cfg.augment, aug_rng));
                    view_idx[i] = i;
                }
                Tensor aug_batch = stack_images(views_imgs, view_idx);
                Tensor aug_embed = result.encoder.embed(aug_batch, true);
                batch_loss += matched_loss(aug_embed, result.table, batch_idx, 1.0 / views, grad);
                result.encoder.embed_backward(grad);
            }
            optim.step();
            epoch_assign += batch_loss / views;
            ++assign_batches;
        }

        // Rotation pass: 4-way rotation prediction on stacked quarter turns.
        std::vector<int> rot_order = epoch_rng.permutation(N);
        const int max_rot =
            cfg.rotation_batches > 0 ? cfg.rotation_batches : (N + cfg.batch_size - 1) / cfg.batch_size;
        for (int start = 0; start < N && rot_batches < max_rot; start += cfg.batch_size) {
            const int b = std::min(cfg.batch_size, N - start);
            std::vector<int> batch_idx(rot_order.begin() + start, rot_order.begin() + start + b);
            Tensor batch = stack_images(data.images, batch_idx);
            std::vector<int> rot_labels;
            Tensor rotated = rotate_batch(batch, rot_labels);

            Tensor logits = result.encoder.rotation_logits(rotated, true);
            Tensor grad;
            const scalar loss = nn::softmax_xent(logits, rot_labels, grad);
            optim.zero_grad();
            result.encoder.rotation_backward(grad);
            optim.step();

            const auto pred = nn::argmax_rows(logits);
            for (std::size_t i = 0; i < pred.size(); ++i) rot_hits += pred[i] == rot_labels[i];
            rot_total += static_cast<long>(pred.size());
            epoch_rot += loss;
            ++rot_batches;
        }

        result.assign_loss.push_back(assign_batches ? epoch_assign / assign_batches : 0.0);
        result.rot_loss.push_back(rot_batches ? epoch_rot / rot_batches : 0.0);
        result.rot_acc.push_back(rot_total ? static_cast<scalar>(rot_hits) / rot_total : 0.0);
        if (cfg.log_every > 0 && (epoch % cfg.log_every == 0 || epoch + 1 == cfg.epochs))
            std::printf("[step1] epoch %3d  assign %.4f  rot %.4f  rot_acc %.3f\n", epoch,
                        result.assign_loss.back(), result.rot_loss.back(), result.rot_acc.back());
    }
    return result;
}

}  // namespace cola
