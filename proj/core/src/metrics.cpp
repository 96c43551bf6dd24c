#include "cola/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cola/clustering.hpp"

namespace cola {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Mat to_eigen(const Tensor& t) {
    Mat m(t.dim(0), t.dim(1));
    for (int i = 0; i < t.dim(0); ++i)
        for (int j = 0; j < t.dim(1); ++j) m(i, j) = t.at2(i, j);
    return m;
}

// Symmetric PSD square root with the shared roundoff policy: eigenvalues in
// [-1e-8, 0) clip to zero, lower raises.
Mat psd_sqrt(const Mat& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(m);
    if (eig.info() != Eigen::Success)
        throw NumericalError(std::string("eigendecomposition failed for ") + what);
    Vec vals = eig.eigenvalues();
    for (int i = 0; i < vals.size(); ++i) {
        if (vals[i] < -1e-8)
            throw NumericalError(std::string(what) + " has eigenvalue " +
                                 std::to_string(vals[i]) + " beyond roundoff tolerance");
        vals[i] = vals[i] > 0 ? std::sqrt(vals[i]) : 0.0;
    }
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

Tensor gather_features(const FeatureFn& features, const std::vector<Tensor>& images) {
    Tensor f = features(images);
    if (f.rank() != 2 || f.dim(0) != static_cast<int>(images.size()))
        throw NumericalError("feature extractor returned a bad shape");
    return f;
}

}  // namespace

GaussianMoments feature_moments(const Tensor& features) {
    if (features.rank() != 2 || features.dim(0) < 2)
        throw ConfigError("feature_moments needs (N >= 2, F) rows");
    const int N = features.dim(0), F = features.dim(1);
    GaussianMoments m;
    m.count = N;
    m.mean = Tensor({F});
    m.mean.fill(0.0);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < F; ++j) m.mean.vec()[j] += features.at2(i, j);
    for (int j = 0; j < F; ++j) m.mean.vec()[j] /= N;

    m.cov = Tensor({F, F});
    m.cov.fill(0.0);
    for (int i = 0; i < N; ++i)
        for (int a = 0; a < F; ++a) {
            const scalar da = features.at2(i, a) - m.mean.vec()[a];
            for (int b = a; b < F; ++b)
                m.cov.at2(a, b) += da * (features.at2(i, b) - m.mean.vec()[b]);
        }
    for (int a = 0; a < F; ++a)
        for (int b = a; b < F; ++b) {
            m.cov.at2(a, b) /= (N - 1);
            m.cov.at2(b, a) = m.cov.at2(a, b);
        }
    return m;
}

scalar frechet_distance(const GaussianMoments& a, const GaussianMoments& b) {
    if (!a.mean.same_shape(b.mean)) throw ConfigError("frechet_distance: dim mismatch");
    const int F = a.mean.dim(0);
    scalar mean_term = 0;
    for (int i = 0; i < F; ++i) {
        const scalar d = a.mean.vec()[i] - b.mean.vec()[i];
        mean_term += d * d;
    }
    Mat sa = to_eigen(a.cov), sb = to_eigen(b.cov);
    Mat root_a = psd_sqrt(sa, "covariance A");
    Mat inner = root_a * sb * root_a;
    // Symmetrize away asymmetric roundoff before the second root.
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(inner);
    if (eig.info() != Eigen::Success)
        throw NumericalError("eigendecomposition failed for the Frechet cross term");
    // Roundoff in the decompositions scales with the matrix magnitudes, so the
    // negativity guards are relative: at unit scale they reduce to 1e-8.
    const scalar eig_scale = std::max<scalar>(1.0, std::abs(eig.eigenvalues()[F - 1]));
    // Rank-deficient covariances (fewer samples than features) fill the null
    // space with noise eigenvalues; sqrt amplifies them, so anything below a
    // relative cutoff is treated as exactly zero.
    const scalar cutoff = std::abs(eig.eigenvalues()[F - 1]) * 1e-10;
    scalar cross = 0;
    for (int i = 0; i < F; ++i) {
        scalar v = eig.eigenvalues()[i];
        if (v < -1e-8 * eig_scale)
            throw NumericalError("Frechet cross term eigenvalue " + std::to_string(v) +
                                 " beyond roundoff tolerance");
        cross += v > cutoff ? std::sqrt(v) : 0.0;
    }
    scalar fd = mean_term + sa.trace() + sb.trace() - 2.0 * cross;
    const scalar fd_scale = std::max<scalar>(1.0, sa.trace() + sb.trace());
    if (fd < 0) {
        if (fd < -1e-8 * fd_scale)
            throw NumericalError("negative Frechet distance beyond tolerance");
        fd = 0;
    }
    return fd;
}

FeatureFn flatten_features() {
    return [](const std::vector<Tensor>& images) {
        if (images.empty()) throw ConfigError("flatten_features: no images");
        const int F = static_cast<int>(images[0].size());
        Tensor out({static_cast<int>(images.size()), F});
        for (std::size_t i = 0; i < images.size(); ++i) {
            if (static_cast<int>(images[i].size()) != F)
                throw ConfigError("flatten_features: inconsistent image sizes");
            std::copy_n(images[i].data(), F, out.data() + i * static_cast<std::size_t>(F));
        }
        return out;
    };
}

FeatureFn penultimate_features(std::shared_ptr<nn::Classifier> classifier, int batch_size) {
    if (!classifier) throw ConfigError("penultimate_features: null classifier");
    return [classifier, batch_size](const std::vector<Tensor>& images) {
        if (images.empty()) throw ConfigError("penultimate_features: no images");
        const int N = static_cast<int>(images.size());
        const int F = classifier->feature_dim();
        Tensor out({N, F});
        std::vector<int> idx;
        for (int start = 0; start < N; start += batch_size) {
            const int b = std::min(batch_size, N - start);
            idx.resize(b);
            for (int i = 0; i < b; ++i) idx[i] = start + i;
            Tensor feats = classifier->penultimate(stack_images(images, idx));
            for (int i = 0; i < b; ++i)
                std::copy_n(feats.data() + static_cast<std::size_t>(i) * F, F,
                            out.data() + (static_cast<std::size_t>(start) + i) * F);
        }
        return out;
    };
}

FeatureFn pca_features(const std::vector<Tensor>& reference, int dims) {
    if (reference.size() < 2) throw ConfigError("pca_features needs >= 2 reference images");
    const int N = static_cast<int>(reference.size());
    const int D = static_cast<int>(reference[0].size());
    if (dims < 1 || dims > std::min(N - 1, D))
        throw ConfigError("pca_features: dims out of range");

    // Gram-trick PCA: eigenvectors of the N x N centered Gram matrix give the
    // principal directions without forming the D x D covariance.
    Vec mean = Vec::Zero(D);
    Mat X(N, D);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < D; ++j) {
            X(i, j) = reference[i].vec()[j];
            mean[j] += X(i, j);
        }
    mean /= N;
    X.rowwise() -= mean.transpose();
    Mat gram = X * X.transpose() / (N - 1);
    Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericalError("PCA eigendecomposition failed");

    auto components = std::make_shared<Mat>(D, dims);
    for (int k = 0; k < dims; ++k) {
        const int src = N - 1 - k;  // eigenvalues come back ascending
        const scalar lambda = eig.eigenvalues()[src];
        if (lambda <= 1e-12) throw NumericalError("PCA rank too low for requested dims");
        components->col(k) = X.transpose() * eig.eigenvectors().col(src) /
                             std::sqrt(lambda * (N - 1));
    }
    auto mean_ptr = std::make_shared<Vec>(std::move(mean));
    return [components, mean_ptr, dims](const std::vector<Tensor>& images) {
        const int n = static_cast<int>(images.size());
        const int d = static_cast<int>((*mean_ptr).size());
        Tensor out({n, dims});
        Vec row(d);
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(images[i].size()) != d)
                throw ConfigError("pca_features: image size mismatch");
            for (int j = 0; j < d; ++j) row[j] = images[i].vec()[j] - (*mean_ptr)[j];
            Vec proj = components->transpose() * row;
            for (int k = 0; k < dims; ++k) out.at2(i, k) = proj[k];
        }
        return out;
    };
}

FidResult fid_score(const std::vector<Tensor>& real,
                    const std::function<std::vector<Tensor>(Rng&)>& sample_set, int repeats,
                    const FeatureFn& features, Rng& rng) {
    if (repeats < 1) throw ConfigError("fid_score: repeats must be >= 1");
    GaussianMoments real_moments = feature_moments(gather_features(features, real));
    FidResult result;
    for (int r = 0; r < repeats; ++r) {
        std::vector<Tensor> synth = sample_set(rng);
        GaussianMoments synth_moments = feature_moments(gather_features(features, synth));
        result.values.push_back(frechet_distance(real_moments, synth_moments));
        result.mean += result.values.back();
    }
    result.mean /= repeats;
    return result;
}

// --------------------------------------------------------- classifier recipe

scalar eval_accuracy(nn::Classifier& classifier, const LabeledImageSet& test, int batch_size) {
    if (!test.labeled()) throw ConfigError("eval_accuracy needs labels");
    long hits = 0;
    std::vector<int> idx;
    for (int start = 0; start < test.size(); start += batch_size) {
        const int b = std::min(batch_size, test.size() - start);
        idx.resize(b);
        for (int i = 0; i < b; ++i) idx[i] = start + i;
        const auto pred = nn::argmax_rows(classifier.logits(stack_images(test.images, idx), false));
        for (int i = 0; i < b; ++i) hits += pred[i] == test.labels[start + i];
    }
    return static_cast<scalar>(hits) / test.size();
}

TrainEvalResult train_eval_classifier(const LabeledImageSet& train, const LabeledImageSet& test,
                                      const TrainEvalConfig& cfg, std::uint64_t seed) {
    train.validate();
    test.validate();
    if (train.class_count != test.class_count)
        throw ConfigError("train/test class counts differ");
    const int N = train.size();
    const int steps =
        cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : (N + cfg.batch_size - 1) / cfg.batch_size;

    Rng init_rng = Rng::forked(seed, "clf/init");
    Rng epoch_rng = Rng::forked(seed, "clf/epochs");
    Rng aug_rng = Rng::forked(seed, "clf/augment");

    TrainEvalResult result;
    result.classifier = std::make_shared<nn::Classifier>(cfg.backbone, train.channels(),
                                                         train.height(), train.class_count,
                                                         init_rng);
    nn::Optimizer optim(result.classifier->params(), cfg.optim);
    result.steps_per_epoch = steps;

    // Cursor over reshuffled epochs-worth of indices; wraps independently of
    // the pinned step count.
    std::vector<int> order = epoch_rng.permutation(N);
    std::size_t cursor = 0;
    auto next_index = [&]() {
        if (cursor == order.size()) {
            order = epoch_rng.permutation(N);
            cursor = 0;
        }
        return order[cursor++];
    };

    std::vector<int> batch_labels(cfg.batch_size);
    std::vector<Tensor> batch_imgs(static_cast<std::size_t>(cfg.batch_size));
    std::vector<int> batch_idx(cfg.batch_size);
    for (int i = 0; i < cfg.batch_size; ++i) batch_idx[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        optim.set_epoch(epoch);
        scalar epoch_loss = 0;
        for (int step = 0; step < steps; ++step) {
            for (int i = 0; i < cfg.batch_size; ++i) {
                const int src = next_index();
                batch_labels[i] = train.labels[src];
                batch_imgs[i] = cfg.augment
                                    ? augment_image(train.images[src], cfg.augment_cfg, aug_rng)
                                    : train.images[src];
            }
            Tensor logits =
                result.classifier->logits(stack_images(batch_imgs, batch_idx), true);
            Tensor grad;
            epoch_loss += nn::softmax_xent(logits, batch_labels, grad);
            optim.zero_grad();
            result.classifier->backward(grad);
            optim.step();
            ++result.total_steps;
        }
        result.train_loss.push_back(epoch_loss / steps);
        if (cfg.log_every > 0 && (epoch % cfg.log_every == 0 || epoch + 1 == cfg.epochs))
            std::printf("[clf] epoch %3d  loss %.4f\n", epoch, result.train_loss.back());
    }
    result.accuracy = eval_accuracy(*result.classifier, test);
    return result;
}

MixResult train_mixed(const LabeledImageSet& real, const LabeledImageSet& synthetic, scalar ratio,
                      const LabeledImageSet& test, TrainEvalConfig cfg, std::uint64_t seed) {
    real.validate();
    if (ratio <= 0 || ratio > 1) throw ConfigError("mix ratio must be in (0, 1]");
    const int n_real = real.size();
    const int n_synth =
        static_cast<int>(std::llround(static_cast<scalar>(n_real) * (1.0 - ratio) / ratio));

    LabeledImageSet pool = real;
    if (n_synth > 0) {
        synthetic.validate();
        if (!synthetic.labeled() || synthetic.class_count != real.class_count)
            throw ConfigError("synthetic set must carry matching labels");
        if (synthetic.size() < n_synth)
            throw ConfigError("need " + std::to_string(n_synth) + " synthetic images, have " +
                              std::to_string(synthetic.size()));
        // Round-robin over classes keeps the added synthetic set balanced.
        std::vector<std::vector<int>> by_class(synthetic.class_count);
        for (int i = 0; i < synthetic.size(); ++i) by_class[synthetic.labels[i]].push_back(i);
        int taken = 0;
        for (std::size_t depth = 0; taken < n_synth; ++depth) {
            bool any = false;
            for (int c = 0; c < synthetic.class_count && taken < n_synth; ++c) {
                if (depth < by_class[c].size()) {
                    pool.images.push_back(synthetic.images[by_class[c][depth]]);
                    pool.labels.push_back(c);
                    ++taken;
                    any = true;
                }
            }
            if (!any && taken < n_synth)
                throw ConfigError("synthetic classes exhausted before reaching the mix size");
        }
    }

    // Every regime takes the same number of optimizer steps.
    cfg.steps_per_epoch = (2 * n_real + cfg.batch_size - 1) / cfg.batch_size;
    TrainEvalResult trained = train_eval_classifier(pool, test, cfg, seed);
    if (trained.total_steps !=
        static_cast<long>(trained.steps_per_epoch) * static_cast<long>(cfg.epochs))
        throw NumericalError("mix harness step counter drifted");

    MixResult out;
    out.accuracy = trained.accuracy;
    out.real_count = n_real;
    out.synth_count = n_synth;
    out.steps_per_epoch = trained.steps_per_epoch;
    out.total_steps = trained.total_steps;
    return out;
}

}  // namespace cola
