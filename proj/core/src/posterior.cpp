#include "cola/posterior.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace cola {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

void renorm_span(scalar* row, int begin, int end) {
    scalar norm2 = 0;
    for (int k = begin; k < end; ++k) norm2 += row[k] * row[k];
    if (norm2 <= 1e-300) throw NumericalError("sampled code block collapsed to zero");
    const scalar inv = 1.0 / std::sqrt(norm2);
    for (int k = begin; k < end; ++k) row[k] *= inv;
}

}  // namespace

Posterior fit_posterior(const LatentTable& latents, const PosteriorConfig& cfg) {
    if (latents.rows() == 0) throw ConfigError("fit_posterior: empty latent table");
    if (cfg.ridge <= 0) throw ConfigError("fit_posterior: ridge must be positive");
    const int D = latents.class_dim + latents.noise_dim;
    const int K =
        1 + *std::max_element(latents.membership.begin(), latents.membership.end());

    Posterior post;
    post.class_dim = latents.class_dim;
    post.noise_dim = latents.noise_dim;
    post.components.resize(K);

    for (int c = 0; c < K; ++c) {
        std::vector<int> rows;
        for (int i = 0; i < latents.rows(); ++i)
            if (latents.membership[i] == c) rows.push_back(i);
        if (rows.empty())
            throw ConfigError("cluster " + std::to_string(c) + " has no latent rows");
        if (cfg.full_covariance && rows.size() < 2)
            throw ConfigError("cluster " + std::to_string(c) +
                              " has a single member; full covariance needs at least two");

        Vec mean = Vec::Zero(D);
        for (int i : rows)
            for (int k = 0; k < D; ++k) mean[k] += latents.z.at2(i, k);
        mean /= static_cast<scalar>(rows.size());

        Mat cov = Mat::Zero(D, D);
        for (int i : rows) {
            Vec d(D);
            for (int k = 0; k < D; ++k) d[k] = latents.z.at2(i, k) - mean[k];
            cov.noalias() += d * d.transpose();
        }
        cov /= static_cast<scalar>(rows.size());
        if (!cfg.full_covariance) {
            Mat diag = cov.diagonal().asDiagonal();
            cov = diag;
        }
        cov.diagonal().array() += cfg.ridge;

        Eigen::LLT<Mat> llt(cov);
        if (llt.info() != Eigen::Success)
            throw NumericalError("posterior covariance is not positive definite");
        Mat L = llt.matrixL();

        ClusterGaussian g;
        g.count = static_cast<int>(rows.size());
        g.mean = Tensor({D});
        g.chol = Tensor({D, D});
        for (int k = 0; k < D; ++k) g.mean.vec()[k] = mean[k];
        for (int r = 0; r < D; ++r)
            for (int k = 0; k < D; ++k) g.chol.at2(r, k) = L(r, k);
        post.components[c] = std::move(g);
    }
    return post;
}

namespace {

void draw_code(const Posterior& posterior, int component, scalar tau, Rng& rng, scalar* row,
               std::vector<scalar>& eps) {
    const int D = posterior.dim();
    const ClusterGaussian& g = posterior.components[component];
    for (int k = 0; k < D; ++k) eps[k] = rng.normal(0.0, 1.0);
    for (int r = 0; r < D; ++r) {
        scalar acc = g.mean.vec()[r];
        for (int k = 0; k <= r; ++k) acc += tau * g.chol.at2(r, k) * eps[k];
        row[r] = acc;
    }
    renorm_span(row, 0, posterior.class_dim);
    renorm_span(row, posterior.class_dim, D);
}

}  // namespace

Tensor sample_codes(const Posterior& posterior, int count, scalar tau, Rng& rng,
                    std::vector<int>* components_out) {
    if (count <= 0) throw ConfigError("sample_codes: count must be positive");
    if (tau < 0) throw ConfigError("sample_codes: tau must be non-negative");
    const int D = posterior.dim();
    const int K = posterior.clusters();
    Tensor codes({count, D});
    if (components_out) components_out->assign(count, 0);

    std::vector<scalar> eps(D);
    for (int n = 0; n < count; ++n) {
        const int c = static_cast<int>(rng.index(static_cast<std::size_t>(K)));
        if (components_out) (*components_out)[n] = c;
        draw_code(posterior, c, tau, rng, codes.data() + static_cast<std::size_t>(n) * D, eps);
    }
    return codes;
}

Tensor sample_component_codes(const Posterior& posterior, int component, int count, scalar tau,
                              Rng& rng) {
    if (component < 0 || component >= posterior.clusters())
        throw ConfigError("sample_component_codes: component out of range");
    if (count <= 0) throw ConfigError("sample_component_codes: count must be positive");
    const int D = posterior.dim();
    Tensor codes({count, D});
    std::vector<scalar> eps(D);
    for (int n = 0; n < count; ++n)
        draw_code(posterior, component, tau, rng, codes.data() + static_cast<std::size_t>(n) * D,
                  eps);
    return codes;
}

std::vector<Tensor> decode_codes(nn::Generator& generator, const Tensor& codes, int batch_size) {
    if (codes.rank() != 2) throw ConfigError("decode_codes expects (N, D) codes");
    const int N = codes.dim(0), D = codes.dim(1);
    std::vector<Tensor> out;
    out.reserve(N);
    for (int start = 0; start < N; start += batch_size) {
        const int b = std::min(batch_size, N - start);
        Tensor zrows({b, D});
        for (int i = 0; i < b; ++i)
            for (int k = 0; k < D; ++k) zrows.at2(i, k) = codes.at2(start + i, k);
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
