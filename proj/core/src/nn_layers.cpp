#include "cola/nn/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "cola/common.hpp"

namespace cola::nn {

namespace {

using RowMat = Eigen::Matrix<scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

int conv_out(int n, int kernel, int stride, int pad) {
    return (n + 2 * pad - kernel) / stride + 1;
}

// Unfolds src (C, Hs, Ws) into (C*K*K, Hp*Wp) with Hp = conv_out(Hs).
void im2col(const scalar* src, int C, int Hs, int Ws, int K, int stride, int pad, scalar* col) {
    const int Hp = conv_out(Hs, K, stride, pad), Wp = conv_out(Ws, K, stride, pad);
    const int cols = Hp * Wp;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
                scalar* row = col + (static_cast<std::size_t>(c) * K * K + ky * K + kx) * cols;
                for (int py = 0; py < Hp; ++py) {
                    int sy = py * stride + ky - pad;
                    for (int px = 0; px < Wp; ++px) {
                        int sx = px * stride + kx - pad;
                        row[py * Wp + px] =
                            (sy >= 0 && sy < Hs && sx >= 0 && sx < Ws)
                                ? src[(static_cast<std::size_t>(c) * Hs + sy) * Ws + sx]
                                : 0.0;
                    }
                }
            }
}

// Adjoint scatter: dst (C, Ht, Wt) += fold of col (C*K*K, Hp*Wp).
void col2im(const scalar* col, int C, int Ht, int Wt, int K, int stride, int pad, scalar* dst) {
    const int Hp = conv_out(Ht, K, stride, pad), Wp = conv_out(Wt, K, stride, pad);
    const int cols = Hp * Wp;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
                const scalar* row = col + (static_cast<std::size_t>(c) * K * K + ky * K + kx) * cols;
                for (int py = 0; py < Hp; ++py) {
                    int ty = py * stride + ky - pad;
                    if (ty < 0 || ty >= Ht) continue;
                    for (int px = 0; px < Wp; ++px) {
                        int tx = px * stride + kx - pad;
                        if (tx < 0 || tx >= Wt) continue;
                        dst[(static_cast<std::size_t>(c) * Ht + ty) * Wt + tx] += row[py * Wp + px];
                    }
                }
            }
}

void kaiming_uniform(Tensor& w, int fan_in, Rng& rng) {
    scalar bound = std::sqrt(6.0 / fan_in);
    for (scalar& v : w.vec()) v = rng.uniform(-bound, bound);
}

void check_rank(const Tensor& x, int rank, const char* who) {
    if (x.rank() != rank)
        throw ConfigError(std::string(who) + ": wrong input rank " + std::to_string(x.rank()));
}

}  // namespace

// ----------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, bool train) {
    Tensor h = x;
    for (auto& layer : layers_) h = layer->forward(h, train);
    return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<ParamRef> Sequential::params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        for (auto& p : layers_[i]->params())
            out.push_back({"L" + std::to_string(i) + "." + p.name, p.value, p.grad});
    return out;
}

std::vector<ParamRef> Sequential::buffers() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        for (auto& p : layers_[i]->buffers())
            out.push_back({"L" + std::to_string(i) + "." + p.name, p.value, p.grad});
    return out;
}

void Sequential::set_class_ids(const std::vector<int>& ids) {
    for (auto& layer : layers_) layer->set_class_ids(ids);
}

// --------------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, Rng& rng, bool bias)
    : in_(in_features),
      out_(out_features),
      has_bias_(bias),
      weight_({out_features, in_features}),
      bias_({out_features}),
      grad_weight_({out_features, in_features}),
      grad_bias_({out_features}) {
    kaiming_uniform(weight_, in_, rng);
    bias_.fill(0.0);
    grad_weight_.fill(0.0);
    grad_bias_.fill(0.0);
}

Tensor Linear::forward(const Tensor& x, bool train) {
    check_rank(x, 2, "Linear");
    if (x.dim(1) != in_) throw ConfigError("Linear: feature dim mismatch");
    cached_x_ = x;
    const int N = x.dim(0);
    Tensor y({N, out_});
    ConstMatMap X(x.data(), N, in_), W(weight_.data(), out_, in_);
    MatMap Y(y.data(), N, out_);
    Y.noalias() = X * W.transpose();
    if (has_bias_)
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < out_; ++o) y.at2(n, o) += bias_.vec()[o];
    (void)train;
    return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
    const int N = grad_out.dim(0);
    ConstMatMap G(grad_out.data(), N, out_), X(cached_x_.data(), N, in_),
        W(weight_.data(), out_, in_);
    MatMap GW(grad_weight_.data(), out_, in_);
    GW.noalias() += G.transpose() * X;
    if (has_bias_)
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < out_; ++o) grad_bias_.vec()[o] += grad_out.at2(n, o);
    Tensor gx({N, in_});
    MatMap GX(gx.data(), N, in_);
    GX.noalias() = G * W;
    return gx;
}

std::vector<ParamRef> Linear::params() {
    std::vector<ParamRef> out{{"weight", &weight_, &grad_weight_}};
    if (has_bias_) out.push_back({"bias", &bias_, &grad_bias_});
    return out;
}

// --------------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng, bool bias)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      has_bias_(bias),
      weight_({out_ch, in_ch, kernel, kernel}),
      bias_({out_ch}),
      grad_weight_({out_ch, in_ch, kernel, kernel}),
      grad_bias_({out_ch}) {
    kaiming_uniform(weight_, in_ch * kernel * kernel, rng);
    bias_.fill(0.0);
    grad_weight_.fill(0.0);
    grad_bias_.fill(0.0);
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
    check_rank(x, 4, "Conv2d");
    if (x.dim(1) != in_ch_) throw ConfigError("Conv2d: channel mismatch");
    cached_x_ = x;
    const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int Ho = conv_out(H, kernel_, stride_, pad_), Wo = conv_out(W, kernel_, stride_, pad_);
    if (Ho <= 0 || Wo <= 0) throw ConfigError("Conv2d: output would be empty");
    const int ckk = in_ch_ * kernel_ * kernel_;
    Tensor y({N, out_ch_, Ho, Wo});
    std::vector<scalar> col(static_cast<std::size_t>(ckk) * Ho * Wo);
    ConstMatMap Wm(weight_.data(), out_ch_, ckk);
    for (int n = 0; n < N; ++n) {
        im2col(x.data() + static_cast<std::size_t>(n) * in_ch_ * H * W, in_ch_, H, W, kernel_,
               stride_, pad_, col.data());
        ConstMatMap C(col.data(), ckk, Ho * Wo);
        MatMap Y(y.data() + static_cast<std::size_t>(n) * out_ch_ * Ho * Wo, out_ch_, Ho * Wo);
        Y.noalias() = Wm * C;
        if (has_bias_)
            for (int o = 0; o < out_ch_; ++o) Y.row(o).array() += bias_.vec()[o];
    }
    (void)train;
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const int N = cached_x_.dim(0), H = cached_x_.dim(2), W = cached_x_.dim(3);
    const int Ho = grad_out.dim(2), Wo = grad_out.dim(3);
    const int ckk = in_ch_ * kernel_ * kernel_;
    Tensor gx({N, in_ch_, H, W});
    gx.fill(0.0);
    std::vector<scalar> col(static_cast<std::size_t>(ckk) * Ho * Wo);
    std::vector<scalar> gcol(col.size());
    ConstMatMap Wm(weight_.data(), out_ch_, ckk);
    MatMap GW(grad_weight_.data(), out_ch_, ckk);
    for (int n = 0; n < N; ++n) {
        im2col(cached_x_.data() + static_cast<std::size_t>(n) * in_ch_ * H * W, in_ch_, H, W,
               kernel_, stride_, pad_, col.data());
        ConstMatMap C(col.data(), ckk, Ho * Wo);
        ConstMatMap G(grad_out.data() + static_cast<std::size_t>(n) * out_ch_ * Ho * Wo, out_ch_,
                      Ho * Wo);
        GW.noalias() += G * C.transpose();
        if (has_bias_)
            for (int o = 0; o < out_ch_; ++o) grad_bias_.vec()[o] += G.row(o).sum();
        MatMap GC(gcol.data(), ckk, Ho * Wo);
        GC.noalias() = Wm.transpose() * G;
        col2im(gcol.data(), in_ch_, H, W, kernel_, stride_, pad_,
               gx.data() + static_cast<std::size_t>(n) * in_ch_ * H * W);
    }
    return gx;
}

std::vector<ParamRef> Conv2d::params() {
    std::vector<ParamRef> out{{"weight", &weight_, &grad_weight_}};
    if (has_bias_) out.push_back({"bias", &bias_, &grad_bias_});
    return out;
}

// ----------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng,
                                 bool bias)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      has_bias_(bias),
      weight_({in_ch, out_ch, kernel, kernel}),
      bias_({out_ch}),
      grad_weight_({in_ch, out_ch, kernel, kernel}),
      grad_bias_({out_ch}) {
    kaiming_uniform(weight_, in_ch * kernel * kernel, rng);
    bias_.fill(0.0);
    grad_weight_.fill(0.0);
    grad_bias_.fill(0.0);
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool train) {
    check_rank(x, 4, "ConvTranspose2d");
    if (x.dim(1) != in_ch_) throw ConfigError("ConvTranspose2d: channel mismatch");
    cached_x_ = x;
    const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int Ho = (H - 1) * stride_ - 2 * pad_ + kernel_;
    const int Wo = (W - 1) * stride_ - 2 * pad_ + kernel_;
    if (Ho <= 0 || Wo <= 0) throw ConfigError("ConvTranspose2d: output would be empty");
    const int okk = out_ch_ * kernel_ * kernel_;
    Tensor y({N, out_ch_, Ho, Wo});
    y.fill(0.0);
    std::vector<scalar> col(static_cast<std::size_t>(okk) * H * W);
    ConstMatMap Wm(weight_.data(), in_ch_, okk);
    for (int n = 0; n < N; ++n) {
        ConstMatMap X(x.data() + static_cast<std::size_t>(n) * in_ch_ * H * W, in_ch_, H * W);
        MatMap C(col.data(), okk, H * W);
        C.noalias() = Wm.transpose() * X;
        scalar* yn = y.data() + static_cast<std::size_t>(n) * out_ch_ * Ho * Wo;
        col2im(col.data(), out_ch_, Ho, Wo, kernel_, stride_, pad_, yn);
        if (has_bias_)
            for (int o = 0; o < out_ch_; ++o)
                for (int i = 0; i < Ho * Wo; ++i) yn[static_cast<std::size_t>(o) * Ho * Wo + i] +=
                    bias_.vec()[o];
    }
    (void)train;
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out) {
    const int N = cached_x_.dim(0), H = cached_x_.dim(2), W = cached_x_.dim(3);
    const int Ho = grad_out.dim(2), Wo = grad_out.dim(3);
    const int okk = out_ch_ * kernel_ * kernel_;
    Tensor gx({N, in_ch_, H, W});
    std::vector<scalar> gcol(static_cast<std::size_t>(okk) * H * W);
    ConstMatMap Wm(weight_.data(), in_ch_, okk);
    MatMap GW(grad_weight_.data(), in_ch_, okk);
    for (int n = 0; n < N; ++n) {
        const scalar* gyn = grad_out.data() + static_cast<std::size_t>(n) * out_ch_ * Ho * Wo;
        im2col(gyn, out_ch_, Ho, Wo, kernel_, stride_, pad_, gcol.data());
        ConstMatMap GC(gcol.data(), okk, H * W);
        ConstMatMap X(cached_x_.data() + static_cast<std::size_t>(n) * in_ch_ * H * W, in_ch_,
                      H * W);
        GW.noalias() += X * GC.transpose();
        MatMap GX(gx.data() + static_cast<std::size_t>(n) * in_ch_ * H * W, in_ch_, H * W);
        GX.noalias() = Wm * GC;
        if (has_bias_)
            for (int o = 0; o < out_ch_; ++o) {
                scalar acc = 0;
                for (int i = 0; i < Ho * Wo; ++i)
                    acc += gyn[static_cast<std::size_t>(o) * Ho * Wo + i];
                grad_bias_.vec()[o] += acc;
            }
    }
    return gx;
}

std::vector<ParamRef> ConvTranspose2d::params() {
    std::vector<ParamRef> out{{"weight", &weight_, &grad_weight_}};
    if (has_bias_) out.push_back({"bias", &bias_, &grad_bias_});
    return out;
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, scalar eps, scalar momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_({1, channels}),
      beta_({1, channels}),
      grad_gamma_({1, channels}),
      grad_beta_({1, channels}),
      running_mean_({channels}),
      running_var_({channels}) {
    gamma_.fill(1.0);
    beta_.fill(0.0);
    grad_gamma_.fill(0.0);
    grad_beta_.fill(0.0);
    running_mean_.fill(0.0);
    running_var_.fill(1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
    check_rank(x, 4, "BatchNorm2d");
    if (x.dim(1) != channels_) throw ConfigError("BatchNorm2d: channel mismatch");
    const int N = x.dim(0), C = channels_, H = x.dim(2), W = x.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    last_train_ = train;
    inv_std_.assign(C, 0.0);
    cached_norm_ = Tensor({N, C, H, W});
    cached_ids_.assign(N, 0);
    for (int n = 0; n < N; ++n) cached_ids_[n] = affine_row(n);

    std::vector<scalar> mean(C, 0.0), var(C, 0.0);
    if (train) {
        const scalar count = static_cast<scalar>(N) * plane;
        for (int c = 0; c < C; ++c) {
            scalar acc = 0;
            for (int n = 0; n < N; ++n) {
                const scalar* p = x.data() + (static_cast<std::size_t>(n) * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) acc += p[i];
            }
            mean[c] = acc / count;
            scalar vacc = 0;
            for (int n = 0; n < N; ++n) {
                const scalar* p = x.data() + (static_cast<std::size_t>(n) * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    scalar d = p[i] - mean[c];
                    vacc += d * d;
                }
            }
            var[c] = vacc / count;
            running_mean_.vec()[c] = (1 - momentum_) * running_mean_.vec()[c] + momentum_ * mean[c];
            running_var_.vec()[c] = (1 - momentum_) * running_var_.vec()[c] + momentum_ * var[c];
        }
    } else {
        for (int c = 0; c < C; ++c) {
            mean[c] = running_mean_.vec()[c];
            var[c] = running_var_.vec()[c];
        }
    }
    Tensor y({N, C, H, W});
    for (int c = 0; c < C; ++c) inv_std_[c] = 1.0 / std::sqrt(var[c] + eps_);
    for (int n = 0; n < N; ++n) {
        const int row = cached_ids_[n];
        for (int c = 0; c < C; ++c) {
            const scalar g = gamma_.at2(row, c), b = beta_.at2(row, c);
            const scalar* p = x.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            scalar* q = cached_norm_.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            scalar* o = y.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                q[i] = (p[i] - mean[c]) * inv_std_[c];
                o[i] = g * q[i] + b;
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
    const int N = grad_out.dim(0), C = channels_, H = grad_out.dim(2), W = grad_out.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const scalar count = static_cast<scalar>(N) * plane;
    Tensor gx({N, C, H, W});

    // dnorm = gout * gamma(row); accumulate dgamma/dbeta per affine row.
    Tensor dnorm({N, C, H, W});
    for (int n = 0; n < N; ++n) {
        const int row = cached_ids_[n];
        for (int c = 0; c < C; ++c) {
            const scalar g = gamma_.at2(row, c);
            const scalar* go = grad_out.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            const scalar* nm = cached_norm_.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            scalar* dn = dnorm.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            scalar dg = 0, db = 0;
            for (std::size_t i = 0; i < plane; ++i) {
                dn[i] = go[i] * g;
                dg += go[i] * nm[i];
                db += go[i];
            }
            grad_gamma_.at2(row, c) += dg;
            grad_beta_.at2(row, c) += db;
        }
    }
    if (!last_train_) {
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const scalar* dn = dnorm.data() + (static_cast<std::size_t>(n) * C + c) * plane;
                scalar* g = gx.data() + (static_cast<std::size_t>(n) * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) g[i] = dn[i] * inv_std_[c];
            }
        return gx;
    }
    // Train mode couples samples through the batch statistics:
    // dx = inv_std/m * (m*dnorm - sum(dnorm) - norm * sum(dnorm*norm))
    for (int c = 0; c < C; ++c) {
        scalar sum_dn = 0, sum_dn_nm = 0;
        for (int n = 0; n < N; ++n) {
            const scalar* dn = dnorm.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            const scalar* nm = cached_norm_.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dn += dn[i];
                sum_dn_nm += dn[i] * nm[i];
            }
        }
        const scalar k = inv_std_[c] / count;
        for (int n = 0; n < N; ++n) {
            const scalar* dn = dnorm.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            const scalar* nm = cached_norm_.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            scalar* g = gx.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i)
                g[i] = k * (count * dn[i] - sum_dn - nm[i] * sum_dn_nm);
        }
    }
    return gx;
}

std::vector<ParamRef> BatchNorm2d::params() {
    return {{"gamma", &gamma_, &grad_gamma_}, {"beta", &beta_, &grad_beta_}};
}

std::vector<ParamRef> BatchNorm2d::buffers() {
    return {{"running_mean", &running_mean_, nullptr}, {"running_var", &running_var_, nullptr}};
}

ConditionalBatchNorm2d::ConditionalBatchNorm2d(int channels, int num_classes, scalar eps,
                                               scalar momentum)
    : BatchNorm2d(channels, eps, momentum), num_classes_(num_classes) {
    gamma_ = Tensor({num_classes, channels});
    beta_ = Tensor({num_classes, channels});
    grad_gamma_ = Tensor({num_classes, channels});
    grad_beta_ = Tensor({num_classes, channels});
    gamma_.fill(1.0);
    beta_.fill(0.0);
    grad_gamma_.fill(0.0);
    grad_beta_.fill(0.0);
}

int ConditionalBatchNorm2d::affine_row(int sample) const {
    if (sample >= static_cast<int>(class_ids_.size()))
        throw ConfigError("ConditionalBatchNorm2d: class ids not set for batch");
    int id = class_ids_[sample];
    if (id < 0 || id >= num_classes_)
        throw ConfigError("ConditionalBatchNorm2d: class id out of range");
    return id;
}

// ---------------------------------------------------------------- activations

Tensor ReLU::forward(const Tensor& x, bool) {
    Tensor y = x;
    mask_.assign(x.size(), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y.vec()[i] > 0)
            mask_[i] = 1;
        else
            y.vec()[i] = 0;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!mask_[i]) g.vec()[i] = 0;
    return g;
}

Tensor LeakyReLU::forward(const Tensor& x, bool) {
    Tensor y = x;
    mask_.assign(x.size(), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y.vec()[i] > 0)
            mask_[i] = 1;
        else
            y.vec()[i] *= alpha_;
    }
    return y;
}

Tensor LeakyReLU::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!mask_[i]) g.vec()[i] *= alpha_;
    return g;
}

Tensor Sigmoid::forward(const Tensor& x, bool) {
    Tensor y = x;
    for (scalar& v : y.vec()) v = 1.0 / (1.0 + std::exp(-v));
    cached_y_ = y;
    return y;
}

Tensor Sigmoid::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) {
        scalar y = cached_y_.vec()[i];
        g.vec()[i] *= y * (1.0 - y);
    }
    return g;
}

Tensor Tanh::forward(const Tensor& x, bool) {
    Tensor y = x;
    for (scalar& v : y.vec()) v = std::tanh(v);
    cached_y_ = y;
    return y;
}

Tensor Tanh::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) {
        scalar y = cached_y_.vec()[i];
        g.vec()[i] *= 1.0 - y * y;
    }
    return g;
}

// ------------------------------------------------------------------- pooling

Tensor MaxPool2d::forward(const Tensor& x, bool) {
    check_rank(x, 4, "MaxPool2d");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % 2 || W % 2) throw ConfigError("MaxPool2d: odd spatial dims");
    in_shape_ = x.shape();
    const int Ho = H / 2, Wo = W / 2;
    Tensor y({N, C, Ho, Wo});
    argmax_.assign(y.size(), 0);
    std::size_t o = 0;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int py = 0; py < Ho; ++py)
                for (int px = 0; px < Wo; ++px, ++o) {
                    scalar best = -1e300;
                    int best_idx = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            int idx = ((n * C + c) * H + 2 * py + dy) * W + 2 * px + dx;
                            if (x.vec()[idx] > best) {
                                best = x.vec()[idx];
                                best_idx = idx;
                            }
                        }
                    y.vec()[o] = best;
                    argmax_[o] = best_idx;
                }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
    Tensor gx(in_shape_);
    gx.fill(0.0);
    for (std::size_t o = 0; o < grad_out.size(); ++o) gx.vec()[argmax_[o]] += grad_out.vec()[o];
    return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
    check_rank(x, 4, "GlobalAvgPool");
    in_shape_ = x.shape();
    const int N = x.dim(0), C = x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    Tensor y({N, C});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const scalar* p = x.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            scalar acc = 0;
            for (std::size_t i = 0; i < plane; ++i) acc += p[i];
            y.at2(n, c) = acc / static_cast<scalar>(plane);
        }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
    Tensor gx(in_shape_);
    const int N = in_shape_[0], C = in_shape_[1];
    const std::size_t plane = static_cast<std::size_t>(in_shape_[2]) * in_shape_[3];
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            scalar g = grad_out.at2(n, c) / static_cast<scalar>(plane);
            scalar* p = gx.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) p[i] = g;
        }
    return gx;
}

Tensor Flatten::forward(const Tensor& x, bool) {
    in_shape_ = x.shape();
    Tensor y = x;
    int rest = 1;
    for (std::size_t i = 1; i < in_shape_.size(); ++i) rest *= in_shape_[i];
    y.reshape({in_shape_[0], rest});
    return y;
}

Tensor Flatten::backward(const Tensor& grad_out) {
    Tensor gx = grad_out;
    gx.reshape(in_shape_);
    return gx;
}

// -------------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(int in_ch, int out_ch, int stride, Rng& rng) {
    main_.add(std::make_unique<Conv2d>(in_ch, out_ch, 3, stride, 1, rng, false));
    main_.add(std::make_unique<BatchNorm2d>(out_ch));
    main_.add(std::make_unique<ReLU>());
    main_.add(std::make_unique<Conv2d>(out_ch, out_ch, 3, 1, 1, rng, false));
    main_.add(std::make_unique<BatchNorm2d>(out_ch));
    if (stride != 1 || in_ch != out_ch) {
        auto sc = std::make_unique<Sequential>();
        sc->add(std::make_unique<Conv2d>(in_ch, out_ch, 1, stride, 0, rng, false));
        sc->add(std::make_unique<BatchNorm2d>(out_ch));
        shortcut_ = std::move(sc);
    }
}

Tensor ResidualBlock::forward(const Tensor& x, bool train) {
    Tensor h = main_.forward(x, train);
    Tensor s = shortcut_ ? shortcut_->forward(x, train) : x;
    relu_mask_.assign(h.size(), 0);
    for (std::size_t i = 0; i < h.size(); ++i) {
        scalar v = h.vec()[i] + s.vec()[i];
        if (v > 0) {
            relu_mask_[i] = 1;
            h.vec()[i] = v;
        } else {
            h.vec()[i] = 0;
        }
    }
    return h;
}

Tensor ResidualBlock::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!relu_mask_[i]) g.vec()[i] = 0;
    Tensor gx = main_.backward(g);
    Tensor gs = shortcut_ ? shortcut_->backward(g) : g;
    for (std::size_t i = 0; i < gx.size(); ++i) gx.vec()[i] += gs.vec()[i];
    return gx;
}

std::vector<ParamRef> ResidualBlock::params() {
    std::vector<ParamRef> out;
    for (auto& p : main_.params()) out.push_back({"main." + p.name, p.value, p.grad});
    if (shortcut_)
        for (auto& p : shortcut_->params()) out.push_back({"sc." + p.name, p.value, p.grad});
    return out;
}

std::vector<ParamRef> ResidualBlock::buffers() {
    std::vector<ParamRef> out;
    for (auto& p : main_.buffers()) out.push_back({"main." + p.name, p.value, p.grad});
    if (shortcut_)
        for (auto& p : shortcut_->buffers()) out.push_back({"sc." + p.name, p.value, p.grad});
    return out;
}

void ResidualBlock::set_class_ids(const std::vector<int>& ids) {
    main_.set_class_ids(ids);
    if (shortcut_) shortcut_->set_class_ids(ids);
}

// ----------------------------------------------------------------- Upsample2x

Tensor Upsample2x::forward(const Tensor& x, bool) {
    check_rank(x, 4, "Upsample2x");
    in_shape_ = x.shape();
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y({N, C, 2 * H, 2 * W});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int py = 0; py < 2 * H; ++py)
                for (int px = 0; px < 2 * W; ++px)
                    y.at4(n, c, py, px) = x.at4(n, c, py / 2, px / 2);
    return y;
}

Tensor Upsample2x::backward(const Tensor& grad_out) {
    Tensor gx(in_shape_);
    gx.fill(0.0);
    const int N = in_shape_[0], C = in_shape_[1], H = in_shape_[2], W = in_shape_[3];
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int py = 0; py < 2 * H; ++py)
                for (int px = 0; px < 2 * W; ++px)
                    gx.at4(n, c, py / 2, px / 2) += grad_out.at4(n, c, py, px);
    return gx;
}

// --------------------------------------------------------------------- losses

scalar softmax_xent(const Tensor& logits, const std::vector<int>& labels, Tensor& grad) {
    if (logits.rank() != 2) throw ConfigError("softmax_xent expects (N, K) logits");
    const int N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != N) throw ConfigError("softmax_xent: label count");
    if (!grad.same_shape(logits)) grad = Tensor({N, K});
    scalar loss = 0;
    for (int n = 0; n < N; ++n) {
        scalar mx = logits.at2(n, 0);
        for (int k = 1; k < K; ++k) mx = std::max(mx, logits.at2(n, k));
        scalar z = 0;
        for (int k = 0; k < K; ++k) z += std::exp(logits.at2(n, k) - mx);
        const int y = labels[n];
        if (y < 0 || y >= K) throw ConfigError("softmax_xent: label out of range");
        loss += -(logits.at2(n, y) - mx - std::log(z));
        for (int k = 0; k < K; ++k) {
            scalar p = std::exp(logits.at2(n, k) - mx) / z;
            grad.at2(n, k) = (p - (k == y ? 1.0 : 0.0)) / N;
        }
    }
    return loss / N;
}

std::vector<int> argmax_rows(const Tensor& rows) {
    if (rows.rank() != 2) throw ConfigError("argmax_rows expects a 2-D tensor");
    const int N = rows.dim(0), K = rows.dim(1);
    std::vector<int> out(N, 0);
    for (int n = 0; n < N; ++n) {
        scalar best = rows.at2(n, 0);
        for (int k = 1; k < K; ++k)
            if (rows.at2(n, k) > best) {
                best = rows.at2(n, k);
                out[n] = k;
            }
    }
    return out;
}

}  // namespace cola::nn
