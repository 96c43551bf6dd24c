#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cola/rng.hpp"
#include "cola/tensor.hpp"

namespace cola::nn {

struct ParamRef {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

// Hand-derived layers in double precision. forward(x, train) caches whatever
// backward needs; backward(grad_out) returns grad w.r.t. the layer input and
// accumulates parameter gradients. Gradients are zeroed by the optimizer.
class Layer {
  public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<ParamRef> params() { return {}; }
    // Non-trainable state (running statistics): checkpointed, never optimized.
    virtual std::vector<ParamRef> buffers() { return {}; }
    // Per-sample class ids for class-conditional layers; no-op elsewhere.
    virtual void set_class_ids(const std::vector<int>&) {}
};

using LayerPtr = std::unique_ptr<Layer>;

class Sequential : public Layer {
  public:
    Sequential() = default;
    void add(LayerPtr layer) { layers_.push_back(std::move(layer)); }
    std::size_t size() const { return layers_.size(); }

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamRef> params() override;
    std::vector<ParamRef> buffers() override;
    void set_class_ids(const std::vector<int>& ids) override;

  private:
    std::vector<LayerPtr> layers_;
};

// (N, in) -> (N, out)
class Linear : public Layer {
  public:
    Linear(int in_features, int out_features, Rng& rng, bool bias = true);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamRef> params() override;

  private:
    int in_, out_;
    bool has_bias_;
    Tensor weight_, bias_, grad_weight_, grad_bias_;
    Tensor cached_x_;
};

// NCHW convolution, square kernel, zero padding, im2col + GEMM.
class Conv2d : public Layer {
  public:
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng, bool bias = true);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamRef> params() override;

  private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    bool has_bias_;
    Tensor weight_, bias_, grad_weight_, grad_bias_;
    Tensor cached_x_;
};

// NCHW transposed convolution; out = (in - 1) * stride - 2 * pad + kernel.
class ConvTranspose2d : public Layer {
  public:
    ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng,
                    bool bias = true);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamRef> params() override;

  private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    bool has_bias_;
    Tensor weight_, bias_, grad_weight_, grad_bias_;
    Tensor cached_x_;
};

// Per-channel batch norm over (N, H, W); running stats for eval.
class BatchNorm2d : public Layer {
  public:
    explicit BatchNorm2d(int channels, scalar eps = 1e-5, scalar momentum = 0.1);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamRef> params() override;
    std::vector<ParamRef> buffers() override;

  protected:
    // Affine parameters per sample row; plain BN uses row 0 for everyone,
    // the conditional subclass selects rows by class id.
    virtual int affine_row(int sample) const { return 0; }

    int channels_;
    scalar eps_, momentum_;
    Tensor gamma_, beta_, grad_gamma_, grad_beta_;  // (rows, C)
    Tensor running_mean_, running_var_;

    Tensor cached_norm_;            // normalized activations
    std::vector<scalar> inv_std_;   // per channel
    std::vector<int> cached_ids_;
    bool last_train_ = true;
};

// Class-conditional affine over shared normalization statistics.
class ConditionalBatchNorm2d : public BatchNorm2d {
  public:
    ConditionalBatchNorm2d(int channels, int num_classes, scalar eps = 1e-5,
                           scalar momentum = 0.1);
    void set_class_ids(const std::vector<int>& ids) override { class_ids_ = ids; }

  protected:
    int affine_row(int sample) const override;

  private:
    int num_classes_;
    std::vector<int> class_ids_;
};

class ReLU : public Layer {
  public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    std::vector<char> mask_;
};

class LeakyReLU : public Layer {
  public:
    explicit LeakyReLU(scalar alpha = 0.2) : alpha_(alpha) {}
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    scalar alpha_;
    std::vector<char> mask_;
};

class Sigmoid : public Layer {
  public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    Tensor cached_y_;
};

class Tanh : public Layer {
  public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    Tensor cached_y_;
};

// 2x2 stride-2 max pooling.
class MaxPool2d : public Layer {
  public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    std::vector<int> argmax_;
    std::vector<int> in_shape_;
};

// (N, C, H, W) -> (N, C)
class GlobalAvgPool : public Layer {
  public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    std::vector<int> in_shape_;
};

// (N, C, H, W) -> (N, C*H*W)
class Flatten : public Layer {
  public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    std::vector<int> in_shape_;
};

// conv3x3 -> BN -> ReLU -> conv3x3 -> BN, plus identity or projection
// shortcut, ReLU after the sum.
class ResidualBlock : public Layer {
  public:
    ResidualBlock(int in_ch, int out_ch, int stride, Rng& rng);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamRef> params() override;
    std::vector<ParamRef> buffers() override;
    void set_class_ids(const std::vector<int>& ids) override;

  private:
    Sequential main_;
    LayerPtr shortcut_;  // null for identity
    std::vector<char> relu_mask_;
};

// Nearest-neighbour 2x spatial upsample.
class Upsample2x : public Layer {
  public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    std::vector<int> in_shape_;
};

// Softmax cross-entropy over logits (N, K); fills grad (same shape) with
// d(mean loss)/d(logits) and returns the mean loss.
scalar softmax_xent(const Tensor& logits, const std::vector<int>& labels, Tensor& grad);

// Row-wise argmax of (N, K).
std::vector<int> argmax_rows(const Tensor& rows);

}  // namespace cola::nn
