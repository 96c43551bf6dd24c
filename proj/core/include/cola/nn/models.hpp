#pragma once

#include <string>

#include "cola/nn/layers.hpp"

namespace cola::nn {

// Shared conv trunk with two linear heads: cluster embeddings in R^embed_dim
// and 4-way rotation logits. Heads are trained in separate passes; each
// backward routes through the trunk.
class DualHeadEncoder {
  public:
    // backbone: "tiny" (3 conv stages) or "resnet" (residual stages).
    DualHeadEncoder(const std::string& backbone, int channels, int image_size, int embed_dim,
                    Rng& rng);

    Tensor embed(const Tensor& x, bool train);
    void embed_backward(const Tensor& grad_embed);
    Tensor rotation_logits(const Tensor& x, bool train);
    void rotation_backward(const Tensor& grad_logits);

    std::vector<ParamRef> params();
    std::vector<ParamRef> buffers();
    int embed_dim() const { return embed_dim_; }

  private:
    int embed_dim_;
    Sequential trunk_;
    LayerPtr embed_head_, rot_head_;
};

// Decoder from latent rows (N, latent_dim) to images (N, C, H, W) in [0, 1].
// latent rows carry a class block first; conditional layers key on its argmax.
class Generator {
  public:
    // backbone: "tiny" (BN) or "tiny-cbn" (class-conditional BN).
    Generator(const std::string& backbone, int channels, int image_size, int latent_dim,
              int num_classes, Rng& rng);

    Tensor forward(const Tensor& z, bool train);
    Tensor backward(const Tensor& grad_images);  // grad w.r.t. z rows

    std::vector<ParamRef> params();
    std::vector<ParamRef> buffers();
    int latent_dim() const { return latent_dim_; }

  private:
    int latent_dim_, num_classes_;
    Sequential net_;
};

// Image classifier exposing logits and penultimate features.
class Classifier {
  public:
    // backbone: "tiny" (GAP head), "flatten" (position-sensitive head) or
    // "resnet" (three residual stages).
    Classifier(const std::string& backbone, int channels, int image_size, int num_classes,
               Rng& rng);

    Tensor logits(const Tensor& x, bool train);
    void backward(const Tensor& grad_logits);
    // Features feeding the final linear head, eval mode.
    Tensor penultimate(const Tensor& x);
    int feature_dim() const { return feature_dim_; }
    int num_classes() const { return num_classes_; }

    std::vector<ParamRef> params();
    std::vector<ParamRef> buffers();

  private:
    int feature_dim_, num_classes_;
    Sequential trunk_;
    LayerPtr head_;
};

}  // namespace cola::nn
