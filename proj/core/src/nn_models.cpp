#include "cola/nn/models.hpp"

#include <cmath>

#include "cola/common.hpp"

namespace cola::nn {

namespace {

// (N, C*H*W) <-> (N, C, H, W)
class ReshapeToImage : public Layer {
  public:
    ReshapeToImage(int channels, int height, int width)
        : channels_(channels), height_(height), width_(width) {}
    Tensor forward(const Tensor& x, bool) override {
        Tensor y = x;
        y.reshape({x.dim(0), channels_, height_, width_});
        return y;
    }
    Tensor backward(const Tensor& grad_out) override {
        Tensor g = grad_out;
        g.reshape({grad_out.dim(0), channels_ * height_ * width_});
        return g;
    }

  private:
    int channels_, height_, width_;
};

int upsample_steps(int image_size) {
    int size = 4, steps = 0;
    while (size < image_size) {
        size *= 2;
        ++steps;
    }
    if (size != image_size)
        throw ConfigError("generator image size must be 4 * 2^k, got " +
                          std::to_string(image_size));
    return steps;
}

void check_image_size(int image_size) {
    if (image_size % 4 != 0 || image_size < 8)
        throw ConfigError("backbone needs image size divisible by 4, >= 8");
}

std::unique_ptr<Sequential> tiny_trunk(int channels, Rng& rng, int c1, int c2, int c3) {
    auto trunk = std::make_unique<Sequential>();
    trunk->add(std::make_unique<Conv2d>(channels, c1, 3, 1, 1, rng, false));
    trunk->add(std::make_unique<BatchNorm2d>(c1));
    trunk->add(std::make_unique<ReLU>());
    trunk->add(std::make_unique<MaxPool2d>());
    trunk->add(std::make_unique<Conv2d>(c1, c2, 3, 1, 1, rng, false));
    trunk->add(std::make_unique<BatchNorm2d>(c2));
    trunk->add(std::make_unique<ReLU>());
    trunk->add(std::make_unique<MaxPool2d>());
    trunk->add(std::make_unique<Conv2d>(c2, c3, 3, 1, 1, rng, false));
    trunk->add(std::make_unique<BatchNorm2d>(c3));
    trunk->add(std::make_unique<ReLU>());
    return trunk;
}

std::unique_ptr<Sequential> resnet_trunk(int channels, Rng& rng) {
    auto trunk = std::make_unique<Sequential>();
    trunk->add(std::make_unique<Conv2d>(channels, 16, 3, 1, 1, rng, false));
    trunk->add(std::make_unique<BatchNorm2d>(16));
    trunk->add(std::make_unique<ReLU>());
    trunk->add(std::make_unique<ResidualBlock>(16, 16, 1, rng));
    trunk->add(std::make_unique<ResidualBlock>(16, 32, 2, rng));
    trunk->add(std::make_unique<ResidualBlock>(32, 64, 2, rng));
    return trunk;
}

}  // namespace

// ------------------------------------------------------------ DualHeadEncoder

DualHeadEncoder::DualHeadEncoder(const std::string& backbone, int channels, int image_size,
                                 int embed_dim, Rng& rng)
    : embed_dim_(embed_dim) {
    check_image_size(image_size);
    if (embed_dim < 2) throw ConfigError("encoder embed_dim must be >= 2");
    int feat = 0;
    if (backbone == "tiny") {
        auto trunk = tiny_trunk(channels, rng, 8, 16, 32);
        trunk->add(std::make_unique<GlobalAvgPool>());
        feat = 32;
        trunk_ = std::move(*trunk);
    } else if (backbone == "resnet") {
        auto trunk = resnet_trunk(channels, rng);
        trunk->add(std::make_unique<GlobalAvgPool>());
        feat = 64;
        trunk_ = std::move(*trunk);
    } else {
        throw ConfigError("unknown encoder backbone: " + backbone);
    }
    embed_head_ = std::make_unique<Linear>(feat, embed_dim, rng);
    rot_head_ = std::make_unique<Linear>(feat, 4, rng);
}

Tensor DualHeadEncoder::embed(const Tensor& x, bool train) {
    return embed_head_->forward(trunk_.forward(x, train), train);
}

void DualHeadEncoder::embed_backward(const Tensor& grad_embed) {
    trunk_.backward(embed_head_->backward(grad_embed));
}

Tensor DualHeadEncoder::rotation_logits(const Tensor& x, bool train) {
    return rot_head_->forward(trunk_.forward(x, train), train);
}

void DualHeadEncoder::rotation_backward(const Tensor& grad_logits) {
    trunk_.backward(rot_head_->backward(grad_logits));
}

std::vector<ParamRef> DualHeadEncoder::params() {
    std::vector<ParamRef> out;
    for (auto& p : trunk_.params()) out.push_back({"trunk." + p.name, p.value, p.grad});
    for (auto& p : embed_head_->params()) out.push_back({"embed." + p.name, p.value, p.grad});
    for (auto& p : rot_head_->params()) out.push_back({"rot." + p.name, p.value, p.grad});
    return out;
}

std::vector<ParamRef> DualHeadEncoder::buffers() {
    std::vector<ParamRef> out;
    for (auto& p : trunk_.buffers()) out.push_back({"trunk." + p.name, p.value, p.grad});
    return out;
}

// ------------------------------------------------------------------ Generator

Generator::Generator(const std::string& backbone, int channels, int image_size, int latent_dim,
                     int num_classes, Rng& rng)
    : latent_dim_(latent_dim), num_classes_(num_classes) {
    if (latent_dim <= num_classes)
        throw ConfigError("generator latent_dim must exceed the class block");
    const int steps = upsample_steps(image_size);
    if (steps < 1) throw ConfigError("generator image size too small");
    const bool conditional = backbone == "tiny-cbn";
    if (!conditional && backbone != "tiny")
        throw ConfigError("unknown generator backbone: " + backbone);

    int ch = 8 << steps;  // halves per upsample, reaching 16 before the image layer
    net_.add(std::make_unique<Linear>(latent_dim, ch * 4 * 4, rng));
    net_.add(std::make_unique<ReshapeToImage>(ch, 4, 4));
    for (int s = 0; s < steps; ++s) {
        if (conditional)
            net_.add(std::make_unique<ConditionalBatchNorm2d>(ch, num_classes));
        else
            net_.add(std::make_unique<BatchNorm2d>(ch));
        net_.add(std::make_unique<ReLU>());
        net_.add(std::make_unique<ConvTranspose2d>(ch, s + 1 == steps ? channels : ch / 2, 4, 2, 1,
                                                   rng, true));
        ch /= 2;
    }
    net_.add(std::make_unique<Sigmoid>());
}

Tensor Generator::forward(const Tensor& z, bool train) {
    if (z.rank() != 2 || z.dim(1) != latent_dim_)
        throw ConfigError("generator expects (N, latent_dim) rows");
    // class block = leading num_classes entries
    Tensor block({z.dim(0), num_classes_});
    for (int n = 0; n < z.dim(0); ++n)
        for (int k = 0; k < num_classes_; ++k) block.at2(n, k) = z.at2(n, k);
    net_.set_class_ids(argmax_rows(block));
    return net_.forward(z, train);
}

Tensor Generator::backward(const Tensor& grad_images) { return net_.backward(grad_images); }

std::vector<ParamRef> Generator::params() {
    std::vector<ParamRef> out;
    for (auto& p : net_.params()) out.push_back({"gen." + p.name, p.value, p.grad});
    return out;
}

std::vector<ParamRef> Generator::buffers() {
    std::vector<ParamRef> out;
    for (auto& p : net_.buffers()) out.push_back({"gen." + p.name, p.value, p.grad});
    return out;
}

// ----------------------------------------------------------------- Classifier

Classifier::Classifier(const std::string& backbone, int channels, int image_size, int num_classes,
                       Rng& rng)
    : num_classes_(num_classes) {
    check_image_size(image_size);
    if (backbone == "tiny") {
        auto trunk = tiny_trunk(channels, rng, 16, 32, 32);
        trunk->add(std::make_unique<GlobalAvgPool>());
        feature_dim_ = 32;
        trunk_ = std::move(*trunk);
    } else if (backbone == "resnet") {
        auto trunk = resnet_trunk(channels, rng);
        trunk->add(std::make_unique<GlobalAvgPool>());
        feature_dim_ = 64;
        trunk_ = std::move(*trunk);
    } else if (backbone == "flatten") {
        auto trunk = std::make_unique<Sequential>();
        trunk->add(std::make_unique<Conv2d>(channels, 8, 3, 1, 1, rng, false));
        trunk->add(std::make_unique<BatchNorm2d>(8));
        trunk->add(std::make_unique<ReLU>());
        trunk->add(std::make_unique<MaxPool2d>());
        trunk->add(std::make_unique<Conv2d>(8, 16, 3, 1, 1, rng, false));
        trunk->add(std::make_unique<BatchNorm2d>(16));
        trunk->add(std::make_unique<ReLU>());
        trunk->add(std::make_unique<MaxPool2d>());
        trunk->add(std::make_unique<Flatten>());
        feature_dim_ = 16 * (image_size / 4) * (image_size / 4);
        trunk_ = std::move(*trunk);
    } else {
        throw ConfigError("unknown classifier backbone: " + backbone);
    }
    head_ = std::make_unique<Linear>(feature_dim_, num_classes, rng);
}

Tensor Classifier::logits(const Tensor& x, bool train) {
    return head_->forward(trunk_.forward(x, train), train);
}

void Classifier::backward(const Tensor& grad_logits) {
    trunk_.backward(head_->backward(grad_logits));
}

Tensor Classifier::penultimate(const Tensor& x) { return trunk_.forward(x, false); }

std::vector<ParamRef> Classifier::params() {
    std::vector<ParamRef> out;
    for (auto& p : trunk_.params()) out.push_back({"trunk." + p.name, p.value, p.grad});
    for (auto& p : head_->params()) out.push_back({"head." + p.name, p.value, p.grad});
    return out;
}

std::vector<ParamRef> Classifier::buffers() {
    std::vector<ParamRef> out;
    for (auto& p : trunk_.buffers()) out.push_back({"trunk." + p.name, p.value, p.grad});
    return out;
}

}  // namespace cola::nn
