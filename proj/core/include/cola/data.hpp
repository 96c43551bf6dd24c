#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cola/rng.hpp"
#include "cola/tensor.hpp"

namespace cola {

/// A set of same-shape images in [0,1] (stored CHW) with optional labels.
struct LabeledImageSet {
    std::vector<Tensor> images;
    std::vector<int> labels;  // empty when unlabeled, else one per image in [0, K)
    int class_count = 0;

    int size() const { return static_cast<int>(images.size()); }
    bool labeled() const { return !labels.empty(); }
    int channels() const { return images.empty() ? 0 : images[0].dim(0); }
    int height() const { return images.empty() ? 0 : images[0].dim(1); }
    int width() const { return images.empty() ? 0 : images[0].dim(2); }

    /// Throws ConfigError when any invariant is broken (shape mismatch,
    /// out-of-range pixel, bad label, empty class).
    void validate() const;
};

/// Deterministic in-memory toy builder: a vertical-luminance background with
/// one soft colored disc per image. Class identity is the disc hue; position,
/// radius and hue jitter provide intra-class variation.
struct ToyConfig {
    int classes = 4;
    int per_class = 25;
    int image_size = 32;
    int channels = 3;
    // disc center offset from image center, as a fraction of image size;
    // uniform_position scatters centers over the whole usable area instead
    scalar pos_spread = 0.12;
    bool uniform_position = false;
    scalar hue_jitter = 0.015;
    scalar radius_base = 0.17;
    scalar radius_jitter = 0.05;
    scalar pixel_noise = 0.01;
};

LabeledImageSet build_toy_set(const ToyConfig& cfg, std::uint64_t seed);

/// `toy:<K>x<spc>@<H>` (moderate position jitter), `toy2:<K>x<spc>@<H>`
/// (position uniform over the image), or a dataset directory path.
struct DatasetSpec {
    enum class Kind { toy, toy_spread, directory };
    Kind kind = Kind::directory;
    int classes = 0;
    int per_class = 0;
    int image_size = 0;
    std::string path;

    std::string to_string() const;
};

DatasetSpec parse_dataset_spec(const std::string& text);

/// Materializes a spec. For toy specs, `stream` separates train/test draws.
LabeledImageSet load_from_spec(const DatasetSpec& spec, std::uint64_t seed,
                               const std::string& stream, int per_class_override = 0);

/// Loads `<root>/<class_name>/<image files>`; classes ordered lexicographically
/// by directory name, images lexicographically by file name.
LabeledImageSet load_dataset(const std::string& root);

/// Writes the class-per-directory layout with PNG files, round-trippable
/// through load_dataset.
void save_dataset(const LabeledImageSet& data, const std::string& root);

/// Label-stratified subsample without replacement, exactly spc per class.
LabeledImageSet subsample_spc(const LabeledImageSet& data, int spc, std::uint64_t seed);

// conversions between [0,1] CHW tensors and 8-bit rasters
Tensor image_from_raw(const struct RawImage& raw);
struct RawImage raw_from_image(const Tensor& img);

/// K-row grid (one row per class/cluster) with 2px separation, as one image.
Tensor make_grid(const std::vector<Tensor>& images, const std::vector<int>& rows, int row_count);

}  // namespace cola
