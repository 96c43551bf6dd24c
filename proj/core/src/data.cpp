#include "cola/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "cola/image_io.hpp"

namespace fs = std::filesystem;

namespace cola {

void LabeledImageSet::validate() const {
    if (images.empty()) throw ConfigError("image set is empty");
    const auto& shape = images[0].shape();
    if (shape.size() != 3) throw ConfigError("images must be CHW tensors");
    for (const auto& img : images) {
        if (img.shape() != shape) throw ConfigError("inconsistent image shapes in set");
        for (scalar v : img.vec())
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("pixel value outside [0,1]");
    }
    if (!labels.empty()) {
        if (labels.size() != images.size())
            throw ConfigError("label count does not match image count");
        if (class_count <= 0) throw ConfigError("labeled set needs class_count > 0");
        std::vector<int> counts(class_count, 0);
        for (int y : labels) {
            if (y < 0 || y >= class_count) throw ConfigError("label outside [0, K)");
            ++counts[y];
        }
        for (int c = 0; c < class_count; ++c)
            if (counts[c] == 0)
                throw ConfigError("class " + std::to_string(c) + " has no members");
    }
}

Tensor image_from_raw(const RawImage& raw) {
    Tensor img({raw.channels, raw.height, raw.width});
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x)
            for (int c = 0; c < raw.channels; ++c)
                img.at3(c, y, x) =
                    raw.pixels[(static_cast<std::size_t>(y) * raw.width + x) * raw.channels + c] /
                    255.0;
    return img;
}

RawImage raw_from_image(const Tensor& img) {
    if (img.rank() != 3) throw ConfigError("raw_from_image expects CHW");
    RawImage raw;
    raw.channels = img.dim(0);
    raw.height = img.dim(1);
    raw.width = img.dim(2);
    raw.pixels.resize(static_cast<std::size_t>(raw.width) * raw.height * raw.channels);
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x)
            for (int c = 0; c < raw.channels; ++c) {
                scalar v = std::clamp(img.at3(c, y, x), 0.0, 1.0);
                raw.pixels[(static_cast<std::size_t>(y) * raw.width + x) * raw.channels + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
    return raw;
}

// --------------------------------------------------------------- directory IO

LabeledImageSet load_dataset(const std::string& root) {
    if (!fs::is_directory(root)) throw std::runtime_error("dataset directory missing: " + root);

    std::vector<std::string> class_dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw std::runtime_error("no class subdirectories in " + root);

    LabeledImageSet set;
    set.class_count = static_cast<int>(class_dirs.size());
    for (int c = 0; c < set.class_count; ++c) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / class_dirs[c]))
            if (entry.is_regular_file() &&
                has_supported_image_extension(entry.path().filename().string()))
                files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw std::runtime_error("class directory has no images: " + class_dirs[c]);
        for (const auto& file : files) {
            RawImage raw;
            try {
                raw = read_image(file);
            } catch (const std::exception& e) {
                throw std::runtime_error("failed to read " + file + ": " + e.what());
            }
            set.images.push_back(image_from_raw(raw));
            set.labels.push_back(c);
        }
    }
    set.validate();
    return set;
}

void save_dataset(const LabeledImageSet& data, const std::string& root) {
    data.validate();
    if (!data.labeled()) throw ConfigError("save_dataset needs labels");
    int pad = data.class_count > 10 ? static_cast<int>(std::to_string(data.class_count - 1).size()) : 1;
    auto class_dir = [&](int c) {
        std::string n = std::to_string(c);
        while (static_cast<int>(n.size()) < pad) n = "0" + n;
        return fs::path(root) / ("class_" + n);
    };
    for (int c = 0; c < data.class_count; ++c) fs::create_directories(class_dir(c));
    std::vector<int> counter(data.class_count, 0);
    char name[32];
    for (int i = 0; i < data.size(); ++i) {
        int c = data.labels[i];
        std::snprintf(name, sizeof name, "img_%05d.png", counter[c]++);
        write_png((class_dir(c) / name).string(), raw_from_image(data.images[i]));
    }
}

LabeledImageSet subsample_spc(const LabeledImageSet& data, int spc, std::uint64_t seed) {
    data.validate();
    if (!data.labeled()) throw ConfigError("subsample_spc needs labels");
    if (spc <= 0) throw ConfigError("spc must be positive");

    std::vector<std::vector<int>> by_class(data.class_count);
    for (int i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

    Rng rng(seed);
    LabeledImageSet out;
    out.class_count = data.class_count;
    for (int c = 0; c < data.class_count; ++c) {
        auto& idx = by_class[c];
        if (static_cast<int>(idx.size()) < spc)
            throw ConfigError("class " + std::to_string(c) + " has " +
                              std::to_string(idx.size()) + " members, need " +
                              std::to_string(spc));
        rng.shuffle(idx);
        idx.resize(spc);
        std::sort(idx.begin(), idx.end());
        for (int i : idx) {
            out.images.push_back(data.images[i]);
            out.labels.push_back(c);
        }
    }
    return out;
}

// ----------------------------------------------------------------- toy images

namespace {

void hsv_to_rgb(scalar h, scalar s, scalar v, scalar rgb[3]) {
    h = h - std::floor(h);
    scalar hh = h * 6.0;
    int sector = static_cast<int>(hh) % 6;
    scalar f = hh - std::floor(hh);
    scalar p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
        case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
        case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
        case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
        case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
        default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
    }
}

}  // namespace

LabeledImageSet build_toy_set(const ToyConfig& cfg, std::uint64_t seed) {
    if (cfg.classes < 2 || cfg.per_class < 1 || cfg.image_size < 8)
        throw ConfigError("toy set needs K >= 2, spc >= 1, H >= 8");
    Rng rng(seed);
    const int H = cfg.image_size;
    LabeledImageSet set;
    set.class_count = cfg.classes;

    for (int c = 0; c < cfg.classes; ++c) {
        for (int s = 0; s < cfg.per_class; ++s) {
            scalar hue = (c + 0.5) / cfg.classes + rng.normal(0.0, cfg.hue_jitter);
            scalar rgb[3];
            hsv_to_rgb(hue, 0.9, 0.9, rgb);

            scalar cx, cy;
            if (cfg.uniform_position) {
                cx = rng.uniform(0.22, 0.78) * (H - 1);
                cy = rng.uniform(0.22, 0.78) * (H - 1);
            } else {
                cx = (0.5 + rng.uniform(-cfg.pos_spread, cfg.pos_spread)) * (H - 1);
                cy = (0.5 + rng.uniform(-cfg.pos_spread, cfg.pos_spread)) * (H - 1);
            }
            scalar radius = (cfg.radius_base + rng.uniform(0.0, cfg.radius_jitter)) * H;
            scalar top = 0.32 + rng.uniform(-0.02, 0.02);
            scalar fall = 0.20;

            Tensor img({cfg.channels, H, H});
            for (int y = 0; y < H; ++y) {
                scalar bg = top - fall * (static_cast<scalar>(y) / (H - 1));
                for (int x = 0; x < H; ++x) {
                    scalar dist = std::hypot(x - cx, y - cy);
                    scalar alpha = 1.0 / (1.0 + std::exp((dist - radius) * 2.0));
                    for (int ch = 0; ch < cfg.channels; ++ch) {
                        scalar color = cfg.channels == 3 ? rgb[ch] : 0.85;
                        scalar v = bg + alpha * (color - bg);
                        v += rng.uniform(-cfg.pixel_noise, cfg.pixel_noise);
                        img.at3(ch, y, x) = std::clamp(v, 0.0, 1.0);
                    }
                }
            }
            set.images.push_back(std::move(img));
            set.labels.push_back(c);
        }
    }
    set.validate();
    return set;
}

// ---------------------------------------------------------------- spec string

std::string DatasetSpec::to_string() const {
    switch (kind) {
        case Kind::toy:
            return "toy:" + std::to_string(classes) + "x" + std::to_string(per_class) + "@" +
                   std::to_string(image_size);
        case Kind::toy_spread:
            return "toy2:" + std::to_string(classes) + "x" + std::to_string(per_class) + "@" +
                   std::to_string(image_size);
        default:
            return path;
    }
}

DatasetSpec parse_dataset_spec(const std::string& text) {
    DatasetSpec spec;
    std::string body;
    if (text.rfind("toy:", 0) == 0) {
        spec.kind = DatasetSpec::Kind::toy;
        body = text.substr(4);
    } else if (text.rfind("toy2:", 0) == 0) {
        spec.kind = DatasetSpec::Kind::toy_spread;
        body = text.substr(5);
    } else {
        spec.path = text.rfind("dir:", 0) == 0 ? text.substr(4) : text;
        if (spec.path.empty()) throw ConfigError("empty dataset path");
        return spec;
    }
    auto xpos = body.find('x');
    auto apos = body.find('@');
    if (xpos == std::string::npos || apos == std::string::npos || apos < xpos)
        throw ConfigError("toy dataset spec must look like toy:<K>x<spc>@<H>: " + text);
    try {
        spec.classes = std::stoi(body.substr(0, xpos));
        spec.per_class = std::stoi(body.substr(xpos + 1, apos - xpos - 1));
        spec.image_size = std::stoi(body.substr(apos + 1));
    } catch (const std::exception&) {
        throw ConfigError("bad number in toy dataset spec: " + text);
    }
    if (spec.classes < 2 || spec.per_class < 1 || spec.image_size < 8)
        throw ConfigError("toy dataset spec out of range: " + text);
    return spec;
}

LabeledImageSet load_from_spec(const DatasetSpec& spec, std::uint64_t seed,
                               const std::string& stream, int per_class_override) {
    if (spec.kind == DatasetSpec::Kind::directory) return load_dataset(spec.path);
    ToyConfig cfg;
    cfg.classes = spec.classes;
    cfg.per_class = per_class_override > 0 ? per_class_override : spec.per_class;
    cfg.image_size = spec.image_size;
    if (spec.kind == DatasetSpec::Kind::toy_spread) cfg.uniform_position = true;
    return build_toy_set(cfg, derive_seed(seed, "toy/" + stream));
}

Tensor make_grid(const std::vector<Tensor>& images, const std::vector<int>& rows, int row_count) {
    if (images.empty()) throw ConfigError("make_grid: no images");
    if (rows.size() != images.size()) throw ConfigError("make_grid: rows/images mismatch");
    const int C = images[0].dim(0), H = images[0].dim(1), W = images[0].dim(2);
    std::vector<std::vector<int>> per_row(row_count);
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= row_count) throw ConfigError("make_grid: row out of range");
        per_row[rows[i]].push_back(static_cast<int>(i));
    }
    std::size_t cols = 0;
    for (const auto& r : per_row) cols = std::max(cols, r.size());
    const int pad = 2;
    Tensor grid({C, row_count * (H + pad) + pad, static_cast<int>(cols) * (W + pad) + pad});
    grid.fill(1.0);
    for (int r = 0; r < row_count; ++r)
        for (std::size_t k = 0; k < per_row[r].size(); ++k) {
            const Tensor& img = images[per_row[r][k]];
            int oy = pad + r * (H + pad), ox = pad + static_cast<int>(k) * (W + pad);
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        grid.at3(c, oy + y, ox + x) = img.at3(c, y, x);
        }
    return grid;
}

}  // namespace cola
