#include "cola/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cola/common.hpp"

namespace cola {
namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                     std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write file: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("short write: " + path);
}

std::string lower_ext(const std::string& name) {
    auto dot = name.rfind('.');
    if (dot == std::string::npos) return "";
    std::string ext = name.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

// ---------------------------------------------------------------- PPM / PGM

int ppm_token(const std::vector<std::uint8_t>& b, std::size_t& pos) {
    auto is_space = [](std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    while (pos < b.size()) {
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (is_space(b[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    int v = 0;
    bool any = false;
    while (pos < b.size() && b[pos] >= '0' && b[pos] <= '9') {
        v = v * 10 + (b[pos] - '0');
        ++pos;
        any = true;
    }
    if (!any) throw std::runtime_error("malformed PNM header");
    return v;
}

RawImage read_pnm(const std::string& path) {
    auto bytes = read_file(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw std::runtime_error("unsupported PNM magic in " + path);
    int channels = bytes[1] == '6' ? 3 : 1;
    std::size_t pos = 2;
    RawImage img;
    img.width = ppm_token(bytes, pos);
    img.height = ppm_token(bytes, pos);
    int maxval = ppm_token(bytes, pos);
    if (maxval != 255) throw std::runtime_error("only maxval 255 PNM supported: " + path);
    ++pos;  // single whitespace after maxval
    img.channels = channels;
    std::size_t need = static_cast<std::size_t>(img.width) * img.height * channels;
    if (bytes.size() < pos + need) throw std::runtime_error("truncated PNM data: " + path);
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
    return img;
}

// ----------------------------------------------------------------------- PNG

constexpr std::uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

std::vector<std::uint8_t> zlib_deflate(const std::vector<std::uint8_t>& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("zlib compression failed");
    out.resize(bound);
    return out;
}

std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& comp,
                                       std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    uLongf dest_len = static_cast<uLongf>(expected);
    int rc = uncompress(out.data(), &dest_len, comp.data(), static_cast<uLong>(comp.size()));
    if (rc != Z_OK || dest_len != expected) throw std::runtime_error("zlib inflate failed");
    return out;
}

std::uint8_t paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

RawImage read_png(const std::string& path) {
    auto bytes = read_file(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
        throw std::runtime_error("not a PNG file: " + path);

    std::size_t pos = 8;
    int width = 0, height = 0, bit_depth = 0, color_type = 0, interlace = 0;
    std::vector<std::uint8_t> idat;
    bool seen_ihdr = false, seen_iend = false;

    while (pos + 8 <= bytes.size() && !seen_iend) {
        std::uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw std::runtime_error("truncated PNG: " + path);
        std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
        const std::uint8_t* payload = &bytes[pos + 8];
        if (type == "IHDR") {
            width = static_cast<int>(be32(payload));
            height = static_cast<int>(be32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            interlace = payload[12];
            seen_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            seen_iend = true;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr) throw std::runtime_error("PNG missing IHDR: " + path);
    if (bit_depth != 8) throw std::runtime_error("only 8-bit PNG supported: " + path);
    if (interlace != 0) throw std::runtime_error("interlaced PNG unsupported: " + path);

    int src_channels;
    switch (color_type) {
        case 0: src_channels = 1; break;  // gray
        case 2: src_channels = 3; break;  // rgb
        case 6: src_channels = 4; break;  // rgba
        default: throw std::runtime_error("unsupported PNG color type in " + path);
    }

    std::size_t stride = static_cast<std::size_t>(width) * src_channels;
    auto raw = zlib_inflate(idat, (stride + 1) * static_cast<std::size_t>(height));

    // undo per-row filters in place
    std::vector<std::uint8_t> flat(stride * height);
    int bpp = src_channels;
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* row = &raw[static_cast<std::size_t>(y) * (stride + 1)];
        std::uint8_t filter = row[0];
        std::uint8_t* cur = &flat[static_cast<std::size_t>(y) * stride];
        const std::uint8_t* prev = y > 0 ? &flat[static_cast<std::size_t>(y - 1) * stride] : nullptr;
        for (std::size_t x = 0; x < stride; ++x) {
            int a = x >= static_cast<std::size_t>(bpp) ? cur[x - bpp] : 0;
            int b = prev ? prev[x] : 0;
            int c = (prev && x >= static_cast<std::size_t>(bpp)) ? prev[x - bpp] : 0;
            int v = row[1 + x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw std::runtime_error("bad PNG filter byte in " + path);
            }
            cur[x] = static_cast<std::uint8_t>(v & 0xff);
        }
    }

    RawImage img;
    img.width = width;
    img.height = height;
    img.channels = src_channels == 4 ? 3 : src_channels;
    img.pixels.resize(static_cast<std::size_t>(width) * height * img.channels);
    if (src_channels == 4) {
        for (std::size_t i = 0, n = static_cast<std::size_t>(width) * height; i < n; ++i)
            for (int c = 0; c < 3; ++c) img.pixels[i * 3 + c] = flat[i * 4 + c];
    } else {
        img.pixels = std::move(flat);
    }
    return img;
}

}  // namespace

bool has_supported_image_extension(const std::string& filename) {
    std::string e = lower_ext(filename);
    return e == "png" || e == "ppm" || e == "pgm";
}

RawImage read_image(const std::string& path) {
    std::string e = lower_ext(path);
    if (e == "png") return read_png(path);
    if (e == "ppm" || e == "pgm") return read_pnm(path);
    throw std::runtime_error("unsupported image extension: " + path);
}

void write_png(const std::string& path, const RawImage& img) {
    if (img.channels != 1 && img.channels != 3)
        throw ConfigError("write_png expects 1 or 3 channels");
    std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<std::uint8_t> raw((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        std::uint8_t* row = &raw[static_cast<std::size_t>(y) * (stride + 1)];
        row[0] = 0;  // filter: none
        std::memcpy(row + 1, &img.pixels[static_cast<std::size_t>(y) * stride], stride);
    }
    auto comp = zlib_deflate(raw);

    std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(img.width));
    put_be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);                                        // bit depth
    ihdr.push_back(img.channels == 3 ? 2 : 0);                // color type
    ihdr.push_back(0);                                        // compression
    ihdr.push_back(0);                                        // filter
    ihdr.push_back(0);                                        // interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", comp);
    append_chunk(out, "IEND", {});
    write_file(path, out);
}

void write_ppm(const std::string& path, const RawImage& img) {
    if (img.channels != 1 && img.channels != 3)
        throw ConfigError("write_ppm expects 1 or 3 channels");
    std::string header = (img.channels == 3 ? std::string("P6\n") : std::string("P5\n")) +
                         std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    write_file(path, out);
}

}  // namespace cola
