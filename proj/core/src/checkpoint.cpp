#include "cola/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "cola/common.hpp"

namespace cola {

namespace {

constexpr char kMagic[8] = {'C', 'O', 'L', 'A', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

void write_header(std::ostream& out, const std::string& name, std::uint8_t dtype,
                  const std::vector<int>& dims) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    out.put(static_cast<char>(dtype));
    write_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (int d : dims) write_u64(out, static_cast<std::uint64_t>(d));
}

}  // namespace

bool Blob::has_tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

const Tensor& Blob::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw ConfigError("blob has no tensor named " + name);
}

bool Blob::has_ints(const std::string& name) const {
    for (const auto& [n, v] : ints)
        if (n == name) return true;
    return false;
}

const std::vector<std::int64_t>& Blob::int_block(const std::string& name) const {
    for (const auto& [n, v] : ints)
        if (n == name) return v;
    throw ConfigError("blob has no int block named " + name);
}

void save_blob(const std::string& path, const Blob& blob) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    write_u32(out, kVersion);
    write_u64(out, blob.meta_json.size());
    out.write(blob.meta_json.data(), static_cast<std::streamsize>(blob.meta_json.size()));
    write_u32(out, static_cast<std::uint32_t>(blob.tensors.size() + blob.ints.size()));
    for (const auto& [name, t] : blob.tensors) {
        write_header(out, name, 0, t.shape());
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(scalar)));
    }
    for (const auto& [name, v] : blob.ints) {
        write_header(out, name, 1, {static_cast<int>(v.size())});
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(std::int64_t)));
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

Blob load_blob(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error(path + " is not a COLACKP1 container");
    if (read_u32(in) != kVersion) throw std::runtime_error(path + ": unsupported version");
    Blob blob;
    std::uint64_t meta_len = read_u64(in);
    blob.meta_json.resize(meta_len);
    in.read(blob.meta_json.data(), static_cast<std::streamsize>(meta_len));
    const std::uint32_t blocks = read_u32(in);
    for (std::uint32_t b = 0; b < blocks; ++b) {
        const std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const int dtype = in.get();
        const std::uint32_t rank = read_u32(in);
        if (rank > 8) throw std::runtime_error(path + ": absurd tensor rank");
        std::vector<int> dims(rank);
        std::size_t numel = 1;
        for (auto& d : dims) {
            d = static_cast<int>(read_u64(in));
            numel *= static_cast<std::size_t>(d);
        }
        if (dtype == 0) {
            Tensor t(dims);
            in.read(reinterpret_cast<char*>(t.data()),
                    static_cast<std::streamsize>(numel * sizeof(scalar)));
            blob.tensors.emplace_back(std::move(name), std::move(t));
        } else if (dtype == 1) {
            std::vector<std::int64_t> v(numel);
            in.read(reinterpret_cast<char*>(v.data()),
                    static_cast<std::streamsize>(numel * sizeof(std::int64_t)));
            blob.ints.emplace_back(std::move(name), std::move(v));
        } else {
            throw std::runtime_error(path + ": unknown block dtype");
        }
        if (!in) throw std::runtime_error(path + ": truncated container");
    }
    return blob;
}

void store_params(Blob& blob, const std::string& prefix,
                  const std::vector<nn::ParamRef>& refs) {
    for (const auto& ref : refs) blob.tensors.emplace_back(prefix + ref.name, *ref.value);
}

void load_params(const Blob& blob, const std::string& prefix,
                 const std::vector<nn::ParamRef>& refs) {
    for (const auto& ref : refs) {
        const Tensor& stored = blob.tensor(prefix + ref.name);
        if (!stored.same_shape(*ref.value))
            throw std::runtime_error("checkpoint shape mismatch for " + prefix + ref.name);
        *ref.value = stored;
    }
}

}  // namespace cola
