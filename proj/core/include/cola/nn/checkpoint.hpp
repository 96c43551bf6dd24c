#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cola/nn/layers.hpp"
#include "cola/tensor.hpp"

namespace cola {

// Binary container for model state and run artifacts. Layout (little-endian):
//   8 bytes   magic "COLACKP1"
//   u32       format version (1)
//   u64       meta length, then that many bytes of JSON
//   u32       block count
//   per block:
//     u32     name length, then the name bytes
//     u8      dtype: 0 = f64, 1 = i64
//     u32     rank
//     u64[r]  dims
//     raw     payload, row-major
struct Blob {
    std::string meta_json = "{}";
    std::vector<std::pair<std::string, Tensor>> tensors;
    std::vector<std::pair<std::string, std::vector<std::int64_t>>> ints;

    bool has_tensor(const std::string& name) const;
    const Tensor& tensor(const std::string& name) const;
    bool has_ints(const std::string& name) const;
    const std::vector<std::int64_t>& int_block(const std::string& name) const;
};

void save_blob(const std::string& path, const Blob& blob);
Blob load_blob(const std::string& path);

// Copies parameter/buffer tensors into a blob under `prefix` + ref name.
void store_params(Blob& blob, const std::string& prefix, const std::vector<nn::ParamRef>& refs);

// Restores tensors from the blob into the referenced storage; every ref must
// be present with a matching shape.
void load_params(const Blob& blob, const std::string& prefix,
                 const std::vector<nn::ParamRef>& refs);

}  // namespace cola
