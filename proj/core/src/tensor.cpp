#include "cola/tensor.hpp"

#include <cmath>

namespace cola {

void Tensor::reshape(std::vector<int> shape) {
    if (numel_of(shape) != data_.size()) throw ConfigError("reshape changes element count");
    shape_ = std::move(shape);
}

bool Tensor::all_finite() const {
    for (scalar v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace cola
