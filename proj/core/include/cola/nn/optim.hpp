#pragma once

#include <vector>

#include "cola/nn/layers.hpp"

namespace cola::nn {

struct OptimConfig {
    enum class Kind { sgd, adam };
    Kind kind = Kind::sgd;
    scalar lr = 0.1;
    scalar momentum = 0.9;
    scalar weight_decay = 0.0;
    scalar beta1 = 0.9;
    scalar beta2 = 0.999;
    scalar eps = 1e-8;
    scalar decay = 1.0;      // multiplicative lr decay factor
    int decay_interval = 0;  // epochs between decays; 0 disables the schedule
};

// lr * decay^floor(epoch / interval), epochs 0-based.
scalar scheduled_lr(scalar base, scalar decay, int interval, int epoch);

// Dense optimizer over a fixed parameter list. step() consumes the
// accumulated gradients; call zero_grad() before each new accumulation.
class Optimizer {
  public:
    Optimizer(std::vector<ParamRef> params, const OptimConfig& cfg);
    void set_epoch(int epoch);
    scalar current_lr() const { return lr_; }
    void zero_grad();
    void step();

  private:
    std::vector<ParamRef> params_;
    OptimConfig cfg_;
    scalar lr_;
    long step_count_ = 0;
    std::vector<std::vector<scalar>> m_, v_;  // SGD keeps velocity in m_
};

// Adam over the rows of an (N, D) table where each step touches a subset of
// rows. Untouched rows keep value, moments, and step count bit-identical.
class RowAdam {
  public:
    RowAdam(int rows, int dim, const OptimConfig& cfg);
    void set_epoch(int epoch);
    scalar current_lr() const { return lr_; }
    // grad_rows: (|rows|, D) aligned with `rows` (row indices into the table).
    void step_rows(Tensor& table, const Tensor& grad_rows, const std::vector<int>& rows);

  private:
    int dim_;
    OptimConfig cfg_;
    scalar lr_;
    std::vector<long> step_counts_;
    Tensor m_, v_;
};

}  // namespace cola::nn
