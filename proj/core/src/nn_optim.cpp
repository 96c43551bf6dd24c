#include "cola/nn/optim.hpp"

#include <cmath>

#include "cola/common.hpp"

namespace cola::nn {

scalar scheduled_lr(scalar base, scalar decay, int interval, int epoch) {
    if (interval <= 0) return base;
    if (epoch < 0) throw ConfigError("scheduled_lr: negative epoch");
    return base * std::pow(decay, static_cast<scalar>(epoch / interval));
}

Optimizer::Optimizer(std::vector<ParamRef> params, const OptimConfig& cfg)
    : params_(std::move(params)), cfg_(cfg), lr_(cfg.lr) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i].value || !params_[i].grad)
            throw ConfigError("optimizer param has no storage: " + params_[i].name);
        m_[i].assign(params_[i].value->size(), 0.0);
        if (cfg_.kind == OptimConfig::Kind::adam) v_[i].assign(params_[i].value->size(), 0.0);
    }
}

void Optimizer::set_epoch(int epoch) {
    lr_ = scheduled_lr(cfg_.lr, cfg_.decay, cfg_.decay_interval, epoch);
}

void Optimizer::zero_grad() {
    for (auto& p : params_) p.grad->fill(0.0);
}

void Optimizer::step() {
    ++step_count_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        scalar* p = params_[i].value->data();
        const scalar* g = params_[i].grad->data();
        const std::size_t n = params_[i].value->size();
        if (cfg_.kind == OptimConfig::Kind::sgd) {
            for (std::size_t j = 0; j < n; ++j) {
                scalar gj = g[j] + cfg_.weight_decay * p[j];
                m_[i][j] = cfg_.momentum * m_[i][j] + gj;
                p[j] -= lr_ * m_[i][j];
            }
        } else {
            const scalar bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<scalar>(step_count_));
            const scalar bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<scalar>(step_count_));
            for (std::size_t j = 0; j < n; ++j) {
                scalar gj = g[j] + cfg_.weight_decay * p[j];
                m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * gj;
                v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * gj * gj;
                p[j] -= lr_ * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + cfg_.eps);
            }
        }
    }
}

RowAdam::RowAdam(int rows, int dim, const OptimConfig& cfg)
    : dim_(dim), cfg_(cfg), lr_(cfg.lr), step_counts_(rows, 0), m_({rows, dim}), v_({rows, dim}) {
    if (rows <= 0 || dim <= 0) throw ConfigError("RowAdam: empty table");
    m_.fill(0.0);
    v_.fill(0.0);
}

void RowAdam::set_epoch(int epoch) {
    lr_ = scheduled_lr(cfg_.lr, cfg_.decay, cfg_.decay_interval, epoch);
}

void RowAdam::step_rows(Tensor& table, const Tensor& grad_rows, const std::vector<int>& rows) {
    if (table.dim(1) != dim_ || grad_rows.dim(1) != dim_)
        throw ConfigError("RowAdam: dim mismatch");
    if (grad_rows.dim(0) != static_cast<int>(rows.size()))
        throw ConfigError("RowAdam: grad rows do not match row list");
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const int r = rows[k];
        if (r < 0 || r >= table.dim(0)) throw ConfigError("RowAdam: row out of range");
        const long t = ++step_counts_[r];
        const scalar bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<scalar>(t));
        const scalar bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<scalar>(t));
        for (int j = 0; j < dim_; ++j) {
            scalar g = grad_rows.at2(static_cast<int>(k), j);
            m_.at2(r, j) = cfg_.beta1 * m_.at2(r, j) + (1.0 - cfg_.beta1) * g;
            v_.at2(r, j) = cfg_.beta2 * v_.at2(r, j) + (1.0 - cfg_.beta2) * g * g;
            table.at2(r, j) -= lr_ * (m_.at2(r, j) / bc1) / (std::sqrt(v_.at2(r, j) / bc2) + cfg_.eps);
        }
    }
}

}  // namespace cola::nn
