#pragma once

#include <vector>

#include "neurodecode/errors.hpp"
#include "neurodecode/tensor.hpp"

namespace nd {

// Bias-corrected adaptive moment estimation over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (lr <= 0.0) throw ConfigError("adam: learning rate must be positive");
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].data().size(), 0.0);
      v_[i].assign(params_[i].data().size(), 0.0);
    }
  }

  void step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, double(t_));
    double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i];
      if (!p.has_grad()) continue;  // parameter untouched this step
      const auto& g = p.grad();
      for (std::size_t j = 0; j < g.size(); ++j) {
        m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
        v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
        double mhat = m_[i][j] / bc1;
        double vhat = v_[i][j] / bc2;
        p.data()[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }

 private:
  std::vector<Tensor> params_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace nd
