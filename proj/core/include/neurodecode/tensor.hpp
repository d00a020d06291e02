#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "neurodecode/rng.hpp"

namespace nd {

using Shape = std::vector<std::int64_t>;

struct TensorImpl;

// One recorded operation in the define-by-run graph. `backward` reads the
// output's grad and accumulates into the parents' grads.
struct Node {
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first accumulation
  std::shared_ptr<Node> node;
};

// Dense row-major float64 tensor with reverse-mode autodiff.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, double fill, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(impl_->data.size()); }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }
  double& at(std::int64_t i) { return impl_->data[static_cast<std::size_t>(i)]; }
  double at(std::int64_t i) const { return impl_->data[static_cast<std::size_t>(i)]; }
  double& at2(std::int64_t r, std::int64_t c) {
    return impl_->data[static_cast<std::size_t>(r * impl_->shape[1] + c)];
  }
  double at2(std::int64_t r, std::int64_t c) const {
    return impl_->data[static_cast<std::size_t>(r * impl_->shape[1] + c)];
  }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }
  const std::vector<double>& grad() const;
  bool has_grad() const { return !impl_->grad.empty(); }
  void zero_grad();

  // Reverse accumulation from a scalar. Throws ConfigError for non-scalar.
  void backward() const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Attach a node to `out` when any parent requires grad.
Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(TensorImpl&)> backward);

// Ensure grad buffer exists, sized like data.
std::vector<double>& ensure_grad(TensorImpl& t);

}  // namespace nd
