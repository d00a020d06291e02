#include "neurodecode/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "neurodecode/errors.hpp"

namespace nd {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  impl_->shape = std::move(shape);
  for (auto d : impl_->shape)
    if (d <= 0) throw ConfigError("tensor extent must be positive, got shape " + shape_str(impl_->shape));
  impl_->data.assign(static_cast<std::size_t>(shape_numel(impl_->shape)), fill);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  impl_->shape = std::move(shape);
  if (shape_numel(impl_->shape) != static_cast<std::int64_t>(data.size()))
    throw ConfigError("tensor data length " + std::to_string(data.size()) +
                      " does not match shape " + shape_str(impl_->shape));
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  Tensor t(std::move(shape), 0.0, requires_grad);
  for (auto& v : t.data()) v = stddev * rng.normal();
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ConfigError("item() on non-scalar tensor " + shape_str(shape()));
  return impl_->data[0];
}

const std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty())
    throw ConfigError("grad accessed before backward populated it");
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

std::vector<double>& ensure_grad(TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
  return t.grad;
}

void Tensor::backward() const {
  if (size() != 1) throw ConfigError("backward() requires a scalar loss, got " + shape_str(shape()));

  // Iterative post-order over the graph; each node visited exactly once even
  // with shared subexpressions.
  std::vector<TensorImpl*> topo;
  std::unordered_set<TensorImpl*> seen;
  struct Frame {
    TensorImpl* t;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  if (impl_->node) {
    stack.push_back({impl_.get(), 0});
    seen.insert(impl_.get());
  }
  while (!stack.empty()) {
    Frame& f = stack.back();
    Node& node = *f.t->node;
    if (f.next_parent < node.parents.size()) {
      TensorImpl* p = node.parents[f.next_parent++].get();
      if (p->node && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.t);
      stack.pop_back();
    }
  }

  ensure_grad(*impl_)[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorImpl* t = *it;
    if (t->grad.empty()) continue;  // no gradient flowed here
    t->node->backward(*t);
  }
}

Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
               std::function<void(TensorImpl&)> backward) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  Tensor out(std::move(shape), std::move(data), needs);
  if (needs) {
    auto node = std::make_shared<Node>();
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.impl());
    node->backward = std::move(backward);
    out.impl()->node = std::move(node);
  }
  return out;
}

}  // namespace nd
