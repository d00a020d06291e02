#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "neurodecode/tensor.hpp"

namespace nd {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::int64_t checked = 0;
};

// Central finite differences against the analytic gradient.
// f rebuilds the graph from the given leaves and returns a scalar loss.
// When max_coords_per_input > 0 only that many randomly chosen coordinates
// per input are perturbed (for large parameter sets).
inline GradCheckResult gradcheck(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> inputs, double h = 1e-5,
    std::int64_t max_coords_per_input = 0, std::uint64_t coord_seed = 0) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor loss = f(inputs);
  loss.backward();

  GradCheckResult res;
  Rng coord_rng(coord_seed, 0x9c0ffeeULL);
  for (auto& t : inputs) {
    std::vector<std::int64_t> coords;
    if (max_coords_per_input > 0 && t.size() > max_coords_per_input) {
      for (std::int64_t i = 0; i < max_coords_per_input; ++i)
        coords.push_back(static_cast<std::int64_t>(coord_rng.below(static_cast<std::uint64_t>(t.size()))));
    } else {
      for (std::int64_t i = 0; i < t.size(); ++i) coords.push_back(i);
    }
    for (std::int64_t i : coords) {
      double orig = t.at(i);
      t.at(i) = orig + h;
      double fp = f(inputs).item();
      t.at(i) = orig - h;
      double fm = f(inputs).item();
      t.at(i) = orig;
      double fd = (fp - fm) / (2.0 * h);
      double an = t.has_grad() ? t.grad()[static_cast<std::size_t>(i)] : 0.0;
      double denom = std::max({std::fabs(fd), std::fabs(an), 1.0});
      res.max_rel_err = std::max(res.max_rel_err, std::fabs(fd - an) / denom);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace nd
