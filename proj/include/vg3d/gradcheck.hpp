#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vg3d/common.hpp"
#include "vg3d/params.hpp"
#include "vg3d/tensor.hpp"

namespace vg3d {

// Compares analytic reverse-mode gradients against central finite differences
// on `sample` randomly chosen parameter coordinates. loss_builder must rebuild
// the loss graph from the current parameter values on every call and be
// deterministic. Returns the max relative error with denominator
// max(|analytic|, |numeric|, 1e-8).
template <class Real>
double finite_diff_check(const std::function<TensorT<Real>()>& loss_builder,
                         ParamStoreT<Real>& params, double step, int sample,
                         std::uint64_t seed = 0) {
  if (step <= 0) throw std::runtime_error("finite_diff_check: step must be positive");
  // Determinism probe: two evaluations at the same point must agree exactly.
  double l0 = static_cast<double>(loss_builder().scalar_value());
  double l1 = static_cast<double>(loss_builder().scalar_value());
  if (l0 != l1) throw std::runtime_error("finite_diff_check: loss_fn is not deterministic");

  params.zero_grad();
  TensorT<Real> loss = loss_builder();
  backward(loss);

  // Flatten coordinate index space over all parameters.
  struct Coord {
    std::string name;
    std::int64_t offset;
  };
  std::vector<std::pair<std::string, std::int64_t>> extents;
  std::int64_t total = 0;
  for (const auto& name : params.names()) {
    extents.emplace_back(name, params.at(name).numel());
    total += params.at(name).numel();
  }
  if (total == 0) throw std::runtime_error("finite_diff_check: no parameters");

  Rng rng(mix_seed(seed, 0x9d2c5680u));
  double max_rel = 0.0;
  for (int s = 0; s < sample; ++s) {
    std::int64_t flat = rng.uniform_int(total);
    std::string name;
    std::int64_t off = flat;
    for (const auto& [n, cnt] : extents) {
      if (off < cnt) {
        name = n;
        break;
      }
      off -= cnt;
    }
    auto& t = params.at(name);
    Real saved = t.leaf_values()[static_cast<std::size_t>(off)];
    t.leaf_values()[static_cast<std::size_t>(off)] = saved + static_cast<Real>(step);
    double lp = static_cast<double>(loss_builder().scalar_value());
    t.leaf_values()[static_cast<std::size_t>(off)] = saved - static_cast<Real>(step);
    double lm = static_cast<double>(loss_builder().scalar_value());
    t.leaf_values()[static_cast<std::size_t>(off)] = saved;
    double numeric = (lp - lm) / (2.0 * step);
    double analytic = static_cast<double>(t.grad()[static_cast<std::size_t>(off)]);
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
  }
  return max_rel;
}

}  // namespace vg3d
