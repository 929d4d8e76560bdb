#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vg3d/common.hpp"
#include "vg3d/tensor.hpp"

namespace vg3d {

// Named parameter leaves plus a step counter. Every entry keeps a gradient
// buffer of the same shape as its value at all times.
template <class Real>
class ParamStoreT {
 public:
  TensorT<Real>& create(const std::string& name, Shape shape, std::vector<Real> data) {
    if (entries_.count(name)) throw std::runtime_error("ParamStore: duplicate name " + name);
    TensorT<Real> t = TensorT<Real>::from_data(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    order_.push_back(name);
    auto [it, ok] = entries_.emplace(name, std::move(t));
    (void)ok;
    return it->second;
  }

  TensorT<Real>& create_normal(const std::string& name, Shape shape, Real stddev, Rng& rng) {
    std::vector<Real> data(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : data) v = static_cast<Real>(rng.normal()) * stddev;
    return create(name, std::move(shape), std::move(data));
  }

  TensorT<Real>& create_full(const std::string& name, Shape shape, Real fill) {
    std::vector<Real> data(static_cast<std::size_t>(shape_numel(shape)), fill);
    return create(name, std::move(shape), std::move(data));
  }

  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  TensorT<Real>& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::runtime_error("ParamStore: unknown name " + name);
    return it->second;
  }

  const TensorT<Real>& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::runtime_error("ParamStore: unknown name " + name);
    return it->second;
  }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  std::int64_t total_scalars() const {
    std::int64_t n = 0;
    for (const auto& name : order_) n += entries_.at(name).numel();
    return n;
  }

  void zero_grad() {
    for (const auto& name : order_) {
      auto& g = entries_.at(name).mutable_grad();
      std::fill(g.begin(), g.end(), Real(0));
    }
  }

  std::int64_t step = 0;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, TensorT<Real>> entries_;
};

using ParamStore = ParamStoreT<double>;

}  // namespace vg3d
