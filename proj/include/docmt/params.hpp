#pragma once

#include <cmath>
#include <map>
#include <string>

#include "docmt/error.hpp"
#include "docmt/rng.hpp"
#include "docmt/tensor.hpp"

namespace docmt {

/// Named collection of trainable matrices. Iteration order is the sorted
/// name order, which keeps checkpoints and optimizer state deterministic.
template <typename S>
class ParamStore {
 public:
  using Map = std::map<std::string, Param<S>>;

  Param<S>& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    return add(name, MatrixOf<S>::Zero(rows, cols));
  }

  Param<S>& add(const std::string& name, MatrixOf<S> value) {
    auto [it, inserted] = params_.emplace(name, Param<S>(std::move(value)));
    if (!inserted)
      throw ValidationError("parameter '" + name + "' already exists");
    return it->second;
  }

  Param<S>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end())
      throw ValidationError("unknown parameter '" + name + "'");
    return it->second;
  }

  const Param<S>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end())
      throw ValidationError("unknown parameter '" + name + "'");
    return it->second;
  }

  bool has(const std::string& name) const { return params_.count(name) > 0; }

  void zero_grads() {
    for (auto& [name, p] : params_) p.grad.setZero();
  }

  size_t count() const { return params_.size(); }

  long total_elements() const {
    long n = 0;
    for (const auto& [name, p] : params_) n += static_cast<long>(p.value.size());
    return n;
  }

  Map& entries() { return params_; }
  const Map& entries() const { return params_; }

 private:
  Map params_;
};

/// Fills a matrix with Xavier/Glorot uniform values; gain scales the bound.
template <typename S>
void xavier_fill(MatrixOf<S>& m, Rng& rng, double gain = 1.0) {
  double bound = gain * std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = static_cast<S>(rng.uniform(-bound, bound));
}

}  // namespace docmt
