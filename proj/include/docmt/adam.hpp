#pragma once

#include <cmath>
#include <map>
#include <string>

#include "docmt/params.hpp"
#include "docmt/tensor.hpp"

namespace docmt {

struct AdamOptions {
  double lr = 0.0001;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;

  void validate() const {
    if (lr <= 0.0) throw ConfigError("adam: lr must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw ConfigError("adam: betas must lie in [0, 1)");
  }
};

/// Adam with bias correction. Moment buffers are keyed by parameter name and
/// created lazily, so a store can grow between construction and first step.
template <typename S>
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) { opts_.validate(); }

  const AdamOptions& options() const { return opts_; }
  long steps() const { return step_; }

  /// Applies one update from the gradients currently held in the store.
  /// Gradients are left untouched; callers zero them per batch.
  void step(ParamStore<S>& store) {
    step_ += 1;
    S b1 = static_cast<S>(opts_.beta1);
    S b2 = static_cast<S>(opts_.beta2);
    S correct1 = S(1) - static_cast<S>(std::pow(opts_.beta1, step_));
    S correct2 = S(1) - static_cast<S>(std::pow(opts_.beta2, step_));
    S lr = static_cast<S>(opts_.lr);
    S eps = static_cast<S>(opts_.eps);
    for (auto& [name, p] : store.entries()) {
      Moments& m = moments_[name];
      if (m.m.size() == 0) {
        m.m = MatrixOf<S>::Zero(p.value.rows(), p.value.cols());
        m.v = MatrixOf<S>::Zero(p.value.rows(), p.value.cols());
      }
      m.m = b1 * m.m + (S(1) - b1) * p.grad;
      m.v.array() = b2 * m.v.array() + (S(1) - b2) * p.grad.array().square();
      p.value.array() -=
          lr * (m.m.array() / correct1) /
          ((m.v.array() / correct2).sqrt() + eps);
    }
  }

 private:
  struct Moments {
    MatrixOf<S> m;
    MatrixOf<S> v;
  };

  AdamOptions opts_;
  long step_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace docmt
