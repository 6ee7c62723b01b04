#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "docmt/rng.hpp"
#include "docmt/tensor.hpp"
#include "doctest.h"

namespace testutil {

using DMat = docmt::MatrixOf<double>;

inline DMat random_matrix(docmt::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  DMat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
  return m;
}

// values bounded away from zero, for ops with a kink at the origin
inline DMat random_matrix_off_zero(docmt::Rng& rng, Eigen::Index rows,
                                   Eigen::Index cols) {
  DMat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = (rng.coin() ? 1.0 : -1.0) * rng.uniform(0.05, 1.0);
  return m;
}

using BuildFn = std::function<docmt::Tensor(docmt::Tape<double>&)>;

inline double eval_loss(const BuildFn& build) {
  docmt::Tape<double> tape;
  docmt::Tensor loss = build(tape);
  return tape.value(loss)(0, 0);
}

// Central differences at h = 1e-5 against the analytic gradient; a check
// passes when |analytic - numeric| < 1e-4 * max(|analytic|, |numeric|) + 1e-7.
inline void check_gradients(const std::vector<docmt::Param<double>*>& params,
                            const BuildFn& build) {
  for (docmt::Param<double>* p : params) p->grad.setZero();
  {
    docmt::Tape<double> tape;
    docmt::Tensor loss = build(tape);
    tape.backward(loss);
  }
  const double h = 1e-5;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    docmt::Param<double>* p = params[pi];
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        double orig = p->value(r, c);
        p->value(r, c) = orig + h;
        double f_plus = eval_loss(build);
        p->value(r, c) = orig - h;
        double f_minus = eval_loss(build);
        p->value(r, c) = orig;
        double numeric = (f_plus - f_minus) / (2.0 * h);
        double analytic = p->grad(r, c);
        double tolerance =
            1e-4 * std::max(std::abs(analytic), std::abs(numeric)) + 1e-7;
        CAPTURE(pi);
        CAPTURE(r);
        CAPTURE(c);
        CAPTURE(analytic);
        CAPTURE(numeric);
        CHECK(std::abs(analytic - numeric) < tolerance);
      }
  }
}

// reduce a matrix-valued op to a scalar through a fixed random probe so the
// finite-difference signal reaches every output entry with distinct weights
inline docmt::Tensor probe_loss(docmt::Tape<double>& tape, docmt::Tensor out,
                                const DMat& probe) {
  return docmt::sum_all(tape, docmt::const_mul(tape, out, probe));
}

}  // namespace testutil
