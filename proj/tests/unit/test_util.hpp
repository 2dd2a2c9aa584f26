#pragma once

#include <cmath>
#include <vector>

#include "seqac/params.hpp"
#include "seqac/rng.hpp"
#include "seqac/tensor.hpp"

namespace seqac::test {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(shape);
  for (double& x : t.values()) x = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline void fill_all(ParamSet& params, double value) {
  for (auto& [name, t] : params) t.fill(value);
}

}  // namespace seqac::test
