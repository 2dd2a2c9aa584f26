#pragma once

#include <string>
#include <vector>

#include "seqac/graph.hpp"

namespace seqac {

struct GradcheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor),
  /// so entries whose true gradient is ~0 are judged on absolute error.
  double floor = 1e-6;
  /// Checks at most this many entries per leaf, evenly strided (0 = all).
  std::size_t max_entries_per_leaf = 0;
  /// Weights of the scalar objective sum(seed * output). Empty: fixed
  /// pseudo-random weights in [-1, 1], so normalized outputs are not trivial.
  Tensor seed;
};

struct LeafCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<LeafCheck> leaves;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;

  std::string summary() const;
};

/// Compares backward() against central differences on every trainable leaf
/// of `graph`. Leaf values are restored afterwards.
GradcheckReport gradcheck(Graph& graph, Var output, const GradcheckOptions& options = {});

}  // namespace seqac
