#include "seqac/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seqac/rng.hpp"

namespace seqac {

namespace {

double weighted_total(const Tensor& out, const Tensor& seed) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += seed[i] * out[i];
  return s;
}

}  // namespace

std::string GradcheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error
     << " tolerance=" << tolerance << "\n";
  for (const LeafCheck& leaf : leaves) {
    os << "  " << (leaf.passed ? "ok  " : "BAD ") << leaf.name << " checked=" << leaf.checked
       << " max_rel=" << leaf.max_rel_error << " max_abs=" << leaf.max_abs_error;
    if (!leaf.passed) {
      os << " at[" << leaf.worst_index << "] analytic=" << leaf.analytic_at_worst
         << " numeric=" << leaf.numeric_at_worst;
    }
    os << "\n";
  }
  return os.str();
}

GradcheckReport gradcheck(Graph& graph, Var output, const GradcheckOptions& options) {
  graph.forward(output);
  Tensor seed = options.seed;
  const Shape& out_shape = graph.value(output).shape();
  if (seed.empty()) {
    Rng rng(0x6772616463686bULL);
    seed = Tensor(out_shape);
    for (double& x : seed.values()) x = rng.uniform(-1.0, 1.0);
  }
  require_same_shape(out_shape, seed.shape(), "gradcheck seed");

  const Gradients analytic = graph.backward(output, seed);

  GradcheckReport report;
  report.tolerance = options.tolerance;
  const double h = options.step;

  for (const auto& [name, storage] : graph.trainable_leaves()) {
    LeafCheck leaf;
    leaf.name = name;
    const Tensor& grad = analytic.at(name);
    const std::size_t n = storage->size();
    const std::size_t stride =
        options.max_entries_per_leaf == 0 || n <= options.max_entries_per_leaf
            ? 1
            : (n + options.max_entries_per_leaf - 1) / options.max_entries_per_leaf;
    for (std::size_t i = 0; i < n; i += stride) {
      double& x = (*storage)[i];
      const double saved = x;
      x = saved + h;
      const double up = weighted_total(graph.forward(output), seed);
      x = saved - h;
      const double down = weighted_total(graph.forward(output), seed);
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = grad[i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), options.floor});
      ++leaf.checked;
      leaf.max_abs_error = std::max(leaf.max_abs_error, abs_err);
      if (leaf.checked == 1 || rel > leaf.max_rel_error) {
        leaf.max_rel_error = rel;
        leaf.worst_index = i;
        leaf.analytic_at_worst = a;
        leaf.numeric_at_worst = numeric;
      }
    }
    leaf.passed = leaf.max_rel_error <= options.tolerance;
    report.max_rel_error = std::max(report.max_rel_error, leaf.max_rel_error);
    report.passed = report.passed && leaf.passed;
    report.leaves.push_back(std::move(leaf));
  }
  graph.forward(output);
  return report;
}

}  // namespace seqac
