#pragma once

#include <cstdint>

#include "seqac/params.hpp"

namespace seqac {

/// Adam moments for one parameter set. The scale `alpha` is mutable so a
/// schedule can anneal it between steps.
struct AdamState {
  AdamState() = default;
  explicit AdamState(const ParamSet& params, double alpha = 1e-3);

  NamedTensors m;
  NamedTensors v;
  std::uint64_t step = 0;
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamState& other) const = default;
};

/// One Adam update. Gradients missing from `grads` count as zero. Throws
/// NumericError (leaving params and state untouched) if any gradient is
/// non-finite.
void adam_step(ParamSet& params, const Gradients& grads, AdamState& state);

/// Two-level step size: `initial` until anneal() is called, `annealed` after.
class StepSchedule {
 public:
  StepSchedule(double initial, double annealed) : initial_(initial), annealed_(annealed) {}
  double current() const noexcept { return annealed_now_ ? annealed_ : initial_; }
  bool annealed() const noexcept { return annealed_now_; }
  void anneal() noexcept { annealed_now_ = true; }
  void apply(AdamState& state) const noexcept { state.alpha = current(); }

 private:
  double initial_;
  double annealed_;
  bool annealed_now_ = false;
};

}  // namespace seqac
