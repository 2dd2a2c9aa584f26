#include "seqac/adam.hpp"

#include <cmath>

namespace seqac {

AdamState::AdamState(const ParamSet& params, double alpha_)
    : m(params.zeros_like()), v(params.zeros_like()), alpha(alpha_) {}

void adam_step(ParamSet& params, const Gradients& grads, AdamState& state) {
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) {
      throw std::invalid_argument("adam_step: gradient for unknown parameter '" + name + "'");
    }
    require_same_shape(params.at(name).shape(), g.shape(), ("adam_step '" + name + "'").c_str());
    if (!g.all_finite()) {
      throw NumericError("adam_step: non-finite gradient for '" + name + "'; step aborted");
    }
  }
  if (state.m.empty() && !params.empty()) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  }
  require_same_layout(params, state.m, "adam_step moments");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);

  for (auto& [name, p] : params) {
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    const Tensor* g = grads.contains(name) ? &grads.at(name) : nullptr;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= state.alpha * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace seqac
