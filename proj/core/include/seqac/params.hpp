#pragma once

#include <map>
#include <string>
#include <vector>

#include "seqac/rng.hpp"
#include "seqac/tensor.hpp"

namespace seqac {

/// Ordered collection of named tensors. Used for model weights, their
/// gradients, and optimizer moments; iteration order is by name, which keeps
/// every reduction over parameters in a fixed order.
class NamedTensors {
 public:
  using Map = std::map<std::string, Tensor>;

  Tensor& add(const std::string& name, Shape shape);
  Tensor& set(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  void erase(const std::string& name) { tensors_.erase(name); }

  std::size_t count() const noexcept { return tensors_.size(); }
  std::size_t num_values() const noexcept;
  bool empty() const noexcept { return tensors_.empty(); }

  Map::iterator begin() { return tensors_.begin(); }
  Map::iterator end() { return tensors_.end(); }
  Map::const_iterator begin() const { return tensors_.begin(); }
  Map::const_iterator end() const { return tensors_.end(); }

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);

  /// Tensors of the same names and shapes, all zero.
  NamedTensors zeros_like() const;

  bool operator==(const NamedTensors& other) const = default;

 private:
  Map tensors_;
};

using ParamSet = NamedTensors;
using Gradients = NamedTensors;

/// Centered uniform initialization: every entry drawn from [-width/2, width/2).
void init_uniform(ParamSet& params, double width, Rng& rng);

/// Throws ShapeError unless both sets have the same names and shapes.
void require_same_layout(const NamedTensors& a, const NamedTensors& b, const char* what);

/// target = gamma * source + (1 - gamma) * target, element-wise.
void shadow_update(ParamSet& target, const ParamSet& source, double gamma);

/// into += scale * g. Names missing from `into` are created.
void accumulate(Gradients& into, const Gradients& g, double scale = 1.0);
void scale_all(Gradients& g, double factor);
double global_norm(const Gradients& g);
/// Rescales g so its global L2 norm is at most max_norm (no-op when max_norm <= 0).
/// Returns the norm before clipping.
double clip_global_norm(Gradients& g, double max_norm);
/// Euclidean distance over all entries; layouts must match.
double distance(const NamedTensors& a, const NamedTensors& b);
bool all_finite(const NamedTensors& g);

}  // namespace seqac
