#include "seqac/params.hpp"

#include <cmath>

namespace seqac {

Tensor& NamedTensors::add(const std::string& name, Shape shape) {
  auto [it, inserted] = tensors_.try_emplace(name, Tensor(std::move(shape)));
  if (!inserted) throw std::invalid_argument("NamedTensors: duplicate name '" + name + "'");
  return it->second;
}

Tensor& NamedTensors::set(const std::string& name, Tensor value) {
  return tensors_[name] = std::move(value);
}

Tensor& NamedTensors::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("NamedTensors: no tensor '" + name + "'");
  return it->second;
}

const Tensor& NamedTensors::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("NamedTensors: no tensor '" + name + "'");
  return it->second;
}

std::size_t NamedTensors::num_values() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

std::vector<double> NamedTensors::flatten() const {
  std::vector<double> out;
  out.reserve(num_values());
  for (const auto& [name, t] : tensors_) out.insert(out.end(), t.storage().begin(), t.storage().end());
  return out;
}

void NamedTensors::unflatten(std::span<const double> values) {
  if (values.size() != num_values()) {
    throw ShapeError("unflatten: got " + std::to_string(values.size()) + " values for " +
                     std::to_string(num_values()) + " parameters");
  }
  std::size_t offset = 0;
  for (auto& [name, t] : tensors_) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.data());
    offset += t.size();
  }
}

NamedTensors NamedTensors::zeros_like() const {
  NamedTensors out;
  for (const auto& [name, t] : tensors_) out.add(name, t.shape());
  return out;
}

void init_uniform(ParamSet& params, double width, Rng& rng) {
  for (auto& [name, t] : params) {
    for (double& x : t.values()) x = rng.uniform(-0.5 * width, 0.5 * width);
  }
}

void require_same_layout(const NamedTensors& a, const NamedTensors& b, const char* what) {
  if (a.count() != b.count()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a.count()) + " tensors vs " +
                     std::to_string(b.count()));
  }
  auto ib = b.begin();
  for (auto ia = a.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) {
      throw ShapeError(std::string(what) + ": name mismatch '" + ia->first + "' vs '" +
                       ib->first + "'");
    }
    require_same_shape(ia->second.shape(), ib->second.shape(),
                       (std::string(what) + " '" + ia->first + "'").c_str());
  }
}

void shadow_update(ParamSet& target, const ParamSet& source, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("shadow_update: gamma must lie in [0, 1], got " +
                                std::to_string(gamma));
  }
  require_same_layout(target, source, "shadow_update");
  auto is = source.begin();
  for (auto it = target.begin(); it != target.end(); ++it, ++is) {
    double* dst = it->second.data();
    const double* src = is->second.data();
    const std::size_t n = it->second.size();
    if (gamma == 1.0) {
      std::copy_n(src, n, dst);
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) dst[i] = gamma * src[i] + (1.0 - gamma) * dst[i];
  }
}

void accumulate(Gradients& into, const Gradients& g, double scale) {
  for (const auto& [name, t] : g) {
    if (!into.contains(name)) into.add(name, t.shape());
    Tensor& dst = into.at(name);
    require_same_shape(dst.shape(), t.shape(), "accumulate");
    for (std::size_t i = 0; i < t.size(); ++i) dst[i] += scale * t[i];
  }
}

void scale_all(Gradients& g, double factor) {
  for (auto& [name, t] : g) {
    for (double& x : t.values()) x *= factor;
  }
}

double global_norm(const Gradients& g) {
  double sq = 0.0;
  for (const auto& [name, t] : g) {
    for (double x : t.values()) sq += x * x;
  }
  return std::sqrt(sq);
}

double clip_global_norm(Gradients& g, double max_norm) {
  const double norm = global_norm(g);
  if (max_norm > 0.0 && norm > max_norm) scale_all(g, max_norm / norm);
  return norm;
}

double distance(const NamedTensors& a, const NamedTensors& b) {
  require_same_layout(a, b, "distance");
  double sq = 0.0;
  auto ib = b.begin();
  for (auto ia = a.begin(); ia != a.end(); ++ia, ++ib) {
    for (std::size_t i = 0; i < ia->second.size(); ++i) {
      const double d = ia->second[i] - ib->second[i];
      sq += d * d;
    }
  }
  return std::sqrt(sq);
}

bool all_finite(const NamedTensors& g) {
  for (const auto& [name, t] : g) {
    if (!t.all_finite()) return false;
  }
  return true;
}

}  // namespace seqac
