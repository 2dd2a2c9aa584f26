#include "seqac/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seqac {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + to_string(t.shape()));
  }
}

std::size_t last_dim(const Tensor& t) { return t.rank() == 0 ? 1 : t.shape().back(); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kMatMul: return "matmul";
    case Op::kAffine: return "affine";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kSoftmax: return "softmax";
    case Op::kLogSoftmax: return "log_softmax";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kEmbed: return "embed";
    case Op::kStack: return "stack";
    case Op::kReshape: return "reshape";
    case Op::kAdditiveScores: return "additive_scores";
    case Op::kMaskedSoftmax: return "masked_softmax";
    case Op::kWeightedSum: return "weighted_sum";
    case Op::kSelectRows: return "select_rows";
    case Op::kPick: return "pick";
    case Op::kBlendRows: return "blend_rows";
    case Op::kCenter: return "center";
    case Op::kSum: return "sum";
    case Op::kUnary: return "unary";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Leaves and bookkeeping

const Tensor& Graph::val(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.param ? *n.param : n.value;
}

const Graph::Node& Graph::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw std::out_of_range("Graph: invalid Var");
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const {
  node(v);
  return val(v.id);
}

Var Graph::push(Node n) {
  for (std::uint32_t in : n.inputs) {
    if (in >= nodes_.size()) throw std::out_of_range("Graph: input refers to unknown node");
    n.needs_grad = n.needs_grad || nodes_[in].needs_grad;
  }
  if (n.op != Op::kConstant && n.op != Op::kInput && n.op != Op::kParam) compute(n);
  if (fresh_ == nodes_.size()) ++fresh_;
  nodes_.push_back(std::move(n));
  backward_done_ = false;
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::input(std::string name, Tensor value) {
  Node n;
  n.op = Op::kInput;
  n.name = std::move(name);
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::param_leaf(Tensor* storage, const std::string& name, bool trainable) {
  if (auto it = param_cache_.find(storage); it != param_cache_.end()) {
    const Node& cached = nodes_[it->second];
    if (cached.trainable != trainable) {
      throw std::logic_error("Graph: parameter '" + name +
                             "' bound both as trainable and frozen");
    }
    return Var{it->second};
  }
  if (trainable) {
    for (const Node& other : nodes_) {
      if (other.op == Op::kParam && other.trainable && other.name == name) {
        throw std::logic_error("Graph: two trainable parameters named '" + name + "'");
      }
    }
  }
  Node n;
  n.op = Op::kParam;
  n.name = name;
  n.param = storage;
  n.trainable = trainable;
  n.needs_grad = trainable;
  Var v = push(std::move(n));
  param_cache_.emplace(storage, v.id);
  return v;
}

Var Graph::param(ParamSet& params, const std::string& name) {
  return param_leaf(&params.at(name), name, true);
}

Var Graph::frozen(const ParamSet& params, const std::string& name) {
  return param_leaf(const_cast<Tensor*>(&params.at(name)), name, false);
}

void Graph::bind(Var leaf, Tensor value) {
  node(leaf);
  Node& n = nodes_[leaf.id];
  if (n.op != Op::kInput) throw std::logic_error("Graph::bind: node is not an input leaf");
  require_same_shape(n.value.shape(), value.shape(), ("bind '" + n.name + "'").c_str());
  n.value = std::move(value);
  fresh_ = std::min<std::size_t>(fresh_, leaf.id);
}

const Tensor& Graph::forward(Var output) {
  node(output);
  for (std::uint32_t i = 0; i <= output.id; ++i) {
    Node& n = nodes_[i];
    if (n.op != Op::kConstant && n.op != Op::kInput && n.op != Op::kParam) compute(n);
  }
  fresh_ = std::max<std::size_t>(fresh_, output.id + 1);
  return val(output.id);
}

Tensor& Graph::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(val(id).shape());
  return n.grad;
}

Gradients Graph::backward(Var output) {
  return backward(output, Tensor(value(output).shape(), 1.0));
}

Gradients Graph::backward(Var output, const Tensor& seed) {
  node(output);
  if (output.id >= fresh_) {
    throw std::logic_error("Graph::backward: output is stale; run forward() first");
  }
  require_same_shape(val(output.id).shape(), seed.shape(), "backward seed");
  for (Node& n : nodes_) n.grad = Tensor();
  if (nodes_[output.id].needs_grad) nodes_[output.id].grad = seed;
  for (std::uint32_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.op == Op::kConstant || n.op == Op::kInput || n.op == Op::kParam) continue;
    propagate(n);
  }
  backward_done_ = true;
  Gradients out;
  for (const Node& n : nodes_) {
    if (n.op != Op::kParam || !n.trainable) continue;
    out.set(n.name, n.grad.empty() ? Tensor(n.param->shape()) : n.grad);
  }
  return out;
}

const Tensor& Graph::grad(Var v) const {
  if (!backward_done_) throw std::logic_error("Graph::grad: backward() has not run");
  return node(v).grad;
}

std::vector<std::pair<std::string, Tensor*>> Graph::trainable_leaves() const {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (const Node& n : nodes_) {
    if (n.op == Op::kParam && n.trainable) out.emplace_back(n.name, n.param);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Op constructors. Shapes are validated in compute().

Graph::Node Graph::make(Op op, std::initializer_list<Var> inputs) {
  Node n;
  n.op = op;
  n.inputs.reserve(inputs.size());
  for (Var v : inputs) {
    if (!v.valid()) throw std::out_of_range(std::string(op_name(op)) + ": invalid input Var");
    n.inputs.push_back(v.id);
  }
  return n;
}

Var Graph::matmul(Var a, Var b) { return push(make(Op::kMatMul, {a, b})); }
Var Graph::affine(Var x, Var w, Var b) { return push(make(Op::kAffine, {x, w, b})); }
Var Graph::add(Var a, Var b) { return push(make(Op::kAdd, {a, b})); }
Var Graph::sub(Var a, Var b) { return push(make(Op::kSub, {a, b})); }
Var Graph::mul(Var a, Var b) { return push(make(Op::kMul, {a, b})); }

Var Graph::scale(Var a, double factor) {
  Node n = make(Op::kScale, {a});
  n.scalar = factor;
  return push(std::move(n));
}

Var Graph::sigmoid(Var a) { return push(make(Op::kSigmoid, {a})); }
Var Graph::tanh(Var a) { return push(make(Op::kTanh, {a})); }
Var Graph::softmax(Var a) { return push(make(Op::kSoftmax, {a})); }
Var Graph::log_softmax(Var a) { return push(make(Op::kLogSoftmax, {a})); }

Var Graph::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Node n;
  n.op = Op::kConcat;
  for (Var v : parts) {
    node(v);
    n.inputs.push_back(v.id);
  }
  return push(std::move(n));
}

Var Graph::slice(Var a, std::size_t begin, std::size_t end) {
  Node n = make(Op::kSlice, {a});
  n.index = {begin, end};
  return push(std::move(n));
}

Var Graph::embed(Var table, std::vector<int> ids) {
  Node n = make(Op::kEmbed, {table});
  n.ids = std::move(ids);
  return push(std::move(n));
}

Var Graph::stack(std::span<const Var> steps) {
  if (steps.empty()) throw ShapeError("stack: no inputs");
  Node n;
  n.op = Op::kStack;
  for (Var v : steps) {
    node(v);
    n.inputs.push_back(v.id);
  }
  return push(std::move(n));
}

Var Graph::reshape(Var a, Shape shape) {
  Node n = make(Op::kReshape, {a});
  n.target_shape = std::move(shape);
  return push(std::move(n));
}

Var Graph::additive_scores(Var keys, Var query, Var v) {
  return push(make(Op::kAdditiveScores, {keys, query, v}));
}

Var Graph::masked_softmax(Var scores, Tensor mask) {
  Node n = make(Op::kMaskedSoftmax, {scores});
  n.aux = std::move(mask);
  return push(std::move(n));
}

Var Graph::weighted_sum(Var weights, Var values) {
  return push(make(Op::kWeightedSum, {weights, values}));
}

Var Graph::select_rows(Var a, std::vector<std::size_t> rows) {
  Node n = make(Op::kSelectRows, {a});
  n.index = std::move(rows);
  return push(std::move(n));
}

Var Graph::pick(Var a, std::vector<int> cols) {
  Node n = make(Op::kPick, {a});
  n.ids = std::move(cols);
  return push(std::move(n));
}

Var Graph::blend_rows(Var a, Var b, std::vector<double> keep) {
  Node n = make(Op::kBlendRows, {a, b});
  n.weights = std::move(keep);
  return push(std::move(n));
}

Var Graph::center(Var a) { return push(make(Op::kCenter, {a})); }
Var Graph::sum(Var a) { return push(make(Op::kSum, {a})); }

Var Graph::unary(Var a, std::shared_ptr<const UnaryFunction> fn) {
  if (!fn || !fn->f || !fn->df) throw std::invalid_argument("unary: incomplete function");
  Node n = make(Op::kUnary, {a});
  n.fn = std::move(fn);
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Forward rules

void Graph::compute(Node& n) {
  const char* what = op_name(n.op);
  auto in = [&](std::size_t i) -> const Tensor& { return val(n.inputs[i]); };

  switch (n.op) {
    case Op::kConstant:
    case Op::kInput:
    case Op::kParam:
      return;

    case Op::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      require_rank(a, 2, what);
      require_rank(b, 2, what);
      if (a.dim(1) != b.dim(0)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) +
                         " x " + to_string(b.shape()));
      }
      n.value = Tensor({a.dim(0), b.dim(1)});
      MatMap(n.value.data(), a.dim(0), b.dim(1)).noalias() =
          ConstMatMap(a.data(), a.dim(0), a.dim(1)) * ConstMatMap(b.data(), b.dim(0), b.dim(1));
      break;
    }

    case Op::kAffine: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      const Tensor& b = in(2);
      require_rank(x, 2, what);
      require_rank(w, 2, what);
      if (x.dim(1) != w.dim(0) || b.size() != w.dim(1)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + to_string(x.shape()) +
                         " x " + to_string(w.shape()) + " + " + to_string(b.shape()));
      }
      const std::size_t rows = x.dim(0);
      const std::size_t cols = w.dim(1);
      n.value = Tensor({rows, cols});
      MatMap out(n.value.data(), rows, cols);
      out.noalias() = ConstMatMap(x.data(), rows, x.dim(1)) * ConstMatMap(w.data(), w.dim(0), cols);
      out.rowwise() += ConstVecMap(b.data(), cols);
      break;
    }

    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      require_same_shape(a.shape(), b.shape(), what);
      n.value = Tensor(a.shape());
      double* out = n.value.data();
      const double* pa = a.data();
      const double* pb = b.data();
      const std::size_t size = a.size();
      if (n.op == Op::kAdd) {
        for (std::size_t i = 0; i < size; ++i) out[i] = pa[i] + pb[i];
      } else if (n.op == Op::kSub) {
        for (std::size_t i = 0; i < size; ++i) out[i] = pa[i] - pb[i];
      } else {
        for (std::size_t i = 0; i < size; ++i) out[i] = pa[i] * pb[i];
      }
      break;
    }

    case Op::kScale: {
      const Tensor& a = in(0);
      n.value = Tensor(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = n.scalar * a[i];
      break;
    }

    case Op::kSigmoid: {
      const Tensor& a = in(0);
      n.value = Tensor(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = stable_sigmoid(a[i]);
      break;
    }

    case Op::kTanh: {
      const Tensor& a = in(0);
      n.value = Tensor(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = std::tanh(a[i]);
      break;
    }

    case Op::kSoftmax:
    case Op::kLogSoftmax: {
      const Tensor& a = in(0);
      if (a.rank() == 0 || a.empty()) throw ShapeError(std::string(what) + ": empty input");
      const std::size_t width = last_dim(a);
      const std::size_t rows = a.size() / width;
      n.value = Tensor(a.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.data() + r * width;
        double* y = n.value.data() + r * width;
        const double mx = *std::max_element(x, x + width);
        double total = 0.0;
        for (std::size_t j = 0; j < width; ++j) total += std::exp(x[j] - mx);
        if (n.op == Op::kSoftmax) {
          for (std::size_t j = 0; j < width; ++j) y[j] = std::exp(x[j] - mx) / total;
        } else {
          const double lse = mx + std::log(total);
          for (std::size_t j = 0; j < width; ++j) y[j] = x[j] - lse;
        }
      }
      break;
    }

    case Op::kConcat: {
      const Tensor& first = in(0);
      require_rank(first, 2, what);
      const std::size_t rows = first.dim(0);
      std::size_t total = 0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        const Tensor& p = in(i);
        require_rank(p, 2, what);
        if (p.dim(0) != rows) {
          throw ShapeError(std::string(what) + ": row mismatch " + to_string(first.shape()) +
                           " vs " + to_string(p.shape()));
        }
        total += p.dim(1);
      }
      n.value = Tensor({rows, total});
      std::size_t offset = 0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        const Tensor& p = in(i);
        const std::size_t w = p.dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy_n(p.data() + r * w, w, n.value.data() + r * total + offset);
        }
        offset += w;
      }
      break;
    }

    case Op::kSlice: {
      const Tensor& a = in(0);
      require_rank(a, 2, what);
      const std::size_t begin = n.index[0];
      const std::size_t end = n.index[1];
      if (begin >= end || end > a.dim(1)) {
        throw ShapeError(std::string(what) + ": columns [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of range for " + to_string(a.shape()));
      }
      const std::size_t rows = a.dim(0);
      const std::size_t w = end - begin;
      n.value = Tensor({rows, w});
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(a.data() + r * a.dim(1) + begin, w, n.value.data() + r * w);
      }
      break;
    }

    case Op::kEmbed: {
      const Tensor& table = in(0);
      require_rank(table, 2, what);
      const std::size_t vocab = table.dim(0);
      const std::size_t width = table.dim(1);
      n.value = Tensor({n.ids.size(), width});
      for (std::size_t r = 0; r < n.ids.size(); ++r) {
        const int id = n.ids[r];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
          throw std::out_of_range("embed: unknown token id " + std::to_string(id) +
                                  " (table has " + std::to_string(vocab) + " rows)");
        }
        std::copy_n(table.data() + static_cast<std::size_t>(id) * width, width,
                    n.value.data() + r * width);
      }
      break;
    }

    case Op::kStack: {
      const Tensor& first = in(0);
      require_rank(first, 2, what);
      const std::size_t batch = first.dim(0);
      const std::size_t width = first.dim(1);
      const std::size_t steps = n.inputs.size();
      n.value = Tensor({batch, steps, width});
      for (std::size_t j = 0; j < steps; ++j) {
        const Tensor& p = in(j);
        require_same_shape(first.shape(), p.shape(), what);
        for (std::size_t b = 0; b < batch; ++b) {
          std::copy_n(p.data() + b * width, width, n.value.data() + (b * steps + j) * width);
        }
      }
      break;
    }

    case Op::kReshape: {
      n.value = in(0).reshaped(n.target_shape);
      break;
    }

    case Op::kAdditiveScores: {
      const Tensor& keys = in(0);
      const Tensor& query = in(1);
      const Tensor& v = in(2);
      require_rank(keys, 3, what);
      require_rank(query, 2, what);
      const std::size_t batch = keys.dim(0);
      const std::size_t len = keys.dim(1);
      const std::size_t width = keys.dim(2);
      if (query.dim(0) != batch || query.dim(1) != width || v.size() != width) {
        throw ShapeError(std::string(what) + ": shape mismatch keys " + to_string(keys.shape()) +
                         ", query " + to_string(query.shape()) + ", v " + to_string(v.shape()));
      }
      n.value = Tensor({batch, len});
      n.aux = Tensor({batch, len, width});
      for (std::size_t b = 0; b < batch; ++b) {
        const double* q = query.data() + b * width;
        for (std::size_t j = 0; j < len; ++j) {
          const double* k = keys.data() + (b * len + j) * width;
          double* t = n.aux.data() + (b * len + j) * width;
          double s = 0.0;
          for (std::size_t a = 0; a < width; ++a) {
            t[a] = std::tanh(k[a] + q[a]);
            s += v[a] * t[a];
          }
          n.value.at(b, j) = s;
        }
      }
      break;
    }

    case Op::kMaskedSoftmax: {
      const Tensor& s = in(0);
      require_rank(s, 2, what);
      require_same_shape(s.shape(), n.aux.shape(), "masked_softmax mask");
      const std::size_t rows = s.dim(0);
      const std::size_t len = s.dim(1);
      n.value = Tensor(s.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < len; ++j) {
          if (n.aux.at(r, j) != 0.0) mx = std::max(mx, s.at(r, j));
        }
        if (mx == -INFINITY) {
          throw ShapeError(std::string(what) + ": row " + std::to_string(r) + " fully masked");
        }
        double total = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          if (n.aux.at(r, j) != 0.0) total += std::exp(s.at(r, j) - mx);
        }
        for (std::size_t j = 0; j < len; ++j) {
          n.value.at(r, j) = n.aux.at(r, j) != 0.0 ? std::exp(s.at(r, j) - mx) / total : 0.0;
        }
      }
      break;
    }

    case Op::kWeightedSum: {
      const Tensor& w = in(0);
      const Tensor& values = in(1);
      require_rank(w, 2, what);
      require_rank(values, 3, what);
      if (values.dim(0) != w.dim(0) || values.dim(1) != w.dim(1)) {
        throw ShapeError(std::string(what) + ": shape mismatch weights " + to_string(w.shape()) +
                         " vs values " + to_string(values.shape()));
      }
      const std::size_t batch = w.dim(0);
      const std::size_t len = w.dim(1);
      const std::size_t width = values.dim(2);
      n.value = Tensor({batch, width});
      for (std::size_t b = 0; b < batch; ++b) {
        double* out = n.value.data() + b * width;
        for (std::size_t j = 0; j < len; ++j) {
          const double a = w.at(b, j);
          const double* h = values.data() + (b * len + j) * width;
          for (std::size_t k = 0; k < width; ++k) out[k] += a * h[k];
        }
      }
      break;
    }

    case Op::kSelectRows: {
      const Tensor& a = in(0);
      if (a.rank() == 0) throw ShapeError(std::string(what) + ": scalar input");
      const std::size_t width = a.cols();
      Shape shape = a.shape();
      shape[0] = n.index.size();
      n.value = Tensor(shape);
      for (std::size_t r = 0; r < n.index.size(); ++r) {
        if (n.index[r] >= a.rows()) {
          throw ShapeError(std::string(what) + ": row " + std::to_string(n.index[r]) +
                           " out of range for " + to_string(a.shape()));
        }
        std::copy_n(a.data() + n.index[r] * width, width, n.value.data() + r * width);
      }
      break;
    }

    case Op::kPick: {
      const Tensor& a = in(0);
      require_rank(a, 2, what);
      if (n.ids.size() != a.dim(0)) {
        throw ShapeError(std::string(what) + ": " + std::to_string(n.ids.size()) +
                         " indices for shape " + to_string(a.shape()));
      }
      n.value = Tensor({a.dim(0), 1});
      for (std::size_t r = 0; r < n.ids.size(); ++r) {
        const int c = n.ids[r];
        if (c < 0 || static_cast<std::size_t>(c) >= a.dim(1)) {
          throw std::out_of_range(std::string(what) + ": column " + std::to_string(c) +
                                  " out of range for " + to_string(a.shape()));
        }
        n.value[r] = a.at(r, static_cast<std::size_t>(c));
      }
      break;
    }

    case Op::kBlendRows: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      require_same_shape(a.shape(), b.shape(), what);
      if (n.weights.size() != a.rows()) {
        throw ShapeError(std::string(what) + ": " + std::to_string(n.weights.size()) +
                         " row weights for shape " + to_string(a.shape()));
      }
      n.value = Tensor(a.shape());
      const std::size_t width = a.cols();
      for (std::size_t r = 0; r < a.rows(); ++r) {
        const double k = n.weights[r];
        for (std::size_t c = 0; c < width; ++c) {
          const std::size_t i = r * width + c;
          n.value[i] = k * a[i] + (1.0 - k) * b[i];
        }
      }
      break;
    }

    case Op::kCenter: {
      const Tensor& a = in(0);
      require_rank(a, 2, what);
      n.value = Tensor(a.shape());
      const std::size_t width = a.dim(1);
      for (std::size_t r = 0; r < a.dim(0); ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < width; ++c) mean += a.at(r, c);
        mean /= static_cast<double>(width);
        for (std::size_t c = 0; c < width; ++c) n.value.at(r, c) = a.at(r, c) - mean;
      }
      break;
    }

    case Op::kSum: {
      const Tensor& a = in(0);
      double s = 0.0;
      for (double x : a.values()) s += x;
      n.value = Tensor::scalar(s);
      break;
    }

    case Op::kUnary: {
      const Tensor& a = in(0);
      n.value = Tensor(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) n.value[i] = n.fn->f(a[i]);
      break;
    }
  }

  if (!n.value.all_finite()) {
    throw NumericError(std::string(what) + ": produced non-finite values (output shape " +
                       to_string(n.value.shape()) + ")");
  }
}

// ---------------------------------------------------------------------------
// Backward rules

void Graph::propagate(Node& n) {
  const Tensor& dy = n.grad;
  auto in = [&](std::size_t i) -> const Tensor& { return val(n.inputs[i]); };
  auto wants = [&](std::size_t i) { return nodes_[n.inputs[i]].needs_grad; };
  auto gin = [&](std::size_t i) -> Tensor& { return grad_buffer(n.inputs[i]); };

  switch (n.op) {
    case Op::kConstant:
    case Op::kInput:
    case Op::kParam:
      return;

    case Op::kMatMul:
    case Op::kAffine: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t rows = a.dim(0);
      const std::size_t inner = a.dim(1);
      const std::size_t cols = b.dim(1);
      ConstMatMap g(dy.data(), rows, cols);
      if (wants(0)) {
        MatMap(gin(0).data(), rows, inner).noalias() += g * ConstMatMap(b.data(), inner, cols).transpose();
      }
      if (wants(1)) {
        MatMap(gin(1).data(), inner, cols).noalias() += ConstMatMap(a.data(), rows, inner).transpose() * g;
      }
      if (n.op == Op::kAffine && wants(2)) {
        VecMap(gin(2).data(), cols) += g.colwise().sum();
      }
      break;
    }

    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      const std::size_t size = dy.size();
      if (wants(0)) {
        double* ga = gin(0).data();
        if (n.op == Op::kMul) {
          const double* pb = in(1).data();
          for (std::size_t i = 0; i < size; ++i) ga[i] += dy[i] * pb[i];
        } else {
          for (std::size_t i = 0; i < size; ++i) ga[i] += dy[i];
        }
      }
      if (wants(1)) {
        double* gb = gin(1).data();
        if (n.op == Op::kMul) {
          const double* pa = in(0).data();
          for (std::size_t i = 0; i < size; ++i) gb[i] += dy[i] * pa[i];
        } else if (n.op == Op::kSub) {
          for (std::size_t i = 0; i < size; ++i) gb[i] -= dy[i];
        } else {
          for (std::size_t i = 0; i < size; ++i) gb[i] += dy[i];
        }
      }
      break;
    }

    case Op::kScale: {
      Tensor& g = gin(0);
      for (std::size_t i = 0; i < dy.size(); ++i) g[i] += n.scalar * dy[i];
      break;
    }

    case Op::kSigmoid: {
      Tensor& g = gin(0);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        const double y = n.value[i];
        g[i] += dy[i] * y * (1.0 - y);
      }
      break;
    }

    case Op::kTanh: {
      Tensor& g = gin(0);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        const double y = n.value[i];
        g[i] += dy[i] * (1.0 - y * y);
      }
      break;
    }

    case Op::kSoftmax:
    case Op::kLogSoftmax: {
      Tensor& g = gin(0);
      const std::size_t width = last_dim(n.value);
      const std::size_t rows = n.value.size() / width;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = n.value.data() + r * width;
        const double* d = dy.data() + r * width;
        double* out = g.data() + r * width;
        if (n.op == Op::kSoftmax) {
          double dot = 0.0;
          for (std::size_t j = 0; j < width; ++j) dot += d[j] * y[j];
          for (std::size_t j = 0; j < width; ++j) out[j] += y[j] * (d[j] - dot);
        } else {
          double total = 0.0;
          for (std::size_t j = 0; j < width; ++j) total += d[j];
          for (std::size_t j = 0; j < width; ++j) out[j] += d[j] - std::exp(y[j]) * total;
        }
      }
      break;
    }

    case Op::kConcat: {
      const std::size_t rows = n.value.dim(0);
      const std::size_t total = n.value.dim(1);
      std::size_t offset = 0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        const std::size_t w = in(i).dim(1);
        if (wants(i)) {
          Tensor& g = gin(i);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < w; ++c) g[r * w + c] += dy[r * total + offset + c];
          }
        }
        offset += w;
      }
      break;
    }

    case Op::kSlice: {
      Tensor& g = gin(0);
      const std::size_t begin = n.index[0];
      const std::size_t w = n.index[1] - begin;
      const std::size_t full = g.dim(1);
      for (std::size_t r = 0; r < n.value.dim(0); ++r) {
        for (std::size_t c = 0; c < w; ++c) g[r * full + begin + c] += dy[r * w + c];
      }
      break;
    }

    case Op::kEmbed: {
      Tensor& g = gin(0);
      const std::size_t width = g.dim(1);
      for (std::size_t r = 0; r < n.ids.size(); ++r) {
        double* dst = g.data() + static_cast<std::size_t>(n.ids[r]) * width;
        for (std::size_t c = 0; c < width; ++c) dst[c] += dy[r * width + c];
      }
      break;
    }

    case Op::kStack: {
      const std::size_t batch = n.value.dim(0);
      const std::size_t steps = n.value.dim(1);
      const std::size_t width = n.value.dim(2);
      for (std::size_t j = 0; j < steps; ++j) {
        if (!wants(j)) continue;
        Tensor& g = gin(j);
        for (std::size_t b = 0; b < batch; ++b) {
          const double* src = dy.data() + (b * steps + j) * width;
          double* dst = g.data() + b * width;
          for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
        }
      }
      break;
    }

    case Op::kReshape: {
      Tensor& g = gin(0);
      for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
      break;
    }

    case Op::kAdditiveScores: {
      const Tensor& v = in(2);
      const std::size_t batch = n.aux.dim(0);
      const std::size_t len = n.aux.dim(1);
      const std::size_t width = n.aux.dim(2);
      Tensor* gk = wants(0) ? &gin(0) : nullptr;
      Tensor* gq = wants(1) ? &gin(1) : nullptr;
      Tensor* gv = wants(2) ? &gin(2) : nullptr;
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < len; ++j) {
          const double d = dy.at(b, j);
          if (d == 0.0) continue;
          const double* t = n.aux.data() + (b * len + j) * width;
          for (std::size_t a = 0; a < width; ++a) {
            const double pre = d * v[a] * (1.0 - t[a] * t[a]);
            if (gk) (*gk)[(b * len + j) * width + a] += pre;
            if (gq) (*gq)[b * width + a] += pre;
            if (gv) (*gv)[a] += d * t[a];
          }
        }
      }
      break;
    }

    case Op::kMaskedSoftmax: {
      Tensor& g = gin(0);
      const std::size_t rows = n.value.dim(0);
      const std::size_t len = n.value.dim(1);
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < len; ++j) dot += dy.at(r, j) * n.value.at(r, j);
        for (std::size_t j = 0; j < len; ++j) {
          g.at(r, j) += n.value.at(r, j) * (dy.at(r, j) - dot);
        }
      }
      break;
    }

    case Op::kWeightedSum: {
      const Tensor& w = in(0);
      const Tensor& values = in(1);
      const std::size_t batch = w.dim(0);
      const std::size_t len = w.dim(1);
      const std::size_t width = values.dim(2);
      Tensor* gw = wants(0) ? &gin(0) : nullptr;
      Tensor* gv = wants(1) ? &gin(1) : nullptr;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* d = dy.data() + b * width;
        for (std::size_t j = 0; j < len; ++j) {
          const double* h = values.data() + (b * len + j) * width;
          if (gw) {
            double s = 0.0;
            for (std::size_t k = 0; k < width; ++k) s += d[k] * h[k];
            gw->at(b, j) += s;
          }
          if (gv) {
            const double a = w.at(b, j);
            double* dst = gv->data() + (b * len + j) * width;
            for (std::size_t k = 0; k < width; ++k) dst[k] += a * d[k];
          }
        }
      }
      break;
    }

    case Op::kSelectRows: {
      Tensor& g = gin(0);
      const std::size_t width = g.cols();
      for (std::size_t r = 0; r < n.index.size(); ++r) {
        double* dst = g.data() + n.index[r] * width;
        const double* src = dy.data() + r * width;
        for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
      }
      break;
    }

    case Op::kPick: {
      Tensor& g = gin(0);
      for (std::size_t r = 0; r < n.ids.size(); ++r) {
        g.at(r, static_cast<std::size_t>(n.ids[r])) += dy[r];
      }
      break;
    }

    case Op::kBlendRows: {
      const std::size_t width = n.value.cols();
      for (std::size_t side = 0; side < 2; ++side) {
        if (!wants(side)) continue;
        Tensor& g = gin(side);
        for (std::size_t r = 0; r < n.weights.size(); ++r) {
          const double k = side == 0 ? n.weights[r] : 1.0 - n.weights[r];
          if (k == 0.0) continue;
          for (std::size_t c = 0; c < width; ++c) g[r * width + c] += k * dy[r * width + c];
        }
      }
      break;
    }

    case Op::kCenter: {
      Tensor& g = gin(0);
      const std::size_t width = n.value.dim(1);
      for (std::size_t r = 0; r < n.value.dim(0); ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < width; ++c) mean += dy.at(r, c);
        mean /= static_cast<double>(width);
        for (std::size_t c = 0; c < width; ++c) g.at(r, c) += dy.at(r, c) - mean;
      }
      break;
    }

    case Op::kSum: {
      Tensor& g = gin(0);
      const double d = dy[0];
      for (double& x : g.values()) x += d;
      break;
    }

    case Op::kUnary: {
      Tensor& g = gin(0);
      const Tensor& a = in(0);
      for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * n.fn->df(a[i]);
      break;
    }
  }
}

}  // namespace seqac
