#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqac/params.hpp"
#include "seqac/tensor.hpp"

namespace seqac {

/// Handle to a node of a Graph.
struct Var {
  static constexpr std::uint32_t kNone = UINT32_MAX;
  std::uint32_t id = kNone;
  bool valid() const noexcept { return id != kNone; }
};

enum class Op : std::uint8_t {
  kConstant,
  kInput,
  kParam,
  kMatMul,
  kAffine,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSigmoid,
  kTanh,
  kSoftmax,
  kLogSoftmax,
  kConcat,
  kSlice,
  kEmbed,
  kStack,
  kReshape,
  kAdditiveScores,
  kMaskedSoftmax,
  kWeightedSum,
  kSelectRows,
  kPick,
  kBlendRows,
  kCenter,
  kSum,
  kUnary,
};

const char* op_name(Op op);

/// Element-wise function with a user-supplied derivative, for ops that are
/// not built in (and for negative-control gradient checks).
struct UnaryFunction {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
};

/// Define-by-run computation graph with reverse-mode differentiation.
///
/// Nodes are appended in topological order and evaluated as they are
/// recorded, so values are available immediately for control flow such as
/// sampling. forward() re-evaluates every node from the current leaf values
/// (used after bind() or after perturbing parameters); backward() visits
/// nodes once each in reverse order.
///
/// Parameter leaves reference tensors owned by a ParamSet; the set must
/// outlive the graph and must not gain or lose tensors while it is in use.
/// All row-wise ops treat the leading dimension as the batch.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Leaves.
  Var constant(Tensor value);
  Var input(std::string name, Tensor value);
  /// Trainable parameter leaf; repeated calls for the same tensor return the same Var.
  Var param(ParamSet& params, const std::string& name);
  /// Non-trainable reference to a parameter tensor (e.g. shadow weights).
  Var frozen(const ParamSet& params, const std::string& name);
  /// Rebinds an input leaf. The graph becomes stale until forward() runs.
  void bind(Var leaf, Tensor value);

  const Tensor& value(Var v) const;
  const Shape& shape(Var v) const { return value(v).shape(); }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool stale() const noexcept { return fresh_ != nodes_.size(); }

  /// Re-evaluates all nodes up to `output` from the current leaf values.
  const Tensor& forward(Var output);
  /// Reverse pass seeded with d(objective)/d(output) = seed. Returns the
  /// gradient of every trainable leaf (zero when the output does not depend on it).
  Gradients backward(Var output, const Tensor& seed);
  /// backward() with an all-ones seed.
  Gradients backward(Var output);
  /// Gradient of an arbitrary node after backward(); empty if none reached it.
  const Tensor& grad(Var v) const;

  /// Names and storage of trainable leaves, in creation order.
  std::vector<std::pair<std::string, Tensor*>> trainable_leaves() const;

  // Operations.
  Var matmul(Var a, Var b);                  // [n,k] x [k,m]
  Var affine(Var x, Var w, Var b);           // x w + b, b broadcast over rows
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                     // Hadamard
  Var scale(Var a, double factor);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var softmax(Var a);                        // over the last axis
  Var log_softmax(Var a);                    // over the last axis
  Var concat(std::span<const Var> parts);    // along columns, rank-2
  Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }
  Var slice(Var a, std::size_t begin, std::size_t end);  // columns [begin, end)
  Var embed(Var table, std::vector<int> ids);            // rows of table
  Var stack(std::span<const Var> steps);     // L x [B,H] -> [B,L,H]
  Var reshape(Var a, Shape shape);
  /// score[b,j] = sum_a v[a] * tanh(keys[b,j,a] + query[b,a])
  Var additive_scores(Var keys, Var query, Var v);
  /// Softmax over positions with mask != 0; masked positions get weight 0.
  Var masked_softmax(Var scores, Tensor mask);
  /// out[b,:] = sum_j weights[b,j] * values[b,j,:]
  Var weighted_sum(Var weights, Var values);
  /// Gathers along the leading dimension.
  Var select_rows(Var a, std::vector<std::size_t> rows);
  /// out[b,0] = a[b, cols[b]]
  Var pick(Var a, std::vector<int> cols);
  /// out[r,:] = keep[r] * a[r,:] + (1 - keep[r]) * b[r,:]
  Var blend_rows(Var a, Var b, std::vector<double> keep);
  /// Subtracts each row's mean.
  Var center(Var a);
  Var sum(Var a);                            // -> [1]
  Var unary(Var a, std::shared_ptr<const UnaryFunction> fn);

 private:
  struct Node {
    Op op = Op::kConstant;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    Tensor grad;
    Tensor* param = nullptr;  // storage for parameter leaves
    std::string name;
    bool trainable = false;
    bool needs_grad = false;
    std::vector<int> ids;
    std::vector<std::size_t> index;
    std::vector<double> weights;
    Tensor aux;
    double scalar = 0.0;
    Shape target_shape;
    std::shared_ptr<const UnaryFunction> fn;
  };

  static Node make(Op op, std::initializer_list<Var> inputs);
  Var push(Node node);
  const Tensor& val(std::uint32_t id) const;
  const Node& node(Var v) const;
  void compute(Node& n);
  void propagate(Node& n);
  Tensor& grad_buffer(std::uint32_t id);
  Var param_leaf(Tensor* storage, const std::string& name, bool trainable);

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::uint32_t> param_cache_;
  std::size_t fresh_ = 0;  // nodes [0, fresh_) reflect the current leaf values
  bool backward_done_ = false;
};

}  // namespace seqac
