// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace genre {

using real = double;
using Shape = std::vector<std::size_t>;

/// Per-position boolean mask (1 = keep). A byte vector rather than
/// std::vector<bool> so it can be viewed through std::span.
using Mask = std::vector<std::uint8_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Every differentiable primitive. Used to name graph nodes in error reports
/// and gradient-check output, and as the fault-injection key.
enum class OpKind : int {
  leaf = 0,
  matmul,
  linear,
  add,
  sub,
  mul,
  scale,
  sum,
  relu,
  tanh,
  sigmoid,
  softmax,
  softmax_cross_entropy,
  conv_time,
  maxpool_time,
  batchnorm,
  dropout,
  concat,
  reshape,
  embedding,
  slice_cols,
  gather_rows,
  scatter_rows,
  stack_time,
  time_slice,
  where_rows,
  weighted_sum_time,
  count_
};

inline constexpr std::size_t kNumOps = static_cast<std::size_t>(OpKind::count_) - 1;

std::string_view op_name(OpKind op);

enum class Mode { train, eval };

namespace detail {

struct Node {
  Shape shape;
  std::vector<real> value;
  std::vector<real> grad;  // empty until a gradient flows here
  bool requires_grad = false;
  bool backward_done = false;
  OpKind op = OpKind::leaf;
  std::vector<std::size_t> attrs;  // op hyperparameters, e.g. pooling window and stride
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

/// Handle to a node of the dynamic computation graph.
///
/// Copies share the node. Values are immutable once produced by an op; only
/// leaves (parameters, inputs) expose mutable data, which the optimizer and
/// gradient checker use.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<real> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, real value);
  static Tensor scalar(real value);
  /// Leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<real> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t numel() const;
  bool requires_grad() const;
  bool is_leaf() const;
  OpKind op() const;

  std::span<const real> data() const;
  /// Mutable view of a leaf's values. Throws ContractError on op outputs.
  std::span<real> mutable_data();
  real item() const;

  bool has_grad() const;
  /// Empty span when no gradient has reached this tensor.
  std::span<const real> grad() const;
  std::span<real> mutable_grad();
  void zero_grad();

  /// Deep copy of the values into a fresh leaf with the same requires_grad flag.
  Tensor clone() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Populates gradients of every requires_grad leaf reachable from `loss`.
/// The loss must have exactly one element. Running backward twice on the same
/// graph throws ContractError; gradients on leaves accumulate across distinct
/// graphs until zero_grad().
void backward(const Tensor& loss);

/// Thread-local switch; while disabled, ops record no graph.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace testing {

/// Corrupts the backward rule of one op kind (its upstream gradient is scaled
/// by 1.5 before the rule runs). OpKind::leaf disables the fault. Used to
/// prove the gradient checker catches broken rules.
void set_backward_fault(OpKind op);
OpKind backward_fault();

}  // namespace testing

namespace detail {

/// Builds an op output. Throws NumericError if any value is non-finite.
/// Records `inputs` and `backward_fn` only when grad mode is on and some input
/// requires a gradient.
Tensor make_result(OpKind op, Shape shape, std::vector<real> value,
                   std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn);

}  // namespace detail

}  // namespace genre
