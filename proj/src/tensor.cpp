// SPDX-License-Identifier: Apache-2.0
#include "genre/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "genre/error.hpp"

namespace genre {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::linear: return "linear";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::sum: return "sum";
    case OpKind::relu: return "relu";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::softmax: return "softmax";
    case OpKind::softmax_cross_entropy: return "softmax_cross_entropy";
    case OpKind::conv_time: return "conv_time";
    case OpKind::maxpool_time: return "maxpool_time";
    case OpKind::batchnorm: return "batchnorm";
    case OpKind::dropout: return "dropout";
    case OpKind::concat: return "concat";
    case OpKind::reshape: return "reshape";
    case OpKind::embedding: return "embedding";
    case OpKind::slice_cols: return "slice_cols";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::scatter_rows: return "scatter_rows";
    case OpKind::stack_time: return "stack_time";
    case OpKind::time_slice: return "time_slice";
    case OpKind::where_rows: return "where_rows";
    case OpKind::weighted_sum_time: return "weighted_sum_time";
    case OpKind::count_: break;
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Tensor

namespace {

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<real> values, bool requires_grad) {
  if (numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " holds " +
                         std::to_string(numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw ContractError("use of an undefined tensor");
  return *node;
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<real> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, real value) {
  const std::size_t n = genre::numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<real>(n, value), false));
}

Tensor Tensor::scalar(real value) { return constant({}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<real> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), true));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t i) const {
  const Shape& s = shape();
  if (i >= s.size()) {
    throw DimensionError("axis " + std::to_string(i) + " out of range for shape " + shape_str(s));
  }
  return s[i];
}

std::size_t Tensor::numel() const { return checked(node_).value.size(); }
bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
bool Tensor::is_leaf() const { return checked(node_).op == OpKind::leaf; }
OpKind Tensor::op() const { return checked(node_).op; }

std::span<const real> Tensor::data() const { return checked(node_).value; }

std::span<real> Tensor::mutable_data() {
  checked(node_);
  if (node_->op != OpKind::leaf) {
    throw ContractError("values of op outputs are immutable (op " +
                        std::string(op_name(node_->op)) + ")");
  }
  return node_->value;
}

real Tensor::item() const {
  const auto& n = checked(node_);
  if (n.value.size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_str(n.shape));
  }
  return n.value[0];
}

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }
std::span<const real> Tensor::grad() const { return checked(node_).grad; }

std::span<real> Tensor::mutable_grad() {
  checked(node_);
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  checked(node_);
  node_->grad.clear();
}

Tensor Tensor::clone() const {
  const auto& n = checked(node_);
  return Tensor(make_leaf(n.shape, n.value, n.requires_grad));
}

// ---------------------------------------------------------------------------
// Grad mode and fault injection

namespace {
thread_local bool grad_enabled = true;
std::atomic<int> fault_op{static_cast<int>(OpKind::leaf)};
}  // namespace

bool GradMode::enabled() { return grad_enabled; }
void GradMode::set_enabled(bool on) { grad_enabled = on; }

namespace testing {
void set_backward_fault(OpKind op) { fault_op.store(static_cast<int>(op)); }
OpKind backward_fault() { return static_cast<OpKind>(fault_op.load()); }
}  // namespace testing

// ---------------------------------------------------------------------------
// Graph construction and reverse pass

namespace detail {

Tensor make_result(OpKind op, Shape shape, std::vector<real> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn) {
  for (real v : value) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value produced by " + std::string(op_name(op)) +
                         " (output shape " + shape_str(shape) + ")");
    }
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  if (GradMode::enabled()) {
    bool any = false;
    for (const Tensor& t : inputs) any = any || t.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (const Tensor& t : inputs) node->inputs.push_back(t.node_ptr());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

}  // namespace detail

void backward(const Tensor& loss) {
  detail::Node* root = loss.node();
  if (root == nullptr) throw ContractError("backward on an undefined tensor");
  if (root->value.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(root->shape));
  }
  if (!root->requires_grad) {
    throw ContractError("loss is not connected to any tensor that requires a gradient");
  }
  if (root->backward_done) {
    throw ContractError("backward already ran on this graph; rebuild the forward pass");
  }

  // Iterative post-order DFS; inputs are visited in their recorded order, so
  // the resulting topological order is a pure function of the graph.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && child->op != OpKind::leaf && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  const OpKind fault = testing::backward_fault();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->backward_fn) continue;
    node->ensure_grad();
    if (fault != OpKind::leaf && node->op == fault) {
      for (real& g : node->grad) g *= 1.5;
    }
    node->backward_fn(*node);
  }
  root->backward_done = true;
}

}  // namespace genre
