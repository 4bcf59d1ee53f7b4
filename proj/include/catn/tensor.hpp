#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace catn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One record of the define-by-run graph. Leaves have no inputs and no
// backward closure. `backward` reads `grad` and accumulates into the grads of
// those inputs that require them.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string op;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return inputs.empty(); }
  void ensure_grad();
};

}  // namespace detail

// Shared handle to a dense row-major float64 array that participates in a
// reverse-mode autodiff graph. Copies alias the same node. Values are
// immutable once created, except for leaf tensors (parameters), whose data
// the optimizer updates in place.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  bool is_scalar() const { return numel() == 1; }

  std::span<const double> data() const;
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t row, std::size_t col) const;

  // Leaf-only write access; throws ContractError on op outputs.
  std::span<double> mutable_data();

  bool requires_grad() const;
  bool is_leaf() const;
  const std::string& op() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();
  void clear_grad();

  // Populates grads of every requires_grad tensor reachable from this scalar.
  // Leaf grads accumulate across calls; intermediate grads are reset.
  void backward() const;

  // Same values, cut from the graph.
  Tensor detach() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Nodes reachable from `root` that require grad, inputs before consumers.
// Each node appears exactly once.
std::vector<Tensor> topological_order(const Tensor& root);

}  // namespace catn
