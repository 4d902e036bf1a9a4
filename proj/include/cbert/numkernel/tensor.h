#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cbert::nk {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the reverse-mode graph. The backward function reads
// `self.grad` and accumulates into the grads of `self.parents`.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node& self)> backward_fn;

  // Allocates a zero gradient buffer on first use.
  std::vector<double>& ensure_grad();
};

}  // namespace detail

// Dense row-major float64 array with an optional gradient.
//
// Tensor is a cheap handle; copies alias the same storage. Op outputs are
// treated as immutable. Leaf parameters are the only tensors whose data is
// rewritten, and only between forward passes (initialisation, optimizer
// updates, checkpoint loading).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Runs reverse-mode differentiation from this scalar. Gradients of leaf
  // tensors accumulate until zero_grad().
  void backward() const;

  // New leaf holding a copy of the data, no graph history.
  Tensor detach(bool requires_grad = false) const;

  // Builds an op output. `parents` are only retained when one of them needs
  // a gradient.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward_fn);

  detail::Node& node() const { return *node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

}  // namespace cbert::nk
