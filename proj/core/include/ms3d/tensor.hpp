#pragma once

// Dense real-valued tensors recorded on a reverse-mode differentiation tape.
//
// Every tensor produced by an op while grad mode is enabled keeps a pointer
// to the op record that created it (its inputs plus a backward rule). The
// backward rules are themselves written with differentiable ops, so the
// gradients returned by grad(..., create_graph = true) can be differentiated
// again.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ms3d::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

/// One op record on the tape.
struct Node {
  using BackwardFn =
      std::function<std::vector<Tensor>(const Tensor& grad_out, const std::vector<Tensor>& inputs)>;

  std::string op;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;
  std::uint64_t id = 0;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor zeros(Shape shape) { return full(std::move(shape), 0.0); }
  static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
  static Tensor scalar(double value) { return full({}, value); }

  [[nodiscard]] bool defined() const { return impl_ != nullptr; }
  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] std::size_t dim() const { return shape().size(); }
  [[nodiscard]] std::size_t size(std::size_t axis) const { return shape().at(axis); }
  [[nodiscard]] std::size_t numel() const;

  [[nodiscard]] std::span<const double> values() const;
  /// Mutable access to the stored values. Intended for leaves (parameters)
  /// between graph constructions; mutating a recorded intermediate
  /// invalidates any tape that saved it.
  [[nodiscard]] std::span<double> mutable_values();
  [[nodiscard]] double item() const;
  [[nodiscard]] double at(std::size_t flat_index) const { return values()[flat_index]; }

  [[nodiscard]] bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  /// Same values, no tape history.
  [[nodiscard]] Tensor detach() const;
  [[nodiscard]] Tensor clone() const { return detach(); }

  [[nodiscard]] const Node* grad_fn() const;
  [[nodiscard]] std::uint64_t id() const;
  [[nodiscard]] const TensorImpl* impl() const { return impl_.get(); }

  /// Build the output of an op. Records `node` only when grad mode is on and
  /// at least one input requires a gradient.
  static Tensor make_result(Shape shape, std::vector<double> values, std::string op,
                            std::vector<Tensor> inputs, Node::BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

[[nodiscard]] bool grad_mode_enabled();

/// Scoped switch for whether new ops are recorded on the tape.
class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

class NoGradGuard : public GradModeGuard {
 public:
  NoGradGuard() : GradModeGuard(false) {}
};

struct GradOptions {
  /// Record the backward pass itself so the returned gradients are
  /// differentiable again (double backprop).
  bool create_graph = false;
};

struct Gradients {
  std::vector<Tensor> grads;
  /// Indices into `wrt` that the output does not depend on. Their entry in
  /// `grads` is an all-zero tensor.
  std::vector<std::size_t> unreachable;

  [[nodiscard]] bool has_unreachable() const { return !unreachable.empty(); }
  const Tensor& operator[](std::size_t i) const { return grads.at(i); }
};

/// d(output)/d(wrt[i]) for a scalar output.
Gradients grad(const Tensor& output, std::span<const Tensor> wrt, GradOptions options = {});
Gradients grad(const Tensor& output, std::initializer_list<Tensor> wrt, GradOptions options = {});

/// Op records reachable from `output`, in topological order (inputs first).
std::vector<const Node*> tape_of(const Tensor& output);

}  // namespace ms3d::ad
