#include "ms3d/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "ms3d/ops.hpp"

namespace ms3d::ad {
namespace {

thread_local bool t_grad_mode = true;
std::atomic<std::uint64_t> g_next_id{1};

std::shared_ptr<TensorImpl> new_impl(Shape shape, std::vector<double> values) {
  if (numel_of(shape) != values.size()) {
    throw std::invalid_argument("tensor: shape " + shape_str(shape) + " holds " +
                                std::to_string(numel_of(shape)) + " values, got " +
                                std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return impl;
}

}  // namespace

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  Tensor t(new_impl(std::move(shape), std::move(values)));
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = numel_of(shape);
  return Tensor(new_impl(std::move(shape), std::vector<double>(n, value)));
}

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("tensor: access to undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::numel() const { return shape().empty() ? 1 : impl_->values.size(); }

std::span<const double> Tensor::values() const {
  if (!impl_) throw std::logic_error("tensor: access to undefined tensor");
  return impl_->values;
}

std::span<double> Tensor::mutable_values() {
  if (!impl_) throw std::logic_error("tensor: access to undefined tensor");
  return impl_->values;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("tensor: item() on tensor of shape " + shape_str(shape()));
  }
  return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  if (!impl_) throw std::logic_error("tensor: access to undefined tensor");
  impl_->requires_grad = flag;
  return *this;
}

Tensor Tensor::detach() const { return Tensor(new_impl(shape(), impl_->values)); }

const Node* Tensor::grad_fn() const { return impl_ ? impl_->grad_fn.get() : nullptr; }

std::uint64_t Tensor::id() const { return impl_ ? impl_->id : 0; }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::string op,
                           std::vector<Tensor> inputs, Node::BackwardFn backward) {
  Tensor out(new_impl(std::move(shape), std::move(values)));
  if (!t_grad_mode) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<Node>();
  node->op = std::move(op);
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.impl_->requires_grad = true;
  out.impl_->grad_fn = std::move(node);
  return out;
}

bool grad_mode_enabled() { return t_grad_mode; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(t_grad_mode) { t_grad_mode = enabled; }
GradModeGuard::~GradModeGuard() { t_grad_mode = previous_; }

namespace {

// Post-order over tensors that carry an op record; inputs precede consumers.
std::vector<const TensorImpl*> topo_order(const TensorImpl* root) {
  std::vector<const TensorImpl*> order;
  std::unordered_set<const TensorImpl*> visited;
  struct Frame {
    const TensorImpl* t;
    std::size_t next;
  };
  std::vector<Frame> stack;
  if (root->grad_fn) {
    stack.push_back({root, 0});
    visited.insert(root);
  }
  while (!stack.empty()) {
    auto& top = stack.back();
    const auto& inputs = top.t->grad_fn->inputs;
    if (top.next < inputs.size()) {
      const TensorImpl* child = inputs[top.next++].impl();
      if (child->grad_fn && visited.insert(child).second) stack.push_back({child, 0});
      continue;
    }
    order.push_back(top.t);
    stack.pop_back();
  }
  return order;
}

}  // namespace

Gradients grad(const Tensor& output, std::span<const Tensor> wrt, GradOptions options) {
  if (!output.defined()) throw std::invalid_argument("grad: undefined output tensor");
  if (output.numel() != 1) {
    throw std::invalid_argument("grad: output must be a scalar, got shape " +
                                shape_str(output.shape()));
  }

  GradModeGuard mode(options.create_graph);

  std::unordered_set<const TensorImpl*> wanted;
  for (const auto& w : wrt) wanted.insert(w.impl());

  std::unordered_map<const TensorImpl*, Tensor> grads;
  if (output.requires_grad()) grads.emplace(output.impl(), Tensor::ones(output.shape()));

  const auto order = output.requires_grad() ? topo_order(output.impl())
                                            : std::vector<const TensorImpl*>{};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const TensorImpl* t = *it;
    auto found = grads.find(t);
    if (found == grads.end()) continue;
    Tensor g = found->second;
    if (!wanted.count(t)) grads.erase(found);

    const Node& node = *t->grad_fn;
    std::vector<Tensor> input_grads = node.backward(g, node.inputs);
    for (std::size_t i = 0; i < node.inputs.size() && i < input_grads.size(); ++i) {
      const Tensor& in = node.inputs[i];
      if (!in.requires_grad() || !input_grads[i].defined()) continue;
      auto [slot, inserted] = grads.try_emplace(in.impl(), input_grads[i]);
      if (!inserted) slot->second = add(slot->second, input_grads[i]);
    }
  }

  Gradients result;
  result.grads.reserve(wrt.size());
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    auto found = grads.find(wrt[i].impl());
    if (found == grads.end()) {
      result.grads.push_back(Tensor::zeros(wrt[i].shape()));
      result.unreachable.push_back(i);
    } else {
      result.grads.push_back(found->second);
    }
  }
  return result;
}

Gradients grad(const Tensor& output, std::initializer_list<Tensor> wrt, GradOptions options) {
  return grad(output, std::span<const Tensor>(wrt.begin(), wrt.size()), options);
}

std::vector<const Node*> tape_of(const Tensor& output) {
  std::vector<const Node*> nodes;
  if (!output.defined()) return nodes;
  for (const auto* t : topo_order(output.impl())) nodes.push_back(t->grad_fn.get());
  return nodes;
}

}  // namespace ms3d::ad
