#include "ufse/tensor.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace ufse {

std::int64_t shape_numel(const Shape& dims) {
  std::int64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

void validate_dims(const Shape& dims) {
  for (auto d : dims) {
    if (d <= 0) throw ConfigError("tensor dimensions must be positive, got " + shape_string(dims));
  }
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T>::Tensor(Shape dims, std::vector<T> values, bool requires_grad) {
  validate_dims(dims);
  if (static_cast<std::int64_t>(values.size()) != shape_numel(dims)) {
    throw ConfigError("tensor data length " + std::to_string(values.size()) +
                      " does not match dims " + shape_string(dims));
  }
  impl_ = std::make_shared<detail::TensorImpl<T>>();
  impl_->dims = std::move(dims);
  impl_->data = std::make_shared<std::vector<T>>(std::move(values));
  impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape dims, bool requires_grad) {
  return full(std::move(dims), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape dims, T value, bool requires_grad) {
  validate_dims(dims);
  auto n = static_cast<std::size_t>(shape_numel(dims));
  return Tensor(std::move(dims), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
detail::TensorImpl<T>& Tensor<T>::checked() const {
  if (!impl_) throw UsageError("use of an undefined tensor");
  return *impl_;
}

template <typename T>
const Shape& Tensor<T>::dims() const {
  return checked().dims;
}

template <typename T>
std::int64_t Tensor<T>::dim(std::size_t axis) const {
  const auto& d = dims();
  if (axis >= d.size()) throw UsageError("axis out of range for tensor " + shape_string(d));
  return d[axis];
}

template <typename T>
std::int64_t Tensor<T>::numel() const {
  return static_cast<std::int64_t>(checked().data->size());
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  return {checked().data->data(), checked().data->size()};
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  auto& impl = checked();
  if (impl.node) throw UsageError("cannot mutate the output of a taped operation");
  return {impl.data->data(), impl.data->size()};
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw UsageError("item() requires a single-element tensor, got " + shape_string(dims()));
  return (*checked().data)[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return checked().requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
  auto& impl = checked();
  if (impl.node && !flag) throw UsageError("cannot clear requires_grad on a taped tensor; use detach()");
  impl.requires_grad = flag;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return !checked().grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  auto& impl = checked();
  if (impl.grad.empty()) throw UsageError("tensor has no gradient");
  return {impl.grad.data(), impl.grad.size()};
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  auto& impl = checked();
  if (impl.grad.empty()) impl.grad.assign(impl.data->size(), T(0));
  return {impl.grad.data(), impl.grad.size()};
}

template <typename T>
void Tensor<T>::zero_grad() {
  auto& impl = checked();
  impl.grad.assign(impl.data->size(), T(0));
}

template <typename T>
void Tensor<T>::clear_grad() {
  auto& impl = checked();
  impl.grad.clear();
  impl.grad.shrink_to_fit();
}

template <typename T>
bool Tensor<T>::is_leaf() const {
  return checked().node == nullptr;
}

template <typename T>
std::string Tensor<T>::op_name() const {
  auto& impl = checked();
  return impl.node ? impl.node->op : std::string("leaf");
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  auto impl = std::make_shared<detail::TensorImpl<T>>();
  impl->dims = checked().dims;
  impl->data = checked().data;
  return Tensor(std::move(impl));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(checked().dims, *checked().data, checked().requires_grad && is_leaf());
}

template <typename T>
Tensor<T> make_result(std::string op, Shape dims, std::vector<T> values, std::vector<Tensor<T>> inputs,
                      BackwardFn<T> backward) {
  Tensor<T> out(std::move(dims), std::move(values));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;

  auto node = std::make_shared<detail::TapeNode<T>>();
  node->op = std::move(op);
  node->inputs.reserve(inputs.size());
  for (auto& in : inputs) node->inputs.push_back(in.impl());
  node->backward = std::move(backward);
  out.impl_->requires_grad = true;
  out.impl_->node = std::move(node);
  return out;
}

namespace {

template <typename T>
bool all_finite(std::span<const T> v) {
  for (auto x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined()) throw UsageError("backward on an undefined tensor");
  if (loss.numel() != 1) throw UsageError("backward requires a scalar loss, got " + shape_string(loss.dims()));
  if (!loss.requires_grad()) throw UsageError("loss does not depend on any tensor that requires a gradient");

  using Impl = detail::TensorImpl<T>;
  // Iterative post-order DFS; reversing it yields a topological order.
  std::vector<Impl*> order;
  std::unordered_set<Impl*> visited;
  std::vector<std::pair<Impl*, std::size_t>> stack;
  stack.emplace_back(loss.impl().get(), 0);
  visited.insert(loss.impl().get());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    if (impl->node && next < impl->node->inputs.size()) {
      Impl* child = impl->node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(impl);
    stack.pop_back();
  }

  Impl* root = loss.impl().get();
  root->grad.assign(1, T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* impl = *it;
    if (!impl->node) continue;
    if (impl->grad.empty()) impl->grad.assign(impl->data->size(), T(0));
    if (!all_finite<T>(impl->grad)) {
      throw NumericalError("non-finite gradient at output of '" + impl->node->op + "' " +
                           shape_string(impl->dims));
    }
    GradContext<T> ctx;
    ctx.output = {impl->data->data(), impl->data->size()};
    ctx.grad_output = {impl->grad.data(), impl->grad.size()};
    ctx.grad_inputs.reserve(impl->node->inputs.size());
    for (auto& in : impl->node->inputs) {
      if (!in->requires_grad) {
        ctx.grad_inputs.emplace_back();
        continue;
      }
      if (in->grad.empty()) in->grad.assign(in->data->size(), T(0));
      ctx.grad_inputs.emplace_back(in->grad.data(), in->grad.size());
    }
    impl->node->backward(ctx);
    for (const auto& g : ctx.grad_inputs) {
      if (!all_finite<T>(g)) {
        throw NumericalError("non-finite gradient produced by '" + impl->node->op + "' " + shape_string(impl->dims));
      }
    }
  }
  for (Impl* impl : order) {
    if (!impl->node && !all_finite<T>(impl->grad)) {
      throw NumericalError("non-finite gradient at leaf tensor " + shape_string(impl->dims));
    }
  }
}

void keep_freed_memory() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(std::string, Shape, std::vector<float>, std::vector<Tensor<float>>,
                                   BackwardFn<float>);
template Tensor<double> make_result(std::string, Shape, std::vector<double>, std::vector<Tensor<double>>,
                                    BackwardFn<double>);
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);

}  // namespace ufse
