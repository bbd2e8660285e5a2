#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ufse {

// Error taxonomy shared by every module. The CLI maps UsageError to exit
// code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class UsageError : public Error {
 public:
  using Error::Error;
};
class NumericalError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& dims);
std::string shape_string(const Shape& dims);

template <typename T>
class Tensor;

// Handed to a backward rule. grad_inputs[i] is empty when input i does not
// take part in differentiation; rules must accumulate (+=), never assign.
template <typename T>
struct GradContext {
  std::span<const T> output;
  std::span<const T> grad_output;
  std::vector<std::span<T>> grad_inputs;

  bool wants(std::size_t i) const { return !grad_inputs[i].empty(); }
};

template <typename T>
using BackwardFn = std::function<void(GradContext<T>&)>;

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
struct TapeNode {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  BackwardFn<T> backward;
};

template <typename T>
struct TensorImpl {
  Shape dims;
  std::shared_ptr<std::vector<T>> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::shared_ptr<TapeNode<T>> node;
};

}  // namespace detail

/// Dense row-major tensor with optional gradient. Copies are shallow handles;
/// use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape dims, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape dims, bool requires_grad = false);
  static Tensor full(Shape dims, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& dims() const;
  std::int64_t dim(std::size_t axis) const;
  std::size_t rank() const { return dims().size(); }
  std::int64_t numel() const;

  std::span<const T> data() const;
  // Only leaf tensors may be mutated (parameter init, optimizer updates).
  std::span<T> mutable_data();
  T item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();
  void clear_grad();

  bool is_leaf() const;
  // Name of the taped operation that produced this tensor ("leaf" otherwise).
  std::string op_name() const;

  // Leaf sharing this tensor's data, detached from the tape.
  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<detail::TensorImpl<T>>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl<T>> impl) : impl_(std::move(impl)) {}
  detail::TensorImpl<T>& checked() const;

  std::shared_ptr<detail::TensorImpl<T>> impl_;

  template <typename U>
  friend Tensor<U> make_result(std::string op, Shape dims, std::vector<U> values,
                               std::vector<Tensor<U>> inputs, BackwardFn<U> backward);
};

/// Builds an operation output and records its backward rule on the tape when
/// gradient mode is on and at least one input requires a gradient.
template <typename T>
Tensor<T> make_result(std::string op, Shape dims, std::vector<T> values,
                      std::vector<Tensor<T>> inputs, BackwardFn<T> backward);

/// Reverse-mode sweep from a scalar loss. Every reachable tensor with
/// requires_grad accumulates d(loss)/d(tensor) into its grad buffer.
template <typename T>
void backward(const Tensor<T>& loss);

bool grad_enabled();

// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Training allocates and frees multi-megabyte buffers every step. Stops the C
// allocator from returning them to the OS between steps (process-wide).
void keep_freed_memory();

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace ufse
