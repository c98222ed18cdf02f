#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ssx {

class Tape;

namespace detail {
// Shared tensor payload; gradients are written here by Tape::backward.
struct TensorImpl {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a backward pass touches it
  std::uint64_t tape_id = 0;  // 0 = detached
  std::uint64_t grad_generation = 0;
};
}  // namespace detail

// Dense row-major tensor of 64-bit floats with an optional gradient buffer.
// Copies are shallow (shared payload): the tensor a backward pass writes
// gradients into is the same object the caller holds. Tensors are only
// mutated through mutable_values() (optimizer updates) and by Tape::backward.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor scalar(double v);

  bool defined() const { return static_cast<bool>(impl_); }
  const std::vector<std::size_t>& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();
  double scalar_value() const;  // requires size() == 1

  bool has_grad() const;
  const std::vector<double>& grad() const;  // throws if never backpropagated

 private:
  std::shared_ptr<detail::TensorImpl> impl_;

  friend class Tape;
  friend class OpBuilder;
};

class OpBuilder;

enum class EwiseOp { Add, Sub, Mul };
enum class UnaryOp { Relu, Exp, Log, Neg, Sqrt };
enum class ReduceOp { Sum, Mean, Max };

// Records operations in execution order; backward() replays them once in
// reverse. A tape may be consumed by exactly one backward pass. Single
// threaded by design; independent tapes can live on independent threads.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every tensor
  // recorded on this tape; tensors on the tape but not feeding the loss end
  // with zero gradients. A second call is an error (no silent accumulation
  // across passes).
  void backward(const Tensor& loss);

  std::size_t num_ops() const { return ops_.size(); }
  std::uint64_t id() const { return id_; }
  bool attached(const Tensor& t) const noexcept;

 private:
  struct OpRecord {
    std::vector<std::shared_ptr<detail::TensorImpl>> nodes;  // inputs + output
    std::function<void()> backprop;
  };

  void record(std::vector<std::shared_ptr<detail::TensorImpl>> nodes,
              std::function<void()> backprop);

  std::vector<OpRecord> ops_;
  std::uint64_t id_;
  bool consumed_ = false;

  friend class OpBuilder;
};

// Core operations. Passing a tape records the backward rule; nullptr runs
// the forward computation only.
Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor ewise(EwiseOp op, const Tensor& a, const Tensor& b,
             Tape* tape = nullptr);
Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor unary(UnaryOp op, const Tensor& a, Tape* tape = nullptr);
Tensor relu(const Tensor& a, Tape* tape = nullptr);
Tensor reduce(ReduceOp op, const Tensor& a, std::size_t axis,
              Tape* tape = nullptr);
Tensor reduce_all(ReduceOp op, const Tensor& a, Tape* tape = nullptr);
Tensor scale(const Tensor& a, double c, Tape* tape = nullptr);
Tensor add_const(const Tensor& a, double c, Tape* tape = nullptr);
Tensor reshape(const Tensor& a, std::vector<std::size_t> shape,
               Tape* tape = nullptr);

// Softmax over each contiguous block of `block` entries within each row of a
// rank-1 or rank-2 tensor (max-subtracted). block == row width gives the
// plain softmax; block == G gives the per-group softmax of the score head.
Tensor block_softmax(const Tensor& logits, std::size_t block,
                     Tape* tape = nullptr);

// Mean over rows of -sum_i y_i log(max(s_i, 1e-12)). `targets` is treated as
// a constant (no gradient is propagated into it).
Tensor cross_entropy_mean(const Tensor& probs, const Tensor& targets,
                          Tape* tape = nullptr);

// Central-difference check of f's gradient at x. Returns
// max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, 1e-8).
using TensorFn = std::function<Tensor(const Tensor&, Tape&)>;
double grad_check(const TensorFn& f, const Tensor& x, double eps = 1e-5);

std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace ssx
