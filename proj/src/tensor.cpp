#include "ssoftmax/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

#include "ssoftmax/error.hpp"

namespace ssx {

namespace {

std::atomic<std::uint64_t> g_tape_counter{1};
std::atomic<std::uint64_t> g_backward_counter{1};

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void require_finite(const std::vector<double>& v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError(std::string(what) + ": non-finite value at index " +
                         std::to_string(i));
    }
  }
}

}  // namespace

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values) {
  if (shape.empty()) throw ValidationError("tensor shape must be non-empty");
  for (std::size_t d : shape) {
    if (d == 0) throw ValidationError("tensor dimensions must be positive");
  }
  const std::size_t expected = shape_product(shape);
  if (expected != values.size()) {
    throw ValidationError("tensor shape " + shape_to_string(shape) +
                          " implies " + std::to_string(expected) +
                          " values, got " + std::to_string(values.size()));
  }
  require_finite(values, "tensor construction");
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

const std::vector<std::size_t>& Tensor::shape() const {
  if (!impl_) throw ValidationError("use of default-constructed tensor");
  return impl_->shape;
}

std::size_t Tensor::size() const { return values().size(); }

const std::vector<double>& Tensor::values() const {
  if (!impl_) throw ValidationError("use of default-constructed tensor");
  return impl_->values;
}

std::vector<double>& Tensor::mutable_values() {
  if (!impl_) throw ValidationError("use of default-constructed tensor");
  return impl_->values;
}

double Tensor::scalar_value() const {
  const auto& v = values();
  if (v.size() != 1) {
    throw ValidationError("scalar_value on tensor of shape " +
                          shape_to_string(shape()));
  }
  return v[0];
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) {
    throw ValidationError("tensor has no gradient (no backward pass ran)");
  }
  return impl_->grad;
}

Tape::Tape() : id_(g_tape_counter.fetch_add(1)) {}

bool Tape::attached(const Tensor& t) const noexcept {
  return t.impl_ && t.impl_->tape_id == id_;
}

void Tape::record(std::vector<std::shared_ptr<detail::TensorImpl>> nodes,
                  std::function<void()> backprop) {
  for (auto& n : nodes) n->tape_id = id_;
  ops_.push_back({std::move(nodes), std::move(backprop)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) {
    throw ValidationError(
        "backward already ran on this tape; build a new tape per pass");
  }
  if (!loss.defined() || loss.size() != 1) {
    throw ValidationError("backward requires a scalar loss");
  }
  if (loss.impl_->tape_id != id_) {
    throw ValidationError("loss tensor is not attached to this tape");
  }
  const std::uint64_t gen = g_backward_counter.fetch_add(1);
  for (auto& op : ops_) {
    for (auto& node : op.nodes) {
      if (node->grad_generation != gen) {
        node->grad.assign(node->values.size(), 0.0);
        node->grad_generation = gen;
      }
    }
  }
  loss.impl_->grad[0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->backprop();
  consumed_ = true;
}

namespace {

}  // namespace

class OpBuilder {
 public:
  static std::shared_ptr<detail::TensorImpl> impl_of(const Tensor& t) {
    if (!t.defined()) throw ValidationError("use of default-constructed tensor");
    return t.impl_;
  }

  static Tensor make(std::vector<std::size_t> shape,
                     std::vector<double> values) {
    Tensor t;
    t.impl_ = std::make_shared<detail::TensorImpl>();
    t.impl_->shape = std::move(shape);
    t.impl_->values = std::move(values);
    return t;
  }

  static void record(Tape* tape,
                     std::vector<std::shared_ptr<detail::TensorImpl>> nodes,
                     std::function<void()> backprop) {
    if (tape) tape->record(std::move(nodes), std::move(backprop));
  }
};

namespace {

using Impl = std::shared_ptr<detail::TensorImpl>;

Tensor finish(std::vector<std::size_t> shape, std::vector<double> values,
              const char* op_name) {
  require_finite(values, op_name);
  return OpBuilder::make(std::move(shape), std::move(values));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ValidationError("matmul shape mismatch: " +
                          shape_to_string(a.shape()) + " by " +
                          shape_to_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Tensor result = finish({m, n}, std::move(out), "matmul");
  Impl ai = OpBuilder::impl_of(a), bi = OpBuilder::impl_of(b),
       oi = OpBuilder::impl_of(result);
  OpBuilder::record(tape, {ai, bi, oi}, [ai, bi, oi, m, k, n]() {
    const auto& g = oi->grad;
    // dA += g * B^T
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        const double* grow = &g[i * n];
        const double* brow = &bi->values[p * n];
        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
        ai->grad[i * k + p] += acc;
      }
    }
    // dB += A^T * g
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t i = 0; i < m; ++i) {
        const double aip = ai->values[i * k + p];
        const double* grow = &g[i * n];
        double* brow = &bi->grad[p * n];
        for (std::size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
      }
    }
  });
  return result;
}

namespace {

enum class Broadcast { None, LastAxis, Scalar };

Broadcast classify_broadcast(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::None;
  if (b.size() == 1) return Broadcast::Scalar;
  const std::size_t last = a.shape().back();
  if (b.size() == last &&
      (b.rank() == 1 || (b.rank() == 2 && b.shape()[0] == 1))) {
    return Broadcast::LastAxis;
  }
  throw ValidationError("elementwise shape mismatch: " +
                        shape_to_string(a.shape()) + " vs " +
                        shape_to_string(b.shape()));
}

}  // namespace

Tensor ewise(EwiseOp op, const Tensor& a, const Tensor& b, Tape* tape) {
  const Broadcast bc = classify_broadcast(a, b);
  const auto& av = a.values();
  const auto& bv = b.values();
  const std::size_t n = av.size();
  const std::size_t bn = bv.size();
  std::vector<double> out(n);
  auto bval = [&](std::size_t i) -> double {
    switch (bc) {
      case Broadcast::None: return bv[i];
      case Broadcast::Scalar: return bv[0];
      case Broadcast::LastAxis: return bv[i % bn];
    }
    return 0.0;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[i], y = bval(i);
    out[i] = op == EwiseOp::Add ? x + y : op == EwiseOp::Sub ? x - y : x * y;
  }
  Tensor result = finish(a.shape(), std::move(out), "ewise");
  Impl ai = OpBuilder::impl_of(a), bi = OpBuilder::impl_of(b),
       oi = OpBuilder::impl_of(result);
  OpBuilder::record(tape, {ai, bi, oi}, [op, bc, ai, bi, oi, n, bn]() {
    const auto& g = oi->grad;
    auto bslot = [&](std::size_t i) -> std::size_t {
      return bc == Broadcast::None ? i
             : bc == Broadcast::Scalar ? 0
                                       : i % bn;
    };
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i];
      switch (op) {
        case EwiseOp::Add:
          ai->grad[i] += gi;
          bi->grad[bslot(i)] += gi;
          break;
        case EwiseOp::Sub:
          ai->grad[i] += gi;
          bi->grad[bslot(i)] -= gi;
          break;
        case EwiseOp::Mul:
          ai->grad[i] += gi * bi->values[bslot(i)];
          bi->grad[bslot(i)] += gi * ai->values[i];
          break;
      }
    }
  });
  return result;
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  return ewise(EwiseOp::Add, a, b, tape);
}
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape) {
  return ewise(EwiseOp::Sub, a, b, tape);
}
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
  return ewise(EwiseOp::Mul, a, b, tape);
}

Tensor unary(UnaryOp op, const Tensor& a, Tape* tape) {
  const auto& av = a.values();
  const std::size_t n = av.size();
  if (op == UnaryOp::Log || op == UnaryOp::Sqrt) {
    for (std::size_t i = 0; i < n; ++i) {
      if (av[i] <= 0.0) {
        throw ValidationError(
            std::string(op == UnaryOp::Log ? "log" : "sqrt") +
            " requires strictly positive input, got " + std::to_string(av[i]) +
            " at index " + std::to_string(i));
      }
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[i];
    switch (op) {
      case UnaryOp::Relu: out[i] = x > 0.0 ? x : 0.0; break;
      case UnaryOp::Exp: out[i] = std::exp(x); break;
      case UnaryOp::Log: out[i] = std::log(x); break;
      case UnaryOp::Neg: out[i] = -x; break;
      case UnaryOp::Sqrt: out[i] = std::sqrt(x); break;
    }
  }
  Tensor result = finish(a.shape(), std::move(out), "unary");
  Impl ai = OpBuilder::impl_of(a), oi = OpBuilder::impl_of(result);
  OpBuilder::record(tape, {ai, oi}, [op, ai, oi, n]() {
    const auto& g = oi->grad;
    for (std::size_t i = 0; i < n; ++i) {
      switch (op) {
        case UnaryOp::Relu:
          // Gradient at exactly 0 is defined as 0.
          ai->grad[i] += ai->values[i] > 0.0 ? g[i] : 0.0;
          break;
        case UnaryOp::Exp: ai->grad[i] += g[i] * oi->values[i]; break;
        case UnaryOp::Log: ai->grad[i] += g[i] / ai->values[i]; break;
        case UnaryOp::Neg: ai->grad[i] -= g[i]; break;
        case UnaryOp::Sqrt:
          ai->grad[i] += g[i] * 0.5 / oi->values[i];
          break;
      }
    }
  });
  return result;
}

Tensor relu(const Tensor& a, Tape* tape) {
  return unary(UnaryOp::Relu, a, tape);
}

Tensor reduce(ReduceOp op, const Tensor& a, std::size_t axis, Tape* tape) {
  const auto& shape = a.shape();
  if (axis >= shape.size()) {
    throw ValidationError("reduce axis " + std::to_string(axis) +
                          " out of range for shape " + shape_to_string(shape));
  }
  // Iterate as outer x axis x inner.
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  std::vector<std::size_t> out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out_shape.push_back(shape[i]);
  }
  if (out_shape.empty()) out_shape = {1};

  const auto& av = a.values();
  std::vector<double> out(outer * inner);
  std::vector<std::size_t> argmax;
  if (op == ReduceOp::Max) argmax.resize(outer * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      if (op == ReduceOp::Max) {
        double best = av[base];
        std::size_t best_k = 0;
        for (std::size_t k = 1; k < len; ++k) {
          const double v = av[base + k * inner];
          if (v > best) {  // ties keep the lowest index
            best = v;
            best_k = k;
          }
        }
        out[o * inner + in] = best;
        argmax[o * inner + in] = best_k;
      } else {
        double acc = 0.0;
        for (std::size_t k = 0; k < len; ++k) acc += av[base + k * inner];
        out[o * inner + in] = op == ReduceOp::Mean
                                  ? acc / static_cast<double>(len)
                                  : acc;
      }
    }
  }
  Tensor result = finish(std::move(out_shape), std::move(out), "reduce");
  Impl ai = OpBuilder::impl_of(a), oi = OpBuilder::impl_of(result);
  OpBuilder::record(
      tape, {ai, oi},
      [op, ai, oi, outer, inner, len, argmax = std::move(argmax)]() {
        const auto& g = oi->grad;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const double gi = g[o * inner + in];
            const std::size_t base = o * len * inner + in;
            switch (op) {
              case ReduceOp::Sum:
                for (std::size_t k = 0; k < len; ++k)
                  ai->grad[base + k * inner] += gi;
                break;
              case ReduceOp::Mean:
                for (std::size_t k = 0; k < len; ++k)
                  ai->grad[base + k * inner] +=
                      gi / static_cast<double>(len);
                break;
              case ReduceOp::Max:
                ai->grad[base + argmax[o * inner + in] * inner] += gi;
                break;
            }
          }
        }
      });
  return result;
}

Tensor reduce_all(ReduceOp op, const Tensor& a, Tape* tape) {
  const auto& av = a.values();
  const std::size_t n = av.size();
  double acc;
  std::size_t best_k = 0;
  if (op == ReduceOp::Max) {
    acc = av[0];
    for (std::size_t k = 1; k < n; ++k) {
      if (av[k] > acc) {
        acc = av[k];
        best_k = k;
      }
    }
  } else {
    acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += av[k];
    if (op == ReduceOp::Mean) acc /= static_cast<double>(n);
  }
  Tensor result = finish({1}, {acc}, "reduce_all");
  Impl ai = OpBuilder::impl_of(a), oi = OpBuilder::impl_of(result);
  OpBuilder::record(tape, {ai, oi}, [op, ai, oi, n, best_k]() {
    const double g = oi->grad[0];
    switch (op) {
      case ReduceOp::Sum:
        for (std::size_t k = 0; k < n; ++k) ai->grad[k] += g;
        break;
      case ReduceOp::Mean:
        for (std::size_t k = 0; k < n; ++k)
          ai->grad[k] += g / static_cast<double>(n);
        break;
      case ReduceOp::Max: ai->grad[best_k] += g; break;
    }
  });
  return result;
}

Tensor scale(const Tensor& a, double c, Tape* tape) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  Tensor result = finish(a.shape(), std::move(out), "scale");
  Impl ai = OpBuilder::impl_of(a), oi = OpBuilder::impl_of(result);
  OpBuilder::record(tape, {ai, oi}, [ai, oi, c]() {
    for (std::size_t i = 0; i < ai->grad.size(); ++i)
      ai->grad[i] += oi->grad[i] * c;
  });
  return result;
}

Tensor add_const(const Tensor& a, double c, Tape* tape) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + c;
  Tensor result = finish(a.shape(), std::move(out), "add_const");
  Impl ai = OpBuilder::impl_of(a), oi = OpBuilder::impl_of(result);
  OpBuilder::record(tape, {ai, oi}, [ai, oi]() {
    for (std::size_t i = 0; i < ai->grad.size(); ++i)
      ai->grad[i] += oi->grad[i];
  });
  return result;
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape, Tape* tape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (shape.empty() || n != a.size()) {
    throw ValidationError("cannot reshape " + shape_to_string(a.shape()) +
                          " to " + shape_to_string(shape));
  }
  Tensor result = OpBuilder::make(std::move(shape), a.values());
  Impl ai = OpBuilder::impl_of(a), oi = OpBuilder::impl_of(result);
  OpBuilder::record(tape, {ai, oi}, [ai, oi]() {
    for (std::size_t i = 0; i < ai->grad.size(); ++i)
      ai->grad[i] += oi->grad[i];
  });
  return result;
}

Tensor block_softmax(const Tensor& logits, std::size_t block, Tape* tape) {
  const auto& shape = logits.shape();
  if (shape.size() > 2) {
    throw ValidationError("block_softmax expects rank 1 or 2, got " +
                          shape_to_string(shape));
  }
  const std::size_t width = shape.back();
  const std::size_t rows = shape.size() == 2 ? shape[0] : 1;
  if (block == 0 || width % block != 0) {
    throw ValidationError("block size " + std::to_string(block) +
                          " does not divide row width " +
                          std::to_string(width));
  }
  const auto& lv = logits.values();
  std::vector<double> out(lv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t b = 0; b < width / block; ++b) {
      const std::size_t base = r * width + b * block;
      double mx = lv[base];
      for (std::size_t j = 1; j < block; ++j)
        mx = std::max(mx, lv[base + j]);
      double denom = 0.0;
      for (std::size_t j = 0; j < block; ++j) {
        out[base + j] = std::exp(lv[base + j] - mx);
        denom += out[base + j];
      }
      for (std::size_t j = 0; j < block; ++j) out[base + j] /= denom;
    }
  }
  Tensor result = finish(shape, std::move(out), "block_softmax");
  Impl li = OpBuilder::impl_of(logits), oi = OpBuilder::impl_of(result);
  OpBuilder::record(tape, {li, oi}, [li, oi, rows, width, block]() {
    // d l_j = s_j * (g_j - sum_k g_k s_k), per block.
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t b = 0; b < width / block; ++b) {
        const std::size_t base = r * width + b * block;
        double dot = 0.0;
        for (std::size_t j = 0; j < block; ++j)
          dot += oi->grad[base + j] * oi->values[base + j];
        for (std::size_t j = 0; j < block; ++j)
          li->grad[base + j] +=
              oi->values[base + j] * (oi->grad[base + j] - dot);
      }
    }
  });
  return result;
}

Tensor cross_entropy_mean(const Tensor& probs, const Tensor& targets,
                          Tape* tape) {
  if (probs.shape() != targets.shape()) {
    throw ValidationError("cross_entropy_mean shape mismatch: " +
                          shape_to_string(probs.shape()) + " vs " +
                          shape_to_string(targets.shape()));
  }
  constexpr double kClamp = 1e-12;
  const std::size_t rows = probs.rank() == 2 ? probs.shape()[0] : 1;
  const auto& pv = probs.values();
  const auto& tv = targets.values();
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    total -= tv[i] * std::log(std::max(pv[i], kClamp));
  }
  total /= static_cast<double>(rows);
  Tensor result = finish({1}, {total}, "cross_entropy_mean");
  Impl pi = OpBuilder::impl_of(probs), oi = OpBuilder::impl_of(result);
  OpBuilder::record(tape, {pi, oi}, [pi, oi, tv, rows]() {
    const double g = oi->grad[0] / static_cast<double>(rows);
    for (std::size_t i = 0; i < pi->values.size(); ++i) {
      if (pi->values[i] > kClamp) {
        pi->grad[i] -= g * tv[i] / pi->values[i];
      }
      // below the clamp the loss is locally constant in p
    }
  });
  return result;
}

double grad_check(const TensorFn& f, const Tensor& x, double eps) {
  if (eps <= 0.0) throw ValidationError("grad_check eps must be positive");
  Tensor probe(x.shape(), x.values());
  Tape tape;
  Tensor loss = f(probe, tape);
  if (loss.size() != 1) {
    throw ValidationError("grad_check requires f to return a scalar");
  }
  // A constant f never touches the tape; its analytic gradient is zero.
  if (tape.attached(loss)) tape.backward(loss);
  const std::vector<double> analytic =
      probe.has_grad() ? probe.grad()
                       : std::vector<double>(probe.size(), 0.0);

  auto eval_at = [&](const std::vector<double>& vals) {
    Tensor xt(x.shape(), vals);
    Tape t;
    return f(xt, t).scalar_value();
  };

  double max_err = 0.0;
  std::vector<double> vals = x.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double keep = vals[i];
    vals[i] = keep + eps;
    const double up = eval_at(vals);
    vals[i] = keep - eps;
    const double down = eval_at(vals);
    vals[i] = keep;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    max_err = std::max(max_err, std::abs(analytic[i] - numeric) / denom);
  }
  return max_err;
}

}  // namespace ssx
