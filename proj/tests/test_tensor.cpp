#include <doctest.h>

#include <cmath>

#include "ssoftmax/dgss.hpp"
#include "ssoftmax/error.hpp"
#include "ssoftmax/heads.hpp"
#include "ssoftmax/rng.hpp"
#include "ssoftmax/tensor.hpp"

using namespace ssx;

namespace {

Tensor rand_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -2.0,
                   double hi = 2.0) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("tensor construction") {
  Tensor t({2, 2}, {1, 2, 3, 4});
  CHECK(t.values()[1 * 2 + 0] == 3);  // row-major (1,0)

  Tensor z({3}, {0, 0, 0});
  CHECK(z.size() == 3);

  CHECK_THROWS_AS(Tensor({2}, {1.0, std::nan("")}), NumericError);
  CHECK_THROWS_AS(Tensor({2}, {1.0, 2.0, 3.0}), ValidationError);
  CHECK_THROWS_WITH_AS(Tensor({4}, {1.0}),
                       "tensor shape [4] implies 4 values, got 1",
                       ValidationError);
}

TEST_CASE("matmul forward") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor b({2, 2}, {5, 6, 7, 8});
  CHECK(matmul(eye, b).values() == b.values());

  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor ones({2, 1}, {1, 1});
  auto r = matmul(a, ones).values();
  CHECK(r[0] == 3);
  CHECK(r[1] == 7);

  CHECK_THROWS_AS(matmul(a, Tensor({3, 1}, {1, 1, 1})), ValidationError);
}

TEST_CASE("matmul gradient vs finite differences") {
  Rng rng(11);
  Tensor b = rand_tensor({4, 2}, rng);
  const double err = grad_check(
      [&](const Tensor& x, Tape& t) {
        return reduce_all(ReduceOp::Sum, matmul(x, b, &t), &t);
      },
      rand_tensor({3, 4}, rng));
  CHECK(err < 1e-6);
}

TEST_CASE("matmul associativity") {
  Rng rng(5);
  Tensor a = rand_tensor({3, 4}, rng);
  Tensor b = rand_tensor({4, 2}, rng);
  Tensor c = rand_tensor({2, 5}, rng);
  auto left = matmul(matmul(a, b), c).values();
  auto right = matmul(a, matmul(b, c)).values();
  for (std::size_t i = 0; i < left.size(); ++i) {
    CHECK(std::abs(left[i] - right[i]) < 1e-10);
  }
}

TEST_CASE("ewise basics") {
  Tensor x({3}, {1, 2, 3});
  CHECK(add(x, Tensor::zeros({3})).values() == x.values());
  CHECK_THROWS_AS(add(x, Tensor({2}, {1, 1})), ValidationError);

  // d(x*x)/dx = 2x
  Tape tape;
  Tensor y = mul(x, x, &tape);
  tape.backward(reduce_all(ReduceOp::Sum, y, &tape));
  CHECK(x.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("broadcast bias gradient is column sums of upstream grad") {
  Rng rng(17);
  Tensor a = rand_tensor({4, 3}, rng);
  Tensor bias = rand_tensor({3}, rng);

  // analytic grad via tape
  Tape tape;
  Tensor out = add(a, bias, &tape);
  Tensor weights = rand_tensor({4, 3}, rng);
  tape.backward(reduce_all(ReduceOp::Sum, mul(out, weights, &tape), &tape));
  for (std::size_t j = 0; j < 3; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < 4; ++i) col += weights.values()[i * 3 + j];
    CHECK(bias.grad()[j] == doctest::Approx(col).epsilon(1e-12));
  }

  // against finite differences
  const double err = grad_check(
      [&](const Tensor& x, Tape& t) {
        return reduce_all(ReduceOp::Sum, mul(add(a, x, &t), weights, &t), &t);
      },
      bias);
  CHECK(err < 1e-6);
}

TEST_CASE("unary ops") {
  Tensor x({3}, {-1, 0, 2});
  CHECK(relu(x).values() == std::vector<double>{0, 0, 2});

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double v = rng.uniform(1e-6, 10.0);
    Tensor t({1}, {v});
    CHECK(unary(UnaryOp::Exp, unary(UnaryOp::Log, t)).scalar_value() ==
          doctest::Approx(v).epsilon(1e-12));
  }

  // relu gradient at exactly 0 is 0
  Tensor z({1}, {0.0});
  Tape tape;
  Tensor y = relu(z, &tape);
  tape.backward(reduce_all(ReduceOp::Sum, y, &tape));
  CHECK(z.grad()[0] == 0.0);

  CHECK_THROWS_AS(unary(UnaryOp::Log, Tensor({1}, {0.0})), ValidationError);
  CHECK_THROWS_AS(unary(UnaryOp::Sqrt, Tensor({1}, {-1.0})), ValidationError);
}

TEST_CASE("reduce") {
  Tensor ones({2, 3}, std::vector<double>(6, 1.0));
  CHECK(reduce(ReduceOp::Sum, ones, 1).values() == std::vector<double>{3, 3});
  CHECK(reduce(ReduceOp::Mean, Tensor({2}, {2, 4}), 0).scalar_value() == 3.0);
  CHECK_THROWS_AS(reduce(ReduceOp::Sum, ones, 2), ValidationError);

  // max tie routes gradient to the lowest index
  Tensor tie({2}, {5, 5});
  Tape tape;
  Tensor m = reduce(ReduceOp::Max, tie, 0, &tape);
  tape.backward(m);
  CHECK(tie.grad() == std::vector<double>{1, 0});
}

TEST_CASE("backward contract") {
  Tensor x({3}, {1, 2, 3});
  {
    Tape tape;
    Tensor loss = reduce_all(ReduceOp::Sum, scale(x, 1.0, &tape), &tape);
    tape.backward(loss);
    CHECK(x.grad() == std::vector<double>{1, 1, 1});
    CHECK_THROWS_AS(tape.backward(loss), ValidationError);  // no reruns
  }
  {
    // loss identically zero (x * 0): all grads zero
    Tape tape;
    Tensor loss = reduce_all(ReduceOp::Sum, scale(x, 0.0, &tape), &tape);
    tape.backward(loss);
    CHECK(x.grad() == std::vector<double>{0, 0, 0});
  }
  {
    // tensors on the tape but not feeding the loss get zero grads
    Tape tape;
    Tensor dead = scale(x, 3.0, &tape);
    Tensor loss = reduce_all(ReduceOp::Sum, scale(x, 2.0, &tape), &tape);
    tape.backward(loss);
    CHECK(dead.grad() == std::vector<double>{0, 0, 0});
    CHECK(x.grad() == std::vector<double>{2, 2, 2});
  }
  {
    Tape tape;
    Tensor vec = scale(x, 1.0, &tape);
    CHECK_THROWS_AS(tape.backward(vec), ValidationError);  // non-scalar
    Tensor detached = Tensor::scalar(1.0);
    CHECK_THROWS_AS(tape.backward(detached), ValidationError);
  }
}

TEST_CASE("two-layer perceptron gradients match finite differences") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor w1 = rand_tensor({4, 6}, rng);
    Tensor b1 = rand_tensor({6}, rng);
    Tensor w2 = rand_tensor({6, 2}, rng);
    Tensor x = rand_tensor({3, 4}, rng);
    auto net = [&](const Tensor& w, Tape& t) {
      Tensor h = relu(add(matmul(x, w, &t), b1, &t), &t);
      return reduce_all(ReduceOp::Sum, matmul(h, w2, &t), &t);
    };
    CHECK(grad_check(net, w1) < 1e-4);
  }
}

TEST_CASE("grad_check oracle behaviour") {
  // f(x) = sum(x^2), analytic 2x vs numeric
  const double err = grad_check(
      [](const Tensor& x, Tape& t) {
        return reduce_all(ReduceOp::Sum, mul(x, x, &t), &t);
      },
      Tensor({2}, {1, 2}));
  CHECK(err < 1e-8);

  // constant f: both gradients zero, error 0
  const double cerr = grad_check(
      [](const Tensor&, Tape&) { return Tensor::scalar(5.0); },
      Tensor({2}, {1, 2}));
  CHECK(cerr == 0.0);

  // the module's acceptance gate: score_loss of grouped softmax
  Rng rng(31);
  DgssConfig cfg;
  cfg.n_classes = 3;
  cfg.g_levels = 5;
  Rng yr = rng.split(1);
  auto sup = build_supervision(1, cfg, yr);
  Tensor y({1, 15}, sup.cells);
  const double gerr = grad_check(
      [&](const Tensor& logits, Tape& t) {
        Tensor s = grouped_softmax_rows(logits, 5, &t);
        return score_loss_tensor(y, s, ScoreLossForm::Squared, &t);
      },
      rand_tensor({1, 15}, rng));
  CHECK(gerr < 1e-4);
}

TEST_CASE("random composite computations pass grad_check") {
  Rng rng(41);
  for (int i = 0; i < 100; ++i) {
    Tensor a = rand_tensor({2, 3}, rng);
    const double err = grad_check(
        [&](const Tensor& x, Tape& t) {
          Tensor s = add(mul(x, x, &t), a, &t);
          Tensor e = unary(UnaryOp::Exp, scale(s, 0.3, &t), &t);
          return reduce_all(ReduceOp::Mean, e, &t);
        },
        rand_tensor({2, 3}, rng));
    CHECK(err < 1e-4);
  }
}

TEST_CASE("backward is deterministic bitwise") {
  Rng rng(59);
  Tensor w = rand_tensor({6, 4}, rng);
  Tensor x = rand_tensor({5, 6}, rng);
  auto run = [&]() {
    Tape tape;
    Tensor h = relu(matmul(x, w, &tape), &tape);
    tape.backward(reduce_all(ReduceOp::Sum, mul(h, h, &tape), &tape));
    return w.grad();
  };
  const auto g1 = run();
  const auto g2 = run();
  CHECK(g1 == g2);
}
