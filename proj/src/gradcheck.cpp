#include "ssoftmax/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ssoftmax/heads.hpp"
#include "ssoftmax/rng.hpp"
#include "ssoftmax/tensor.hpp"
#include "ssoftmax/train.hpp"

namespace ssx {

using nlohmann::json;

namespace {

constexpr double kGate = 1e-4;

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -2,
                     double hi = 2) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

double run_instances(std::size_t count, Rng& rng,
                     const std::function<double(Rng&)>& one) {
  double worst = 0.0;
  for (std::size_t i = 0; i < count; ++i) worst = std::max(worst, one(rng));
  return worst;
}

json entry(const std::string& name, double err, double gate = kGate) {
  return json{{"name", name}, {"max_rel_err", err}, {"pass", err < gate}};
}

}  // namespace

json grad_check_report(bool negative_control) {
  Rng rng(20240901);
  json checks = json::array();

  checks.push_back(entry(
      "matmul", run_instances(20, rng, [](Rng& r) {
        Tensor b = random_tensor({4, 2}, r);
        return grad_check(
            [&](const Tensor& x, Tape& t) {
              return reduce_all(ReduceOp::Sum, matmul(x, b, &t), &t);
            },
            random_tensor({3, 4}, r));
      })));

  checks.push_back(entry(
      "ewise_mul", run_instances(20, rng, [](Rng& r) {
        Tensor b = random_tensor({3, 3}, r);
        return grad_check(
            [&](const Tensor& x, Tape& t) {
              return reduce_all(ReduceOp::Sum, mul(x, b, &t), &t);
            },
            random_tensor({3, 3}, r));
      })));

  checks.push_back(entry(
      "broadcast_bias", run_instances(20, rng, [](Rng& r) {
        Tensor a = random_tensor({4, 3}, r);
        return grad_check(
            [&](const Tensor& x, Tape& t) {
              return reduce_all(ReduceOp::Sum,
                                mul(add(a, x, &t), add(a, x, &t), &t), &t);
            },
            random_tensor({3}, r));
      })));

  checks.push_back(entry(
      "unary_chain", run_instances(20, rng, [](Rng& r) {
        return grad_check(
            [](const Tensor& x, Tape& t) {
              return reduce_all(
                  ReduceOp::Sum,
                  unary(UnaryOp::Log, unary(UnaryOp::Exp, x, &t), &t), &t);
            },
            random_tensor({6}, r));
      })));

  checks.push_back(entry(
      "reduce_max", run_instances(20, rng, [](Rng& r) {
        return grad_check(
            [](const Tensor& x, Tape& t) {
              return reduce_all(ReduceOp::Sum,
                                reduce(ReduceOp::Max, x, 1, &t), &t);
            },
            random_tensor({4, 5}, r));
      })));

  checks.push_back(entry(
      "softmax_cross_entropy", run_instances(25, rng, [](Rng& r) {
        const std::size_t n = 6;
        std::vector<double> target = onehot_target(r.below(n), n);
        Tensor y({1, n}, target);
        return grad_check(
            [&](const Tensor& x, Tape& t) {
              return cross_entropy_mean(softmax_rows(x, &t), y, &t);
            },
            random_tensor({1, n}, r));
      })));

  checks.push_back(entry(
      "grouped_softmax_score_loss", run_instances(25, rng, [](Rng& r) {
        const std::size_t n = 3, g = 5;
        Rng yr = r.split(7);
        DgssConfig cfg;
        cfg.n_classes = n;
        cfg.g_levels = g;
        auto sup = build_supervision(yr.below(n), cfg, yr);
        Tensor y({1, n * g}, sup.cells);
        return grad_check(
            [&](const Tensor& x, Tape& t) {
              return score_loss_tensor(y, grouped_softmax_rows(x, g, &t),
                                       ScoreLossForm::Squared, &t);
            },
            random_tensor({1, n * g}, r));
      })));

  checks.push_back(entry(
      "weighted_scores", run_instances(20, rng, [](Rng& r) {
        const std::size_t n = 3, g = 4;
        return grad_check(
            [&](const Tensor& x, Tape& t) {
              Tensor s = grouped_softmax_rows(x, g, &t);
              Tensor w = weighted_scores_rows(s, n, g, &t);
              return reduce_all(ReduceOp::Sum, mul(w, w, &t), &t);
            },
            random_tensor({1, n * g}, r));
      })));

  checks.push_back(entry(
      "mlp_softmax_head", run_instances(15, rng, [](Rng& r) {
        ModelSpec spec;
        spec.input_dim = 5;
        spec.hidden = {7};
        spec.head = HeadKind::Softmax;
        spec.n_classes = 3;
        Rng init = r.split(11);
        Model m = init_model(spec, init);
        Tensor x = random_tensor({2, 5}, r);
        Tensor y({2, 3}, [&] {
          std::vector<double> t;
          for (int i = 0; i < 2; ++i) {
            auto row = onehot_target(r.below(3), 3);
            t.insert(t.end(), row.begin(), row.end());
          }
          return t;
        }());
        // check the gradient w.r.t. the first-layer weights
        return grad_check(
            [&](const Tensor& w0, Tape& t) {
              Tensor h = add(matmul(x, w0, &t), m.biases[0], &t);
              h = relu(h, &t);
              h = add(matmul(h, m.weights[1], &t), m.biases[1], &t);
              return cross_entropy_mean(softmax_rows(h, &t), y, &t);
            },
            m.weights[0]);
      })));

  checks.push_back(entry(
      "mlp_score_head", run_instances(15, rng, [](Rng& r) {
        ModelSpec spec;
        spec.input_dim = 5;
        spec.hidden = {6};
        spec.head = HeadKind::ScoreSoftmax;
        spec.n_classes = 3;
        spec.g_levels = 4;
        Rng init = r.split(13);
        Model m = init_model(spec, init);
        Tensor x = random_tensor({2, 5}, r);
        DgssConfig cfg;
        cfg.n_classes = 3;
        cfg.g_levels = 4;
        Rng yr = r.split(17);
        std::vector<double> t;
        for (int i = 0; i < 2; ++i) {
          auto sup = build_supervision(yr.below(3), cfg, yr);
          t.insert(t.end(), sup.cells.begin(), sup.cells.end());
        }
        Tensor y({2, 12}, std::move(t));
        return grad_check(
            [&](const Tensor& w0, Tape& tp) {
              Tensor h = add(matmul(x, w0, &tp), m.biases[0], &tp);
              h = relu(h, &tp);
              h = add(matmul(h, m.weights[1], &tp), m.biases[1], &tp);
              Tensor s = grouped_softmax_rows(h, 4, &tp);
              return score_loss_tensor(y, s, ScoreLossForm::Squared, &tp);
            },
            m.weights[0]);
      })));

  if (negative_control) {
    // Wrong on purpose: analytic gradient of sum(x^2) scaled by 1.05. The
    // harness must flag it.
    Rng r = rng.split(99);
    Tensor x = random_tensor({4}, r);
    Tape tape;
    Tensor loss = reduce_all(ReduceOp::Sum, mul(x, x, &tape), &tape);
    tape.backward(loss);
    double worst = 0.0;
    const auto& analytic = x.grad();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double wrong = analytic[i] * 1.05;
      const double numeric = 2.0 * x.values()[i];
      const double denom =
          std::max({std::abs(wrong), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(wrong - numeric) / denom);
    }
    checks.push_back(entry("negative_control (must fail)", worst));
  }

  bool all_pass = true;
  for (const auto& c : checks) all_pass = all_pass && c["pass"].get<bool>();
  return json{{"gate", kGate}, {"checks", checks}, {"all_pass", all_pass}};
}

bool grad_check_passed(const json& report) {
  return report.at("all_pass").get<bool>();
}

}  // namespace ssx
