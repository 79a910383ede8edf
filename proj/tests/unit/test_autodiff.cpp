#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "ewcft/autodiff/finite_diff.hpp"
#include "ewcft/autodiff/graph.hpp"
#include "ewcft/util/rng.hpp"

using namespace ewcft;
using autodiff::Graph;
using autodiff::Shape;
using autodiff::Tensor;
using autodiff::Var;

namespace {

using Builder = std::function<Var(Graph&, const std::vector<Var>&)>;

Tensor random_tensor(util::Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Scalar probe sum(w ⊙ f(inputs)) with fixed random weights, so the check
// covers every output coordinate.
double probe(const Builder& f, const std::vector<Tensor>& inputs, const Tensor& weights,
             std::vector<Tensor>* grads = nullptr) {
  Graph g;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(g.parameter("x" + std::to_string(i), inputs[i]));
  Var out = f(g, vars);
  if (g.value(out).size() != 1) out = g.sum(g.mul(out, g.constant(weights)));
  const double value = g.value(out).item();
  if (grads) {
    const auto map = g.backward(out);
    grads->clear();
    for (std::size_t i = 0; i < inputs.size(); ++i) grads->push_back(map.at("x" + std::to_string(i)));
  }
  return value;
}

double max_gradient_error(const Builder& f, const std::vector<Tensor>& inputs, util::Rng& rng) {
  Graph shape_graph;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(shape_graph.variable(inputs[i]));
  const Tensor weights = random_tensor(rng, shape_graph.value(f(shape_graph, vars)).shape());
  std::vector<Tensor> analytic;
  probe(f, inputs, weights, &analytic);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto numeric = autodiff::finite_diff_gradient(
        [&](const Tensor& t) {
          auto moved = inputs;
          moved[i] = t;
          return probe(f, moved, weights);
        },
        inputs[i]);
    worst = std::max(worst, autodiff::max_relative_error(analytic[i].data(), numeric.data()));
  }
  return worst;
}

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("tensor construction and shape errors") {
    const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m.at(1, 2) == 6.0);
    CHECK(Tensor::scalar(4.5).item() == 4.5);
    CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
    Graph g;
    const Var a = g.variable(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)));
    const Var b = g.variable(Tensor::matrix(2, 2, std::vector<double>(4, 1.0)));
    CHECK_THROWS_AS(g.matmul(a, b), autodiff::ShapeError);
    CHECK_THROWS_AS(g.mul(a, b), autodiff::ShapeError);
    try {
      g.add(a, b);
      FAIL("expected ShapeError");
    } catch (const autodiff::ShapeError& e) {
      CHECK(e.lhs() == Shape{2, 3});
      CHECK(e.rhs() == Shape{2, 2});
    }
  }

  TEST_CASE("forward values of elementary ops") {
    Graph g;
    const Var a = g.variable(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    const Var b = g.variable(Tensor::matrix(2, 2, {5, 6, 7, 8}));
    CHECK(g.value(g.matmul(a, b)).data() == std::vector<double>{19, 22, 43, 50});
    CHECK(g.value(g.add(a, g.variable(Tensor::vector({10, 20})))).data() == std::vector<double>{11, 22, 13, 24});
    CHECK(g.value(g.sub(b, a)).data() == std::vector<double>{4, 4, 4, 4});
    CHECK(g.value(g.relu(g.sub(a, g.variable(Tensor::matrix(2, 2, {2, 2, 2, 2}))))).data() ==
          std::vector<double>{0, 0, 1, 2});
    CHECK(g.value(g.sum(a)).item() == 10.0);
    CHECK(g.value(g.scale(a, 0.5)).data() == std::vector<double>{0.5, 1, 1.5, 2});
    CHECK(g.value(g.concat(a, b)).shape() == Shape{2, 4});
    const Tensor& lsm = g.value(g.log_softmax(a));
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(std::exp(lsm.at(r, 0)) + std::exp(lsm.at(r, 1)) == doctest::Approx(1.0).epsilon(1e-14));
    }
  }

  TEST_CASE("embedding bag averages rows") {
    Graph g;
    const Var table = g.variable(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
    const std::uint32_t b0[] = {0, 2};
    const std::uint32_t b1[] = {1, 1, 1};
    const autodiff::TokenSpan bags[] = {b0, b1};
    CHECK(g.value(g.embedding_bag(table, bags)).data() == std::vector<double>{3, 4, 3, 4});
  }

  TEST_CASE("nll is the weighted mean of -logp at the targets") {
    Graph g;
    const Var lp = g.variable(Tensor::matrix(2, 2, {std::log(0.25), std::log(0.75), std::log(0.5), std::log(0.5)}));
    const std::size_t targets[] = {1, 0};
    CHECK(g.value(g.nll(lp, targets)).item() == doctest::Approx((-std::log(0.75) - std::log(0.5)) / 2));
    const double weights[] = {2.0, 0.0};
    CHECK(g.value(g.nll(lp, targets, weights)).item() == doctest::Approx(-std::log(0.75)));
  }

  TEST_CASE("every op's gradient matches central differences") {
    util::Rng rng(3);
    const auto m23 = [&] { return random_tensor(rng, {2, 3}); };
    const std::uint32_t b0[] = {0, 2, 2};
    const std::uint32_t b1[] = {3};
    const autodiff::TokenSpan bags[] = {b0, b1};
    const std::size_t targets[] = {2, 0};
    const double weights[] = {0.3, 1.7};
    struct Case {
      const char* name;
      Builder f;
      std::vector<Tensor> inputs;
    };
    const std::vector<Case> cases{
        {"matmul", [](Graph& g, const auto& v) { return g.matmul(v[0], v[1]); }, {m23(), random_tensor(rng, {3, 4})}},
        {"add", [](Graph& g, const auto& v) { return g.add(v[0], v[1]); }, {m23(), m23()}},
        {"add row broadcast", [](Graph& g, const auto& v) { return g.add(v[0], v[1]); }, {m23(), random_tensor(rng, {3})}},
        {"sub", [](Graph& g, const auto& v) { return g.sub(v[0], v[1]); }, {m23(), m23()}},
        {"mul", [](Graph& g, const auto& v) { return g.mul(v[0], v[1]); }, {m23(), m23()}},
        {"relu", [](Graph& g, const auto& v) { return g.relu(v[0]); },
         {Tensor::matrix(2, 3, {-0.7, 0.4, 0.9, -0.2, 0.3, -0.5})}},
        {"tanh", [](Graph& g, const auto& v) { return g.tanh(v[0]); }, {m23()}},
        {"embedding bag", [&](Graph& g, const auto& v) { return g.embedding_bag(v[0], bags); },
         {random_tensor(rng, {4, 3})}},
        {"concat", [](Graph& g, const auto& v) { return g.concat(v[0], v[1]); }, {m23(), random_tensor(rng, {2, 2})}},
        {"log softmax", [](Graph& g, const auto& v) { return g.log_softmax(v[0]); }, {m23()}},
        {"log softmax rank 1", [](Graph& g, const auto& v) { return g.log_softmax(v[0]); }, {random_tensor(rng, {4})}},
        {"nll", [&](Graph& g, const auto& v) { return g.nll(g.log_softmax(v[0]), targets); }, {m23()}},
        {"weighted nll", [&](Graph& g, const auto& v) { return g.nll(g.log_softmax(v[0]), targets, weights); },
         {m23()}},
        {"sum", [](Graph& g, const auto& v) { return g.sum(v[0]); }, {m23()}},
        {"scale", [](Graph& g, const auto& v) { return g.scale(v[0], -2.5); }, {m23()}},
        {"add scalar", [](Graph& g, const auto& v) { return g.add_scalar(v[0], 1.25); }, {m23()}},
        {"shared operand", [](Graph& g, const auto& v) { return g.mul(v[0], v[0]); }, {m23()}},
    };
    for (const auto& c : cases) {
      CAPTURE(c.name);
      CHECK(max_gradient_error(c.f, c.inputs, rng) <= 1e-7);
    }
  }

  TEST_CASE("detach blocks gradient flow") {
    Graph g;
    const Var x = g.parameter("x", Tensor::vector({1.0, 2.0}));
    const Var y = g.mul(x, g.detach(x));
    const auto grads = g.backward(g.sum(y));
    CHECK(grads.at("x").data() == std::vector<double>{1.0, 2.0});
  }

  TEST_CASE("repeated backward calls give identical gradients") {
    Graph g;
    const Var x = g.parameter("x", Tensor::matrix(2, 2, {0.1, -0.2, 0.3, 0.4}));
    const Var loss = g.sum(g.tanh(g.matmul(x, x)));
    const auto first = g.backward(loss);
    const auto second = g.backward(loss);
    CHECK(first.at("x") == second.at("x"));
  }

  TEST_CASE("backward requires a scalar") {
    Graph g;
    const Var x = g.parameter("x", Tensor::vector({1.0, 2.0}));
    CHECK_THROWS(g.backward(g.tanh(x)));
  }

  TEST_CASE("finite differences reject bad inputs") {
    CHECK_THROWS_AS(autodiff::finite_diff_gradient([](const Tensor&) { return 0.0; }, Tensor::vector({1.0}), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(autodiff::finite_diff_gradient([](const Tensor&) { return NAN; }, Tensor::vector({1.0})),
                    std::domain_error);
  }
}
