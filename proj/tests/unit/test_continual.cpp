#include <cmath>

#include "doctest.h"
#include "ewcft/continual/regularizer.hpp"
#include "helpers.hpp"

using namespace ewcft;
using namespace ewcft::continual;
using autodiff::Graph;
using autodiff::Tensor;
using autodiff::Var;

namespace {

const model::ModelDims kDims{10, 3, 4, 3};

ParameterSnapshot snap_of(ParameterArrays v) { return ParameterSnapshot(std::move(v)); }

// Penalty value and gradients recorded on a graph over leaves with `theta`'s values.
std::pair<double, autodiff::GradientMap> graph_penalty(const ParameterArrays& theta, const ParameterSnapshot& anchor,
                                                        const FisherDiagonal* fisher, double lambda) {
  Graph g;
  std::vector<Var> leaves;
  for (const auto& [id, v] : theta) leaves.push_back(g.parameter(id, Tensor::vector(v)));
  const Var p = fisher ? elastic_penalty(g, leaves, anchor, *fisher, lambda) : l2_penalty(g, leaves, anchor, lambda);
  const double value = g.value(p).item();
  return {value, g.backward(p)};
}

}  // namespace

TEST_SUITE("continual") {
  TEST_CASE("penalty values on hand-computed examples") {
    const ParameterArrays theta{{"w", {1.0, 2.0}}};
    const auto anchor = snap_of({{"w", {0.0, 0.0}}});
    const FisherDiagonal fisher({{"w", {1.0, 1.0}}}, 1, "test");
    // 0.6·(1 + 4) = 3 and 1·(1 + 0.25·4) = 2
    const FisherDiagonal quarter({{"w", {1.0, 0.25}}}, 1, "test");
    CHECK(elastic_penalty(theta, anchor, fisher, 1.2) == doctest::Approx(3.0));
    CHECK(elastic_penalty(theta, anchor, quarter, 2.0) == doctest::Approx(2.0));
    CHECK(l2_penalty(theta, anchor, 1.2) == doctest::Approx(3.0));
    CHECK(graph_penalty(theta, anchor, &fisher, 1.2).first == doctest::Approx(3.0));
  }

  TEST_CASE("zero lambda gives exactly zero penalty and gradient") {
    util::Rng rng(4);
    const model::PairClassifier m(kDims, 1), other(kDims, 2);
    const auto anchor = snapshot(other);
    const auto theta = parameter_arrays(m);
    const auto [value, grads] = graph_penalty(theta, anchor, nullptr, 0.0);
    CHECK(value == 0.0);
    for (const auto& [id, g] : grads) {
      for (double x : g.values()) CHECK(x == 0.0);
    }
    CHECK(elastic_penalty(theta, anchor, unit_fisher(anchor), 0.0) == 0.0);
  }

  TEST_CASE("EWC with a unit Fisher equals L2 bit for bit") {
    const model::PairClassifier m(kDims, 1), other(kDims, 2);
    const auto anchor = snapshot(other);
    const auto theta = parameter_arrays(m);
    const auto fisher = unit_fisher(anchor);
    for (double lambda : {0.0, 1e-3, 0.7, 55.0}) {
      CHECK(elastic_penalty(theta, anchor, fisher, lambda) == l2_penalty(theta, anchor, lambda));
      const auto [ve, ge] = graph_penalty(theta, anchor, &fisher, lambda);
      const auto [vl, gl] = graph_penalty(theta, anchor, nullptr, lambda);
      CHECK(ve == vl);
      for (const auto& [id, g] : ge) CHECK(g.data() == gl.at(id).data());
    }
  }

  TEST_CASE("penalty is linear in lambda and zero at the anchor") {
    const model::PairClassifier m(kDims, 1), other(kDims, 2);
    const auto anchor = snapshot(other);
    const auto theta = parameter_arrays(m);
    const auto fisher = unit_fisher(anchor);
    const double p1 = elastic_penalty(theta, anchor, fisher, 1.0);
    CHECK(p1 > 0.0);
    CHECK(elastic_penalty(theta, anchor, fisher, 3.5) == doctest::Approx(3.5 * p1).epsilon(1e-12));
    CHECK(elastic_penalty(anchor.values(), anchor, fisher, 9.0) == 0.0);
  }

  TEST_CASE("penalty gradient is lambda F (theta - anchor)") {
    util::Rng rng(8);
    ParameterArrays theta{{"a", {}}, {"b", {}}}, star{{"a", {}}, {"b", {}}}, f{{"a", {}}, {"b", {}}};
    for (auto* m : {&theta, &star}) {
      for (auto& [id, v] : *m) {
        v.resize(id == "a" ? 5 : 3);
        for (auto& x : v) x = rng.uniform(-2.0, 2.0);
      }
    }
    for (auto& [id, v] : f) {
      v.resize(id == "a" ? 5 : 3);
      for (auto& x : v) x = rng.uniform(0.0, 3.0);
    }
    const double lambda = 1.7;
    const FisherDiagonal fisher(f, 1, "test");
    const auto [value, grads] = graph_penalty(theta, snap_of(star), &fisher, lambda);
    double expected = 0.0;
    for (const auto& [id, v] : theta) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double diff = v[i] - star.at(id)[i];
        expected += 0.5 * lambda * f.at(id)[i] * diff * diff;
        CHECK(grads.at(id)[i] == doctest::Approx(lambda * f.at(id)[i] * diff).epsilon(1e-12));
      }
    }
    CHECK(value == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("Fisher matches a brute-force per-instance oracle") {
    util::Rng rng(21);
    const auto d = test::random_dataset(rng, 30, kDims);
    const model::PairClassifier m(kDims, 3);
    const std::size_t n = 12;
    const std::uint64_t seed = 77;
    const auto fisher = estimate_fisher_diagonal(m, d, n, seed);
    CHECK(fisher.sample_size() == n);

    ParameterArrays oracle;
    for (const auto& p : m.parameters()) oracle[p.id].assign(p.value.size(), 0.0);
    for (std::size_t idx : fisher_sample_indices(d.size(), n, seed)) {
      Graph g;
      const data::Instance* one[] = {&d[idx]};
      const Var logp = m.forward(g, model::Batch(one));
      const std::size_t gold[] = {d[idx].label};
      const auto grads = g.backward(g.nll(logp, gold));
      for (const auto& [id, gr] : grads) {
        for (std::size_t i = 0; i < gr.size(); ++i) oracle[id][i] += gr[i] * gr[i] / static_cast<double>(n);
      }
    }
    for (const auto& [id, v] : oracle) {
      const auto& got = fisher.at(id);
      REQUIRE(got.size() == v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(got[i] >= 0.0);
        CHECK(got[i] == doctest::Approx(v[i]).epsilon(1e-9).scale(1e-12));
      }
    }
  }

  TEST_CASE("Fisher estimation is deterministic and validates its inputs") {
    util::Rng rng(2);
    const auto d = test::random_dataset(rng, 15, kDims);
    const model::PairClassifier m(kDims, 3);
    CHECK(estimate_fisher_diagonal(m, d, 10, 5) == estimate_fisher_diagonal(m, d, 10, 5));
    CHECK(fisher_sample_indices(15, 10, 5) == fisher_sample_indices(15, 10, 5));
    for (auto i : fisher_sample_indices(15, 100, 5)) CHECK(i < 15);
    CHECK_THROWS_AS(estimate_fisher_diagonal(m, d, 0, 5), std::invalid_argument);
    CHECK_THROWS_AS(estimate_fisher_diagonal(m, data::Dataset(test::plain_vocab(10)), 5, 5), std::invalid_argument);
  }

  TEST_CASE("Fisher rejects negative and non-finite values") {
    CHECK_THROWS_AS(FisherDiagonal({{"w", {-1.0}}}, 1, "x"), std::invalid_argument);
    CHECK_THROWS_AS(FisherDiagonal({{"w", {std::nan("")}}}, 1, "x"), std::invalid_argument);
  }

  TEST_CASE("shape mismatches are reported") {
    const auto anchor = snap_of({{"w", {0.0, 0.0}}});
    CHECK_THROWS_AS(l2_penalty(ParameterArrays{{"w", {1.0}}}, anchor, 1.0), autodiff::ShapeError);
    CHECK_THROWS_AS(l2_penalty(ParameterArrays{{"v", {1.0, 2.0}}}, anchor, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(check_compatible({{"w", {1.0}}}, {{"w", {1.0}}, {"x", {1.0}}}, "test"), autodiff::ShapeError);
    CHECK_NOTHROW(check_compatible({{"w", {1.0}}}, {{"w", {3.0}}}, "test"));
  }

  TEST_CASE("snapshot is a deep copy with a stable checksum") {
    model::PairClassifier m(kDims, 1);
    const auto s = snapshot(m);
    const auto before = checksum(s.values());
    CHECK(before.size() == 16);
    m.parameters()[0].value[0] += 1.0;
    CHECK(checksum(s.values()) == before);
    CHECK(checksum(parameter_arrays(m)) != before);
    CHECK(s.element_count() == m.parameter_count());
  }

  TEST_CASE("regularizer config parsing and validation") {
    CHECK(parse_regularizer_kind("ewc") == RegularizerKind::kEwc);
    CHECK(to_string(RegularizerKind::kL2) == "l2");
    CHECK_THROWS_AS(parse_regularizer_kind("l1"), std::invalid_argument);
    RegularizerConfig c{RegularizerKind::kEwc, -1.0, 10, true};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {RegularizerKind::kEwc, 1.0, 0, true};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
}
