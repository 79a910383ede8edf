#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ewcft/data/generators.hpp"
#include "ewcft/data/jsonl.hpp"
#include "helpers.hpp"

using namespace ewcft;
using namespace ewcft::data;

namespace {

GeneratorConfig small_config(std::uint64_t seed = 1) {
  GeneratorConfig g;
  g.seed = seed;
  g.n_instances = 3000;
  return g;
}

bool has_cue(const Instance& inst, const TokenInventory& inv, std::size_t label) {
  return std::count(inst.claim.begin(), inst.claim.end(), inv.cue(label)) > 0;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("vocabulary assigns dense ids in insertion order") {
    Vocabulary v;
    CHECK(v.add("a") == 0);
    CHECK(v.add("b") == 1);
    CHECK(v.add("a") == 0);
    CHECK(v.id("b") == 1);
    CHECK(v.token(1) == "b");
    CHECK_FALSE(v.find("c").has_value());
    CHECK_THROWS(v.id("c"));
  }

  TEST_CASE("dataset validates instances on insertion") {
    Dataset d(test::plain_vocab(4));
    d.add({"a", {0, 1}, {2}, 0});
    CHECK_THROWS_AS(d.add({"a", {0}, {1}, 0}), std::invalid_argument);
    CHECK_THROWS_AS(d.add({"b", {}, {1}, 0}), std::invalid_argument);
    CHECK_THROWS_AS(d.add({"c", {9}, {1}, 0}), std::invalid_argument);
    CHECK_THROWS_AS(d.add({"d", {0}, {1}, 3}), std::invalid_argument);
    CHECK(d.size() == 1);
  }

  TEST_CASE("merge concatenates and rejects mismatched vocabularies") {
    Dataset a(test::plain_vocab(4)), b(test::plain_vocab(4)), c(test::plain_vocab(5));
    a.add({"a", {0}, {1}, 0});
    b.add({"b", {2}, {3}, 1});
    const Dataset m = merge(a, b);
    REQUIRE(m.size() == 2);
    CHECK(m[0].id == "a");
    CHECK(m[1].id == "b");
    CHECK_THROWS_AS(merge(a, c), std::invalid_argument);
  }

  TEST_CASE("generators are bit-deterministic under a seed") {
    const auto g = small_config(5);
    const Dataset a = generate_biased_original(g);
    CHECK(a == generate_biased_original(g));
    CHECK_FALSE(a == generate_biased_original(small_config(6)));
    CHECK(generate_symmetric_counterfactual(a, 100, 3) == generate_symmetric_counterfactual(a, 100, 3));
    CHECK(generate_single_label_challenge(g) == generate_single_label_challenge(g));
  }

  TEST_CASE("biased original corpus: labels follow the evidence, cues follow the label") {
    const auto g = small_config();
    const TokenInventory inv(g);
    const Dataset d = generate_biased_original(g);
    std::size_t cued = 0;
    for (const auto& inst : d.instances()) {
      std::size_t topic = g.n_topics;
      for (auto t : inst.claim) {
        if (t < g.n_topics) topic = t;
      }
      REQUIRE(topic < g.n_topics);
      const bool kw = std::count(inst.evidence.begin(), inst.evidence.end(), inv.keyword(topic)) > 0;
      const bool ant = std::count(inst.evidence.begin(), inst.evidence.end(), inv.antonym(topic)) > 0;
      CHECK_FALSE((kw && ant));
      const std::size_t expected = kw ? kSupports : ant ? kRefutes : kNei;
      CHECK(inst.label == expected);
      for (std::size_t l = 0; l < 3; ++l) {
        if (l != inst.label) CHECK_FALSE(has_cue(inst, inv, l));
      }
      if (has_cue(inst, inv, inst.label)) ++cued;
      // The original corpus never uses alternate forms.
      for (auto t : inst.evidence) CHECK((t < inv.alt_keyword(0) || t >= inv.filler(0)));
    }
    CHECK(static_cast<double>(cued) / d.size() == doctest::Approx(g.bias_strength).epsilon(0.05));
  }

  TEST_CASE("symmetric counterfactuals pair each claim with both labels") {
    const Dataset base = generate_biased_original(small_config());
    const Dataset s = generate_symmetric_counterfactual(base, 200, 9);
    REQUIRE(s.size() == 400);
    std::set<TokenIds> claims;
    for (std::size_t i = 0; i < s.size(); i += 2) {
      CHECK(s[i].claim == s[i + 1].claim);
      CHECK(s[i].label == kSupports);
      CHECK(s[i + 1].label == kRefutes);
      TokenIds key = s[i].claim;
      std::sort(key.begin(), key.end());
      CHECK(claims.insert(key).second);
    }
    CHECK(claim_label_mutual_information(s) <= 1e-12);
    CHECK(s.vocab() == base.vocab());
  }

  TEST_CASE("symmetric generator needs a base with generator provenance") {
    Dataset bare(test::plain_vocab(10));
    CHECK_THROWS_AS(generate_symmetric_counterfactual(bare, 10, 1), std::invalid_argument);
    const Dataset base = generate_biased_original(small_config());
    CHECK_THROWS_AS(generate_symmetric_counterfactual(base, 0, 1), std::invalid_argument);
  }

  TEST_CASE("single-label challenge holds only REFUTES") {
    auto g = small_config();
    g.n_instances = 500;
    const Dataset d = generate_single_label_challenge(g);
    CHECK(d.size() == 500);
    CHECK(d.label_histogram() == std::vector<std::size_t>{0, 500, 0});
  }

  TEST_CASE("mutual information: biased corpus carries the cue, zero bias carries none") {
    auto g = small_config();
    g.n_instances = 20000;
    CHECK(claim_label_mutual_information(generate_biased_original(g)) >= 0.3);
    g.bias_strength = 0.0;
    CHECK(claim_label_mutual_information(generate_biased_original(g)) == doctest::Approx(0.0));
  }

  TEST_CASE("mutual information oracle on a hand-built dataset") {
    // Feature present exactly for label 0 with two balanced labels: 1 bit.
    Dataset d(Vocabulary({"cue_x", "w"}), {"A", "B"});
    d.add({"a", {0}, {1}, 0});
    d.add({"b", {1}, {1}, 1});
    d.add({"c", {0}, {1}, 0});
    d.add({"d", {1}, {1}, 1});
    CHECK(claim_label_mutual_information(d) == doctest::Approx(1.0));
    const TokenId none[] = {1};
    CHECK(claim_label_mutual_information(d, none) == doctest::Approx(1.0));
  }

  TEST_CASE("generator config validation") {
    GeneratorConfig g;
    g.bias_strength = 1.5;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = GeneratorConfig{};
    g.vocab_size = 4 * g.n_topics + 3;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = GeneratorConfig{};
    g.alt_form_rate = -0.1;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  }

  TEST_CASE("k-fold: every instance lands in exactly one validation fold") {
    for (std::size_t n : {10u, 17u, 101u}) {
      for (std::size_t k : {2u, 5u}) {
        const auto folds = kfold_indices(n, k, 3);
        REQUIRE(folds.size() == k);
        std::vector<int> seen(n, 0);
        for (const auto& f : folds) {
          CHECK(f.size() >= n / k);
          CHECK(f.size() <= n / k + 1);
          for (auto i : f) ++seen[i];
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
      }
    }
    util::Rng rng(1);
    const Dataset d = test::random_dataset(rng, 23, {6, 2, 2, 3});
    for (const auto& f : kfold(d, 4, 8)) CHECK(f.train.size() + f.validation.size() == 23);
    CHECK(kfold_indices(23, 4, 8) == kfold_indices(23, 4, 8));
    CHECK_THROWS_AS(kfold(d, 1, 8), std::invalid_argument);
    CHECK_THROWS_AS(kfold(d, 24, 8), std::invalid_argument);
  }

  TEST_CASE("JSON Lines round trip preserves the dataset") {
    const Dataset d = generate_symmetric_counterfactual(generate_biased_original(small_config()), 20, 4);
    std::stringstream buf;
    write_jsonl(d, buf);
    CHECK(read_jsonl(buf) == d);
  }

  TEST_CASE("JSON Lines without a vocab header rebuilds the vocabulary") {
    std::stringstream in(
        "{\"num_classes\": 2, \"labels\": [\"A\", \"B\"]}\n"
        "{\"id\": \"x\", \"claim\": [\"p\", \"q\"], \"evidence\": [\"r\"], \"label\": \"B\"}\n");
    const Dataset d = read_jsonl(in);
    REQUIRE(d.size() == 1);
    CHECK(d.vocab().tokens() == std::vector<std::string>{"p", "q", "r"});
    CHECK(d[0].label == 1);
  }

  TEST_CASE("malformed JSON Lines report the line") {
    std::stringstream bad_label(
        "{\"num_classes\": 2, \"labels\": [\"A\", \"B\"]}\n"
        "{\"id\": \"x\", \"claim\": [\"p\"], \"evidence\": [\"r\"], \"label\": \"C\"}\n");
    try {
      read_jsonl(bad_label);
      FAIL("expected DataFormatError");
    } catch (const DataFormatError& e) {
      CHECK(e.line() == 2);
    }
    std::stringstream not_json("{\"num_classes\": 2, \"labels\": [\"A\", \"B\"]}\nnot json\n");
    CHECK_THROWS_AS(read_jsonl(not_json), DataFormatError);
  }
}
