#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "opinsum/sampler.hpp"

using namespace opinsum;

namespace {

// Unit u holds ids {10u+10, ..., 10u+10+len-1}.
IndexedCluster make_cluster(const std::vector<std::size_t>& lengths) {
  IndexedCluster c;
  c.id = "c";
  for (std::size_t u = 0; u < lengths.size(); ++u) {
    IndexedUnit unit;
    for (std::size_t t = 0; t < lengths[u]; ++t) {
      unit.ids.push_back(static_cast<WordId>(10 * u + 10 + t));
      TokenFeatures f;
      f.tfidf = static_cast<double>(u);
      unit.features.push_back(f);
    }
    c.units.push_back(unit);
  }
  return c;
}

std::vector<std::size_t> chosen(const ConcatenatedInput& z) { return z.source_units; }

}  // namespace

TEST_CASE("concatenation places one SEG between neighbours") {
  const IndexedCluster c = make_cluster({2, 1, 3});
  const std::vector<std::size_t> order = {2, 0, 1};
  const ConcatenatedInput z = concatenate_units(c, order);
  CHECK(z.ids == std::vector<WordId>{30, 31, 32, Vocabulary::kSeg, 10, 11, Vocabulary::kSeg, 20});
  CHECK(z.features.size() == z.ids.size());
  CHECK(z.features[3] == TokenFeatures{});
  CHECK(z.features[0].tfidf == 2.0);
  CHECK(z.spans == std::vector<std::pair<std::size_t, std::size_t>>{{0, 3}, {4, 6}, {7, 8}});
  CHECK(z.source_units == order);

  const std::vector<std::size_t> one = {1};
  const ConcatenatedInput single = concatenate_units(c, one);
  CHECK(single.ids == std::vector<WordId>{20});
  const std::vector<std::size_t> bad = {3};
  CHECK_THROWS_AS(concatenate_units(c, bad), std::invalid_argument);
}

TEST_CASE("test-time selection takes the top K by score") {
  const IndexedCluster c = make_cluster({1, 1, 1});
  const Vector scores = {0.1, 0.9, 0.5};
  CHECK(chosen(select_test_input(c, scores, 2)) == std::vector<std::size_t>{1, 2});
  CHECK(chosen(select_test_input(c, scores, 10)) == std::vector<std::size_t>{1, 2, 0});
  CHECK(chosen(select_test_input(c, Vector{0.5, 0.5, 0.5}, 2)) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("test-time selection on 66 units matches a sort oracle") {
  SeededRng rng(66);
  const std::size_t m = 66;
  std::vector<std::size_t> lengths(m, 1);
  const IndexedCluster c = make_cluster(lengths);
  for (int trial = 0; trial < 20; ++trial) {
    Vector scores(m);
    for (double& s : scores) s = static_cast<double>(rng.below(10)) / 10.0;
    std::vector<std::size_t> oracle(m);
    std::iota(oracle.begin(), oracle.end(), std::size_t{0});
    std::stable_sort(oracle.begin(), oracle.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    for (std::size_t k : {1, 5, 20, 66}) {
      const std::vector<std::size_t> top(oracle.begin(), oracle.begin() + static_cast<long>(k));
      CHECK(chosen(select_test_input(c, scores, k)) == top);
    }
  }
}

TEST_CASE("training sample returns distinct units ordered by score") {
  const IndexedCluster c = make_cluster({1, 2, 1, 3, 1});
  const Vector scores = {0.3, 0.0, 0.8, 0.5, 0.1};
  SeededRng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const ConcatenatedInput z = sample_training_input(c, scores, 3, rng);
    const std::vector<std::size_t> u = chosen(z);
    REQUIRE(u.size() == 3);
    std::vector<std::size_t> sorted = u;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    for (std::size_t i = 1; i < u.size(); ++i) CHECK(scores[u[i - 1]] >= scores[u[i]]);
    std::size_t expected_len = 2;
    for (std::size_t x : u) expected_len += c.units[x].ids.size();
    CHECK(z.ids.size() == expected_len);
  }
  CHECK(chosen(sample_training_input(c, scores, 9, rng)) == std::vector<std::size_t>{2, 3, 0, 4, 1});
}

TEST_CASE("training sample set probabilities match enumeration for [4,2,1,1]") {
  const IndexedCluster c = make_cluster({1, 1, 1, 1});
  const Vector w = {4, 2, 1, 1};
  const double total = 8.0;
  std::map<std::pair<std::size_t, std::size_t>, double> exact;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j) exact[{std::min(i, j), std::max(i, j)}] += w[i] / total * w[j] / (total - w[i]);

  SeededRng rng(1234);
  std::map<std::pair<std::size_t, std::size_t>, double> seen;
  const int draws = 40000;
  for (int d = 0; d < draws; ++d) {
    const std::vector<std::size_t> u = chosen(sample_training_input(c, w, 2, rng));
    seen[{std::min(u[0], u[1]), std::max(u[0], u[1])}] += 1.0;
  }
  double sum = 0.0;
  for (const auto& [pair, p] : exact) {
    sum += p;
    CHECK(std::abs(seen[pair] / draws - p) <= 0.01);
  }
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("zero scores are floored so every unit stays reachable") {
  const IndexedCluster c = make_cluster({1, 1});
  SeededRng rng(8);
  int second = 0;
  for (int d = 0; d < 1000; ++d) second += chosen(sample_training_input(c, Vector{1.0, 0.0}, 2, rng)).size() == 2;
  CHECK(second == 1000);
  const ConcatenatedInput z = sample_training_input(c, Vector{0.0, 0.0}, 1, rng);
  CHECK(z.source_units.size() == 1);
}

TEST_CASE("uniform sampling picks each unit half the time for M = 2, K = 1") {
  const IndexedCluster c = make_cluster({1, 1});
  SeededRng rng(50);
  int first = 0;
  const int draws = 20000;
  for (int d = 0; d < draws; ++d) first += chosen(uniform_training_input(c, 1, rng))[0] == 0;
  CHECK(std::abs(first / static_cast<double>(draws) - 0.5) <= 0.02);
}

TEST_CASE("equal scores make importance sampling coincide with uniform") {
  const IndexedCluster c = make_cluster({2, 1, 3, 1, 2});
  const Vector equal(5, 0.7);
  SeededRng a(91);
  SeededRng b(91);
  for (int d = 0; d < 100; ++d) {
    const ConcatenatedInput x = sample_training_input(c, equal, 3, a);
    const ConcatenatedInput y = uniform_training_input(c, 3, b);
    CHECK(x.ids == y.ids);
    CHECK(std::is_sorted(y.source_units.begin(), y.source_units.end()));
  }
}

TEST_CASE("sampling is reproducible for a fixed seed") {
  const IndexedCluster c = make_cluster({1, 1, 1, 1, 1, 1});
  const Vector scores = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  SeededRng a(5);
  SeededRng b(5);
  for (int d = 0; d < 50; ++d) CHECK(sample_training_input(c, scores, 3, a).ids == sample_training_input(c, scores, 3, b).ids);
}

TEST_CASE("mode dispatch and validation") {
  const IndexedCluster c = make_cluster({1, 1, 1});
  const Vector scores = {0.1, 0.9, 0.5};
  SeededRng rng(1);
  CHECK(chosen(training_input(SamplingMode::kTopK, c, scores, 2, rng)) == std::vector<std::size_t>{1, 2});
  CHECK(parse_sampling_mode("importance") == SamplingMode::kImportance);
  CHECK(parse_sampling_mode(to_string(SamplingMode::kUniform)) == SamplingMode::kUniform);
  CHECK_THROWS_AS(parse_sampling_mode("greedy"), std::invalid_argument);
  CHECK_THROWS_AS(sample_training_input(c, scores, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(select_test_input(c, Vector{0.1}, 1), std::invalid_argument);
  CHECK_THROWS_AS(select_test_input(IndexedCluster{}, Vector{}, 1), std::invalid_argument);
}

TEST_CASE("sampling with replacement makes exactly K independent draws") {
  const IndexedCluster c = make_cluster({1, 1, 1});
  const Vector scores = {3.0, 1.0, 0.0};
  SeededRng rng(11);
  const int trials = 20000;
  std::vector<double> counts(3, 0.0);
  bool saw_repeat = false;
  for (int t = 0; t < trials; ++t) {
    const std::vector<std::size_t> u = chosen(sample_training_input(c, scores, 5, rng, true));
    REQUIRE(u.size() == 5);
    CHECK(std::is_sorted(u.begin(), u.end()));  // descending score is ascending index here
    for (std::size_t i : u) counts[i] += 1.0;
    saw_repeat = saw_repeat || std::adjacent_find(u.begin(), u.end()) != u.end();
  }
  CHECK(saw_repeat);
  const double total = 4.0 + kScoreFloor;
  CHECK(std::abs(counts[0] / (5.0 * trials) - 3.0 / total) < 0.01);
  CHECK(std::abs(counts[1] / (5.0 * trials) - 1.0 / total) < 0.01);
  CHECK(counts[2] < 5.0);
}
