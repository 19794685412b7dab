#include "opinsum/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace opinsum {

SamplingMode parse_sampling_mode(const std::string& name) {
  if (name == "importance") return SamplingMode::kImportance;
  if (name == "uniform") return SamplingMode::kUniform;
  if (name == "topk") return SamplingMode::kTopK;
  throw std::invalid_argument("unknown sampling mode '" + name + "' (expected importance|uniform|topk)");
}

std::string to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::kImportance: return "importance";
    case SamplingMode::kUniform: return "uniform";
    case SamplingMode::kTopK: return "topk";
  }
  return "importance";
}

ConcatenatedInput concatenate_units(const IndexedCluster& cluster, std::span<const std::size_t> units) {
  ConcatenatedInput z;
  for (std::size_t u : units) {
    if (u >= cluster.units.size()) throw std::invalid_argument("concatenate_units: unit index out of range");
    const IndexedUnit& unit = cluster.units[u];
    if (!z.ids.empty()) {
      z.ids.push_back(Vocabulary::kSeg);
      z.features.emplace_back();
    }
    const std::size_t begin = z.ids.size();
    z.ids.insert(z.ids.end(), unit.ids.begin(), unit.ids.end());
    z.features.insert(z.features.end(), unit.features.begin(), unit.features.end());
    z.spans.emplace_back(begin, z.ids.size());
    z.source_units.push_back(u);
  }
  return z;
}

namespace {

void check_inputs(const IndexedCluster& cluster, std::span<const double> scores, std::size_t k) {
  if (k < 1) throw std::invalid_argument("sample size K must be >= 1");
  if (cluster.units.empty()) throw std::invalid_argument("cluster has no units");
  if (scores.size() != cluster.units.size())
    throw std::invalid_argument("cluster '" + cluster.id + "' has " + std::to_string(cluster.units.size()) +
                                " units but " + std::to_string(scores.size()) + " scores");
}

void order_by_score(std::vector<std::size_t>& units, std::span<const double> scores) {
  std::sort(units.begin(), units.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
}

}  // namespace

ConcatenatedInput sample_training_input(const IndexedCluster& cluster, std::span<const double> scores,
                                        std::size_t k, SeededRng& rng, bool with_replacement) {
  check_inputs(cluster, scores, k);
  Vector weights(scores.begin(), scores.end());
  for (double& w : weights) w = std::max(w, kScoreFloor);
  const std::size_t count = with_replacement ? k : std::min(k, cluster.units.size());
  std::vector<std::size_t> drawn = multinomial_draw(weights, count, rng, !with_replacement);
  order_by_score(drawn, scores);
  return concatenate_units(cluster, drawn);
}

ConcatenatedInput select_test_input(const IndexedCluster& cluster, std::span<const double> scores,
                                    std::size_t k) {
  check_inputs(cluster, scores, k);
  std::vector<std::size_t> order(cluster.units.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  order_by_score(order, scores);
  order.resize(std::min(k, order.size()));
  return concatenate_units(cluster, order);
}

ConcatenatedInput uniform_training_input(const IndexedCluster& cluster, std::size_t k, SeededRng& rng,
                                         bool with_replacement) {
  const Vector equal(cluster.units.size(), 1.0);
  return sample_training_input(cluster, equal, k, rng, with_replacement);
}

ConcatenatedInput training_input(SamplingMode mode, const IndexedCluster& cluster,
                                 std::span<const double> scores, std::size_t k, SeededRng& rng,
                                 bool with_replacement) {
  switch (mode) {
    case SamplingMode::kImportance: return sample_training_input(cluster, scores, k, rng, with_replacement);
    case SamplingMode::kUniform: return uniform_training_input(cluster, k, rng, with_replacement);
    case SamplingMode::kTopK: return select_test_input(cluster, scores, k);
  }
  throw std::invalid_argument("unknown sampling mode");
}

}  // namespace opinsum
