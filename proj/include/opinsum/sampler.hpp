#pragma once

// Builds the single SEG-delimited encoder input from a cluster's text units.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "opinsum/indexing.hpp"
#include "opinsum/numkit.hpp"

namespace opinsum {

struct ConcatenatedInput {
  std::vector<WordId> ids;
  std::vector<TokenFeatures> features;
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // [begin, end) per unit
  std::vector<std::size_t> source_units;
};

enum class SamplingMode { kImportance, kUniform, kTopK };
SamplingMode parse_sampling_mode(const std::string& name);
std::string to_string(SamplingMode mode);

inline constexpr double kScoreFloor = 1e-6;
inline constexpr std::size_t kDefaultSampleSize = 5;

/// Joins the given units in order with one SEG between neighbours.
ConcatenatedInput concatenate_units(const IndexedCluster& cluster, std::span<const std::size_t> units);

/// Draws min(K, M) distinct units with probability proportional to the
/// scores clamped at kScoreFloor, then orders them by descending score.
/// With replacement, exactly K draws are made and repeats are kept.
ConcatenatedInput sample_training_input(const IndexedCluster& cluster, std::span<const double> scores,
                                        std::size_t k, SeededRng& rng, bool with_replacement = false);
/// Deterministic top-min(K, M) by score (ties by unit index), descending.
ConcatenatedInput select_test_input(const IndexedCluster& cluster, std::span<const double> scores,
                                    std::size_t k);
/// Uniform draw of min(K, M) distinct units, kept in unit order.
ConcatenatedInput uniform_training_input(const IndexedCluster& cluster, std::size_t k, SeededRng& rng,
                                         bool with_replacement = false);

/// Dispatch on the training-time sampling mode.
ConcatenatedInput training_input(SamplingMode mode, const IndexedCluster& cluster,
                                 std::span<const double> scores, std::size_t k, SeededRng& rng,
                                 bool with_replacement = false);

}  // namespace opinsum
