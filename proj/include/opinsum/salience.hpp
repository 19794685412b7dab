#pragma once

// Text-unit importance estimation: per-unit features, overlap-based gold
// labels, ridge regression with a pairwise preference regularizer, and the
// length / centroid baseline rankers.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "opinsum/numkit.hpp"
#include "opinsum/textcorpus.hpp"

namespace opinsum {

/// Ordered feature names shared by every unit of one fit.
class FeatureRegistry {
 public:
  static constexpr std::size_t kDefaultUnigramCount = 500;

  FeatureRegistry() = default;
  FeatureRegistry(std::vector<std::string> lexicon_categories, std::vector<std::string> unigrams);

  /// Collects lexicon categories and the top-U content unigrams of the
  /// training units (frequency descending, then lexicographic).
  static FeatureRegistry build(const Corpus& train, const StopwordSet& stopwords,
                               const Lexicons& lexicons,
                               std::size_t unigram_count = kDefaultUnigramCount);

  bool initialized() const { return !names_.empty(); }
  std::size_t dimension() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& lexicon_categories() const { return categories_; }
  const std::vector<std::string>& unigrams() const { return unigrams_; }
  std::uint64_t hash() const;

  std::size_t category_offset() const;
  std::size_t sentiment_offset() const;
  std::size_t unigram_offset() const;

  /// Inverse of names(): rebuilds a registry from its name list.
  static FeatureRegistry from_names(const std::vector<std::string>& names);

 private:
  std::vector<std::string> categories_;
  std::vector<std::string> unigrams_;
  std::vector<std::string> names_;
};

/// Dense-block indices into a feature vector.
namespace feature {
inline constexpr std::size_t kNumWords = 0;
inline constexpr std::size_t kNumPosTags = 1;
inline constexpr std::size_t kNumNamedEntities = 2;
inline constexpr std::size_t kCentroidness = 3;
inline constexpr std::size_t kAvgTfIdf = 4;
inline constexpr std::size_t kMaxTfIdf = 5;
inline constexpr std::size_t kFixedCount = 6;
}  // namespace feature

/// Everything feature extraction reads besides the unit itself.
struct FeatureContext {
  FeatureRegistry registry;
  Lexicons lexicons;
  StopwordSet stopwords;
  TfIdf tfidf;
};

/// Overlap of content-word types with the summary, normalized by the
/// cluster maximum (all-zero clusters stay zero).
Vector gold_scores(const Cluster& cluster, const StopwordSet& stopwords);

/// Cosine between the unit's TF-IDF vector and the mean TF-IDF vector of the
/// cluster's units.
double centroidness(const TextUnit& unit, const Cluster& cluster, const TfIdf& tfidf);
double centroidness(std::size_t unit_index, const std::vector<TermWeights>& cluster_weights);

Vector extract_features(const TextUnit& unit, const Cluster& cluster, const FeatureContext& ctx);
/// Features for every unit of a cluster (computes the cluster centroid once).
std::vector<Vector> extract_cluster_features(const Cluster& cluster, const FeatureContext& ctx);

struct PreferenceDesign {
  Matrix units;        // n x d, one feature row per unit
  Vector labels;       // n
  Matrix pairs;        // one row r_p - r_q per preference pair
  Vector pair_targets;  // all ones
};

/// `features[c][k]` and `labels[c][k]` for unit k of cluster c. Pairs are
/// formed within each cluster for l_p > 0 and l_q = 0.
PreferenceDesign build_design(const std::vector<std::vector<Vector>>& features,
                              const std::vector<Vector>& labels);

struct SalienceModel {
  Vector weights;
  double lambda = 0.0;
  double beta = 1.0;
  std::uint64_t registry_hash = 0;
};

/// Minimizer of ||R w - L||^2 + lambda ||R' w - 1||^2 + beta ||w||^2 via a
/// Cholesky solve of the normal equations.
SalienceModel fit_closed_form(const PreferenceDesign& design, double lambda, double beta);
double objective(const PreferenceDesign& design, std::span<const double> w, double lambda,
                 double beta);
Vector objective_gradient(const PreferenceDesign& design, std::span<const double> w,
                          double lambda, double beta);

Vector score_units(const SalienceModel& model, const std::vector<Vector>& unit_features);
/// Indices sorted by descending score; equal scores keep original order.
std::vector<std::size_t> rank_by_score(std::span<const double> scores);

enum class BaselineKind { kLength, kCentroid };
BaselineKind parse_baseline_kind(const std::string& name);
std::vector<std::size_t> baseline_rank(BaselineKind kind, const Cluster& cluster, const TfIdf& tfidf);

struct GridPoint {
  double lambda;
  double beta;
  double dev_mrr;
};

struct GridSearchResult {
  SalienceModel model;
  std::vector<GridPoint> grid;
};

/// Relevance of each unit (at least one content word shared with summary).
std::vector<int> unit_relevance(const Cluster& cluster, const StopwordSet& stopwords);

/// Fits every (lambda, beta) pair on the training design and keeps the one
/// with the highest dev MRR (first in grid order on ties).
GridSearchResult grid_search(const PreferenceDesign& train_design,
                             const std::vector<std::vector<Vector>>& dev_features,
                             const std::vector<std::vector<int>>& dev_relevance,
                             const std::vector<double>& lambdas, const std::vector<double>& betas);

inline const std::vector<double> kDefaultLambdaGrid = {0.0, 0.01, 0.1, 0.5, 1.0, 10.0};
inline const std::vector<double> kDefaultBetaGrid = {0.01, 0.1, 1.0, 10.0};

void save_salience_model(const SalienceModel& model, const std::filesystem::path& path);
SalienceModel load_salience_model(const std::filesystem::path& path);
void save_registry(const FeatureRegistry& registry, const std::filesystem::path& path);
FeatureRegistry load_registry(const std::filesystem::path& path);
void save_tfidf(const TfIdf& tfidf, const std::filesystem::path& path);
TfIdf load_tfidf(const std::filesystem::path& path);

}  // namespace opinsum
