#pragma once

// Maps corpus clusters onto vocabulary indices plus the per-token features
// the encoder consumes (named-entity flag, capitalization, POS tag, lexicon
// category, sentiment polarity, TF-IDF).

#include <array>
#include <string>
#include <vector>

#include "opinsum/textcorpus.hpp"

namespace opinsum {

enum DiscreteFeature : std::size_t {
  kFeatNamedEntity = 0,
  kFeatCapitalized,
  kFeatPosTag,
  kFeatCategory,
  kFeatSentiment,
  kDiscreteFeatureCount
};

/// Index 0 of every discrete feature means "absent".
struct TokenFeatures {
  std::array<int, kDiscreteFeatureCount> discrete{};
  double tfidf = 0.0;

  friend bool operator==(const TokenFeatures&, const TokenFeatures&) = default;
};

class TokenFeatureSchema {
 public:
  TokenFeatureSchema() = default;
  TokenFeatureSchema(std::vector<std::string> pos_tags, std::vector<std::string> categories);

  /// POS tags seen in the training units and every lexicon category.
  static TokenFeatureSchema build(const Corpus& train, const Lexicons& lexicons);

  /// Lookup-table row counts, one per discrete feature.
  std::array<std::size_t, kDiscreteFeatureCount> table_sizes() const;

  TokenFeatures token_features(const Token& token, const TermWeights& unit_tfidf,
                               const Lexicons& lexicons) const;
  /// Features knowable from the word type alone (lexicon lookups); used for
  /// decoder-side inputs where annotations do not exist.
  TokenFeatures word_type_features(const std::string& norm, const Lexicons& lexicons) const;

  const std::vector<std::string>& pos_tags() const { return pos_tags_; }
  const std::vector<std::string>& categories() const { return categories_; }

  friend bool operator==(const TokenFeatureSchema&, const TokenFeatureSchema&) = default;

 private:
  int index_in(const std::vector<std::string>& list, const std::string& value) const;

  std::vector<std::string> pos_tags_;    // sorted, excluding "absent"
  std::vector<std::string> categories_;  // sorted, excluding "absent"
};

struct IndexedUnit {
  std::vector<WordId> ids;
  std::vector<TokenFeatures> features;
};

struct IndexedCluster {
  std::string id;
  std::vector<IndexedUnit> units;
  std::vector<WordId> target;  // summary ids followed by EOS
  bool has_entity = false;
};

/// `cluster` should already have its entity substituted.
IndexedCluster index_cluster(const Cluster& cluster, const Vocabulary& vocab,
                             const TokenFeatureSchema& schema, const Lexicons& lexicons,
                             const TfIdf& tfidf);

std::vector<WordId> index_words(const std::vector<Token>& tokens, const Vocabulary& vocab);

}  // namespace opinsum
