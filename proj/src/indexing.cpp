#include "opinsum/indexing.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace opinsum {

namespace {

int sentiment_index(const std::vector<std::string>& cats) {
  // First matching class in lexicon order wins; sorted categories make this
  // deterministic.
  for (const std::string& c : cats) {
    if (c == "positive") return 1;
    if (c == "negative") return 2;
    if (c == "neutral") return 3;
  }
  return 0;
}

}  // namespace

TokenFeatureSchema::TokenFeatureSchema(std::vector<std::string> pos_tags,
                                       std::vector<std::string> categories)
    : pos_tags_(std::move(pos_tags)), categories_(std::move(categories)) {
  std::sort(pos_tags_.begin(), pos_tags_.end());
  pos_tags_.erase(std::unique(pos_tags_.begin(), pos_tags_.end()), pos_tags_.end());
  std::sort(categories_.begin(), categories_.end());
  categories_.erase(std::unique(categories_.begin(), categories_.end()), categories_.end());
}

TokenFeatureSchema TokenFeatureSchema::build(const Corpus& train, const Lexicons& lexicons) {
  std::set<std::string> tags;
  for (const Cluster& c : train)
    for (const TextUnit& u : c.units)
      for (const Token& t : u.tokens)
        if (t.pos && !t.pos->empty()) tags.insert(*t.pos);
  return TokenFeatureSchema({tags.begin(), tags.end()}, lexicons.categories.all_categories());
}

std::array<std::size_t, kDiscreteFeatureCount> TokenFeatureSchema::table_sizes() const {
  std::array<std::size_t, kDiscreteFeatureCount> sizes{};
  sizes[kFeatNamedEntity] = 2;
  sizes[kFeatCapitalized] = 2;
  sizes[kFeatPosTag] = pos_tags_.size() + 1;
  sizes[kFeatCategory] = categories_.size() + 1;
  sizes[kFeatSentiment] = 4;
  return sizes;
}

int TokenFeatureSchema::index_in(const std::vector<std::string>& list, const std::string& value) const {
  auto it = std::lower_bound(list.begin(), list.end(), value);
  if (it == list.end() || *it != value) return 0;
  return static_cast<int>(it - list.begin()) + 1;
}

TokenFeatures TokenFeatureSchema::word_type_features(const std::string& norm,
                                                     const Lexicons& lexicons) const {
  TokenFeatures f;
  const auto& cats = lexicons.categories.categories(norm);
  for (const std::string& c : cats) {
    const int idx = index_in(categories_, c);
    if (idx > 0) {
      f.discrete[kFeatCategory] = idx;
      break;
    }
  }
  f.discrete[kFeatSentiment] = sentiment_index(lexicons.sentiment.categories(norm));
  return f;
}

TokenFeatures TokenFeatureSchema::token_features(const Token& token, const TermWeights& unit_tfidf,
                                                 const Lexicons& lexicons) const {
  TokenFeatures f = word_type_features(token.norm, lexicons);
  if (token.ner && !token.ner->empty() && *token.ner != "O") f.discrete[kFeatNamedEntity] = 1;
  if (!token.surface.empty() && std::isupper(static_cast<unsigned char>(token.surface.front())))
    f.discrete[kFeatCapitalized] = 1;
  if (token.pos) f.discrete[kFeatPosTag] = index_in(pos_tags_, *token.pos);
  auto it = unit_tfidf.find(token.norm);
  if (it != unit_tfidf.end()) f.tfidf = it->second;
  return f;
}

std::vector<WordId> index_words(const std::vector<Token>& tokens, const Vocabulary& vocab) {
  std::vector<WordId> ids;
  ids.reserve(tokens.size());
  for (const Token& t : tokens) ids.push_back(vocab.index_of(t.norm));
  return ids;
}

IndexedCluster index_cluster(const Cluster& cluster, const Vocabulary& vocab,
                             const TokenFeatureSchema& schema, const Lexicons& lexicons,
                             const TfIdf& tfidf) {
  IndexedCluster out;
  out.id = cluster.id;
  out.has_entity = cluster.entity.has_value();
  for (const TextUnit& u : cluster.units) {
    IndexedUnit iu;
    iu.ids = index_words(u.tokens, vocab);
    const TermWeights weights = tfidf.weights(u);
    iu.features.reserve(u.tokens.size());
    for (const Token& t : u.tokens) iu.features.push_back(schema.token_features(t, weights, lexicons));
    out.units.push_back(std::move(iu));
  }
  out.target = index_words(cluster.summary.tokens, vocab);
  out.target.push_back(Vocabulary::kEos);
  return out;
}

}  // namespace opinsum
