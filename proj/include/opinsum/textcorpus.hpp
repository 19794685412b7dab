#pragma once

// Corpus data model: tokens, text units, clusters, vocabulary, embedding and
// lexicon ingestion, TF-IDF statistics and generic-entity substitution.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "opinsum/errors.hpp"
#include "opinsum/numkit.hpp"

namespace opinsum {

struct Token {
  std::string surface;
  std::string norm;
  std::optional<std::string> pos;
  std::optional<std::string> ner;
};

struct TextUnit {
  std::vector<Token> tokens;
  std::string raw;
};

struct Cluster {
  std::string id;
  std::vector<TextUnit> units;
  TextUnit summary;
  std::optional<std::string> entity;
};

using Corpus = std::vector<Cluster>;

namespace reserved {
inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kSeg = "<seg>";
inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kEntity = "<entity>";
}  // namespace reserved

using WordId = int;

class Vocabulary {
 public:
  static constexpr WordId kUnk = 0;
  static constexpr WordId kSeg = 1;
  static constexpr WordId kBos = 2;
  static constexpr WordId kEos = 3;
  static constexpr WordId kEntity = 4;
  static constexpr std::size_t kReservedCount = 5;

  /// Vocabulary holding only the reserved tokens.
  Vocabulary();
  /// Reserved tokens followed by `words` in order. Duplicates and reserved
  /// spellings are rejected.
  explicit Vocabulary(const std::vector<std::string>& words);

  std::size_t size() const { return words_.size(); }
  /// Index of `word`, or kUnk when absent.
  WordId index_of(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word_of(WordId id) const;
  const std::vector<std::string>& words() const { return words_; }
  static bool is_reserved(WordId id) { return id >= 0 && id < static_cast<WordId>(kReservedCount); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  void add(std::string word);

  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
};

struct EmbeddingTable {
  Matrix values;  // |V| x embedding dim
  std::vector<bool> trainable;
};

/// Result of reading a word-vector file against a vocabulary. Rows of
/// uncovered words are zero; the caller initializes them.
struct PretrainedEmbeddings {
  EmbeddingTable table;
  std::vector<bool> covered;
  double coverage = 0.0;  // over non-reserved vocabulary entries
};

/// Splits on whitespace, lowercases into norm, and detaches leading and
/// trailing ASCII punctuation characters as separate tokens.
std::vector<Token> tokenize(std::string_view text);
/// Space-joins tokens, attaching punctuation-only tokens to the left.
std::string detokenize(const std::vector<std::string>& words);
bool is_punctuation(std::string_view word);
std::string to_lower(std::string_view s);

TextUnit make_unit(std::string_view text);

/// Includes every norm with corpus frequency >= min_count (units and
/// summaries), ordered by descending frequency then lexicographically.
Vocabulary build_vocab(const Corpus& clusters, std::size_t min_count);

PretrainedEmbeddings load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                     std::size_t dim);

/// Replaces every case-insensitive occurrence of the entity token sequence
/// (greedy left to right) with the generic entity token. No-op when the
/// cluster has no entity.
Cluster substitute_entity(const Cluster& cluster);
std::vector<Token> substitute_entity(const std::vector<Token>& tokens,
                                     const std::vector<Token>& entity);
/// Expands every generic entity token back to the entity's tokens.
std::vector<Token> restore_entity(const std::vector<Token>& tokens, const Cluster& cluster);
std::vector<std::string> restore_entity(const std::vector<std::string>& words,
                                        const Cluster& cluster);

using TermWeights = std::map<std::string, double>;

/// Document frequencies over a set of text units. idf(t) = ln(N / df(t));
/// terms never seen use df = 1.
class TfIdf {
 public:
  TfIdf() = default;
  explicit TfIdf(const Corpus& clusters);
  TfIdf(std::size_t unit_count, std::unordered_map<std::string, std::size_t> df);

  double idf(const std::string& term) const;
  /// tf * idf for every term of the unit.
  TermWeights weights(const TextUnit& unit) const;
  TermWeights weights(const std::vector<std::string>& norms) const;

  std::size_t unit_count() const { return unit_count_; }
  const std::unordered_map<std::string, std::size_t>& document_frequencies() const { return df_; }

 private:
  std::size_t unit_count_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

/// Per-unit TF-IDF weights, with idf computed over all units in `clusters`.
std::vector<std::vector<TermWeights>> tfidf_weights(const Corpus& clusters);

double cosine(const TermWeights& a, const TermWeights& b);

class StopwordSet {
 public:
  StopwordSet() = default;
  explicit StopwordSet(std::unordered_set<std::string> words) : words_(std::move(words)) {}
  static StopwordSet load(const std::filesystem::path& path);

  bool contains(std::string_view norm) const { return words_.count(std::string(norm)) > 0; }
  bool is_content(std::string_view norm) const { return !norm.empty() && !contains(norm); }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

/// Content-word norms of a unit as a set.
std::unordered_set<std::string> content_words(const TextUnit& unit, const StopwordSet& stopwords);

/// word<TAB>category lexicon; a word may carry several categories.
class Lexicon {
 public:
  Lexicon() = default;
  static Lexicon load(const std::filesystem::path& path);
  void add(const std::string& word, const std::string& category);

  /// Sorted categories of a word (empty when absent).
  const std::vector<std::string>& categories(const std::string& norm) const;
  /// Sorted set of every category.
  std::vector<std::string> all_categories() const;
  bool empty() const { return entries_.empty(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

struct Lexicons {
  Lexicon categories;  // General Inquirer style
  Lexicon sentiment;   // categories positive / negative / neutral
};

/// Reads a JSON-lines corpus. pos/ner arrays must match the token count.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view jsonl, const std::string& source = "<memory>");
std::string serialize_cluster(const Cluster& cluster);

}  // namespace opinsum
