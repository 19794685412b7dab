#pragma once

// Beam-search n-best generation, cosine re-ranking against the input units,
// and final summary assembly with entity restoration.

#include <string>
#include <vector>

#include "opinsum/attnseq2seq.hpp"
#include "opinsum/salience.hpp"

namespace opinsum {

inline constexpr std::size_t kDefaultBeamWidth = 20;
inline constexpr std::size_t kDefaultMaxLength = 40;

struct BeamHypothesis {
  std::vector<WordId> tokens;  // after BOS
  double logp = 0.0;
  LstmState state;
  bool completed = false;
};

/// A finished output sequence; tokens end with EOS.
struct ScoredSequence {
  std::vector<WordId> tokens;
  double logp = 0.0;
};

/// Words the decoder may emit: everything except SEG and BOS, and except
/// ENTITY when the cluster has no entity.
std::vector<bool> expansion_mask(const Vocabulary& vocab, bool has_entity);

/// Keeps the top-`width` candidates over all expansions of the live
/// hypotheses each step. EOS candidates join the result pool; survivors at
/// `max_len` non-EOS tokens are completed with EOS. The pool is sorted by
/// logp descending, then shorter, then lexicographic token order.
std::vector<ScoredSequence> beam_search(const Seq2SeqModel& model, const ConcatenatedInput& z,
                                        std::size_t width, std::size_t max_len,
                                        const std::vector<bool>& allowed);
std::vector<ScoredSequence> beam_search(const Seq2SeqModel& model, const ConcatenatedInput& z,
                                        std::size_t width, std::size_t max_len, bool has_entity);

/// Step-wise argmax chain (equivalent to width 1).
ScoredSequence greedy_decode(const Seq2SeqModel& model, const ConcatenatedInput& z, std::size_t max_len,
                             const std::vector<bool>& allowed);

/// Output words of a sequence without its EOS.
std::vector<std::string> sequence_words(const Vocabulary& vocab, const std::vector<WordId>& tokens);

struct RerankResult {
  std::size_t best = 0;
  std::vector<double> similarities;  // after the UNK penalty
};

inline constexpr double kUnkPenalty = 0.5;

/// Cosine of IDF-weighted content-word counts between every candidate and
/// the concatenation of all cluster units. `cluster` is in the same
/// (entity-substituted) space as the candidates. Ties go to the higher logp.
RerankResult cosine_rerank(const std::vector<ScoredSequence>& nbest, const Vocabulary& vocab,
                           const Cluster& cluster, const TfIdf& tfidf, const StopwordSet& stopwords);

struct DecodeOptions {
  std::size_t sample_size = kDefaultSampleSize;
  std::size_t width = kDefaultBeamWidth;
  std::size_t max_len = kDefaultMaxLength;
};

struct NbestEntry {
  std::string text;
  double logp = 0.0;
  double cosine = 0.0;
};

struct SummaryOutput {
  std::string id;
  std::string summary;
  std::vector<NbestEntry> nbest;
};

/// Top-K input by `unit_scores`, beam search, re-rank, entity restoration
/// and detokenization. `cluster` is the raw (unsubstituted) cluster.
SummaryOutput generate_summary(const Seq2SeqModel& model, const Cluster& cluster, std::span<const double> unit_scores,
                               const TfIdf& tfidf, const StopwordSet& stopwords, const Lexicons& lexicons,
                               const DecodeOptions& options);
/// Same, scoring units with the salience model first.
SummaryOutput generate_summary(const Seq2SeqModel& model, const Cluster& cluster, const FeatureContext& features,
                               const SalienceModel& salience, const DecodeOptions& options);

/// One JSON object per line: {"id", "summary", "nbest": [{"text", "logp", "cosine"}]}.
std::string decode_record_json(const SummaryOutput& output);

}  // namespace opinsum
