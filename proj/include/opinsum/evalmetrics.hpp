#pragma once

// Corpus evaluation: BLEU, ROUGE-SU4 recall, MRR, NDCG@k and the
// sampling-strategy comparison table.

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace opinsum {

using Sentence = std::vector<std::string>;

/// Pooled n-gram statistics for corpus BLEU.
struct BleuStats {
  std::vector<double> matched;   // clipped matches per order
  std::vector<double> proposed;  // hypothesis n-grams per order
  double hyp_length = 0.0;
  double ref_length = 0.0;
};

BleuStats bleu_stats(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
                     std::size_t max_n = 4);
/// Geometric mean of clipped precisions with add-one smoothing for orders
/// >= 2, times the brevity penalty exp(1 - r/c) when c < r.
double bleu_from_stats(const BleuStats& stats);
double bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
            std::size_t max_n = 4);

/// Recall of reference unigrams and ordered skip-bigrams with at most four
/// intervening tokens, with multiset clipping.
double rouge_su4(const Sentence& hypothesis, const Sentence& reference);
/// Mean of rouge_su4 over aligned pairs.
double rouge_su4(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);

/// Each list holds binary relevance in rank order.
double reciprocal_rank(std::span<const int> ranked_relevance);
double mrr(const std::vector<std::vector<int>>& ranked_relevance);
/// DCG@k / ideal DCG@k with log2(i + 1) discounts; 0 when the ideal is 0.
double ndcg_at(std::size_t k, std::span<const int> ranked_gains);
double mean_ndcg_at(std::size_t k, const std::vector<std::vector<int>>& ranked_gains);

struct RankingMetrics {
  double mrr = 0.0;
  double ndcg3 = 0.0;
  double ndcg5 = 0.0;
};
RankingMetrics ranking_metrics(const std::vector<std::vector<int>>& ranked_relevance);

struct SystemScores {
  std::string system;
  double bleu = 0.0;
  double rouge_su4 = 0.0;
  double mean_length = 0.0;
};
SystemScores score_system(const std::string& name, const std::vector<Sentence>& hypotheses,
                          const std::vector<Sentence>& references);

void write_system_csv(std::ostream& out, const std::vector<SystemScores>& rows);
void write_system_json(std::ostream& out, const std::vector<SystemScores>& rows);

struct SamplingCell {
  std::string mode;
  std::size_t k = 0;
  std::optional<double> bleu;  // empty when no model exists for the cell
};

/// `generate(mode, k)` returns hypotheses for the test references or nullopt
/// when no model is available for that configuration.
using SamplingGenerator =
    std::function<std::optional<std::vector<Sentence>>(const std::string& mode, std::size_t k)>;

std::vector<SamplingCell> sampling_report(const std::vector<std::string>& modes,
                                          const std::vector<std::size_t>& ks,
                                          const std::vector<Sentence>& references,
                                          const SamplingGenerator& generate);
/// Rows "mode,K,bleu" for present cells only.
void write_sampling_csv(std::ostream& out, const std::vector<SamplingCell>& cells);

inline const std::vector<std::string> kSamplingModes = {"importance", "uniform", "topk"};
inline const std::vector<std::size_t> kSamplingKs = {1, 2, 5, 10};

}  // namespace opinsum
