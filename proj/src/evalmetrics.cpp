#include "opinsum/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "opinsum/format.hpp"

namespace opinsum {

namespace {

using NgramCounts = std::map<std::vector<std::string>, double>;

NgramCounts ngrams(const Sentence& s, std::size_t n) {
  NgramCounts counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    counts[std::vector<std::string>(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i + n))] += 1.0;
  return counts;
}

using UnitCounts = std::map<std::pair<std::string, std::string>, double>;

// Unigrams are keyed with an empty second element; skip-bigram keys always
// carry two non-empty tokens.
UnitCounts su4_units(const Sentence& s) {
  constexpr std::size_t kMaxGap = 4;
  UnitCounts units;
  for (std::size_t i = 0; i < s.size(); ++i) {
    units[{s[i], std::string()}] += 1.0;
    for (std::size_t j = i + 1; j < s.size() && j - i - 1 <= kMaxGap; ++j) units[{s[i], s[j]}] += 1.0;
  }
  return units;
}

}  // namespace

BleuStats bleu_stats(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
                     std::size_t max_n) {
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("bleu: " + std::to_string(hypotheses.size()) + " hypotheses for " +
                                std::to_string(references.size()) + " references");
  if (hypotheses.empty()) throw std::invalid_argument("bleu: empty corpus");
  if (max_n < 1) throw std::invalid_argument("bleu: max_n must be >= 1");
  BleuStats stats;
  stats.matched.assign(max_n, 0.0);
  stats.proposed.assign(max_n, 0.0);
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const Sentence& hyp = hypotheses[s];
    const Sentence& ref = references[s];
    stats.hyp_length += static_cast<double>(hyp.size());
    stats.ref_length += static_cast<double>(ref.size());
    for (std::size_t n = 1; n <= max_n; ++n) {
      const NgramCounts h = ngrams(hyp, n);
      const NgramCounts r = ngrams(ref, n);
      for (const auto& [gram, count] : h) {
        stats.proposed[n - 1] += count;
        auto it = r.find(gram);
        if (it != r.end()) stats.matched[n - 1] += std::min(count, it->second);
      }
    }
  }
  return stats;
}

double bleu_from_stats(const BleuStats& stats) {
  if (stats.hyp_length <= 0.0 || stats.matched.empty() || stats.matched[0] <= 0.0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t i = 0; i < stats.matched.size(); ++i) {
    const double smooth = i == 0 ? 0.0 : 1.0;
    log_sum += std::log((stats.matched[i] + smooth) / (stats.proposed[i] + smooth));
  }
  double log_bleu = log_sum / static_cast<double>(stats.matched.size());
  if (stats.hyp_length < stats.ref_length) log_bleu += 1.0 - stats.ref_length / stats.hyp_length;
  return std::clamp(std::exp(log_bleu), 0.0, 1.0);
}

double bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
            std::size_t max_n) {
  return bleu_from_stats(bleu_stats(hypotheses, references, max_n));
}

double rouge_su4(const Sentence& hypothesis, const Sentence& reference) {
  if (reference.empty()) throw std::invalid_argument("rouge_su4: empty reference");
  const UnitCounts ref = su4_units(reference);
  const UnitCounts hyp = su4_units(hypothesis);
  double total = 0.0;
  double matched = 0.0;
  for (const auto& [unit, count] : ref) {
    total += count;
    auto it = hyp.find(unit);
    if (it != hyp.end()) matched += std::min(count, it->second);
  }
  return matched / total;
}

double rouge_su4(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references) {
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("rouge_su4: hypothesis and reference counts differ");
  if (hypotheses.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) sum += rouge_su4(hypotheses[i], references[i]);
  return sum / static_cast<double>(hypotheses.size());
}

double reciprocal_rank(std::span<const int> ranked_relevance) {
  for (std::size_t i = 0; i < ranked_relevance.size(); ++i)
    if (ranked_relevance[i] > 0) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

double mrr(const std::vector<std::vector<int>>& ranked_relevance) {
  if (ranked_relevance.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& q : ranked_relevance) sum += reciprocal_rank(q);
  return sum / static_cast<double>(ranked_relevance.size());
}

double ndcg_at(std::size_t k, std::span<const int> ranked_gains) {
  if (k < 1) throw std::invalid_argument("ndcg_at: k must be >= 1");
  const auto dcg = [k](std::span<const int> gains) {
    double total = 0.0;
    for (std::size_t i = 0; i < std::min(k, gains.size()); ++i)
      total += static_cast<double>(gains[i]) / std::log2(static_cast<double>(i) + 2.0);
    return total;
  };
  std::vector<int> ideal(ranked_gains.begin(), ranked_gains.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  const double best = dcg(ideal);
  if (best <= 0.0) return 0.0;
  return dcg(ranked_gains) / best;
}

double mean_ndcg_at(std::size_t k, const std::vector<std::vector<int>>& ranked_gains) {
  if (ranked_gains.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& q : ranked_gains) sum += ndcg_at(k, q);
  return sum / static_cast<double>(ranked_gains.size());
}

RankingMetrics ranking_metrics(const std::vector<std::vector<int>>& ranked_relevance) {
  return {mrr(ranked_relevance), mean_ndcg_at(3, ranked_relevance), mean_ndcg_at(5, ranked_relevance)};
}

SystemScores score_system(const std::string& name, const std::vector<Sentence>& hypotheses,
                          const std::vector<Sentence>& references) {
  SystemScores s;
  s.system = name;
  s.bleu = bleu(hypotheses, references);
  s.rouge_su4 = rouge_su4(hypotheses, references);
  double words = 0.0;
  for (const Sentence& h : hypotheses) words += static_cast<double>(h.size());
  s.mean_length = hypotheses.empty() ? 0.0 : words / static_cast<double>(hypotheses.size());
  return s;
}

void write_system_csv(std::ostream& out, const std::vector<SystemScores>& rows) {
  out << "system,bleu,rouge_su4,mean_length\n";
  for (const SystemScores& r : rows)
    out << r.system << ',' << format_real(r.bleu) << ',' << format_real(r.rouge_su4) << ','
        << format_real(r.mean_length) << '\n';
}

void write_system_json(std::ostream& out, const std::vector<SystemScores>& rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const SystemScores& r : rows) {
    nlohmann::ordered_json row;
    row["system"] = r.system;
    row["bleu"] = r.bleu;
    row["rouge_su4"] = r.rouge_su4;
    row["mean_length"] = r.mean_length;
    j.push_back(std::move(row));
  }
  out << j.dump(2) << '\n';
}

std::vector<SamplingCell> sampling_report(const std::vector<std::string>& modes,
                                          const std::vector<std::size_t>& ks,
                                          const std::vector<Sentence>& references,
                                          const SamplingGenerator& generate) {
  std::vector<SamplingCell> cells;
  for (const std::string& mode : modes) {
    for (std::size_t k : ks) {
      SamplingCell cell{mode, k, std::nullopt};
      if (auto hyps = generate(mode, k)) cell.bleu = bleu(*hyps, references);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void write_sampling_csv(std::ostream& out, const std::vector<SamplingCell>& cells) {
  out << "mode,K,bleu\n";
  for (const SamplingCell& c : cells)
    if (c.bleu) out << c.mode << ',' << c.k << ',' << format_real(*c.bleu) << '\n';
}

}  // namespace opinsum
