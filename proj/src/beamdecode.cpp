#include "opinsum/beamdecode.hpp"

#include <algorithm>
#include <json.hpp>
#include <map>

#include "opinsum/indexing.hpp"

namespace opinsum {

std::vector<bool> expansion_mask(const Vocabulary& vocab, bool has_entity) {
  std::vector<bool> allowed(vocab.size(), true);
  allowed[Vocabulary::kSeg] = false;
  allowed[Vocabulary::kBos] = false;
  if (!has_entity) allowed[Vocabulary::kEntity] = false;
  return allowed;
}

namespace {

struct Candidate {
  std::size_t parent;
  WordId word;
  double logp;
};

bool better_candidate(const Candidate& a, const Candidate& b) {
  if (a.logp != b.logp) return a.logp > b.logp;
  if (a.parent != b.parent) return a.parent < b.parent;
  return a.word < b.word;
}

bool pool_order(const ScoredSequence& a, const ScoredSequence& b) {
  if (a.logp != b.logp) return a.logp > b.logp;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

void check_mask(const Seq2SeqModel& model, const std::vector<bool>& allowed) {
  if (allowed.size() != model.shape().vocab)
    throw std::invalid_argument("expansion mask must cover the vocabulary");
  if (!allowed[Vocabulary::kEos]) throw std::invalid_argument("expansion mask must allow EOS");
}

WordId last_token(const BeamHypothesis& h) { return h.tokens.empty() ? Vocabulary::kBos : h.tokens.back(); }

}  // namespace

std::vector<ScoredSequence> beam_search(const Seq2SeqModel& model, const ConcatenatedInput& z,
                                        std::size_t width, std::size_t max_len,
                                        const std::vector<bool>& allowed) {
  if (width < 1) throw std::invalid_argument("beam width must be >= 1");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  check_mask(model, allowed);
  const EncodedInput encoded = encode(model, z);

  std::vector<BeamHypothesis> live(1);
  live[0].state = LstmState::zeros(model.shape().hidden);
  std::vector<ScoredSequence> pool;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<DecodeStep> expanded;
    expanded.reserve(live.size());
    std::vector<Candidate> candidates;
    for (std::size_t h = 0; h < live.size(); ++h) {
      expanded.push_back(decode_step(model, last_token(live[h]), live[h].state, encoded));
      const Vector& lp = expanded.back().log_probs;
      for (std::size_t w = 0; w < lp.size(); ++w)
        if (allowed[w]) candidates.push_back({h, static_cast<WordId>(w), live[h].logp + lp[w]});
    }
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      better_candidate);

    std::vector<BeamHypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      BeamHypothesis h;
      h.tokens = live[c.parent].tokens;
      h.tokens.push_back(c.word);
      h.logp = c.logp;
      if (c.word == Vocabulary::kEos) {
        pool.push_back({std::move(h.tokens), h.logp});
      } else {
        h.state = expanded[c.parent].state;
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }

  for (BeamHypothesis& h : live) {
    const DecodeStep d = decode_step(model, last_token(h), h.state, encoded);
    h.tokens.push_back(Vocabulary::kEos);
    pool.push_back({std::move(h.tokens), h.logp + d.log_probs[Vocabulary::kEos]});
  }
  std::sort(pool.begin(), pool.end(), pool_order);
  return pool;
}

std::vector<ScoredSequence> beam_search(const Seq2SeqModel& model, const ConcatenatedInput& z,
                                        std::size_t width, std::size_t max_len, bool has_entity) {
  return beam_search(model, z, width, max_len, expansion_mask(model.vocab(), has_entity));
}

ScoredSequence greedy_decode(const Seq2SeqModel& model, const ConcatenatedInput& z, std::size_t max_len,
                             const std::vector<bool>& allowed) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  check_mask(model, allowed);
  const EncodedInput encoded = encode(model, z);
  ScoredSequence out;
  LstmState state = LstmState::zeros(model.shape().hidden);
  WordId prev = Vocabulary::kBos;
  for (std::size_t step = 0; step < max_len; ++step) {
    DecodeStep d = decode_step(model, prev, state, encoded);
    std::size_t best = Vocabulary::kEos;
    for (std::size_t w = 0; w < d.log_probs.size(); ++w)
      if (allowed[w] && d.log_probs[w] > d.log_probs[best]) best = w;
    // Lowest index wins ties, as in beam search.
    for (std::size_t w = 0; w < best; ++w)
      if (allowed[w] && d.log_probs[w] == d.log_probs[best]) {
        best = w;
        break;
      }
    out.logp += d.log_probs[best];
    out.tokens.push_back(static_cast<WordId>(best));
    if (best == static_cast<std::size_t>(Vocabulary::kEos)) return out;
    prev = static_cast<WordId>(best);
    state = std::move(d.state);
  }
  const DecodeStep d = decode_step(model, prev, state, encoded);
  out.logp += d.log_probs[Vocabulary::kEos];
  out.tokens.push_back(Vocabulary::kEos);
  return out;
}

std::vector<std::string> sequence_words(const Vocabulary& vocab, const std::vector<WordId>& tokens) {
  std::vector<std::string> words;
  for (WordId id : tokens)
    if (id != Vocabulary::kEos) words.push_back(vocab.word_of(id));
  return words;
}

namespace {

bool is_structural(const std::string& norm) {
  return norm == reserved::kUnk || norm == reserved::kSeg || norm == reserved::kBos || norm == reserved::kEos;
}

TermWeights idf_counts(const std::vector<std::string>& norms, const TfIdf& tfidf, const StopwordSet& stopwords) {
  std::map<std::string, double> counts;
  for (const std::string& w : norms)
    if (!is_structural(w) && stopwords.is_content(w)) counts[w] += 1.0;
  for (auto& [term, count] : counts) count *= tfidf.idf(term);
  return counts;
}

}  // namespace

RerankResult cosine_rerank(const std::vector<ScoredSequence>& nbest, const Vocabulary& vocab,
                           const Cluster& cluster, const TfIdf& tfidf, const StopwordSet& stopwords) {
  if (nbest.empty()) throw std::invalid_argument("cosine_rerank: empty n-best list");
  std::vector<std::string> input;
  for (const TextUnit& u : cluster.units)
    for (const Token& t : u.tokens) input.push_back(t.norm);
  const TermWeights input_vec = idf_counts(input, tfidf, stopwords);

  RerankResult r;
  for (const ScoredSequence& s : nbest) {
    double sim = cosine(idf_counts(sequence_words(vocab, s.tokens), tfidf, stopwords), input_vec);
    if (std::find(s.tokens.begin(), s.tokens.end(), Vocabulary::kUnk) != s.tokens.end()) sim *= kUnkPenalty;
    r.similarities.push_back(sim);
  }
  for (std::size_t i = 1; i < nbest.size(); ++i) {
    const double a = r.similarities[i];
    const double b = r.similarities[r.best];
    if (a > b || (a == b && nbest[i].logp > nbest[r.best].logp)) r.best = i;
  }
  return r;
}

SummaryOutput generate_summary(const Seq2SeqModel& model, const Cluster& cluster, std::span<const double> unit_scores,
                               const TfIdf& tfidf, const StopwordSet& stopwords, const Lexicons& lexicons,
                               const DecodeOptions& options) {
  const Cluster substituted = substitute_entity(cluster);
  const IndexedCluster indexed = index_cluster(substituted, model.vocab(), model.schema(), lexicons, tfidf);
  const ConcatenatedInput z = select_test_input(indexed, unit_scores, options.sample_size);
  const std::vector<ScoredSequence> nbest =
      beam_search(model, z, options.width, options.max_len, indexed.has_entity);
  const RerankResult ranked = cosine_rerank(nbest, model.vocab(), substituted, tfidf, stopwords);

  SummaryOutput out;
  out.id = cluster.id;
  for (std::size_t i = 0; i < nbest.size(); ++i) {
    const std::string text = detokenize(restore_entity(sequence_words(model.vocab(), nbest[i].tokens), cluster));
    out.nbest.push_back({text, nbest[i].logp, ranked.similarities[i]});
  }
  out.summary = out.nbest[ranked.best].text;
  return out;
}

SummaryOutput generate_summary(const Seq2SeqModel& model, const Cluster& cluster, const FeatureContext& features,
                               const SalienceModel& salience, const DecodeOptions& options) {
  const Vector scores = score_units(salience, extract_cluster_features(cluster, features));
  return generate_summary(model, cluster, scores, features.tfidf, features.stopwords, features.lexicons, options);
}

std::string decode_record_json(const SummaryOutput& output) {
  nlohmann::ordered_json j;
  j["id"] = output.id;
  j["summary"] = output.summary;
  j["nbest"] = nlohmann::ordered_json::array();
  for (const NbestEntry& e : output.nbest) {
    nlohmann::ordered_json item;
    item["text"] = e.text;
    item["logp"] = e.logp;
    item["cosine"] = e.cosine;
    j["nbest"].push_back(std::move(item));
  }
  return j.dump();
}

}  // namespace opinsum
