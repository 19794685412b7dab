#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "opinsum/beamdecode.hpp"
#include "tiny_model.hpp"

using namespace opinsum;
using namespace opinsum::testing;

namespace {

void enumerate(const Seq2SeqModel& m, const ConcatenatedInput& z, const std::vector<WordId>& alphabet,
               std::vector<WordId>& prefix, std::size_t max_len, std::vector<ScoredSequence>& out) {
  std::vector<WordId> done = prefix;
  done.push_back(Vocabulary::kEos);
  out.push_back({done, sequence_log_prob(m, z, done).loglik});
  if (prefix.size() == max_len) return;
  for (WordId w : alphabet) {
    prefix.push_back(w);
    enumerate(m, z, alphabet, prefix, max_len, out);
    prefix.pop_back();
  }
}

std::vector<ScoredSequence> seqs(const std::vector<std::pair<std::vector<WordId>, double>>& items) {
  std::vector<ScoredSequence> out;
  for (const auto& [tokens, logp] : items) {
    std::vector<WordId> t = tokens;
    t.push_back(Vocabulary::kEos);
    out.push_back({t, logp});
  }
  return out;
}

}  // namespace

TEST_CASE("expansion mask") {
  const Vocabulary v = word_vocab(3);
  const std::vector<bool> with = expansion_mask(v, true);
  const std::vector<bool> without = expansion_mask(v, false);
  CHECK_FALSE(with[Vocabulary::kSeg]);
  CHECK_FALSE(with[Vocabulary::kBos]);
  CHECK(with[Vocabulary::kEntity]);
  CHECK(with[Vocabulary::kEos]);
  CHECK(with[Vocabulary::kUnk]);
  CHECK_FALSE(without[Vocabulary::kEntity]);
  CHECK(std::count(without.begin(), without.end(), true) == 5);
}

TEST_CASE("width one equals greedy decoding") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Seq2SeqModel m = tiny_model(8, true, seed, 1.0);
    SeededRng rng(seed);
    const ConcatenatedInput z = random_input(m, 2, 3, rng);
    const std::vector<bool> mask = expansion_mask(m.vocab(), seed % 2 == 0);
    const std::vector<ScoredSequence> beam = beam_search(m, z, 1, 8, mask);
    const ScoredSequence greedy = greedy_decode(m, z, 8, mask);
    REQUIRE(!beam.empty());
    CHECK(beam.front().tokens == greedy.tokens);
    CHECK(std::abs(beam.front().logp - greedy.logp) <= 1e-12);
  }
}

TEST_CASE("wide beam over a six-word vocabulary finds the exhaustive optimum") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Seq2SeqModel m = tiny_model(1, false, seed, 1.5);
    REQUIRE(m.vocab().size() == 6);
    SeededRng rng(seed);
    const ConcatenatedInput z = random_input(m, 1, 3, rng);
    const std::size_t max_len = 4;
    std::vector<ScoredSequence> all;
    std::vector<WordId> prefix;
    enumerate(m, z, {Vocabulary::kUnk, 5}, prefix, max_len, all);
    CHECK(all.size() == 31);
    const auto best = std::max_element(all.begin(), all.end(),
                                       [](const ScoredSequence& a, const ScoredSequence& b) { return a.logp < b.logp; });
    const std::vector<ScoredSequence> beam = beam_search(m, z, 64, max_len, false);
    CHECK(beam.size() == all.size());
    CHECK(beam.front().tokens == best->tokens);
    CHECK(std::abs(beam.front().logp - best->logp) <= 1e-10);
  }
}

TEST_CASE("beam output invariants") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Seq2SeqModel m = tiny_model(10, true, seed, 1.0);
    SeededRng rng(seed + 50);
    const ConcatenatedInput z = random_input(m, 2, 4, rng);
    const std::size_t width = 5;
    const std::size_t max_len = 6;
    const std::vector<ScoredSequence> pool = beam_search(m, z, width, max_len, false);
    CHECK(pool.size() >= 1);
    CHECK(pool.size() <= width * (max_len + 1));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const ScoredSequence& s = pool[i];
      CHECK(s.tokens.size() <= max_len + 1);
      CHECK(s.tokens.back() == Vocabulary::kEos);
      CHECK(std::count(s.tokens.begin(), s.tokens.end(), Vocabulary::kEos) == 1);
      for (WordId w : s.tokens) {
        CHECK(w != Vocabulary::kSeg);
        CHECK(w != Vocabulary::kBos);
        CHECK(w != Vocabulary::kEntity);
      }
      CHECK(std::abs(s.logp - sequence_log_prob(m, z, s.tokens).loglik) <= 1e-10);
      if (i > 0) CHECK(pool[i - 1].logp >= s.logp);
    }
    const std::vector<ScoredSequence> again = beam_search(m, z, width, max_len, false);
    REQUIRE(again.size() == pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      CHECK(again[i].tokens == pool[i].tokens);
      CHECK(again[i].logp == pool[i].logp);
    }
  }
}

TEST_CASE("survivors at the length cap are completed with EOS") {
  Seq2SeqModel m = tiny_model(3, false, 3);
  // Strongly prefer w0 everywhere so nothing stops early.
  m.mutable_params().output_weights.fill(0.0);
  m.mutable_params().output_bias.fill(0.0);
  m.mutable_params().output_bias(5, 0) = 20.0;
  ConcatenatedInput z;
  z.ids = {5, 6};
  z.features.assign(2, TokenFeatures{});
  const std::vector<ScoredSequence> pool = beam_search(m, z, 1, 4, false);
  REQUIRE(pool.size() == 1);
  CHECK(pool.front().tokens == std::vector<WordId>{5, 5, 5, 5, Vocabulary::kEos});
  CHECK(std::abs(pool.front().logp - sequence_log_prob(m, z, pool.front().tokens).loglik) <= 1e-10);
  CHECK_THROWS_AS(beam_search(m, z, 0, 4, false), std::invalid_argument);
  CHECK_THROWS_AS(beam_search(m, z, 2, 0, false), std::invalid_argument);
}

TEST_CASE("rerank on a single candidate") {
  const Vocabulary v = word_vocab(3);
  Cluster c;
  c.units.push_back(make_unit("w0 w1"));
  const RerankResult r = cosine_rerank(seqs({{{5}, -1.0}}), v, c, TfIdf(Corpus{c}), StopwordSet{});
  CHECK(r.best == 0);
  CHECK(r.similarities.size() == 1);
  CHECK_THROWS(cosine_rerank({}, v, c, TfIdf(), StopwordSet{}));
}

TEST_CASE("rerank cosines on IDF-weighted content counts") {
  const Vocabulary v({"great", "acting", "plot", "the"});
  const WordId great = v.index_of("great");
  const WordId acting = v.index_of("acting");
  const WordId the = v.index_of("the");
  Cluster c;
  c.units = {make_unit("the great acting"), make_unit("great plot")};
  const TfIdf tfidf(4, {{"great", 2}, {"acting", 1}, {"plot", 4}});
  const StopwordSet stop(std::unordered_set<std::string>{"the"});
  // Input vector: great 2 ln 2, acting ln 4, plot 0.
  const std::vector<ScoredSequence> nbest = seqs({{{great}, -1.0},
                                                  {{acting, acting}, -0.5},
                                                  {{great, acting}, -3.0},
                                                  {{the}, -0.1},
                                                  {{great, acting, Vocabulary::kUnk}, -2.0}});
  const RerankResult r = cosine_rerank(nbest, v, c, tfidf, stop);
  CHECK(std::abs(r.similarities[0] - std::sqrt(0.5)) <= 1e-12);
  CHECK(std::abs(r.similarities[1] - std::sqrt(0.5)) <= 1e-12);
  CHECK(std::abs(r.similarities[2] - 6.0 / std::sqrt(40.0)) <= 1e-12);
  CHECK(r.similarities[3] == 0.0);
  CHECK(std::abs(r.similarities[4] - 0.5 * 6.0 / std::sqrt(40.0)) <= 1e-12);
  CHECK(r.best == 2);

  // Equal cosines: the higher log-probability wins.
  const RerankResult tie = cosine_rerank(seqs({{{great}, -1.0}, {{acting, acting}, -0.5}}), v, c, tfidf, stop);
  CHECK(tie.best == 1);
}

TEST_CASE("summaries restore the entity and never contain structural tokens") {
  const Vocabulary v({"great", "is", "film"});
  ModelShape shape;
  shape.embed = 4;
  shape.hidden = 3;
  shape.attention = 3;
  Seq2SeqModel m = Seq2SeqModel::create(shape, v, TokenFeatureSchema{}, Lexicons{});
  init_params(m, 0.3, 5);
  m.mutable_params().output_bias(Vocabulary::kEntity, 0) = 3.0;

  Cluster c;
  c.id = "x1";
  c.entity = "Ann Lee";
  c.units = {make_unit("Ann Lee is great"), make_unit("a great film")};
  const TfIdf tfidf(Corpus{substitute_entity(c)});
  DecodeOptions options;
  options.width = 4;
  options.max_len = 3;
  // Only the entity counts as content, so any candidate carrying it ranks first.
  const StopwordSet stop(std::unordered_set<std::string>{"is", "a", "great", "film"});
  const SummaryOutput out = generate_summary(m, c, Vector{1.0, 0.5}, tfidf, stop, Lexicons{}, options);
  CHECK(out.id == "x1");
  CHECK(out.summary.find("Ann Lee") != std::string::npos);
  CHECK(!out.nbest.empty());
  for (const NbestEntry& e : out.nbest) {
    CHECK(e.text.find("<entity>") == std::string::npos);
    CHECK(e.text.find("<seg>") == std::string::npos);
    CHECK(e.text.find("<s>") == std::string::npos);
    CHECK(e.text.find("</s>") == std::string::npos);
  }

  const nlohmann::json j = nlohmann::json::parse(decode_record_json(out));
  CHECK(j["id"] == "x1");
  CHECK(j["summary"] == out.summary);
  CHECK(j["nbest"].size() == out.nbest.size());
  CHECK(j["nbest"][0]["logp"].get<double>() == out.nbest[0].logp);

  c.entity.reset();
  const SummaryOutput plain = generate_summary(m, c, Vector{1.0, 0.5}, tfidf, StopwordSet{}, Lexicons{}, options);
  for (const NbestEntry& e : plain.nbest) CHECK(e.text.find("<entity>") == std::string::npos);
}

TEST_CASE("sequence words drop EOS") {
  const Vocabulary v = word_vocab(2);
  CHECK(sequence_words(v, {5, 6, Vocabulary::kEos}) == std::vector<std::string>{"w0", "w1"});
}
