#pragma once

// Small randomly initialized models and inputs shared by the model tests.

#include <string>
#include <vector>

#include "opinsum/attnseq2seq.hpp"
#include "opinsum/trainer.hpp"

namespace opinsum::testing {

inline Vocabulary word_vocab(std::size_t words) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < words; ++i) w.push_back("w" + std::to_string(i));
  return Vocabulary(w);
}

inline Seq2SeqModel tiny_model(std::size_t words, bool use_features, std::uint64_t seed, double scale = 0.5,
                               std::size_t embed = 4, std::size_t hidden = 3, std::size_t attention = 3) {
  ModelShape shape;
  shape.embed = embed;
  shape.hidden = hidden;
  shape.attention = attention;
  shape.feature_dim = 2;
  shape.use_features = use_features;
  Seq2SeqModel model =
      Seq2SeqModel::create(shape, word_vocab(words), TokenFeatureSchema({"JJ", "NN"}, {"Strong"}), Lexicons{});
  init_params(model, scale, seed);
  SeededRng rng(seed + 1000);
  for_each_tensor(model.mutable_params(), [&](const std::string&, Matrix& m, bool is_bias) {
    if (is_bias)
      for (double& v : m.values()) v = rng.uniform(-scale, scale);
  });
  return model;
}

/// Random input over non-reserved ids, with SEG between units.
inline ConcatenatedInput random_input(const Seq2SeqModel& model, std::size_t units, std::size_t length,
                                      SeededRng& rng) {
  IndexedCluster c;
  const std::size_t v = model.vocab().size();
  for (std::size_t u = 0; u < units; ++u) {
    IndexedUnit unit;
    for (std::size_t t = 0; t < length; ++t) {
      unit.ids.push_back(static_cast<WordId>(Vocabulary::kReservedCount + rng.below(v - Vocabulary::kReservedCount)));
      TokenFeatures f;
      f.discrete[kFeatNamedEntity] = static_cast<int>(rng.below(2));
      f.discrete[kFeatPosTag] = static_cast<int>(rng.below(3));
      f.tfidf = rng.uniform(0.0, 2.0);
      unit.features.push_back(f);
    }
    c.units.push_back(unit);
  }
  std::vector<std::size_t> order(units);
  for (std::size_t u = 0; u < units; ++u) order[u] = u;
  return concatenate_units(c, order);
}

inline std::vector<WordId> random_target(const Seq2SeqModel& model, std::size_t words, SeededRng& rng) {
  std::vector<WordId> y;
  const std::size_t v = model.vocab().size();
  for (std::size_t t = 0; t < words; ++t)
    y.push_back(static_cast<WordId>(Vocabulary::kReservedCount + rng.below(v - Vocabulary::kReservedCount)));
  y.push_back(Vocabulary::kEos);
  return y;
}

}  // namespace opinsum::testing
