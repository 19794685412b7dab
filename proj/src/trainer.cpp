#include "opinsum/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "opinsum/beamdecode.hpp"
#include "opinsum/evalmetrics.hpp"
#include "opinsum/extended_forward.hpp"
#include "opinsum/format.hpp"

namespace opinsum {

// Config ---------------------------------------------------------------------

ModelShape TrainConfig::shape(std::size_t vocab_size) const {
  ModelShape s;
  s.vocab = vocab_size;
  s.embed = embed;
  s.hidden = hidden;
  s.attention = attention;
  s.feature_dim = feature_dim;
  s.use_features = use_features;
  return s;
}

void TrainConfig::validate() const {
  if (embed == 0 || hidden == 0 || attention == 0 || (use_features && feature_dim == 0))
    throw std::invalid_argument("model dimensions must be positive");
  if (sample_size == 0) throw std::invalid_argument("sample_size must be >= 1");
  if (patience == 0) throw std::invalid_argument("patience must be >= 1");
  if (max_epochs == 0) throw std::invalid_argument("max_epochs must be >= 1");
  if (max_len == 0) throw std::invalid_argument("max_len must be >= 1");
  if (!(learning_rate >= 0.0) || !(adagrad_epsilon >= 0.0) || !(init_scale >= 0.0))
    throw std::invalid_argument("learning_rate, adagrad_epsilon and init_scale must be non-negative");
}

namespace {

std::size_t to_size(const std::string& key, const std::string& value) {
  try {
    return parse_size(value, key, 0);
  } catch (const ParseError&) {
    throw std::invalid_argument("option '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
}

double to_real(const std::string& key, const std::string& value) {
  try {
    return parse_real(value, key, 0);
  } catch (const ParseError&) {
    throw std::invalid_argument("option '" + key + "' expects a number, got '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw std::invalid_argument("option '" + key + "' expects true|false, got '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

bool set_train_option(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "embed") c.embed = to_size(key, value);
  else if (key == "hidden") c.hidden = to_size(key, value);
  else if (key == "attention") c.attention = to_size(key, value);
  else if (key == "feature_dim") c.feature_dim = to_size(key, value);
  else if (key == "use_features") c.use_features = to_bool(key, value);
  else if (key == "sample_size") c.sample_size = to_size(key, value);
  else if (key == "sampling") c.sampling = parse_sampling_mode(value);
  else if (key == "with_replacement") c.with_replacement = to_bool(key, value);
  else if (key == "learning_rate") c.learning_rate = to_real(key, value);
  else if (key == "adagrad_epsilon") c.adagrad_epsilon = to_real(key, value);
  else if (key == "max_epochs") c.max_epochs = to_size(key, value);
  else if (key == "patience") c.patience = to_size(key, value);
  else if (key == "seed") c.seed = to_size(key, value);
  else if (key == "init_scale") c.init_scale = to_real(key, value);
  else if (key == "max_len") c.max_len = to_size(key, value);
  else return false;
  return true;
}

TrainConfig parse_train_config(std::istream& in, const std::string& source) {
  TrainConfig config;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, number, "expected key=value");
    const std::string key = trim(line.substr(0, eq));
    try {
      if (!set_train_option(config, key, trim(line.substr(eq + 1))))
        throw ParseError(source, number, "unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, number, e.what());
    }
  }
  config.validate();
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_train_config(in, path.string());
}

void write_train_config(const TrainConfig& c, std::ostream& out) {
  out << "embed=" << c.embed << '\n'
      << "hidden=" << c.hidden << '\n'
      << "attention=" << c.attention << '\n'
      << "feature_dim=" << c.feature_dim << '\n'
      << "use_features=" << (c.use_features ? "true" : "false") << '\n'
      << "sample_size=" << c.sample_size << '\n'
      << "sampling=" << to_string(c.sampling) << '\n'
      << "with_replacement=" << (c.with_replacement ? "true" : "false") << '\n'
      << "learning_rate=" << format_real(c.learning_rate) << '\n'
      << "adagrad_epsilon=" << format_real(c.adagrad_epsilon) << '\n'
      << "max_epochs=" << c.max_epochs << '\n'
      << "patience=" << c.patience << '\n'
      << "seed=" << c.seed << '\n'
      << "init_scale=" << format_real(c.init_scale) << '\n'
      << "max_len=" << c.max_len << '\n';
}

// Initialization and Adagrad -------------------------------------------------

void init_params(Seq2SeqModel& model, double scale, std::uint64_t seed, const PretrainedEmbeddings* pretrained) {
  SeededRng rng(derive_seed(seed, "init"));
  Parameters& p = model.mutable_params();
  for_each_tensor(p, [&](const std::string&, Matrix& m, bool is_bias) {
    for (double& v : m.values()) v = is_bias ? 0.0 : rng.uniform(-scale, scale);
  });
  if (!pretrained) return;
  const Matrix& table = pretrained->table.values;
  if (table.rows() != p.embeddings.rows() || table.cols() != p.embeddings.cols())
    throw std::invalid_argument("pretrained embedding table shape does not match the model");
  for (std::size_t r = 0; r < table.rows(); ++r)
    if (r < pretrained->covered.size() && pretrained->covered[r]) {
      auto src = table.row(r);
      std::copy(src.begin(), src.end(), p.embeddings.row(r).begin());
    }
}

AdagradState make_adagrad(const Parameters& params, double learning_rate, double epsilon) {
  AdagradState s;
  s.accumulators = params;
  for_each_tensor(s.accumulators, [](const std::string&, Matrix& m, bool) { m.fill(0.0); });
  s.learning_rate = learning_rate;
  s.epsilon = epsilon;
  return s;
}

namespace {

std::vector<Matrix*> tensors(Parameters& p) {
  std::vector<Matrix*> out;
  for_each_tensor(p, [&](const std::string&, Matrix& m, bool) { out.push_back(&m); });
  return out;
}

std::vector<const Matrix*> tensors(const Parameters& p) {
  std::vector<const Matrix*> out;
  for_each_tensor(p, [&](const std::string&, const Matrix& m, bool) { out.push_back(&m); });
  return out;
}

}  // namespace

void adagrad_update(Parameters& params, const Parameters& grads, AdagradState& state) {
  std::vector<Matrix*> theta = tensors(params);
  std::vector<const Matrix*> g = tensors(grads);
  std::vector<Matrix*> acc = tensors(state.accumulators);
  if (theta.size() != g.size() || theta.size() != acc.size())
    throw std::invalid_argument("adagrad_update: tensor count mismatch");
  for (std::size_t t = 0; t < theta.size(); ++t) {
    if (!theta[t]->same_shape(*g[t]) || !theta[t]->same_shape(*acc[t]))
      throw std::invalid_argument("adagrad_update: tensor shape mismatch");
    std::vector<double>& w = theta[t]->values();
    const std::vector<double>& gv = g[t]->values();
    std::vector<double>& G = acc[t]->values();
    const bool embeddings = theta[t] == &params.embeddings;
    const std::size_t cols = theta[t]->cols();
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (gv[k] == 0.0) continue;
      if (embeddings && !state.embedding_trainable.empty() && !state.embedding_trainable[k / cols]) continue;
      G[k] += gv[k] * gv[k];
      w[k] -= state.learning_rate * gv[k] / (std::sqrt(G[k]) + state.epsilon);
    }
  }
}

// Training -------------------------------------------------------------------

double dev_bleu(const Seq2SeqModel& model, const std::vector<IndexedCluster>& dev,
                const std::vector<Vector>& scores, std::size_t sample_size, std::size_t max_len) {
  if (scores.size() != dev.size()) throw std::invalid_argument("dev scores must align with dev clusters");
  std::vector<Sentence> hyps;
  std::vector<Sentence> refs;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    const ConcatenatedInput z = select_test_input(dev[i], scores[i], sample_size);
    const ScoredSequence out = greedy_decode(model, z, max_len, expansion_mask(model.vocab(), dev[i].has_entity));
    hyps.push_back(sequence_words(model.vocab(), out.tokens));
    refs.push_back(sequence_words(model.vocab(), dev[i].target));
  }
  return bleu(hyps, refs);
}

TrainResult train(Seq2SeqModel model, const TrainingData& data, const TrainConfig& config,
                  std::vector<bool> embedding_trainable) {
  config.validate();
  if (data.train.empty() || data.dev.empty()) throw std::invalid_argument("train and dev splits must be non-empty");
  if (data.train_scores.size() != data.train.size())
    throw std::invalid_argument("train scores must align with train clusters");
  bool overlap = false;
  for (const IndexedCluster& c : data.train)
    for (WordId id : c.target)
      if (id != Vocabulary::kEos && id != Vocabulary::kUnk) overlap = true;
  if (!overlap) throw std::invalid_argument("invalid corpus: no training summary word is in the vocabulary");

  AdagradState adagrad = make_adagrad(model.params(), config.learning_rate, config.adagrad_epsilon);
  adagrad.embedding_trainable = std::move(embedding_trainable);

  TrainResult result;
  result.model = model;
  double best = -1.0;
  std::size_t stale = 0;
  std::vector<std::size_t> order(data.train.size());

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SeededRng shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
    shuffle_rng.shuffle(order);

    double nll = 0.0;
    for (std::size_t idx : order) {
      const IndexedCluster& cluster = data.train[idx];
      SeededRng sample_rng(derive_seed(config.seed, "sampling:" + cluster.id, epoch));
      const ConcatenatedInput z =
          training_input(config.sampling, cluster, data.train_scores[idx], config.sample_size, sample_rng,
                         config.with_replacement);
      const SequenceScore scored = sequence_log_prob(model, z, cluster.target);
      if (!std::isfinite(scored.loglik)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << " on cluster '" << cluster.id << "' (loglik "
            << scored.loglik << ", learning_rate " << config.learning_rate << "); try a lower learning_rate";
        throw TrainingDiverged(msg.str());
      }
      const Parameters grads = backward_pass(model, scored.trace);
      adagrad_update(model.mutable_params(), grads, adagrad);
      nll -= scored.loglik;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_nll = nll / static_cast<double>(data.train.size());
    rec.dev_bleu = dev_bleu(model, data.dev, data.dev_scores, config.sample_size, config.max_len);
    result.history.push_back(rec);

    if (rec.dev_bleu > best) {
      best = rec.dev_bleu;
      result.model = model;
      result.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    if (stale >= config.patience || best >= 1.0) break;
  }
  result.best_bleu = best;
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_nll,dev_bleu\n";
  for (const EpochRecord& r : history)
    out << r.epoch << ',' << format_real(r.train_nll) << ',' << format_real(r.dev_bleu) << '\n';
}

// Gradient check -------------------------------------------------------------

GradCheckResult gradient_check(const Seq2SeqModel& model, const ConcatenatedInput& z, const std::vector<WordId>& target,
                               double epsilon, std::size_t max_coordinates, std::uint64_t seed) {
  const SequenceScore base = sequence_log_prob(model, z, target);
  const Parameters analytic = backward_pass(model, base.trace);
  std::vector<const Matrix*> grads = tensors(analytic);
  std::vector<std::string> names;
  for_each_tensor(model.params(), [&](const std::string& name, const Matrix&, bool) { names.push_back(name); });

  // Differences are taken in extended precision: in double, the roundoff of
  // the loss divided by 2 epsilon is ~1e-10, which swamps coordinates whose
  // gradient is below ~1e-7.
  ExtendedParameters extended = extend_parameters(model.params());
  GradCheckResult result;
  SeededRng rng(derive_seed(seed, "gradcheck"));
  for (std::size_t t = 0; t < names.size(); ++t) {
    const std::size_t n = grads[t]->size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > max_coordinates) {
      rng.shuffle(coords);
      coords.resize(max_coordinates);
      std::sort(coords.begin(), coords.end());
    }
    std::vector<long double>& values = extended[names[t]].values;
    for (std::size_t k : coords) {
      const long double saved = values[k];
      values[k] = saved + epsilon;
      const long double up = extended_log_prob(model, extended, z, target);
      values[k] = saved - epsilon;
      const long double down = extended_log_prob(model, extended, z, target);
      values[k] = saved;

      const double numeric = static_cast<double>(-(up - down) / (2.0L * epsilon));
      const double exact = grads[t]->values()[k];
      const double rel = std::abs(exact - numeric) / std::max(1e-8, std::abs(exact) + std::abs(numeric));
      ++result.coordinates;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_tensor = names[t];
        result.worst_index = k;
        result.worst_analytic = exact;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

GradCheckResult gradient_check(const GradCheckConfig& config, std::uint64_t seed) {
  if (config.vocab <= Vocabulary::kReservedCount) throw std::invalid_argument("gradcheck vocabulary too small");
  std::vector<std::string> words;
  for (std::size_t i = Vocabulary::kReservedCount; i < config.vocab; ++i) words.push_back("w" + std::to_string(i));
  Vocabulary vocab(words);
  TokenFeatureSchema schema({"JJ", "NN", "VB"}, {"Strong", "Weak"});
  const auto sizes = schema.table_sizes();

  SeededRng rng(derive_seed(seed, "gradcheck-data"));
  const auto random_features = [&] {
    TokenFeatures f;
    for (std::size_t k = 0; k < kDiscreteFeatureCount; ++k) f.discrete[k] = static_cast<int>(rng.below(sizes[k]));
    return f;
  };
  std::vector<TokenFeatures> word_features(vocab.size());
  for (std::size_t i = Vocabulary::kReservedCount; i < vocab.size(); ++i) {
    word_features[i] = random_features();
    word_features[i].discrete[kFeatNamedEntity] = 0;
    word_features[i].discrete[kFeatCapitalized] = 0;
    word_features[i].discrete[kFeatPosTag] = 0;
  }

  ModelShape shape;
  shape.vocab = vocab.size();
  shape.embed = config.embed;
  shape.hidden = config.hidden;
  shape.attention = config.attention;
  shape.feature_dim = config.feature_dim;
  shape.use_features = config.use_features;
  Seq2SeqModel model(shape, vocab, schema, word_features);
  init_params(model, config.init_scale, seed);
  // Biases get small random values so their gradients are exercised too.
  SeededRng bias_rng(derive_seed(seed, "gradcheck-bias"));
  for_each_tensor(model.mutable_params(), [&](const std::string&, Matrix& m, bool is_bias) {
    if (is_bias)
      for (double& v : m.values()) v = bias_rng.uniform(-config.init_scale, config.init_scale);
  });

  const auto random_word = [&] {
    return static_cast<WordId>(Vocabulary::kReservedCount + rng.below(vocab.size() - Vocabulary::kReservedCount));
  };
  IndexedCluster cluster;
  cluster.id = "gradcheck";
  for (std::size_t u = 0; u < config.units; ++u) {
    IndexedUnit unit;
    for (std::size_t i = 0; i < config.unit_length; ++i) {
      unit.ids.push_back(random_word());
      TokenFeatures f = random_features();
      f.tfidf = rng.uniform(0.0, 2.0);
      unit.features.push_back(f);
    }
    cluster.units.push_back(std::move(unit));
  }
  std::vector<std::size_t> all(config.units);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const ConcatenatedInput z = concatenate_units(cluster, all);

  std::vector<WordId> target;
  for (std::size_t i = 0; i + 1 < config.target_length; ++i) target.push_back(random_word());
  target.push_back(Vocabulary::kEos);
  return gradient_check(model, z, target, config.epsilon, config.max_coordinates, seed);
}

}  // namespace opinsum
