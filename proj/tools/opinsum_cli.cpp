// opinsum: command-line pipeline for importance estimation, training,
// decoding and evaluation. See README.md for subcommands and keys.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "opinsum/beamdecode.hpp"
#include "opinsum/evalmetrics.hpp"
#include "opinsum/format.hpp"
#include "opinsum/salience.hpp"
#include "opinsum/trainer.hpp"

namespace fs = std::filesystem;
using namespace opinsum;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Usage and IO problems; mapped to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct KeySpec {
  const char* key;
  const char* help;
  const char* fallback;  // nullptr: no default
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"train", "training corpus (JSON lines)", nullptr},
      {"dev", "development corpus", nullptr},
      {"test", "test corpus", nullptr},
      {"embeddings", "pre-trained word vectors (text format)", nullptr},
      {"category_lexicon", "word<TAB>category lexicon", nullptr},
      {"sentiment_lexicon", "word<TAB>positive|negative|neutral lexicon", nullptr},
      {"stopwords", "stopword list, one per line", OPINSUM_DATA_DIR "/stopwords.txt"},
      {"out_dir", "directory receiving every output", nullptr},
      {"model", "trained model file", nullptr},
      {"salience_dir", "directory holding salience.model/.features/.idf", nullptr},
      {"hypotheses", "decode output (JSON lines with id and summary)", nullptr},
      {"system", "system name in evaluation reports", "opinsum"},
      {"workers", "worker threads for decoding and evaluation", "1"},
      {"min_count", "minimum corpus frequency for the vocabulary", "1"},
      {"unigram_count", "unigram features in the salience registry", "500"},
      {"width", "beam width", "20"},
      {"gradcheck_seeds", "number of gradient-check seeds", "10"},
      {"gradcheck_epsilon", "finite-difference step", "1e-5"},
      {"train_missing", "sampling-report: train cells without a model", "true"},
      // Trainer keys.
      {"seed", "global seed", "1"},
      {"embed", "word embedding size", "300"},
      {"hidden", "LSTM state size", "150"},
      {"attention", "attention projection size", "100"},
      {"feature_dim", "rows of each token-feature lookup table", "10"},
      {"use_features", "token features in the encoder input", "true"},
      {"sample_size", "K, text units per encoder input", "5"},
      {"sampling", "importance|uniform|topk", "importance"},
      {"with_replacement", "draw training units with replacement", "false"},
      {"learning_rate", "Adagrad step size", "0.1"},
      {"adagrad_epsilon", "Adagrad damping", "1e-6"},
      {"max_epochs", "epoch cap", "500"},
      {"patience", "epochs without dev improvement before stopping", "3"},
      {"init_scale", "uniform init range", "0.08"},
      {"max_len", "decoding length cap", "40"},
  };
  return specs;
}

const std::set<std::string> kTrainKeys = {"seed", "embed", "hidden", "attention", "feature_dim", "use_features",
                                          "sample_size", "sampling", "with_replacement",
                                          "learning_rate", "adagrad_epsilon",
                                          "max_epochs", "patience", "init_scale", "max_len"};

struct RunConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  const std::string& get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw UsageError("missing required setting '" + key + "'");
    return it->second;
  }
  fs::path path(const std::string& key) const { return fs::path(get(key)); }
  std::size_t size(const std::string& key) const {
    try {
      return parse_size(get(key), key, 0);
    } catch (const ParseError&) {
      throw UsageError("setting '" + key + "' expects a non-negative integer");
    }
  }
  double real(const std::string& key) const {
    try {
      return parse_real(get(key), key, 0);
    } catch (const ParseError&) {
      throw UsageError("setting '" + key + "' expects a number");
    }
  }
  bool flag(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError("setting '" + key + "' expects true|false");
  }

  TrainConfig train_config() const {
    TrainConfig c;
    for (const std::string& key : kTrainKeys)
      if (has(key)) {
        try {
          set_train_option(c, key, get(key));
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool known_key(const std::string& key) {
  for (const KeySpec& k : key_specs())
    if (key == k.key) return true;
  return false;
}

void read_config_file(const fs::path& path, std::map<std::string, std::string>& out) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(number) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (!known_key(key))
      throw UsageError(path.string() + ":" + std::to_string(number) + ": unknown key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
}

void require_file(const RunConfig& cfg, const std::string& key) {
  const fs::path p = cfg.path(key);
  if (!fs::is_regular_file(p)) throw UsageError(key + ": no such file " + p.string());
}

void require_optional_file(const RunConfig& cfg, const std::string& key) {
  if (cfg.has(key)) require_file(cfg, key);
}

fs::path salience_file(const RunConfig& cfg, const std::string& name) { return cfg.path("salience_dir") / name; }

void require_salience(const RunConfig& cfg) {
  for (const char* name : {"salience.model", "salience.features", "salience.idf"})
    if (!fs::is_regular_file(salience_file(cfg, name)))
      throw UsageError("salience_dir: missing " + salience_file(cfg, name).string());
}

fs::path out_path(const RunConfig& cfg, const std::string& name) { return cfg.path("out_dir") / name; }

void prepare_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.path("out_dir"), ec);
  if (ec) throw UsageError("cannot create out_dir " + cfg.get("out_dir") + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
  if (!out) throw UsageError("write failed for " + path.string());
}

Lexicons load_lexicons(const RunConfig& cfg) {
  Lexicons lex;
  if (cfg.has("category_lexicon")) lex.categories = Lexicon::load(cfg.path("category_lexicon"));
  if (cfg.has("sentiment_lexicon")) lex.sentiment = Lexicon::load(cfg.path("sentiment_lexicon"));
  return lex;
}

Corpus load_split(const RunConfig& cfg, const std::string& key) {
  Corpus c = load_corpus(cfg.path(key));
  if (c.empty()) throw UsageError(key + ": corpus " + cfg.get(key) + " has no clusters");
  return c;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

struct SalienceArtifacts {
  FeatureContext ctx;
  SalienceModel model;
};

SalienceArtifacts load_salience(const RunConfig& cfg) {
  SalienceArtifacts a;
  a.model = load_salience_model(salience_file(cfg, "salience.model"));
  a.ctx.registry = load_registry(salience_file(cfg, "salience.features"));
  a.ctx.tfidf = load_tfidf(salience_file(cfg, "salience.idf"));
  a.ctx.lexicons = load_lexicons(cfg);
  a.ctx.stopwords = StopwordSet::load(cfg.path("stopwords"));
  if (a.ctx.registry.hash() != a.model.registry_hash || a.ctx.registry.dimension() != a.model.weights.size())
    throw UsageError("salience.model does not match salience.features");
  return a;
}

std::vector<Vector> corpus_scores(const Corpus& corpus, const SalienceArtifacts& s) {
  std::vector<Vector> out;
  out.reserve(corpus.size());
  for (const Cluster& c : corpus) out.push_back(score_units(s.model, extract_cluster_features(c, s.ctx)));
  return out;
}

std::vector<IndexedCluster> index_corpus(const Corpus& corpus, const Seq2SeqModel& model, const FeatureContext& ctx) {
  std::vector<IndexedCluster> out;
  for (const Cluster& c : corpus)
    out.push_back(index_cluster(substitute_entity(c), model.vocab(), model.schema(), ctx.lexicons, ctx.tfidf));
  return out;
}

Sentence norms_of(std::string_view text) {
  Sentence s;
  for (const Token& t : tokenize(text)) s.push_back(t.norm);
  return s;
}

DecodeOptions decode_options(const RunConfig& cfg, std::size_t sample_size) {
  DecodeOptions o;
  o.sample_size = sample_size;
  o.width = cfg.size("width");
  o.max_len = cfg.size("max_len");
  if (o.width == 0 || o.max_len == 0) throw UsageError("width and max_len must be >= 1");
  return o;
}

std::vector<SummaryOutput> decode_corpus(const Seq2SeqModel& model, const Corpus& corpus,
                                         const SalienceArtifacts& s, const DecodeOptions& options,
                                         std::size_t workers) {
  std::vector<SummaryOutput> out(corpus.size());
  parallel_for(corpus.size(), workers,
               [&](std::size_t i) { out[i] = generate_summary(model, corpus[i], s.ctx, s.model, options); });
  return out;
}

// Subcommands ----------------------------------------------------------------

int cmd_preprocess(const RunConfig& cfg) {
  require_file(cfg, "train");
  require_optional_file(cfg, "dev");
  require_optional_file(cfg, "test");
  require_optional_file(cfg, "embeddings");
  const Corpus train = load_split(cfg, "train");
  Corpus substituted;
  for (const Cluster& c : train) substituted.push_back(substitute_entity(c));
  const Vocabulary vocab = build_vocab(substituted, std::max<std::size_t>(1, cfg.size("min_count")));

  nlohmann::ordered_json stats;
  stats["vocab_size"] = vocab.size();
  for (const char* split : {"train", "dev", "test"}) {
    if (!cfg.has(split)) continue;
    const Corpus c = std::string(split) == "train" ? train : load_split(cfg, split);
    std::size_t units = 0;
    std::size_t tokens = 0;
    std::size_t unk = 0;
    for (const Cluster& cl : c)
      for (const TextUnit& u : cl.units) {
        ++units;
        for (const Token& t : substitute_entity(u.tokens, cl.entity ? tokenize(*cl.entity) : std::vector<Token>{})) {
          ++tokens;
          if (vocab.index_of(t.norm) == Vocabulary::kUnk) ++unk;
        }
      }
    stats[split] = {{"clusters", c.size()}, {"units", units}, {"tokens", tokens}, {"unk_tokens", unk}};
  }
  if (cfg.has("embeddings"))
    stats["embedding_coverage"] = load_embeddings(cfg.path("embeddings"), vocab, cfg.size("embed")).coverage;

  std::ostringstream words;
  for (const std::string& w : vocab.words()) words << w << '\n';
  prepare_out_dir(cfg);
  write_text(out_path(cfg, "vocab.txt"), words.str());
  write_text(out_path(cfg, "stats.json"), stats.dump(2) + "\n");
  std::cout << "vocabulary " << vocab.size() << " words -> " << out_path(cfg, "vocab.txt").string() << '\n';
  return kExitOk;
}

int cmd_fit_importance(const RunConfig& cfg) {
  require_file(cfg, "train");
  require_file(cfg, "dev");
  require_file(cfg, "stopwords");
  require_optional_file(cfg, "category_lexicon");
  require_optional_file(cfg, "sentiment_lexicon");
  const Corpus train = load_split(cfg, "train");
  const Corpus dev = load_split(cfg, "dev");

  FeatureContext ctx;
  ctx.lexicons = load_lexicons(cfg);
  ctx.stopwords = StopwordSet::load(cfg.path("stopwords"));
  ctx.tfidf = TfIdf(train);
  ctx.registry = FeatureRegistry::build(train, ctx.stopwords, ctx.lexicons, cfg.size("unigram_count"));

  std::vector<std::vector<Vector>> train_features;
  std::vector<Vector> train_labels;
  for (const Cluster& c : train) {
    train_features.push_back(extract_cluster_features(c, ctx));
    train_labels.push_back(gold_scores(c, ctx.stopwords));
  }
  std::vector<std::vector<Vector>> dev_features;
  std::vector<std::vector<int>> dev_relevance;
  for (const Cluster& c : dev) {
    dev_features.push_back(extract_cluster_features(c, ctx));
    dev_relevance.push_back(unit_relevance(c, ctx.stopwords));
  }
  const PreferenceDesign design = build_design(train_features, train_labels);
  GridSearchResult fit = grid_search(design, dev_features, dev_relevance, kDefaultLambdaGrid, kDefaultBetaGrid);
  fit.model.registry_hash = ctx.registry.hash();

  std::ostringstream grid;
  grid << "lambda,beta,dev_mrr\n";
  for (const GridPoint& g : fit.grid)
    grid << format_real(g.lambda) << ',' << format_real(g.beta) << ',' << format_real(g.dev_mrr) << '\n';

  prepare_out_dir(cfg);
  save_salience_model(fit.model, out_path(cfg, "salience.model"));
  save_registry(ctx.registry, out_path(cfg, "salience.features"));
  save_tfidf(ctx.tfidf, out_path(cfg, "salience.idf"));
  write_text(out_path(cfg, "grid.csv"), grid.str());
  std::cout << "salience d=" << fit.model.weights.size() << " lambda=" << format_real(fit.model.lambda)
            << " beta=" << format_real(fit.model.beta) << '\n';
  return kExitOk;
}

int cmd_rank_eval(const RunConfig& cfg) {
  require_file(cfg, "test");
  require_file(cfg, "stopwords");
  require_salience(cfg);
  require_optional_file(cfg, "category_lexicon");
  require_optional_file(cfg, "sentiment_lexicon");
  const Corpus test = load_split(cfg, "test");
  const SalienceArtifacts s = load_salience(cfg);
  const std::vector<Vector> scores = corpus_scores(test, s);

  std::ostringstream ranking;
  ranking << "cluster_id,unit_index,score,rank\n";
  std::map<std::string, std::vector<std::vector<int>>> ranked;
  for (std::size_t c = 0; c < test.size(); ++c) {
    const std::vector<int> rel = unit_relevance(test[c], s.ctx.stopwords);
    const auto order = rank_by_score(scores[c]);
    for (std::size_t r = 0; r < order.size(); ++r)
      ranking << test[c].id << ',' << order[r] << ',' << format_real(scores[c][order[r]]) << ',' << r + 1 << '\n';
    const auto collect = [&](const std::vector<std::size_t>& ord) {
      std::vector<int> out;
      for (std::size_t u : ord) out.push_back(rel[u]);
      return out;
    };
    ranked["salience"].push_back(collect(order));
    ranked["length"].push_back(collect(baseline_rank(BaselineKind::kLength, test[c], s.ctx.tfidf)));
    ranked["centroid"].push_back(collect(baseline_rank(BaselineKind::kCentroid, test[c], s.ctx.tfidf)));
  }

  std::ostringstream csv;
  nlohmann::ordered_json json = nlohmann::ordered_json::array();
  csv << "system,mrr,ndcg3,ndcg5\n";
  for (const char* system : {"salience", "length", "centroid"}) {
    const RankingMetrics m = ranking_metrics(ranked[system]);
    csv << system << ',' << format_real(m.mrr) << ',' << format_real(m.ndcg3) << ',' << format_real(m.ndcg5) << '\n';
    json.push_back({{"system", system}, {"mrr", m.mrr}, {"ndcg3", m.ndcg3}, {"ndcg5", m.ndcg5}});
  }
  prepare_out_dir(cfg);
  write_text(out_path(cfg, "ranking.csv"), ranking.str());
  write_text(out_path(cfg, "rank_metrics.csv"), csv.str());
  write_text(out_path(cfg, "rank_metrics.json"), json.dump(2) + "\n");
  std::cout << csv.str();
  return kExitOk;
}

struct TrainInputs {
  Corpus train;
  Corpus dev;
  SalienceArtifacts salience;
};

TrainResult run_training(const RunConfig& cfg, const TrainInputs& in, TrainConfig config) {
  Corpus substituted;
  for (const Cluster& c : in.train) substituted.push_back(substitute_entity(c));
  Vocabulary vocab = build_vocab(substituted, std::max<std::size_t>(1, cfg.size("min_count")));
  TokenFeatureSchema schema = TokenFeatureSchema::build(in.train, in.salience.ctx.lexicons);
  Seq2SeqModel model =
      Seq2SeqModel::create(config.shape(vocab.size()), vocab, std::move(schema), in.salience.ctx.lexicons);

  std::optional<PretrainedEmbeddings> pretrained;
  if (cfg.has("embeddings")) pretrained = load_embeddings(cfg.path("embeddings"), model.vocab(), config.embed);
  init_params(model, config.init_scale, config.seed, pretrained ? &*pretrained : nullptr);

  TrainingData data;
  data.train = index_corpus(in.train, model, in.salience.ctx);
  data.train_scores = corpus_scores(in.train, in.salience);
  data.dev = index_corpus(in.dev, model, in.salience.ctx);
  data.dev_scores = corpus_scores(in.dev, in.salience);
  return train(std::move(model), data, config);
}

TrainInputs load_train_inputs(const RunConfig& cfg) {
  require_file(cfg, "train");
  require_file(cfg, "dev");
  require_file(cfg, "stopwords");
  require_salience(cfg);
  require_optional_file(cfg, "embeddings");
  require_optional_file(cfg, "category_lexicon");
  require_optional_file(cfg, "sentiment_lexicon");
  return {load_split(cfg, "train"), load_split(cfg, "dev"), load_salience(cfg)};
}

int cmd_train(const RunConfig& cfg) {
  const TrainConfig config = cfg.train_config();
  const TrainInputs inputs = load_train_inputs(cfg);
  const TrainResult result = run_training(cfg, inputs, config);

  std::ostringstream history;
  write_history_csv(history, result.history);
  std::ostringstream config_text;
  write_train_config(config, config_text);
  prepare_out_dir(cfg);
  save_model(result.model, out_path(cfg, "model.txt"));
  write_text(out_path(cfg, "history.csv"), history.str());
  write_text(out_path(cfg, "train_config.txt"), config_text.str());
  std::cout << "epochs " << result.history.size() << ", best dev BLEU " << format_real(result.best_bleu)
            << " at epoch " << result.best_epoch << '\n';
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg) {
  GradCheckConfig gc;
  gc.epsilon = cfg.real("gradcheck_epsilon");
  const std::size_t seeds = cfg.size("gradcheck_seeds");
  const std::uint64_t base = cfg.size("seed");
  if (seeds == 0) throw UsageError("gradcheck_seeds must be >= 1");

  std::ostringstream csv;
  csv << "seed,max_rel_error,worst_tensor,worst_index,coordinates\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < seeds; ++i) {
    const std::uint64_t seed = base + i;
    const GradCheckResult r = gradient_check(gc, seed);
    worst = std::max(worst, r.max_rel_error);
    csv << seed << ',' << format_real(r.max_rel_error) << ',' << r.worst_tensor << ',' << r.worst_index << ','
        << r.coordinates << '\n';
  }
  if (cfg.has("out_dir")) {
    prepare_out_dir(cfg);
    write_text(out_path(cfg, "gradcheck.csv"), csv.str());
  }
  std::cout << csv.str();
  const bool pass = worst < 1e-4;
  std::cout << "max relative error " << format_real(worst) << (pass ? " PASS" : " FAIL") << '\n';
  return pass ? kExitOk : kExitFailure;
}

int cmd_decode(const RunConfig& cfg) {
  require_file(cfg, "test");
  require_file(cfg, "model");
  require_file(cfg, "stopwords");
  require_salience(cfg);
  require_optional_file(cfg, "category_lexicon");
  require_optional_file(cfg, "sentiment_lexicon");
  const Corpus test = load_split(cfg, "test");
  const SalienceArtifacts s = load_salience(cfg);
  const Seq2SeqModel model = load_model(cfg.path("model"));
  const std::vector<SummaryOutput> outputs =
      decode_corpus(model, test, s, decode_options(cfg, cfg.size("sample_size")), cfg.size("workers"));

  std::ostringstream jsonl;
  for (const SummaryOutput& o : outputs) jsonl << decode_record_json(o) << '\n';
  prepare_out_dir(cfg);
  write_text(out_path(cfg, "decode.jsonl"), jsonl.str());
  std::cout << outputs.size() << " summaries -> " << out_path(cfg, "decode.jsonl").string() << '\n';
  return kExitOk;
}

std::map<std::string, std::string> read_hypotheses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      out[j.at("id").get<std::string>()] = j.at("summary").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), number, e.what());
    }
  }
  return out;
}

int cmd_evaluate(const RunConfig& cfg) {
  require_file(cfg, "test");
  require_file(cfg, "hypotheses");
  const Corpus test = load_split(cfg, "test");
  const auto hyps = read_hypotheses(cfg.path("hypotheses"));
  std::vector<Sentence> h;
  std::vector<Sentence> r;
  for (const Cluster& c : test) {
    auto it = hyps.find(c.id);
    if (it == hyps.end()) throw UsageError("hypotheses: no summary for cluster '" + c.id + "'");
    h.push_back(norms_of(it->second));
    Sentence ref;
    for (const Token& t : c.summary.tokens) ref.push_back(t.norm);
    r.push_back(std::move(ref));
  }
  const std::vector<SystemScores> rows = {score_system(cfg.get("system"), h, r)};
  std::ostringstream csv;
  std::ostringstream json;
  write_system_csv(csv, rows);
  write_system_json(json, rows);
  prepare_out_dir(cfg);
  write_text(out_path(cfg, "eval.csv"), csv.str());
  write_text(out_path(cfg, "eval.json"), json.str());
  std::cout << csv.str();
  return kExitOk;
}

int cmd_sampling_report(const RunConfig& cfg) {
  require_file(cfg, "test");
  const TrainConfig base = cfg.train_config();
  const TrainInputs inputs = load_train_inputs(cfg);
  const Corpus test = load_split(cfg, "test");
  const bool train_missing = cfg.flag("train_missing");
  const fs::path models = out_path(cfg, "sampling");

  std::vector<Sentence> refs;
  for (const Cluster& c : test) {
    Sentence ref;
    for (const Token& t : c.summary.tokens) ref.push_back(t.norm);
    refs.push_back(std::move(ref));
  }
  std::map<std::string, Seq2SeqModel> trained;
  const auto generate = [&](const std::string& mode, std::size_t k) -> std::optional<std::vector<Sentence>> {
    const std::string name = mode + "_K" + std::to_string(k) + ".model";
    std::optional<Seq2SeqModel> model;
    if (fs::is_regular_file(models / name)) {
      model = load_model(models / name);
    } else if (train_missing) {
      TrainConfig config = base;
      config.sampling = parse_sampling_mode(mode);
      config.sample_size = k;
      model = run_training(cfg, inputs, config).model;
      trained[name] = *model;
    } else {
      return std::nullopt;
    }
    std::vector<Sentence> hyps;
    for (const SummaryOutput& o : decode_corpus(*model, test, inputs.salience, decode_options(cfg, k),
                                                cfg.size("workers")))
      hyps.push_back(norms_of(o.summary));
    return hyps;
  };
  const std::vector<SamplingCell> cells = sampling_report(kSamplingModes, kSamplingKs, refs, generate);
  std::ostringstream csv;
  write_sampling_csv(csv, cells);
  prepare_out_dir(cfg);
  if (!trained.empty()) fs::create_directories(models);
  for (const auto& [name, model] : trained) save_model(model, models / name);
  write_text(out_path(cfg, "sampling.csv"), csv.str());
  std::cout << csv.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"opinsum: abstractive opinion summarization pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "key=value configuration file");

  std::map<std::string, std::string> flags;
  for (const KeySpec& k : key_specs()) {
    std::string name = std::string("--") + k.key;
    std::replace(name.begin(), name.end(), '_', '-');
    app.add_option_function<std::string>(name, [&flags, key = std::string(k.key)](const std::string& v) {
      flags[key] = v;
    }, k.help);
  }

  using Handler = int (*)(const RunConfig&);
  const std::vector<std::tuple<const char*, const char*, Handler>> commands = {
      {"preprocess", "build the vocabulary and corpus statistics", cmd_preprocess},
      {"fit-importance", "fit the salience regression with a dev grid search", cmd_fit_importance},
      {"rank-eval", "rank test units and report MRR / NDCG against baselines", cmd_rank_eval},
      {"train", "train the attention encoder-decoder", cmd_train},
      {"gradcheck", "compare analytic and finite-difference gradients", cmd_gradcheck},
      {"decode", "generate summaries for the test corpus", cmd_decode},
      {"evaluate", "score decoded summaries with BLEU and ROUGE-SU4", cmd_evaluate},
      {"sampling-report", "BLEU per sampling mode and K", cmd_sampling_report},
  };
  std::map<const CLI::App*, Handler> handlers;
  for (const auto& [name, help, fn] : commands) handlers[app.add_subcommand(name, help)] = fn;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg;
    for (const KeySpec& k : key_specs())
      if (k.fallback) cfg.values[k.key] = k.fallback;
    if (!config_path.empty()) read_config_file(config_path, cfg.values);
    for (const auto& [key, value] : flags) cfg.values[key] = value;
    for (const auto& [sub, fn] : handlers) {
      if (!sub->parsed()) continue;
      if (sub->get_name() != "gradcheck" && !cfg.has("out_dir")) throw UsageError("out_dir is required");
      return fn(cfg);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return kExitFailure;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
