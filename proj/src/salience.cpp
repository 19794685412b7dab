#include "opinsum/salience.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "opinsum/errors.hpp"
#include "opinsum/evalmetrics.hpp"
#include "opinsum/format.hpp"

namespace opinsum {

namespace {

const std::vector<std::string> kSentimentClasses = {"positive", "negative", "neutral"};

const std::vector<std::string> kFixedNames = {"num_words",    "num_pos_tags", "num_named_entities",
                                              "centroidness", "avg_tfidf",    "max_tfidf"};

TermWeights mean_weights(const std::vector<TermWeights>& units) {
  TermWeights centroid;
  if (units.empty()) return centroid;
  for (const TermWeights& u : units)
    for (const auto& [term, w] : u) centroid[term] += w;
  const double n = static_cast<double>(units.size());
  for (auto& [term, w] : centroid) w /= n;
  return centroid;
}

bool is_named_entity_tag(const std::optional<std::string>& tag) {
  return tag && !tag->empty() && *tag != "O";
}

}  // namespace

// Registry -----------------------------------------------------------------

FeatureRegistry::FeatureRegistry(std::vector<std::string> lexicon_categories,
                                 std::vector<std::string> unigrams)
    : categories_(std::move(lexicon_categories)), unigrams_(std::move(unigrams)) {
  names_ = kFixedNames;
  for (const std::string& c : categories_) names_.push_back("category:" + c);
  for (const std::string& s : kSentimentClasses) names_.push_back("sentiment:" + s);
  for (const std::string& u : unigrams_) names_.push_back("unigram:" + u);
}

FeatureRegistry FeatureRegistry::build(const Corpus& train, const StopwordSet& stopwords,
                                       const Lexicons& lexicons, std::size_t unigram_count) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const Cluster& c : train)
    for (const TextUnit& u : c.units)
      for (const Token& t : u.tokens)
        if (stopwords.is_content(t.norm)) ++counts[t.norm];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > unigram_count) ranked.resize(unigram_count);
  std::vector<std::string> unigrams;
  for (auto& [w, n] : ranked) unigrams.push_back(w);
  return FeatureRegistry(lexicons.categories.all_categories(), std::move(unigrams));
}

std::uint64_t FeatureRegistry::hash() const {
  std::uint64_t h = fnv1a("opinsum-registry");
  for (const std::string& n : names_) {
    h = fnv1a(n, h);
    h = fnv1a(std::string_view("\n"), h);
  }
  return h;
}

std::size_t FeatureRegistry::category_offset() const { return feature::kFixedCount; }
std::size_t FeatureRegistry::sentiment_offset() const { return category_offset() + categories_.size(); }
std::size_t FeatureRegistry::unigram_offset() const { return sentiment_offset() + kSentimentClasses.size(); }

FeatureRegistry FeatureRegistry::from_names(const std::vector<std::string>& names) {
  std::vector<std::string> cats;
  std::vector<std::string> unigrams;
  const auto strip = [](const std::string& s, std::string_view prefix) -> std::optional<std::string> {
    if (s.rfind(prefix, 0) == 0) return s.substr(prefix.size());
    return std::nullopt;
  };
  for (const std::string& n : names) {
    if (auto c = strip(n, "category:")) cats.push_back(*c);
    else if (auto u = strip(n, "unigram:")) unigrams.push_back(*u);
  }
  FeatureRegistry reg(std::move(cats), std::move(unigrams));
  if (reg.names() != names) throw std::invalid_argument("feature registry names are not in canonical order");
  return reg;
}

// Labels and features ------------------------------------------------------

Vector gold_scores(const Cluster& cluster, const StopwordSet& stopwords) {
  const auto summary_words = content_words(cluster.summary, stopwords);
  Vector raw(cluster.units.size(), 0.0);
  for (std::size_t k = 0; k < cluster.units.size(); ++k) {
    for (const std::string& w : content_words(cluster.units[k], stopwords))
      if (summary_words.count(w)) raw[k] += 1.0;
  }
  const double top = raw.empty() ? 0.0 : *std::max_element(raw.begin(), raw.end());
  if (top > 0.0)
    for (double& x : raw) x /= top;
  return raw;
}

std::vector<int> unit_relevance(const Cluster& cluster, const StopwordSet& stopwords) {
  const Vector scores = gold_scores(cluster, stopwords);
  std::vector<int> rel(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) rel[k] = scores[k] > 0.0 ? 1 : 0;
  return rel;
}

double centroidness(std::size_t unit_index, const std::vector<TermWeights>& cluster_weights) {
  return cosine(cluster_weights.at(unit_index), mean_weights(cluster_weights));
}

double centroidness(const TextUnit& unit, const Cluster& cluster, const TfIdf& tfidf) {
  std::vector<TermWeights> weights;
  weights.reserve(cluster.units.size());
  for (const TextUnit& u : cluster.units) weights.push_back(tfidf.weights(u));
  return cosine(tfidf.weights(unit), mean_weights(weights));
}

namespace {

Vector features_with_centroid(const TextUnit& unit, const TermWeights& unit_weights,
                              const TermWeights& centroid, const FeatureContext& ctx) {
  const FeatureRegistry& reg = ctx.registry;
  if (!reg.initialized()) throw InvalidState("feature registry is not initialized");
  Vector f(reg.dimension(), 0.0);

  f[feature::kNumWords] = static_cast<double>(unit.tokens.size());
  std::set<std::string> tags;
  double entities = 0.0;
  for (const Token& t : unit.tokens) {
    if (t.pos && !t.pos->empty()) tags.insert(*t.pos);
    if (is_named_entity_tag(t.ner)) entities += 1.0;
  }
  f[feature::kNumPosTags] = static_cast<double>(tags.size());
  f[feature::kNumNamedEntities] = entities;
  f[feature::kCentroidness] = cosine(unit_weights, centroid);
  if (!unit_weights.empty()) {
    double sum = 0.0;
    double top = 0.0;
    for (const auto& [term, w] : unit_weights) {
      sum += w;
      top = std::max(top, w);
    }
    f[feature::kAvgTfIdf] = sum / static_cast<double>(unit_weights.size());
    f[feature::kMaxTfIdf] = top;
  }

  const auto& cats = reg.lexicon_categories();
  const auto& unigrams = reg.unigrams();
  for (const Token& t : unit.tokens) {
    for (const std::string& c : ctx.lexicons.categories.categories(t.norm)) {
      auto it = std::lower_bound(cats.begin(), cats.end(), c);
      if (it != cats.end() && *it == c)
        f[reg.category_offset() + static_cast<std::size_t>(it - cats.begin())] += 1.0;
    }
    for (const std::string& s : ctx.lexicons.sentiment.categories(t.norm)) {
      for (std::size_t k = 0; k < kSentimentClasses.size(); ++k)
        if (s == kSentimentClasses[k]) f[reg.sentiment_offset() + k] += 1.0;
    }
  }
  // Unigram registry order is by frequency, so look words up through a map.
  std::unordered_map<std::string, double> counts;
  for (const Token& t : unit.tokens) counts[t.norm] += 1.0;
  for (std::size_t k = 0; k < unigrams.size(); ++k) {
    auto it = counts.find(unigrams[k]);
    if (it != counts.end()) f[reg.unigram_offset() + k] = it->second;
  }
  return f;
}

}  // namespace

Vector extract_features(const TextUnit& unit, const Cluster& cluster, const FeatureContext& ctx) {
  std::vector<TermWeights> weights;
  for (const TextUnit& u : cluster.units) weights.push_back(ctx.tfidf.weights(u));
  return features_with_centroid(unit, ctx.tfidf.weights(unit), mean_weights(weights), ctx);
}

std::vector<Vector> extract_cluster_features(const Cluster& cluster, const FeatureContext& ctx) {
  std::vector<TermWeights> weights;
  for (const TextUnit& u : cluster.units) weights.push_back(ctx.tfidf.weights(u));
  const TermWeights centroid = mean_weights(weights);
  std::vector<Vector> out;
  out.reserve(cluster.units.size());
  for (std::size_t k = 0; k < cluster.units.size(); ++k)
    out.push_back(features_with_centroid(cluster.units[k], weights[k], centroid, ctx));
  return out;
}

// Regression ---------------------------------------------------------------

PreferenceDesign build_design(const std::vector<std::vector<Vector>>& features,
                              const std::vector<Vector>& labels) {
  if (features.size() != labels.size())
    throw std::invalid_argument("build_design: features and labels have different cluster counts");
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t pair_count = 0;
  for (std::size_t c = 0; c < features.size(); ++c) {
    if (features[c].size() != labels[c].size())
      throw std::invalid_argument("build_design: cluster " + std::to_string(c) +
                                  " has misaligned features and labels");
    std::size_t pos = 0;
    std::size_t zero = 0;
    for (std::size_t k = 0; k < features[c].size(); ++k) {
      if (d == 0 && n == 0) d = features[c][k].size();
      if (features[c][k].size() != d)
        throw std::invalid_argument("build_design: inconsistent feature dimension");
      ++n;
      if (labels[c][k] > 0.0) ++pos;
      else if (labels[c][k] == 0.0) ++zero;
    }
    pair_count += pos * zero;
  }

  PreferenceDesign design;
  design.units = Matrix(n, d);
  design.labels.reserve(n);
  design.pairs = Matrix(pair_count, d);
  design.pair_targets.assign(pair_count, 1.0);
  std::size_t row = 0;
  std::size_t pair_row = 0;
  for (std::size_t c = 0; c < features.size(); ++c) {
    for (std::size_t k = 0; k < features[c].size(); ++k) {
      std::copy(features[c][k].begin(), features[c][k].end(), design.units.row(row++).begin());
      design.labels.push_back(labels[c][k]);
    }
    for (std::size_t p = 0; p < features[c].size(); ++p) {
      if (!(labels[c][p] > 0.0)) continue;
      for (std::size_t q = 0; q < features[c].size(); ++q) {
        if (labels[c][q] != 0.0) continue;
        auto out = design.pairs.row(pair_row++);
        for (std::size_t j = 0; j < d; ++j) out[j] = features[c][p][j] - features[c][q][j];
      }
    }
  }
  return design;
}

namespace {

// Symmetric accumulation of scale * X^T X into a (upper triangle, mirrored
// afterwards by the caller).
void accumulate_gram(const Matrix& x, double scale, Matrix& a) {
  const std::size_t d = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = scale * row[i];
      if (xi == 0.0) continue;
      for (std::size_t j = i; j < d; ++j) a(i, j) += xi * row[j];
    }
  }
}

}  // namespace

SalienceModel fit_closed_form(const PreferenceDesign& design, double lambda, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("fit_closed_form: beta must be > 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("fit_closed_form: lambda must be >= 0");
  const std::size_t d = design.units.cols();
  if (design.pairs.rows() > 0 && design.pairs.cols() != d)
    throw std::invalid_argument("fit_closed_form: pair matrix dimension mismatch");

  Matrix a(d, d);
  accumulate_gram(design.units, 1.0, a);
  if (lambda > 0.0) accumulate_gram(design.pairs, lambda, a);
  for (std::size_t i = 0; i < d; ++i) {
    a(i, i) += beta;
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
  }

  Vector b = matvec_transposed(design.units, design.labels);
  if (lambda > 0.0 && design.pairs.rows() > 0) {
    const Vector pb = matvec_transposed(design.pairs, design.pair_targets);
    axpy(lambda, pb, b);
  }

  SalienceModel model;
  model.weights = solve_spd(a, b);
  model.lambda = lambda;
  model.beta = beta;
  return model;
}

double objective(const PreferenceDesign& design, std::span<const double> w, double lambda,
                 double beta) {
  if (w.size() != design.units.cols()) throw std::invalid_argument("objective: dimension mismatch");
  double fit = 0.0;
  const Vector pred = matvec(design.units, w);
  for (std::size_t i = 0; i < pred.size(); ++i) fit += (pred[i] - design.labels[i]) * (pred[i] - design.labels[i]);
  double pref = 0.0;
  if (design.pairs.rows() > 0) {
    const Vector diff = matvec(design.pairs, w);
    for (std::size_t i = 0; i < diff.size(); ++i)
      pref += (diff[i] - design.pair_targets[i]) * (diff[i] - design.pair_targets[i]);
  }
  return fit + lambda * pref + beta * norm2_squared(w);
}

Vector objective_gradient(const PreferenceDesign& design, std::span<const double> w, double lambda,
                          double beta) {
  Vector residual = matvec(design.units, w);
  for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= design.labels[i];
  Vector g = matvec_transposed(design.units, residual);
  for (double& x : g) x *= 2.0;
  if (design.pairs.rows() > 0) {
    Vector pr = matvec(design.pairs, w);
    for (std::size_t i = 0; i < pr.size(); ++i) pr[i] -= design.pair_targets[i];
    axpy(2.0 * lambda, matvec_transposed(design.pairs, pr), g);
  }
  axpy(2.0 * beta, w, g);
  return g;
}

Vector score_units(const SalienceModel& model, const std::vector<Vector>& unit_features) {
  Vector scores;
  scores.reserve(unit_features.size());
  for (const Vector& f : unit_features) {
    if (f.size() != model.weights.size())
      throw std::invalid_argument("score_units: feature dimension " + std::to_string(f.size()) +
                                  " does not match model dimension " +
                                  std::to_string(model.weights.size()));
    scores.push_back(dot(f, model.weights));
  }
  return scores;
}

std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

BaselineKind parse_baseline_kind(const std::string& name) {
  if (name == "length") return BaselineKind::kLength;
  if (name == "centroid") return BaselineKind::kCentroid;
  throw std::invalid_argument("unknown baseline kind '" + name + "'");
}

std::vector<std::size_t> baseline_rank(BaselineKind kind, const Cluster& cluster, const TfIdf& tfidf) {
  Vector scores(cluster.units.size());
  if (kind == BaselineKind::kLength) {
    for (std::size_t k = 0; k < cluster.units.size(); ++k)
      scores[k] = static_cast<double>(cluster.units[k].tokens.size());
  } else {
    std::vector<TermWeights> weights;
    for (const TextUnit& u : cluster.units) weights.push_back(tfidf.weights(u));
    const TermWeights centroid = mean_weights(weights);
    for (std::size_t k = 0; k < weights.size(); ++k) scores[k] = cosine(weights[k], centroid);
  }
  return rank_by_score(scores);
}

GridSearchResult grid_search(const PreferenceDesign& train_design,
                             const std::vector<std::vector<Vector>>& dev_features,
                             const std::vector<std::vector<int>>& dev_relevance,
                             const std::vector<double>& lambdas, const std::vector<double>& betas) {
  if (dev_features.size() != dev_relevance.size())
    throw std::invalid_argument("grid_search: dev features and relevance are misaligned");
  GridSearchResult result;
  double best = -1.0;
  for (double lambda : lambdas) {
    for (double beta : betas) {
      SalienceModel model = fit_closed_form(train_design, lambda, beta);
      std::vector<std::vector<int>> ranked;
      ranked.reserve(dev_features.size());
      for (std::size_t c = 0; c < dev_features.size(); ++c) {
        const Vector scores = score_units(model, dev_features[c]);
        std::vector<int> rel;
        for (std::size_t k : rank_by_score(scores)) rel.push_back(dev_relevance[c][k]);
        ranked.push_back(std::move(rel));
      }
      const double value = mrr(ranked);
      result.grid.push_back({lambda, beta, value});
      if (value > best) {
        best = value;
        result.model = std::move(model);
      }
    }
  }
  return result;
}

// Persistence --------------------------------------------------------------

void save_salience_model(const SalienceModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "opinsum-salience 1\n";
  out << "d " << model.weights.size() << "\n";
  out << "lambda " << format_real(model.lambda) << "\n";
  out << "beta " << format_real(model.beta) << "\n";
  out << "registry " << format_hex(model.registry_hash) << "\n";
  for (double w : model.weights) out << format_real(w) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SalienceModel load_salience_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string source = path.string();
  LineReader reader(in, source);
  reader.expect_line("opinsum-salience 1");
  SalienceModel model;
  const std::size_t d = parse_size(reader.keyed("d"), source, reader.line());
  model.lambda = parse_real(reader.keyed("lambda"), source, reader.line());
  model.beta = parse_real(reader.keyed("beta"), source, reader.line());
  model.registry_hash = parse_hex(reader.keyed("registry"), source, reader.line());
  model.weights.reserve(d);
  for (std::size_t k = 0; k < d; ++k) model.weights.push_back(parse_real(reader.next(), source, reader.line()));
  return model;
}

void save_registry(const FeatureRegistry& registry, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const std::string& n : registry.names()) out << n << "\n";
}

FeatureRegistry load_registry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) names.push_back(line);
  return FeatureRegistry::from_names(names);
}

void save_tfidf(const TfIdf& tfidf, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::vector<std::pair<std::string, std::size_t>> rows(tfidf.document_frequencies().begin(),
                                                        tfidf.document_frequencies().end());
  std::sort(rows.begin(), rows.end());
  out << "units " << tfidf.unit_count() << "\n";
  for (const auto& [term, df] : rows) out << term << "\t" << df << "\n";
}

TfIdf load_tfidf(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string source = path.string();
  LineReader reader(in, source);
  const std::size_t units = parse_size(reader.keyed("units"), source, reader.line());
  std::unordered_map<std::string, std::size_t> df;
  std::string line;
  while (reader.try_next(line)) {
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(source, reader.line(), "expected term<TAB>df");
    df[line.substr(0, tab)] = parse_size(line.substr(tab + 1), source, reader.line());
  }
  return TfIdf(units, std::move(df));
}

}  // namespace opinsum
