#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "opinsum/salience.hpp"

using namespace opinsum;

namespace {

const StopwordSet kStop(std::unordered_set<std::string>{"the", "a", "is", "and", "was", "."});

Cluster cluster_of(const std::vector<std::string>& units, const std::string& summary) {
  Cluster c;
  c.id = "c";
  for (const auto& u : units) c.units.push_back(make_unit(u));
  c.summary = make_unit(summary);
  return c;
}

PreferenceDesign random_design(SeededRng& rng, std::size_t clusters, std::size_t units, std::size_t d) {
  std::vector<std::vector<Vector>> features(clusters);
  std::vector<Vector> labels(clusters);
  for (std::size_t c = 0; c < clusters; ++c) {
    for (std::size_t k = 0; k < units; ++k) {
      Vector f(d);
      for (double& x : f) x = rng.uniform(-1.0, 1.0);
      features[c].push_back(f);
      labels[c].push_back(rng.below(2) ? rng.uniform(0.1, 1.0) : 0.0);
    }
  }
  return build_design(features, labels);
}

// Plain gradient descent on the regularized objective.
Vector descend(const PreferenceDesign& design, double lambda, double beta, int steps, double rate) {
  Vector w(design.units.cols(), 0.0);
  for (int s = 0; s < steps; ++s) axpy(-rate, objective_gradient(design, w, lambda, beta), w);
  return w;
}

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("opinsum_salience_" + name);
}

}  // namespace

TEST_CASE("gold scores normalize content overlap by the cluster maximum") {
  const Cluster c = cluster_of({"The acting was great .", "The plot is slow ."}, "Great acting .");
  const Vector g = gold_scores(c, kStop);
  CHECK(g == Vector{1.0, 0.0});
  CHECK(unit_relevance(c, kStop) == std::vector<int>{1, 0});

  const Cluster half = cluster_of({"great acting", "great", "dull"}, "great acting");
  CHECK(gold_scores(half, kStop) == Vector{1.0, 0.5, 0.0});
  const Cluster none = cluster_of({"dull", "slow"}, "great");
  CHECK(gold_scores(none, kStop) == Vector{0.0, 0.0});
}

TEST_CASE("gold scores count each content type once") {
  const Cluster c = cluster_of({"great great great", "great acting"}, "great acting");
  CHECK(gold_scores(c, kStop) == Vector{0.5, 1.0});
}

TEST_CASE("build_design forms positive-versus-zero pairs within clusters") {
  const std::vector<std::vector<Vector>> features = {{{1, 0}, {0, 1}, {2, 2}, {3, 1}}, {{5, 5}, {1, 1}}};
  const std::vector<Vector> labels = {{1.0, 0.0, 0.5, 0.0}, {0.0, 0.0}};
  const PreferenceDesign d = build_design(features, labels);
  CHECK(d.units.rows() == 6);
  CHECK(d.labels == Vector{1.0, 0.0, 0.5, 0.0, 0.0, 0.0});
  REQUIRE(d.pairs.rows() == 4);
  CHECK(d.pair_targets == Vector(4, 1.0));
  CHECK(d.pairs == Matrix(4, 2, std::vector<double>{1, -1, -2, -1, 2, 1, -1, 1}));
}

TEST_CASE("build_design rejects ragged input") {
  CHECK_THROWS_AS(build_design({{{1, 0}}}, {}), std::invalid_argument);
  CHECK_THROWS_AS(build_design({{{1, 0}, {1}}}, {{1.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(build_design({{{1, 0}}}, {{1.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("objective at zero weights") {
  const PreferenceDesign d = build_design({{{1, 2}, {3, 4}, {0, 1}}}, {{1.0, 0.5, 0.0}});
  // ||L||^2 + lambda * P with P = 2 pairs.
  CHECK(objective(d, Vector{0, 0}, 0.3, 7.0) == doctest::Approx(1.25 + 0.3 * 2.0));
}

TEST_CASE("objective gradient matches central differences") {
  SeededRng rng(4);
  const PreferenceDesign d = random_design(rng, 3, 5, 4);
  Vector w(4);
  for (double& x : w) x = rng.uniform(-1.0, 1.0);
  const Vector g = objective_gradient(d, w, 0.7, 0.2);
  for (std::size_t j = 0; j < w.size(); ++j) {
    Vector up = w;
    Vector down = w;
    up[j] += 1e-6;
    down[j] -= 1e-6;
    const double fd = (objective(d, up, 0.7, 0.2) - objective(d, down, 0.7, 0.2)) / 2e-6;
    CHECK(std::abs(fd - g[j]) <= 1e-6 * (1.0 + std::abs(g[j])));
  }
}

TEST_CASE("closed form agrees with gradient descent") {
  SeededRng rng(12);
  const PreferenceDesign d = random_design(rng, 4, 5, 3);
  for (double lambda : {0.0, 0.5, 2.0}) {
    const SalienceModel m = fit_closed_form(d, lambda, 0.5);
    const Vector w = descend(d, lambda, 0.5, 20000, 2e-3);
    for (std::size_t j = 0; j < w.size(); ++j) CHECK(std::abs(m.weights[j] - w[j]) <= 1e-6);
    CHECK(norm_inf(objective_gradient(d, m.weights, lambda, 0.5)) <= 1e-9);
  }
}

TEST_CASE("lambda zero reduces to ridge regression") {
  const PreferenceDesign d = build_design({{{1, 0}, {0, 1}, {1, 1}}}, {{1.0, 0.0, 0.5}});
  // (R^T R + I) w = R^T L with R^T R = [[2,1],[1,2]], R^T L = [1.5, 0.5].
  const SalienceModel m = fit_closed_form(d, 0.0, 1.0);
  // [[3,1],[1,3]]^{-1} [1.5, 0.5] = [0.5, 0].
  CHECK(std::abs(m.weights[0] - 0.5) <= 1e-12);
  CHECK(std::abs(m.weights[1]) <= 1e-12);
}

TEST_CASE("large beta shrinks weights toward zero") {
  SeededRng rng(2);
  const PreferenceDesign d = random_design(rng, 3, 4, 5);
  const SalienceModel m = fit_closed_form(d, 1.0, 1e9);
  CHECK(norm_inf(m.weights) <= 1e-7);
}

TEST_CASE("closed form is a minimum under random perturbations") {
  SeededRng rng(31);
  const PreferenceDesign d = random_design(rng, 5, 6, 4);
  const SalienceModel m = fit_closed_form(d, 0.5, 0.1);
  const double best = objective(d, m.weights, 0.5, 0.1);
  for (int trial = 0; trial < 200; ++trial) {
    Vector w = m.weights;
    for (double& x : w) x += rng.uniform(-0.1, 0.1);
    CHECK(best <= objective(d, w, 0.5, 0.1) + 1e-12);
  }
}

TEST_CASE("fit_closed_form validates hyperparameters") {
  const PreferenceDesign d = build_design({{{1, 0}}}, {{1.0}});
  CHECK_THROWS_AS(fit_closed_form(d, 0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(fit_closed_form(d, -0.1, 1.0), std::invalid_argument);
}

TEST_CASE("scoring with the length indicator reproduces the length baseline") {
  const Cluster c = cluster_of({"good film", "a long and winding plot twist", "ok"}, "good");
  FeatureContext ctx;
  ctx.registry = FeatureRegistry::build({c}, kStop, ctx.lexicons);
  ctx.stopwords = kStop;
  ctx.tfidf = TfIdf(Corpus{c});
  const auto features = extract_cluster_features(c, ctx);
  SalienceModel m;
  m.weights.assign(ctx.registry.dimension(), 0.0);
  m.weights[feature::kNumWords] = 1.0;
  const Vector scores = score_units(m, features);
  CHECK(rank_by_score(scores) == baseline_rank(BaselineKind::kLength, c, ctx.tfidf));
  CHECK(rank_by_score(scores) == std::vector<std::size_t>{1, 0, 2});
  m.weights.pop_back();
  CHECK_THROWS_AS(score_units(m, features), std::invalid_argument);
}

TEST_CASE("rank_by_score is stable on ties") {
  CHECK(rank_by_score(Vector{0.5, 1.0, 0.5, 1.0}) == std::vector<std::size_t>{1, 3, 0, 2});
}

TEST_CASE("baseline kinds parse by name") {
  CHECK(parse_baseline_kind("length") == BaselineKind::kLength);
  CHECK(parse_baseline_kind("centroid") == BaselineKind::kCentroid);
  CHECK_THROWS(parse_baseline_kind("random"));
}

TEST_CASE("centroidness") {
  const Cluster same = cluster_of({"great acting", "great acting"}, "x");
  const TfIdf tfidf(Corpus{cluster_of({"great acting", "dull plot", "great plot"}, "x")});
  CHECK(std::abs(centroidness(same.units[0], same, tfidf) - 1.0) <= 1e-12);

  // Two disjoint units: each is at 45 degrees to the mean when their norms match.
  const Cluster split = cluster_of({"acting", "dull"}, "x");
  const TfIdf flat(2, {{"acting", 1}, {"dull", 1}});
  CHECK(std::abs(centroidness(split.units[0], split, flat) - std::sqrt(0.5)) <= 1e-12);
  const std::vector<TermWeights> w = {flat.weights(split.units[0]), flat.weights(split.units[1])};
  CHECK(centroidness(1, w) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("centroid baseline puts the most typical unit first") {
  const Cluster c = cluster_of({"dull", "great acting story", "great acting", "great story"}, "x");
  const TfIdf tfidf(Corpus{c});
  CHECK(baseline_rank(BaselineKind::kCentroid, c, tfidf).front() == 1);
}

TEST_CASE("feature extraction fills the fixed block and lexicon counts") {
  Cluster c = cluster_of({"Great acting by Ann", "slow"}, "x");
  c.units[0].tokens[0].pos = "JJ";
  c.units[0].tokens[1].pos = "NN";
  c.units[0].tokens[3].ner = "PERSON";
  c.units[0].tokens[2].ner = "O";
  FeatureContext ctx;
  ctx.lexicons.categories.add("great", "Strong");
  ctx.lexicons.sentiment.add("great", "positive");
  ctx.lexicons.sentiment.add("slow", "negative");
  ctx.stopwords = StopwordSet(std::unordered_set<std::string>{"by"});
  ctx.registry = FeatureRegistry::build({c}, ctx.stopwords, ctx.lexicons, 2);
  ctx.tfidf = TfIdf(Corpus{c});
  REQUIRE(ctx.registry.dimension() == feature::kFixedCount + 1 + 3 + 2);
  const Vector f = extract_features(c.units[0], c, ctx);
  CHECK(f[feature::kNumWords] == 4.0);
  CHECK(f[feature::kNumPosTags] == 2.0);
  CHECK(f[feature::kNumNamedEntities] == 1.0);
  CHECK(f[ctx.registry.category_offset()] == 1.0);
  CHECK(f[ctx.registry.sentiment_offset()] == 1.0);
  CHECK(f[ctx.registry.sentiment_offset() + 1] == 0.0);
  // Unigrams: acting, ann (frequency ties broken lexicographically).
  CHECK(ctx.registry.unigrams() == std::vector<std::string>{"acting", "ann"});
  CHECK(f[ctx.registry.unigram_offset()] == 1.0);
  CHECK(f == extract_cluster_features(c, ctx)[0]);
  FeatureContext empty;
  CHECK_THROWS_AS(extract_features(c.units[0], c, empty), InvalidState);
}

TEST_CASE("grid search keeps the first best point") {
  SeededRng rng(6);
  const PreferenceDesign d = random_design(rng, 3, 4, 3);
  const std::vector<std::vector<Vector>> dev = {{{1, 0, 0}, {0, 1, 0}}};
  const std::vector<std::vector<int>> rel = {{1, 0}};
  const GridSearchResult r = grid_search(d, dev, rel, {0.0, 1.0}, {0.1, 1.0});
  CHECK(r.grid.size() == 4);
  double best = -1.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < r.grid.size(); ++i)
    if (r.grid[i].dev_mrr > best) best = r.grid[arg = i].dev_mrr;
  CHECK(r.model.lambda == r.grid[arg].lambda);
  CHECK(r.model.beta == r.grid[arg].beta);
}

TEST_CASE("salience artifacts round-trip") {
  SalienceModel m;
  m.weights = {0.1, -2.5e-17, 3.0, 1.0 / 3.0};
  m.lambda = 0.5;
  m.beta = 10.0;
  m.registry_hash = 0xdeadbeefcafe1234ULL;
  save_salience_model(m, scratch("model"));
  const SalienceModel back = load_salience_model(scratch("model"));
  CHECK(back.weights == m.weights);
  CHECK(back.lambda == m.lambda);
  CHECK(back.beta == m.beta);
  CHECK(back.registry_hash == m.registry_hash);

  const FeatureRegistry reg({"Strong", "Weak"}, {"film", "plot"});
  save_registry(reg, scratch("registry"));
  const FeatureRegistry reg2 = load_registry(scratch("registry"));
  CHECK(reg2.names() == reg.names());
  CHECK(reg2.hash() == reg.hash());
  CHECK(FeatureRegistry::from_names(reg.names()).hash() == reg.hash());

  const TfIdf t(Corpus{cluster_of({"a b", "b c"}, "x")});
  save_tfidf(t, scratch("idf"));
  const TfIdf t2 = load_tfidf(scratch("idf"));
  CHECK(t2.unit_count() == t.unit_count());
  CHECK(t2.document_frequencies() == t.document_frequencies());
  CHECK_THROWS(load_salience_model(scratch("missing")));
}
