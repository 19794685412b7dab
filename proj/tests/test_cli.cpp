#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kData = OPINSUM_TEST_DATA;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("opinsum_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

int run(const std::string& args) {
  const std::string cmd = std::string("'") + OPINSUM_CLI + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string corpus_args() {
  return "--train " + quote(kData / "train.jsonl") + " --dev " + quote(kData / "dev.jsonl") + " --test " +
         quote(kData / "test.jsonl") + " --category-lexicon " + quote(kData / "category.tsv") +
         " --sentiment-lexicon " + quote(kData / "sentiment.tsv");
}

const std::string kSmallModel =
    " --embed 8 --hidden 6 --attention 5 --feature-dim 2 --max-epochs 3 --patience 3 --sample-size 2 --max-len 12";

// Fits the salience model once and returns its directory.
fs::path salience_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("salience");
    REQUIRE(run("fit-importance " + corpus_args() + " --out-dir " + quote(d)) == 0);
    return d;
  }();
  return dir;
}

fs::path trained_model() {
  static const fs::path dir = [] {
    const fs::path d = scratch("train");
    REQUIRE(run("train " + corpus_args() + kSmallModel + " --salience-dir " + quote(salience_dir()) +
                " --out-dir " + quote(d)) == 0);
    return d;
  }();
  return dir / "model.txt";
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("preprocess --train " + quote(kData / "train.jsonl")) == 2);
  const fs::path out = scratch("missing");
  CHECK(run("preprocess --train " + quote(kData / "nope.jsonl") + " --out-dir " + quote(out)) == 2);
  CHECK_FALSE(fs::exists(out));
  CHECK(run("train " + corpus_args() + " --salience-dir " + quote(kData) + " --out-dir " + quote(out)) == 2);
  CHECK_FALSE(fs::exists(out));
  CHECK(run("preprocess --train " + quote(kData / "train.jsonl") + " --min-count abc --out-dir " + quote(out)) == 2);
}

TEST_CASE("config files reject unknown keys and flags override them") {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "hidden=6\nfancy_option=1\n";
  }
  CHECK(run("preprocess --config " + quote(dir / "bad.cfg") + " --train " + quote(kData / "train.jsonl") +
            " --out-dir " + quote(dir / "out")) == 2);
  {
    std::ofstream cfg(dir / "good.cfg");
    cfg << "# small model\nhidden=7\nmax_epochs=1\nembed=8\nattention=5\nfeature_dim=2\n";
  }
  REQUIRE(run("train --config " + quote(dir / "good.cfg") + " " + corpus_args() + " --hidden 6 --salience-dir " +
              quote(salience_dir()) + " --out-dir " + quote(dir / "out")) == 0);
  const std::string written = slurp(dir / "out" / "train_config.txt");
  CHECK(written.find("hidden=6\n") != std::string::npos);
  CHECK(written.find("max_epochs=1\n") != std::string::npos);
}

TEST_CASE("preprocess writes the vocabulary and statistics") {
  const fs::path out = scratch("preprocess");
  REQUIRE(run("preprocess " + corpus_args() + " --out-dir " + quote(out)) == 0);
  const std::string vocab = slurp(out / "vocab.txt");
  CHECK(vocab.rfind("<unk>\n<seg>\n<s>\n</s>\n<entity>\n", 0) == 0);
  CHECK(vocab.find("\nharbor\n") == std::string::npos);
  const auto stats = nlohmann::json::parse(slurp(out / "stats.json"));
  CHECK(stats["train"]["clusters"] == 4);
  CHECK(stats["test"]["units"] == 6);
  CHECK(stats["vocab_size"].get<std::size_t>() == static_cast<std::size_t>(std::count(vocab.begin(), vocab.end(), '\n')));
}

TEST_CASE("fit-importance is reproducible") {
  const fs::path a = salience_dir();
  const fs::path b = scratch("salience_again");
  REQUIRE(run("fit-importance " + corpus_args() + " --out-dir " + quote(b)) == 0);
  for (const char* name : {"salience.model", "salience.features", "salience.idf", "grid.csv"})
    CHECK(slurp(a / name) == slurp(b / name));
  const std::string grid = slurp(a / "grid.csv");
  CHECK(grid.rfind("lambda,beta,dev_mrr\n", 0) == 0);
  CHECK(std::count(grid.begin(), grid.end(), '\n') == 1 + 24);
}

TEST_CASE("rank-eval reports every system") {
  const fs::path out = scratch("rank");
  REQUIRE(run("rank-eval " + corpus_args() + " --salience-dir " + quote(salience_dir()) + " --out-dir " + quote(out)) ==
          0);
  const auto metrics = nlohmann::json::parse(slurp(out / "rank_metrics.json"));
  REQUIRE(metrics.size() == 3);
  CHECK(metrics[0]["system"] == "salience");
  // The longest unit is the only relevant one in each test cluster.
  CHECK(metrics[1]["system"] == "length");
  CHECK(metrics[1]["mrr"].get<double>() == 1.0);
  for (const auto& m : metrics) {
    CHECK(m["mrr"].get<double>() >= 0.0);
    CHECK(m["ndcg5"].get<double>() <= 1.0);
  }
  const std::string ranking = slurp(out / "ranking.csv");
  CHECK(ranking.rfind("cluster_id,unit_index,score,rank\n", 0) == 0);
  CHECK(std::count(ranking.begin(), ranking.end(), '\n') == 1 + 6);
  CHECK(slurp(out / "rank_metrics.csv").rfind("system,mrr,ndcg3,ndcg5\nsalience,", 0) == 0);
}

TEST_CASE("train is byte-reproducible") {
  const fs::path model = trained_model();
  const fs::path again = scratch("train_again");
  REQUIRE(run("train " + corpus_args() + kSmallModel + " --salience-dir " + quote(salience_dir()) + " --out-dir " +
              quote(again)) == 0);
  CHECK(slurp(model) == slurp(again / "model.txt"));
  const std::string history = slurp(again / "history.csv");
  CHECK(history.rfind("epoch,train_nll,dev_bleu\n1,", 0) == 0);
  CHECK(slurp(model.parent_path() / "history.csv") == history);
}

TEST_CASE("decode writes one record per test cluster") {
  const fs::path out = scratch("decode");
  REQUIRE(run("decode " + corpus_args() + " --model " + quote(trained_model()) + " --salience-dir " +
              quote(salience_dir()) + " --width 4 --max-len 10 --sample-size 2 --workers 2 --out-dir " + quote(out)) == 0);
  std::istringstream lines(slurp(out / "decode.jsonl"));
  std::string line;
  std::vector<std::string> ids;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    ids.push_back(j["id"].get<std::string>());
    const std::string summary = j["summary"].get<std::string>();
    CHECK(summary.find("<seg>") == std::string::npos);
    CHECK(summary.find("<entity>") == std::string::npos);
    CHECK(!j["nbest"].empty());
  }
  CHECK(ids == std::vector<std::string>{"x1", "x2"});

  const fs::path serial = scratch("decode_serial");
  REQUIRE(run("decode " + corpus_args() + " --model " + quote(trained_model()) + " --salience-dir " +
              quote(salience_dir()) + " --width 4 --max-len 10 --sample-size 2 --out-dir " + quote(serial)) == 0);
  CHECK(slurp(serial / "decode.jsonl") == slurp(out / "decode.jsonl"));
}

TEST_CASE("evaluate scores references against themselves as perfect") {
  const fs::path out = scratch("evaluate");
  fs::create_directories(out);
  {
    std::ofstream h(out / "refs.jsonl");
    h << R"({"id":"x1","summary":"Paper Moon is a moving and beautiful drama ."})" << '\n'
      << R"({"id":"x2","summary":"A loud but thrilling ride ."})" << '\n';
  }
  REQUIRE(run("evaluate --test " + quote(kData / "test.jsonl") + " --hypotheses " + quote(out / "refs.jsonl") +
              " --system gold --out-dir " + quote(out)) == 0);
  const auto j = nlohmann::json::parse(slurp(out / "eval.json"));
  CHECK(j[0]["system"] == "gold");
  CHECK(j[0]["bleu"].get<double>() == 1.0);
  CHECK(j[0]["rouge_su4"].get<double>() == 1.0);
  CHECK(slurp(out / "eval.csv").rfind("system,bleu,rouge_su4,mean_length\ngold,1,1,", 0) == 0);

  {
    std::ofstream h(out / "partial.jsonl");
    h << R"({"id":"x1","summary":"x"})" << '\n';
  }
  CHECK(run("evaluate --test " + quote(kData / "test.jsonl") + " --hypotheses " + quote(out / "partial.jsonl") +
            " --out-dir " + quote(out / "p")) == 2);
}

TEST_CASE("gradcheck exits 0 on a passing run") {
  const fs::path out = scratch("gradcheck");
  CHECK(run("gradcheck --gradcheck-seeds 2 --out-dir " + quote(out)) == 0);
  const std::string csv = slurp(out / "gradcheck.csv");
  CHECK(csv.rfind("seed,max_rel_error,worst_tensor,worst_index,coordinates\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("sampling-report without models lists no cells") {
  const fs::path out = scratch("sampling");
  REQUIRE(run("sampling-report " + corpus_args() + kSmallModel + " --salience-dir " + quote(salience_dir()) +
              " --train-missing false --out-dir " + quote(out)) == 0);
  CHECK(slurp(out / "sampling.csv") == "mode,K,bleu\n");
}
