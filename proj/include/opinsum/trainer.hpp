#pragma once

// Negative log-likelihood training with per-example Adagrad updates,
// parameter initialization, dev-BLEU early stopping and finite-difference
// gradient checking.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "opinsum/attnseq2seq.hpp"
#include "opinsum/sampler.hpp"

namespace opinsum {

struct TrainConfig {
  std::size_t embed = 300;
  std::size_t hidden = 150;
  std::size_t attention = 100;
  std::size_t feature_dim = 10;
  bool use_features = true;
  std::size_t sample_size = kDefaultSampleSize;
  SamplingMode sampling = SamplingMode::kImportance;
  bool with_replacement = false;
  double learning_rate = 0.1;
  double adagrad_epsilon = 1e-6;
  std::size_t max_epochs = 500;
  std::size_t patience = 3;
  std::uint64_t seed = 1;
  double init_scale = 0.08;
  std::size_t max_len = 40;  // dev greedy decoding cap

  ModelShape shape(std::size_t vocab_size) const;
  void validate() const;
};

/// Sets one key of a flat key=value config. Returns false for unknown keys;
/// throws std::invalid_argument for malformed values.
bool set_train_option(TrainConfig& config, const std::string& key, const std::string& value);
/// Reads key=value lines ('#' comments allowed); unknown keys are errors.
TrainConfig parse_train_config(std::istream& in, const std::string& source = "<stream>");
TrainConfig load_train_config(const std::filesystem::path& path);
void write_train_config(const TrainConfig& config, std::ostream& out);

/// Weights ~ U(-scale, scale) in tensor order from one seeded stream; biases
/// zero. Covered pretrained rows then overwrite the embedding table.
void init_params(Seq2SeqModel& model, double scale, std::uint64_t seed,
                 const PretrainedEmbeddings* pretrained = nullptr);

struct AdagradState {
  Parameters accumulators;
  double learning_rate = 0.1;
  double epsilon = 1e-6;
  std::vector<bool> embedding_trainable;  // empty: every row trainable
};

AdagradState make_adagrad(const Parameters& params, double learning_rate, double epsilon);
/// Per coordinate: G += g^2; theta -= lr * g / (sqrt(G) + eps). Frozen
/// embedding rows are skipped.
void adagrad_update(Parameters& params, const Parameters& grads, AdagradState& state);

/// Raised when a per-example loss is not finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingData {
  std::vector<IndexedCluster> train;
  std::vector<Vector> train_scores;  // salience per unit
  std::vector<IndexedCluster> dev;
  std::vector<Vector> dev_scores;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_nll = 0.0;  // mean per-example NLL
  double dev_bleu = 0.0;
};

struct TrainResult {
  Seq2SeqModel model;  // best dev-BLEU snapshot
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_bleu = 0.0;
};

/// Greedy-decodes every dev cluster from its top-K input and returns corpus
/// BLEU against the indexed targets.
double dev_bleu(const Seq2SeqModel& model, const std::vector<IndexedCluster>& dev,
                const std::vector<Vector>& scores, std::size_t sample_size, std::size_t max_len);

/// `model` must already be initialized. Training stops after `patience`
/// epochs without a dev-BLEU improvement, at max_epochs, or once dev BLEU
/// reaches 1.
TrainResult train(Seq2SeqModel model, const TrainingData& data, const TrainConfig& config,
                  std::vector<bool> embedding_trainable = {});

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

struct GradCheckConfig {
  std::size_t embed = 8;
  std::size_t hidden = 6;
  std::size_t attention = 5;
  std::size_t feature_dim = 3;
  bool use_features = true;
  std::size_t vocab = 15;
  std::size_t units = 2;
  std::size_t unit_length = 4;
  std::size_t target_length = 3;  // including EOS
  double epsilon = 1e-5;
  double init_scale = 0.08;
  std::size_t max_coordinates = 2000;  // per tensor
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// |g_a - g_n| / max(1e-8, |g_a| + |g_n|) with central differences over a
/// random tiny model and example. The numeric side evaluates the loss in
/// long double.
GradCheckResult gradient_check(const GradCheckConfig& config, std::uint64_t seed);
/// Same check on a caller-supplied model and example.
GradCheckResult gradient_check(const Seq2SeqModel& model, const ConcatenatedInput& z, const std::vector<WordId>& target,
                               double epsilon, std::size_t max_coordinates, std::uint64_t seed);

}  // namespace opinsum
