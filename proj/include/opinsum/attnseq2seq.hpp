#pragma once

// Attention encoder-decoder: peephole LSTM cell, bidirectional encoder,
// additive attention, conditional decoder, sequence log-likelihood and exact
// reverse-mode gradients (BPTT).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "opinsum/indexing.hpp"
#include "opinsum/numkit.hpp"
#include "opinsum/sampler.hpp"
#include "opinsum/textcorpus.hpp"

namespace opinsum {

struct ModelShape {
  std::size_t vocab = 0;
  std::size_t embed = 300;
  std::size_t hidden = 150;
  std::size_t attention = 100;
  std::size_t feature_dim = 10;  // rows of each discrete-feature lookup table
  bool use_features = false;

  /// Width of one token representation: embedding, lookup rows, TF-IDF.
  std::size_t token_dim() const;
  std::size_t decoder_input_dim() const { return token_dim() + 2 * hidden; }

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// One gate's projections. `from_cell` is empty for the candidate gate, which
/// has no peephole connection.
struct Gate {
  Matrix from_input;
  Matrix from_hidden;
  Matrix from_cell;
  Matrix bias;  // d_h x 1
};

struct LstmCellParams {
  Gate input;
  Gate forget;
  Gate candidate;
  Gate output;

  static LstmCellParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  std::size_t input_dim() const { return input.from_input.cols(); }
  std::size_t hidden_dim() const { return input.from_input.rows(); }
};

struct LstmState {
  Vector h;
  Vector c;
  static LstmState zeros(std::size_t hidden_dim) { return {Vector(hidden_dim, 0.0), Vector(hidden_dim, 0.0)}; }
};

struct AttentionParams {
  Matrix context_proj;  // d_a x 2 d_h
  Matrix state_proj;    // d_a x d_h
  Matrix score;         // 1 x d_a
};

struct Parameters {
  Matrix embeddings;                 // |V| x d_emb
  std::vector<Matrix> feature_tables;  // one per discrete feature (empty without features)
  LstmCellParams encoder_forward;
  LstmCellParams encoder_backward;
  LstmCellParams decoder;
  AttentionParams attention;
  Matrix output_weights;  // |V| x d_h
  Matrix output_bias;     // |V| x 1

  static Parameters zeros(const ModelShape& shape, const TokenFeatureSchema& schema);
};

/// Visits every tensor in a fixed order with a stable name. `is_bias` marks
/// the additive bias tensors.
void for_each_tensor(Parameters& params,
                     const std::function<void(const std::string& name, Matrix& tensor, bool is_bias)>& fn);
void for_each_tensor(const Parameters& params,
                     const std::function<void(const std::string& name, const Matrix& tensor, bool is_bias)>& fn);
std::size_t parameter_count(const Parameters& params);

class Seq2SeqModel {
 public:
  Seq2SeqModel() = default;
  /// Zero-initialized parameters sized for the vocabulary and schema.
  Seq2SeqModel(ModelShape shape, Vocabulary vocab, TokenFeatureSchema schema,
               std::vector<TokenFeatures> word_features);
  /// Word-type features are derived from `lexicons`.
  static Seq2SeqModel create(ModelShape shape, Vocabulary vocab, TokenFeatureSchema schema,
                             const Lexicons& lexicons);

  const ModelShape& shape() const { return shape_; }
  const Vocabulary& vocab() const { return vocab_; }
  const TokenFeatureSchema& schema() const { return schema_; }
  const std::vector<TokenFeatures>& word_features() const { return word_features_; }

  const Parameters& params() const { return params_; }
  /// Mutable access invalidates outstanding forward traces.
  Parameters& mutable_params() {
    ++version_;
    return params_;
  }
  std::uint64_t version() const { return version_; }

  bool operator==(const Seq2SeqModel& other) const;

 private:
  ModelShape shape_;
  Vocabulary vocab_;
  TokenFeatureSchema schema_;
  std::vector<TokenFeatures> word_features_;
  Parameters params_;
  std::uint64_t version_ = 0;
};

struct LstmStepTrace {
  Vector input;
  Vector h_prev;
  Vector c_prev;
  Vector in_gate;
  Vector forget_gate;
  Vector candidate;
  Vector cell;
  Vector out_gate;
  Vector cell_tanh;
  Vector hidden;
};

LstmState lstm_step(const LstmCellParams& params, std::span<const double> input, const LstmState& prev);
LstmStepTrace lstm_step_traced(const LstmCellParams& params, std::span<const double> input,
                               const LstmState& prev);

/// Token representation: embedding row, feature lookup rows, TF-IDF value.
Vector token_representation(const Seq2SeqModel& model, WordId id, const TokenFeatures& features);

/// Encoder outputs b_1..b_n and their attention projections.
struct EncodedInput {
  std::vector<Vector> contexts;
  std::vector<Vector> keys;  // context_proj * b_i
};

EncodedInput encode(const Seq2SeqModel& model, const ConcatenatedInput& z);
/// Precomputes keys for externally supplied contexts.
EncodedInput make_encoded(const Seq2SeqModel& model, std::vector<Vector> contexts);

struct AttentionResult {
  Vector weights;  // a
  Vector context;  // s
};
AttentionResult attend(const Seq2SeqModel& model, const EncodedInput& encoded, std::span<const double> h_prev);

struct DecodeStep {
  LstmState state;
  Vector probs;
  Vector log_probs;
  Vector attention;
};
DecodeStep decode_step(const Seq2SeqModel& model, WordId prev, const LstmState& state,
                       const EncodedInput& encoded);

struct DecoderStepTrace {
  WordId prev = Vocabulary::kBos;
  WordId target = Vocabulary::kEos;
  std::vector<Vector> attention_hidden;  // tanh(key_i + state_proj h_prev)
  Vector attention;
  Vector context;
  LstmStepTrace lstm;
  Vector probs;
};

struct ForwardTrace {
  ConcatenatedInput input;
  std::vector<Vector> token_inputs;
  std::vector<LstmStepTrace> forward_steps;
  std::vector<LstmStepTrace> backward_steps;  // backward_steps[t] consumed token n-1-t
  EncodedInput encoded;
  std::vector<DecoderStepTrace> steps;
  double loglik = 0.0;
  std::uint64_t model_version = 0;
  const Seq2SeqModel* model = nullptr;
};

struct SequenceScore {
  double loglik = 0.0;
  ForwardTrace trace;
};

/// Sum of log p(y_j | y_<j, z) with the decoder started from zeros and BOS
/// as its first input. `target` must end with EOS.
SequenceScore sequence_log_prob(const Seq2SeqModel& model, const ConcatenatedInput& z,
                                const std::vector<WordId>& target);

/// Gradient of loss = -scale * loglik with respect to every tensor.
Parameters backward_pass(const Seq2SeqModel& model, const ForwardTrace& trace, double scale = 1.0);

void save_model(const Seq2SeqModel& model, const std::filesystem::path& path);
void write_model(const Seq2SeqModel& model, std::ostream& out);
Seq2SeqModel load_model(const std::filesystem::path& path);
Seq2SeqModel read_model(std::istream& in, const std::string& source = "<stream>");

}  // namespace opinsum
