#include "opinsum/attnseq2seq.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "opinsum/errors.hpp"
#include "opinsum/format.hpp"

namespace opinsum {

namespace {

const char* const kFeatureTableNames[kDiscreteFeatureCount] = {"named_entity", "capitalized", "pos_tag",
                                                               "category", "sentiment"};

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

Gate make_gate(std::size_t input_dim, std::size_t hidden_dim, bool peephole) {
  Gate g;
  g.from_input = Matrix(hidden_dim, input_dim);
  g.from_hidden = Matrix(hidden_dim, hidden_dim);
  if (peephole) g.from_cell = Matrix(hidden_dim, hidden_dim);
  g.bias = Matrix(hidden_dim, 1);
  return g;
}

template <class P, class Fn>
void visit_gate(const std::string& prefix, P& gate, Fn& fn) {
  fn(prefix + ".from_input", gate.from_input, false);
  fn(prefix + ".from_hidden", gate.from_hidden, false);
  if (!gate.from_cell.empty()) fn(prefix + ".from_cell", gate.from_cell, false);
  fn(prefix + ".bias", gate.bias, true);
}

template <class P, class Fn>
void visit_cell(const std::string& prefix, P& cell, Fn& fn) {
  visit_gate(prefix + ".input", cell.input, fn);
  visit_gate(prefix + ".forget", cell.forget, fn);
  visit_gate(prefix + ".candidate", cell.candidate, fn);
  visit_gate(prefix + ".output", cell.output, fn);
}

template <class P, class Fn>
void visit_params(P& params, Fn& fn) {
  fn(std::string("embeddings"), params.embeddings, false);
  for (std::size_t f = 0; f < params.feature_tables.size(); ++f)
    fn(std::string("feature.") + kFeatureTableNames[f], params.feature_tables[f], false);
  visit_cell("encoder_forward", params.encoder_forward, fn);
  visit_cell("encoder_backward", params.encoder_backward, fn);
  visit_cell("decoder", params.decoder, fn);
  fn(std::string("attention.context_proj"), params.attention.context_proj, false);
  fn(std::string("attention.state_proj"), params.attention.state_proj, false);
  fn(std::string("attention.score"), params.attention.score, false);
  fn(std::string("output.weights"), params.output_weights, false);
  fn(std::string("output.bias"), params.output_bias, true);
}

Vector gate_preactivation(const Gate& g, std::span<const double> input, std::span<const double> h_prev,
                          std::span<const double> cell) {
  Vector pre(g.bias.values());
  matvec_accumulate(g.from_input, input, pre);
  matvec_accumulate(g.from_hidden, h_prev, pre);
  if (!g.from_cell.empty()) matvec_accumulate(g.from_cell, cell, pre);
  return pre;
}

struct LstmGradients {
  Vector d_input;
  Vector dh_prev;
  Vector dc_prev;
};

void accumulate_gate(Gate& grad, const Gate& params, std::span<const double> d_pre, const LstmStepTrace& t,
                     std::span<const double> cell_input, LstmGradients& out) {
  outer_accumulate(grad.from_input, d_pre, t.input);
  outer_accumulate(grad.from_hidden, d_pre, t.h_prev);
  if (!params.from_cell.empty()) outer_accumulate(grad.from_cell, d_pre, cell_input);
  axpy(1.0, d_pre, grad.bias.values());
  matvec_transposed_accumulate(params.from_input, d_pre, out.d_input);
  matvec_transposed_accumulate(params.from_hidden, d_pre, out.dh_prev);
}

// Backpropagates through one lstm_step given dL/dh and dL/dc of its outputs.
LstmGradients lstm_backward(const LstmCellParams& p, const LstmStepTrace& t, std::span<const double> dh,
                            std::span<const double> dc_in, LstmCellParams& grad) {
  const std::size_t hd = t.hidden.size();
  LstmGradients out{Vector(t.input.size(), 0.0), Vector(hd, 0.0), Vector(hd, 0.0)};

  Vector dc(hd);
  Vector d_out(hd);
  for (std::size_t k = 0; k < hd; ++k) {
    const double o = t.out_gate[k];
    const double tc = t.cell_tanh[k];
    dc[k] = dc_in[k] + dh[k] * o * (1.0 - tc * tc);
    d_out[k] = dh[k] * tc * o * (1.0 - o);
  }
  // The output gate peeks at the new cell state.
  matvec_transposed_accumulate(p.output.from_cell, d_out, dc);
  accumulate_gate(grad.output, p.output, d_out, t, t.cell, out);

  Vector d_in(hd);
  Vector d_forget(hd);
  Vector d_cand(hd);
  for (std::size_t k = 0; k < hd; ++k) {
    const double i = t.in_gate[k];
    const double f = t.forget_gate[k];
    const double g = t.candidate[k];
    d_in[k] = dc[k] * g * i * (1.0 - i);
    d_forget[k] = dc[k] * t.c_prev[k] * f * (1.0 - f);
    d_cand[k] = dc[k] * i * (1.0 - g * g);
    out.dc_prev[k] = dc[k] * f;
  }
  accumulate_gate(grad.input, p.input, d_in, t, t.c_prev, out);
  matvec_transposed_accumulate(p.input.from_cell, d_in, out.dc_prev);
  accumulate_gate(grad.forget, p.forget, d_forget, t, t.c_prev, out);
  matvec_transposed_accumulate(p.forget.from_cell, d_forget, out.dc_prev);
  accumulate_gate(grad.candidate, p.candidate, d_cand, t, t.c_prev, out);
  return out;
}

void accumulate_representation(const Seq2SeqModel& model, WordId id, const TokenFeatures& features,
                               std::span<const double> d_rep, Parameters& grad) {
  const ModelShape& s = model.shape();
  axpy(1.0, d_rep.subspan(0, s.embed), grad.embeddings.row(static_cast<std::size_t>(id)));
  if (!s.use_features) return;
  for (std::size_t f = 0; f < kDiscreteFeatureCount; ++f) {
    auto row = grad.feature_tables[f].row(static_cast<std::size_t>(features.discrete[f]));
    axpy(1.0, d_rep.subspan(s.embed + f * s.feature_dim, s.feature_dim), row);
  }
}

void check_word(const Seq2SeqModel& model, WordId id) {
  require(id >= 0 && static_cast<std::size_t>(id) < model.shape().vocab,
          "word index " + std::to_string(id) + " outside vocabulary of size " +
              std::to_string(model.shape().vocab));
}

Vector attention_scores(const Seq2SeqModel& model, const EncodedInput& encoded, std::span<const double> h_prev,
                        std::vector<Vector>* hidden_out) {
  const AttentionParams& att = model.params().attention;
  const Vector state_term = matvec(att.state_proj, h_prev);
  Vector scores(encoded.contexts.size());
  for (std::size_t i = 0; i < encoded.contexts.size(); ++i) {
    Vector t = add(encoded.keys[i], state_term);
    for (double& x : t) x = std::tanh(x);
    scores[i] = dot(att.score.values(), t);
    if (hidden_out) hidden_out->push_back(std::move(t));
  }
  return scores;
}

AttentionResult attend_impl(const Seq2SeqModel& model, const EncodedInput& encoded, std::span<const double> h_prev,
                            std::vector<Vector>* hidden_out) {
  require(!encoded.contexts.empty(), "attend: no encoder contexts");
  AttentionResult r;
  r.weights = softmax(attention_scores(model, encoded, h_prev, hidden_out));
  r.context.assign(encoded.contexts.front().size(), 0.0);
  for (std::size_t i = 0; i < encoded.contexts.size(); ++i) axpy(r.weights[i], encoded.contexts[i], r.context);
  return r;
}

DecodeStep decode_step_impl(const Seq2SeqModel& model, WordId prev, const LstmState& state,
                            const EncodedInput& encoded, DecoderStepTrace* trace) {
  check_word(model, prev);
  require(state.h.size() == model.shape().hidden && state.c.size() == model.shape().hidden,
          "decode_step: state dimension mismatch");
  AttentionResult att = attend_impl(model, encoded, state.h, trace ? &trace->attention_hidden : nullptr);
  const Vector rep = token_representation(model, prev, model.word_features()[static_cast<std::size_t>(prev)]);
  const Vector input = concat(rep, att.context);
  LstmStepTrace lstm = lstm_step_traced(model.params().decoder, input, state);
  const Vector logits = affine(model.params().output_weights, lstm.hidden, model.params().output_bias.values());

  DecodeStep out;
  out.state = {lstm.hidden, lstm.cell};
  out.probs = softmax(logits);
  out.log_probs = log_softmax(logits);
  out.attention = att.weights;
  if (trace) {
    trace->prev = prev;
    trace->attention = std::move(att.weights);
    trace->context = std::move(att.context);
    trace->lstm = std::move(lstm);
    trace->probs = out.probs;
  }
  return out;
}

}  // namespace

// Shapes and parameters -----------------------------------------------------

std::size_t ModelShape::token_dim() const {
  return embed + (use_features ? kDiscreteFeatureCount * feature_dim + 1 : 0);
}

LstmCellParams LstmCellParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  LstmCellParams p;
  p.input = make_gate(input_dim, hidden_dim, true);
  p.forget = make_gate(input_dim, hidden_dim, true);
  p.candidate = make_gate(input_dim, hidden_dim, false);
  p.output = make_gate(input_dim, hidden_dim, true);
  return p;
}

Parameters Parameters::zeros(const ModelShape& shape, const TokenFeatureSchema& schema) {
  require(shape.vocab >= Vocabulary::kReservedCount && shape.embed > 0 && shape.hidden > 0 &&
              shape.attention > 0 && (!shape.use_features || shape.feature_dim > 0),
          "model dimensions must be positive");
  Parameters p;
  p.embeddings = Matrix(shape.vocab, shape.embed);
  if (shape.use_features)
    for (std::size_t rows : schema.table_sizes()) p.feature_tables.emplace_back(rows, shape.feature_dim);
  p.encoder_forward = LstmCellParams::zeros(shape.token_dim(), shape.hidden);
  p.encoder_backward = LstmCellParams::zeros(shape.token_dim(), shape.hidden);
  p.decoder = LstmCellParams::zeros(shape.decoder_input_dim(), shape.hidden);
  p.attention.context_proj = Matrix(shape.attention, 2 * shape.hidden);
  p.attention.state_proj = Matrix(shape.attention, shape.hidden);
  p.attention.score = Matrix(1, shape.attention);
  p.output_weights = Matrix(shape.vocab, shape.hidden);
  p.output_bias = Matrix(shape.vocab, 1);
  return p;
}

void for_each_tensor(Parameters& params,
                     const std::function<void(const std::string&, Matrix&, bool)>& fn) {
  visit_params(params, fn);
}

void for_each_tensor(const Parameters& params,
                     const std::function<void(const std::string&, const Matrix&, bool)>& fn) {
  visit_params(params, fn);
}

std::size_t parameter_count(const Parameters& params) {
  std::size_t n = 0;
  for_each_tensor(params, [&](const std::string&, const Matrix& m, bool) { n += m.size(); });
  return n;
}

Seq2SeqModel::Seq2SeqModel(ModelShape shape, Vocabulary vocab, TokenFeatureSchema schema,
                           std::vector<TokenFeatures> word_features)
    : shape_(shape), vocab_(std::move(vocab)), schema_(std::move(schema)), word_features_(std::move(word_features)) {
  require(shape_.vocab == vocab_.size(), "model shape vocabulary size does not match vocabulary");
  require(word_features_.size() == vocab_.size(), "word features must cover the vocabulary");
  const auto sizes = schema_.table_sizes();
  for (const TokenFeatures& f : word_features_)
    for (std::size_t k = 0; k < kDiscreteFeatureCount; ++k)
      require(f.discrete[k] >= 0 && static_cast<std::size_t>(f.discrete[k]) < sizes[k],
              "word feature index outside its lookup table");
  params_ = Parameters::zeros(shape_, schema_);
}

Seq2SeqModel Seq2SeqModel::create(ModelShape shape, Vocabulary vocab, TokenFeatureSchema schema,
                                  const Lexicons& lexicons) {
  shape.vocab = vocab.size();
  std::vector<TokenFeatures> features;
  features.reserve(vocab.size());
  for (WordId id = 0; id < static_cast<WordId>(vocab.size()); ++id)
    features.push_back(Vocabulary::is_reserved(id) ? TokenFeatures{}
                                                   : schema.word_type_features(vocab.word_of(id), lexicons));
  return Seq2SeqModel(shape, std::move(vocab), std::move(schema), std::move(features));
}

bool Seq2SeqModel::operator==(const Seq2SeqModel& other) const {
  if (!(shape_ == other.shape_) || !(vocab_ == other.vocab_) || !(schema_ == other.schema_) ||
      word_features_ != other.word_features_)
    return false;
  std::vector<const Matrix*> mine;
  std::vector<const Matrix*> theirs;
  for_each_tensor(params_, [&](const std::string&, const Matrix& m, bool) { mine.push_back(&m); });
  for_each_tensor(other.params_, [&](const std::string&, const Matrix& m, bool) { theirs.push_back(&m); });
  if (mine.size() != theirs.size()) return false;
  for (std::size_t i = 0; i < mine.size(); ++i)
    if (!(*mine[i] == *theirs[i])) return false;
  return true;
}

// Forward computation -------------------------------------------------------

LstmStepTrace lstm_step_traced(const LstmCellParams& p, std::span<const double> input, const LstmState& prev) {
  const std::size_t hd = p.hidden_dim();
  require(input.size() == p.input_dim(), "lstm_step: input has " + std::to_string(input.size()) +
                                             " entries, expected " + std::to_string(p.input_dim()));
  require(prev.h.size() == hd && prev.c.size() == hd, "lstm_step: state dimension mismatch");
  LstmStepTrace t;
  t.input.assign(input.begin(), input.end());
  t.h_prev = prev.h;
  t.c_prev = prev.c;
  t.in_gate = sigmoid_elem(gate_preactivation(p.input, input, prev.h, prev.c));
  t.forget_gate = sigmoid_elem(gate_preactivation(p.forget, input, prev.h, prev.c));
  t.candidate = tanh_elem(gate_preactivation(p.candidate, input, prev.h, {}));
  t.cell.resize(hd);
  for (std::size_t k = 0; k < hd; ++k)
    t.cell[k] = t.forget_gate[k] * prev.c[k] + t.in_gate[k] * t.candidate[k];
  t.out_gate = sigmoid_elem(gate_preactivation(p.output, input, prev.h, t.cell));
  t.cell_tanh = tanh_elem(t.cell);
  t.hidden = hadamard(t.out_gate, t.cell_tanh);
  return t;
}

LstmState lstm_step(const LstmCellParams& params, std::span<const double> input, const LstmState& prev) {
  LstmStepTrace t = lstm_step_traced(params, input, prev);
  return {std::move(t.hidden), std::move(t.cell)};
}

Vector token_representation(const Seq2SeqModel& model, WordId id, const TokenFeatures& features) {
  check_word(model, id);
  const ModelShape& s = model.shape();
  const Parameters& p = model.params();
  Vector rep;
  rep.reserve(s.token_dim());
  auto row = p.embeddings.row(static_cast<std::size_t>(id));
  rep.insert(rep.end(), row.begin(), row.end());
  if (s.use_features) {
    for (std::size_t f = 0; f < kDiscreteFeatureCount; ++f) {
      const int idx = features.discrete[f];
      require(idx >= 0 && static_cast<std::size_t>(idx) < p.feature_tables[f].rows(),
              std::string("feature index out of range for ") + kFeatureTableNames[f]);
      auto frow = p.feature_tables[f].row(static_cast<std::size_t>(idx));
      rep.insert(rep.end(), frow.begin(), frow.end());
    }
    rep.push_back(features.tfidf);
  }
  return rep;
}

EncodedInput make_encoded(const Seq2SeqModel& model, std::vector<Vector> contexts) {
  EncodedInput e;
  e.keys.reserve(contexts.size());
  for (const Vector& b : contexts) e.keys.push_back(matvec(model.params().attention.context_proj, b));
  e.contexts = std::move(contexts);
  return e;
}

namespace {

void encode_traced(const Seq2SeqModel& model, const ConcatenatedInput& z, ForwardTrace& trace) {
  const std::size_t n = z.ids.size();
  require(n >= 1, "encode: empty input sequence");
  require(z.features.size() == n, "encode: feature count does not match token count");
  const std::size_t hd = model.shape().hidden;
  trace.token_inputs.clear();
  trace.token_inputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) trace.token_inputs.push_back(token_representation(model, z.ids[i], z.features[i]));

  trace.forward_steps.clear();
  trace.backward_steps.clear();
  LstmState state = LstmState::zeros(hd);
  for (std::size_t i = 0; i < n; ++i) {
    trace.forward_steps.push_back(lstm_step_traced(model.params().encoder_forward, trace.token_inputs[i], state));
    state = {trace.forward_steps.back().hidden, trace.forward_steps.back().cell};
  }
  state = LstmState::zeros(hd);
  for (std::size_t t = 0; t < n; ++t) {
    trace.backward_steps.push_back(
        lstm_step_traced(model.params().encoder_backward, trace.token_inputs[n - 1 - t], state));
    state = {trace.backward_steps.back().hidden, trace.backward_steps.back().cell};
  }
  std::vector<Vector> contexts;
  contexts.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    contexts.push_back(concat(trace.forward_steps[i].hidden, trace.backward_steps[n - 1 - i].hidden));
  trace.encoded = make_encoded(model, std::move(contexts));
}

}  // namespace

EncodedInput encode(const Seq2SeqModel& model, const ConcatenatedInput& z) {
  ForwardTrace trace;
  encode_traced(model, z, trace);
  return std::move(trace.encoded);
}

AttentionResult attend(const Seq2SeqModel& model, const EncodedInput& encoded, std::span<const double> h_prev) {
  require(h_prev.size() == model.shape().hidden, "attend: state dimension mismatch");
  return attend_impl(model, encoded, h_prev, nullptr);
}

DecodeStep decode_step(const Seq2SeqModel& model, WordId prev, const LstmState& state, const EncodedInput& encoded) {
  return decode_step_impl(model, prev, state, encoded, nullptr);
}

SequenceScore sequence_log_prob(const Seq2SeqModel& model, const ConcatenatedInput& z,
                                const std::vector<WordId>& target) {
  require(!target.empty() && target.back() == Vocabulary::kEos, "target sequence must end with EOS");
  for (WordId id : target) check_word(model, id);
  SequenceScore out;
  ForwardTrace& trace = out.trace;
  trace.input = z;
  trace.model = &model;
  trace.model_version = model.version();
  encode_traced(model, z, trace);

  LstmState state = LstmState::zeros(model.shape().hidden);
  WordId prev = Vocabulary::kBos;
  double loglik = 0.0;
  for (WordId y : target) {
    DecoderStepTrace step;
    DecodeStep d = decode_step_impl(model, prev, state, trace.encoded, &step);
    step.target = y;
    loglik += d.log_probs[static_cast<std::size_t>(y)];
    trace.steps.push_back(std::move(step));
    state = std::move(d.state);
    prev = y;
  }
  trace.loglik = loglik;
  out.loglik = loglik;
  return out;
}

// Reverse mode ---------------------------------------------------------------

Parameters backward_pass(const Seq2SeqModel& model, const ForwardTrace& trace, double scale) {
  if (trace.model != &model || trace.model_version != model.version())
    throw InvalidState("backward_pass: forward trace does not belong to the current model parameters");
  const ModelShape& s = model.shape();
  const Parameters& p = model.params();
  const std::size_t n = trace.encoded.contexts.size();
  const std::size_t hd = s.hidden;
  Parameters grad = Parameters::zeros(s, model.schema());

  std::vector<Vector> d_contexts(n, Vector(2 * hd, 0.0));
  std::vector<Vector> d_keys(n, Vector(s.attention, 0.0));
  Vector dh_next(hd, 0.0);
  Vector dc_next(hd, 0.0);
  const std::size_t tok = s.token_dim();

  for (std::size_t j = trace.steps.size(); j-- > 0;) {
    const DecoderStepTrace& st = trace.steps[j];
    Vector d_logits = st.probs;
    for (double& x : d_logits) x *= scale;
    d_logits[static_cast<std::size_t>(st.target)] -= scale;
    outer_accumulate(grad.output_weights, d_logits, st.lstm.hidden);
    axpy(1.0, d_logits, grad.output_bias.values());

    Vector dh = dh_next;
    matvec_transposed_accumulate(p.output_weights, d_logits, dh);
    LstmGradients lg = lstm_backward(p.decoder, st.lstm, dh, dc_next, grad.decoder);

    const std::span<const double> d_input(lg.d_input);
    accumulate_representation(model, st.prev, model.word_features()[static_cast<std::size_t>(st.prev)],
                              d_input.subspan(0, tok), grad);
    const std::span<const double> d_context = d_input.subspan(tok, 2 * hd);

    Vector d_weights(n);
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d_weights[i] = dot(d_context, trace.encoded.contexts[i]);
      axpy(st.attention[i], d_context, d_contexts[i]);
      weighted += st.attention[i] * d_weights[i];
    }
    Vector d_state_pre(s.attention, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double d_score = st.attention[i] * (d_weights[i] - weighted);
      if (d_score == 0.0) continue;
      const Vector& t = st.attention_hidden[i];
      axpy(d_score, t, grad.attention.score.values());
      for (std::size_t a = 0; a < s.attention; ++a) {
        const double d_pre = d_score * p.attention.score.values()[a] * (1.0 - t[a] * t[a]);
        d_keys[i][a] += d_pre;
        d_state_pre[a] += d_pre;
      }
    }
    outer_accumulate(grad.attention.state_proj, d_state_pre, st.lstm.h_prev);
    matvec_transposed_accumulate(p.attention.state_proj, d_state_pre, lg.dh_prev);

    dh_next = std::move(lg.dh_prev);
    dc_next = std::move(lg.dc_prev);
  }

  for (std::size_t i = 0; i < n; ++i) {
    outer_accumulate(grad.attention.context_proj, d_keys[i], trace.encoded.contexts[i]);
    matvec_transposed_accumulate(p.attention.context_proj, d_keys[i], d_contexts[i]);
  }

  std::vector<Vector> d_tokens(n, Vector(tok, 0.0));
  Vector dh(hd, 0.0);
  Vector dc(hd, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    axpy(1.0, std::span<const double>(d_contexts[i]).subspan(0, hd), dh);
    LstmGradients lg = lstm_backward(p.encoder_forward, trace.forward_steps[i], dh, dc, grad.encoder_forward);
    axpy(1.0, lg.d_input, d_tokens[i]);
    dh = std::move(lg.dh_prev);
    dc = std::move(lg.dc_prev);
  }
  dh.assign(hd, 0.0);
  dc.assign(hd, 0.0);
  for (std::size_t t = n; t-- > 0;) {
    const std::size_t pos = n - 1 - t;
    axpy(1.0, std::span<const double>(d_contexts[pos]).subspan(hd, hd), dh);
    LstmGradients lg = lstm_backward(p.encoder_backward, trace.backward_steps[t], dh, dc, grad.encoder_backward);
    axpy(1.0, lg.d_input, d_tokens[pos]);
    dh = std::move(lg.dh_prev);
    dc = std::move(lg.dc_prev);
  }
  for (std::size_t i = 0; i < n; ++i)
    accumulate_representation(model, trace.input.ids[i], trace.input.features[i], d_tokens[i], grad);
  return grad;
}

// Serialization --------------------------------------------------------------

void write_model(const Seq2SeqModel& model, std::ostream& out) {
  const ModelShape& s = model.shape();
  out << "opinsum-model 1\n";
  out << "shape " << s.vocab << ' ' << s.embed << ' ' << s.hidden << ' ' << s.attention << ' '
      << s.feature_dim << ' ' << (s.use_features ? 1 : 0) << '\n';
  out << "vocab " << model.vocab().size() << '\n';
  for (WordId id = 0; id < static_cast<WordId>(model.vocab().size()); ++id) {
    out << model.vocab().word_of(id);
    for (int f : model.word_features()[static_cast<std::size_t>(id)].discrete) out << ' ' << f;
    out << '\n';
  }
  out << "pos_tags " << model.schema().pos_tags().size() << '\n';
  for (const std::string& t : model.schema().pos_tags()) out << t << '\n';
  out << "categories " << model.schema().categories().size() << '\n';
  for (const std::string& c : model.schema().categories()) out << c << '\n';
  for_each_tensor(model.params(), [&](const std::string& name, const Matrix& m, bool) {
    out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
      auto row = m.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out << ' ';
        out << format_real(row[c]);
      }
      out << '\n';
    }
  });
  out << "end\n";
}

void save_model(const Seq2SeqModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_model(model, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

std::vector<std::string> split_spaces(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string field;
  while (in >> field) out.push_back(field);
  return out;
}

}  // namespace

Seq2SeqModel read_model(std::istream& in, const std::string& source) {
  LineReader reader(in, source);
  reader.expect_line("opinsum-model 1");
  const std::vector<std::string> shape_fields = split_spaces(reader.keyed("shape"));
  if (shape_fields.size() != 6) throw ParseError(source, reader.line(), "shape needs 6 fields");
  ModelShape shape;
  shape.vocab = parse_size(shape_fields[0], source, reader.line());
  shape.embed = parse_size(shape_fields[1], source, reader.line());
  shape.hidden = parse_size(shape_fields[2], source, reader.line());
  shape.attention = parse_size(shape_fields[3], source, reader.line());
  shape.feature_dim = parse_size(shape_fields[4], source, reader.line());
  shape.use_features = parse_size(shape_fields[5], source, reader.line()) != 0;

  const std::size_t vocab_size = parse_size(reader.keyed("vocab"), source, reader.line());
  std::vector<std::string> words;
  std::vector<TokenFeatures> word_features;
  const Vocabulary reserved_only;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    const std::vector<std::string> fields = split_spaces(reader.next());
    if (fields.size() != 1 + kDiscreteFeatureCount)
      throw ParseError(source, reader.line(), "vocabulary entry needs a word and " +
                                                  std::to_string(kDiscreteFeatureCount) + " feature indices");
    TokenFeatures f;
    for (std::size_t k = 0; k < kDiscreteFeatureCount; ++k)
      f.discrete[k] = static_cast<int>(parse_int(fields[k + 1], source, reader.line()));
    word_features.push_back(f);
    if (i < Vocabulary::kReservedCount) {
      if (fields[0] != reserved_only.word_of(static_cast<WordId>(i)))
        throw ParseError(source, reader.line(), "reserved token mismatch");
    } else {
      words.push_back(fields[0]);
    }
  }
  const auto read_list = [&](std::string_view key) {
    const std::size_t count = parse_size(reader.keyed(key), source, reader.line());
    std::vector<std::string> items;
    for (std::size_t i = 0; i < count; ++i) items.push_back(reader.next());
    return items;
  };
  std::vector<std::string> pos_tags = read_list("pos_tags");
  std::vector<std::string> categories = read_list("categories");

  Seq2SeqModel model(shape, Vocabulary(words), TokenFeatureSchema(std::move(pos_tags), std::move(categories)),
                     std::move(word_features));
  for_each_tensor(model.mutable_params(), [&](const std::string& name, Matrix& m, bool) {
    const std::vector<std::string> header = split_spaces(reader.next());
    if (header.size() != 4 || header[0] != "tensor" || header[1] != name)
      throw ParseError(source, reader.line(), "expected tensor '" + name + "'");
    if (parse_size(header[2], source, reader.line()) != m.rows() ||
        parse_size(header[3], source, reader.line()) != m.cols())
      throw ParseError(source, reader.line(), "tensor '" + name + "' has unexpected shape");
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const std::vector<std::string> values = split_spaces(reader.next());
      if (values.size() != m.cols())
        throw ParseError(source, reader.line(), "tensor '" + name + "' row has wrong length");
      auto row = m.row(r);
      for (std::size_t c = 0; c < values.size(); ++c) row[c] = parse_real(values[c], source, reader.line());
    }
  });
  reader.expect_line("end");
  return model;
}

Seq2SeqModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_model(in, path.string());
}

}  // namespace opinsum
