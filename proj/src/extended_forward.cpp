#include "opinsum/extended_forward.hpp"

#include <cmath>
#include <stdexcept>

namespace opinsum {

namespace {

using LVec = std::vector<long double>;

const char* const kTables[kDiscreteFeatureCount] = {"named_entity", "capitalized", "pos_tag", "category",
                                                    "sentiment"};

const ExtendedTensor& get(const ExtendedParameters& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw std::invalid_argument("missing tensor " + name);
  return it->second;
}

LVec mul(const ExtendedTensor& m, const LVec& v) {
  LVec out(m.rows, 0.0L);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out[r] += m.at(r, c) * v[c];
  return out;
}

void add_to(LVec& y, const LVec& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
}

long double logistic(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

struct State {
  LVec h;
  LVec c;
};

LVec gate(const ExtendedParameters& p, const std::string& name, const LVec& u, const LVec& h, const LVec* c) {
  LVec pre = get(p, name + ".bias").values;
  add_to(pre, mul(get(p, name + ".from_input"), u));
  add_to(pre, mul(get(p, name + ".from_hidden"), h));
  if (c) add_to(pre, mul(get(p, name + ".from_cell"), *c));
  return pre;
}

State cell(const ExtendedParameters& p, const std::string& prefix, const LVec& u, const State& prev) {
  LVec i = gate(p, prefix + ".input", u, prev.h, &prev.c);
  LVec f = gate(p, prefix + ".forget", u, prev.h, &prev.c);
  LVec g = gate(p, prefix + ".candidate", u, prev.h, nullptr);
  State next{LVec(prev.h.size()), LVec(prev.h.size())};
  for (std::size_t k = 0; k < next.c.size(); ++k)
    next.c[k] = logistic(f[k]) * prev.c[k] + logistic(i[k]) * std::tanh(g[k]);
  LVec o = gate(p, prefix + ".output", u, prev.h, &next.c);
  for (std::size_t k = 0; k < next.h.size(); ++k) next.h[k] = logistic(o[k]) * std::tanh(next.c[k]);
  return next;
}

LVec represent(const Seq2SeqModel& model, const ExtendedParameters& p, WordId id, const TokenFeatures& f) {
  const ModelShape& s = model.shape();
  const ExtendedTensor& emb = get(p, "embeddings");
  LVec rep(emb.values.begin() + static_cast<std::ptrdiff_t>(id * emb.cols),
           emb.values.begin() + static_cast<std::ptrdiff_t>((id + 1) * emb.cols));
  if (s.use_features) {
    for (std::size_t k = 0; k < kDiscreteFeatureCount; ++k) {
      const ExtendedTensor& t = get(p, std::string("feature.") + kTables[k]);
      const std::size_t row = static_cast<std::size_t>(f.discrete[k]);
      for (std::size_t c = 0; c < t.cols; ++c) rep.push_back(t.at(row, c));
    }
    rep.push_back(f.tfidf);
  }
  return rep;
}

}  // namespace

ExtendedParameters extend_parameters(const Parameters& params) {
  ExtendedParameters out;
  for_each_tensor(params, [&](const std::string& name, const Matrix& m, bool) {
    out[name] = ExtendedTensor{m.rows(), m.cols(), LVec(m.values().begin(), m.values().end())};
  });
  return out;
}

long double extended_log_prob(const Seq2SeqModel& model, const ExtendedParameters& p, const ConcatenatedInput& z,
                              const std::vector<WordId>& target) {
  const std::size_t n = z.ids.size();
  const std::size_t hd = model.shape().hidden;
  std::vector<LVec> x;
  for (std::size_t i = 0; i < n; ++i) x.push_back(represent(model, p, z.ids[i], z.features[i]));

  std::vector<LVec> fwd(n);
  std::vector<LVec> bwd(n);
  State s{LVec(hd, 0.0L), LVec(hd, 0.0L)};
  for (std::size_t i = 0; i < n; ++i) {
    s = cell(p, "encoder_forward", x[i], s);
    fwd[i] = s.h;
  }
  s = {LVec(hd, 0.0L), LVec(hd, 0.0L)};
  for (std::size_t i = n; i-- > 0;) {
    s = cell(p, "encoder_backward", x[i], s);
    bwd[i] = s.h;
  }
  std::vector<LVec> b(n);
  std::vector<LVec> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = fwd[i];
    b[i].insert(b[i].end(), bwd[i].begin(), bwd[i].end());
    keys[i] = mul(get(p, "attention.context_proj"), b[i]);
  }

  const ExtendedTensor& score = get(p, "attention.score");
  const ExtendedTensor& out_w = get(p, "output.weights");
  const ExtendedTensor& out_b = get(p, "output.bias");
  s = {LVec(hd, 0.0L), LVec(hd, 0.0L)};
  WordId prev = Vocabulary::kBos;
  long double total = 0.0L;
  for (WordId y : target) {
    const LVec q = mul(get(p, "attention.state_proj"), s.h);
    LVec e(n);
    long double emax = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      long double v = 0.0L;
      for (std::size_t a = 0; a < q.size(); ++a) v += score.values[a] * std::tanh(keys[i][a] + q[a]);
      e[i] = v;
      emax = std::max(emax, v);
    }
    long double zsum = 0.0L;
    for (long double& v : e) zsum += (v = std::exp(v - emax));
    LVec ctx(2 * hd, 0.0L);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < ctx.size(); ++k) ctx[k] += e[i] / zsum * b[i][k];

    LVec u = represent(model, p, prev, model.word_features()[static_cast<std::size_t>(prev)]);
    u.insert(u.end(), ctx.begin(), ctx.end());
    s = cell(p, "decoder", u, s);

    LVec logits = mul(out_w, s.h);
    long double lmax = -INFINITY;
    for (std::size_t w = 0; w < logits.size(); ++w) lmax = std::max(lmax, logits[w] += out_b.values[w]);
    long double lsum = 0.0L;
    for (long double l : logits) lsum += std::exp(l - lmax);
    total += logits[static_cast<std::size_t>(y)] - lmax - std::log(lsum);
    prev = y;
  }
  return total;
}

}  // namespace opinsum
