#include "opinsum/textcorpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace opinsum {

namespace {

bool is_ascii_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

Token make_token(std::string surface) {
  Token t;
  t.norm = to_lower(surface);
  t.surface = std::move(surface);
  return t;
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_punctuation(std::string_view word) {
  return !word.empty() && std::all_of(word.begin(), word.end(), is_ascii_punct);
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  for (const std::string& chunk : split_whitespace(text)) {
    std::size_t begin = 0;
    std::size_t end = chunk.size();
    while (begin < end && is_ascii_punct(chunk[begin])) ++begin;
    if (begin == end) {
      for (char c : chunk) tokens.push_back(make_token(std::string(1, c)));
      continue;
    }
    while (end > begin && is_ascii_punct(chunk[end - 1])) --end;
    for (std::size_t i = 0; i < begin; ++i) tokens.push_back(make_token(std::string(1, chunk[i])));
    tokens.push_back(make_token(chunk.substr(begin, end - begin)));
    for (std::size_t i = end; i < chunk.size(); ++i)
      tokens.push_back(make_token(std::string(1, chunk[i])));
  }
  return tokens;
}

std::string detokenize(const std::vector<std::string>& words) {
  std::string out;
  for (const std::string& w : words) {
    if (!out.empty() && !is_punctuation(w)) out += ' ';
    out += w;
  }
  return out;
}

TextUnit make_unit(std::string_view text) {
  TextUnit unit;
  unit.raw = std::string(text);
  unit.tokens = tokenize(text);
  return unit;
}

// Vocabulary ---------------------------------------------------------------

Vocabulary::Vocabulary() {
  for (std::string_view w : {reserved::kUnk, reserved::kSeg, reserved::kBos, reserved::kEos,
                             reserved::kEntity})
    add(std::string(w));
}

Vocabulary::Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
  for (const std::string& w : words) {
    if (w.empty()) throw std::invalid_argument("Vocabulary: empty word");
    if (index_.count(w)) throw std::invalid_argument("Vocabulary: duplicate word '" + w + "'");
    add(w);
  }
}

void Vocabulary::add(std::string word) {
  index_.emplace(word, static_cast<WordId>(words_.size()));
  words_.push_back(std::move(word));
}

WordId Vocabulary::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.count(std::string(word)) > 0;
}

const std::string& Vocabulary::word_of(WordId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size())
    throw std::invalid_argument("Vocabulary: index " + std::to_string(id) + " out of range");
  return words_[static_cast<std::size_t>(id)];
}

Vocabulary build_vocab(const Corpus& clusters, std::size_t min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  auto count_unit = [&](const TextUnit& u) {
    for (const Token& t : u.tokens) ++counts[t.norm];
  };
  for (const Cluster& c : clusters) {
    for (const TextUnit& u : c.units) count_unit(u);
    count_unit(c.summary);
  }
  const Vocabulary reserved_only;
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [word, n] : counts)
    if (n >= min_count && !reserved_only.contains(word)) kept.emplace_back(word, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> words;
  words.reserve(kept.size());
  for (auto& [word, n] : kept) words.push_back(word);
  return Vocabulary(words);
}

// Embeddings ---------------------------------------------------------------

PretrainedEmbeddings load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                     std::size_t dim) {
  std::ifstream in = open_input(path);
  const std::string source = path.string();
  PretrainedEmbeddings out;
  out.table.values = Matrix(vocab.size(), dim);
  out.table.trainable.assign(vocab.size(), true);
  out.covered.assign(vocab.size(), false);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::vector<std::string> fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      std::size_t count = 0;
      std::size_t header_dim = 0;
      auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), count);
      auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), header_dim);
      const bool numeric = r1.ec == std::errc() && r1.ptr == fields[0].data() + fields[0].size() &&
                           r2.ec == std::errc() && r2.ptr == fields[1].data() + fields[1].size();
      if (numeric) {
        if (header_dim != dim)
          throw std::invalid_argument(source + ": header dimension " + std::to_string(header_dim) +
                                      " does not match expected " + std::to_string(dim));
        continue;
      }
    }
    if (fields.size() < 2) throw ParseError(source, line_no, "expected 'word v1 ... vd'");
    if (fields.size() - 1 != dim)
      throw std::invalid_argument(source + ":" + std::to_string(line_no) + ": vector has " +
                                  std::to_string(fields.size() - 1) + " values, expected " +
                                  std::to_string(dim));
    Vector values(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const std::string& f = fields[k + 1];
      auto res = std::from_chars(f.data(), f.data() + f.size(), values[k]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(values[k]))
        throw ParseError(source, line_no, "malformed value '" + f + "'");
    }
    const std::string& word = fields[0];
    if (!vocab.contains(word)) continue;
    const WordId id = vocab.index_of(word);
    if (Vocabulary::is_reserved(id) || out.covered[static_cast<std::size_t>(id)]) continue;
    std::copy(values.begin(), values.end(), out.table.values.row(static_cast<std::size_t>(id)).begin());
    out.covered[static_cast<std::size_t>(id)] = true;
  }

  const std::size_t candidates = vocab.size() - Vocabulary::kReservedCount;
  const auto hits = static_cast<std::size_t>(std::count(out.covered.begin(), out.covered.end(), true));
  out.coverage = candidates == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(candidates);
  return out;
}

// Entity substitution ------------------------------------------------------

std::vector<Token> substitute_entity(const std::vector<Token>& tokens,
                                     const std::vector<Token>& entity) {
  if (entity.empty()) return tokens;
  std::vector<Token> out;
  out.reserve(tokens.size());
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool match = i + entity.size() <= tokens.size();
    for (std::size_t k = 0; match && k < entity.size(); ++k)
      match = tokens[i + k].norm == entity[k].norm;
    if (match) {
      Token t;
      t.surface = std::string(reserved::kEntity);
      t.norm = std::string(reserved::kEntity);
      t.pos = tokens[i].pos;
      t.ner = tokens[i].ner;
      out.push_back(std::move(t));
      i += entity.size();
    } else {
      out.push_back(tokens[i]);
      ++i;
    }
  }
  return out;
}

Cluster substitute_entity(const Cluster& cluster) {
  if (!cluster.entity) return cluster;
  const std::vector<Token> entity = tokenize(*cluster.entity);
  Cluster out = cluster;
  for (TextUnit& u : out.units) u.tokens = substitute_entity(u.tokens, entity);
  out.summary.tokens = substitute_entity(out.summary.tokens, entity);
  return out;
}

std::vector<Token> restore_entity(const std::vector<Token>& tokens, const Cluster& cluster) {
  if (!cluster.entity) return tokens;
  const std::vector<Token> entity = tokenize(*cluster.entity);
  std::vector<Token> out;
  for (const Token& t : tokens) {
    if (t.norm == reserved::kEntity)
      out.insert(out.end(), entity.begin(), entity.end());
    else
      out.push_back(t);
  }
  return out;
}

std::vector<std::string> restore_entity(const std::vector<std::string>& words,
                                        const Cluster& cluster) {
  if (!cluster.entity) return words;
  const std::vector<Token> entity = tokenize(*cluster.entity);
  std::vector<std::string> out;
  for (const std::string& w : words) {
    if (w == reserved::kEntity)
      for (const Token& t : entity) out.push_back(t.surface);
    else
      out.push_back(w);
  }
  return out;
}

// TF-IDF -------------------------------------------------------------------

TfIdf::TfIdf(const Corpus& clusters) {
  for (const Cluster& c : clusters)
    for (const TextUnit& u : c.units) {
      ++unit_count_;
      std::set<std::string> seen;
      for (const Token& t : u.tokens) seen.insert(t.norm);
      for (const std::string& term : seen) ++df_[term];
    }
}

TfIdf::TfIdf(std::size_t unit_count, std::unordered_map<std::string, std::size_t> df)
    : unit_count_(unit_count), df_(std::move(df)) {}

double TfIdf::idf(const std::string& term) const {
  if (unit_count_ == 0) return 0.0;
  auto it = df_.find(term);
  const double df = it == df_.end() ? 1.0 : static_cast<double>(it->second);
  return std::log(static_cast<double>(unit_count_) / df);
}

TermWeights TfIdf::weights(const std::vector<std::string>& norms) const {
  TermWeights tf;
  for (const std::string& n : norms) tf[n] += 1.0;
  for (auto& [term, w] : tf) w *= idf(term);
  return tf;
}

TermWeights TfIdf::weights(const TextUnit& unit) const {
  std::vector<std::string> norms;
  norms.reserve(unit.tokens.size());
  for (const Token& t : unit.tokens) norms.push_back(t.norm);
  return weights(norms);
}

std::vector<std::vector<TermWeights>> tfidf_weights(const Corpus& clusters) {
  const TfIdf model(clusters);
  std::vector<std::vector<TermWeights>> out;
  out.reserve(clusters.size());
  for (const Cluster& c : clusters) {
    std::vector<TermWeights> per_unit;
    per_unit.reserve(c.units.size());
    for (const TextUnit& u : c.units) per_unit.push_back(model.weights(u));
    out.push_back(std::move(per_unit));
  }
  return out;
}

double cosine(const TermWeights& a, const TermWeights& b) {
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (const auto& [term, w] : a) {
    aa += w * w;
    auto it = b.find(term);
    if (it != b.end()) ab += w * it->second;
  }
  for (const auto& [term, w] : b) bb += w * w;
  if (aa <= 0.0 || bb <= 0.0) return 0.0;
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), 0.0, 1.0);
}

// Stopwords and lexicons --------------------------------------------------

StopwordSet StopwordSet::load(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view w = trim(line);
    if (w.empty() || w.front() == '#') continue;
    words.insert(to_lower(w));
  }
  return StopwordSet(std::move(words));
}

std::unordered_set<std::string> content_words(const TextUnit& unit, const StopwordSet& stopwords) {
  std::unordered_set<std::string> out;
  for (const Token& t : unit.tokens)
    if (stopwords.is_content(t.norm)) out.insert(t.norm);
  return out;
}

void Lexicon::add(const std::string& word, const std::string& category) {
  std::vector<std::string>& cats = entries_[to_lower(word)];
  auto it = std::lower_bound(cats.begin(), cats.end(), category);
  if (it == cats.end() || *it != category) cats.insert(it, category);
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  Lexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), line_no, "expected word<TAB>category");
    const std::string_view word = trim(std::string_view(line).substr(0, tab));
    const std::string_view category = trim(std::string_view(line).substr(tab + 1));
    if (word.empty() || category.empty())
      throw ParseError(path.string(), line_no, "empty word or category");
    lex.add(std::string(word), std::string(category));
  }
  return lex;
}

const std::vector<std::string>& Lexicon::categories(const std::string& norm) const {
  static const std::vector<std::string> kNone;
  auto it = entries_.find(norm);
  return it == entries_.end() ? kNone : it->second;
}

std::vector<std::string> Lexicon::all_categories() const {
  std::set<std::string> cats;
  for (const auto& [word, list] : entries_) cats.insert(list.begin(), list.end());
  return {cats.begin(), cats.end()};
}

// Corpus files -------------------------------------------------------------

namespace {

std::optional<std::vector<std::string>> tag_array(const nlohmann::json& unit, const char* key,
                                                  const std::string& source, std::size_t line) {
  if (!unit.contains(key) || unit[key].is_null()) return std::nullopt;
  if (!unit[key].is_array()) throw ParseError(source, line, std::string(key) + " must be an array");
  std::vector<std::string> tags;
  for (const auto& t : unit[key]) {
    if (!t.is_string()) throw ParseError(source, line, std::string(key) + " entries must be strings");
    tags.push_back(t.get<std::string>());
  }
  return tags;
}

Cluster parse_cluster(const nlohmann::json& j, const std::string& source, std::size_t line) {
  if (!j.is_object()) throw ParseError(source, line, "expected a JSON object");
  Cluster c;
  if (!j.contains("id") || !j["id"].is_string()) throw ParseError(source, line, "missing string 'id'");
  c.id = j["id"].get<std::string>();
  if (j.contains("entity") && !j["entity"].is_null()) {
    if (!j["entity"].is_string()) throw ParseError(source, line, "'entity' must be a string or null");
    const std::string entity = j["entity"].get<std::string>();
    if (!tokenize(entity).empty()) c.entity = entity;
  }
  if (!j.contains("summary") || !j["summary"].is_string())
    throw ParseError(source, line, "missing string 'summary'");
  c.summary = make_unit(j["summary"].get<std::string>());
  if (c.summary.tokens.empty()) throw ParseError(source, line, "empty summary");
  if (!j.contains("units") || !j["units"].is_array() || j["units"].empty())
    throw ParseError(source, line, "'units' must be a non-empty array");
  for (const auto& u : j["units"]) {
    if (!u.is_object() || !u.contains("text") || !u["text"].is_string())
      throw ParseError(source, line, "unit must be an object with string 'text'");
    TextUnit unit = make_unit(u["text"].get<std::string>());
    if (unit.tokens.empty()) throw ParseError(source, line, "empty text unit");
    const auto pos = tag_array(u, "pos", source, line);
    const auto ner = tag_array(u, "ner", source, line);
    if (pos) {
      if (pos->size() != unit.tokens.size())
        throw ParseError(source, line, "pos array has " + std::to_string(pos->size()) +
                                           " tags for " + std::to_string(unit.tokens.size()) + " tokens");
      for (std::size_t k = 0; k < pos->size(); ++k) unit.tokens[k].pos = (*pos)[k];
    }
    if (ner) {
      if (ner->size() != unit.tokens.size())
        throw ParseError(source, line, "ner array has " + std::to_string(ner->size()) +
                                           " tags for " + std::to_string(unit.tokens.size()) + " tokens");
      for (std::size_t k = 0; k < ner->size(); ++k) unit.tokens[k].ner = (*ner)[k];
    }
    c.units.push_back(std::move(unit));
  }
  return c;
}

}  // namespace

Corpus parse_corpus(std::string_view jsonl, const std::string& source) {
  Corpus corpus;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    const std::size_t nl = jsonl.find('\n', pos);
    const std::string_view line =
        jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    if (!trim(line).empty()) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source, line_no, e.what());
      }
      corpus.push_back(parse_cluster(j, source, line_no));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str(), path.string());
}

std::string serialize_cluster(const Cluster& cluster) {
  nlohmann::json j;
  j["id"] = cluster.id;
  j["entity"] = cluster.entity ? nlohmann::json(*cluster.entity) : nlohmann::json(nullptr);
  j["summary"] = cluster.summary.raw;
  nlohmann::json units = nlohmann::json::array();
  for (const TextUnit& u : cluster.units) {
    nlohmann::json ju;
    ju["text"] = u.raw;
    const bool has_pos = !u.tokens.empty() && std::all_of(u.tokens.begin(), u.tokens.end(),
                                                          [](const Token& t) { return t.pos.has_value(); });
    const bool has_ner = !u.tokens.empty() && std::all_of(u.tokens.begin(), u.tokens.end(),
                                                          [](const Token& t) { return t.ner.has_value(); });
    if (has_pos) {
      ju["pos"] = nlohmann::json::array();
      for (const Token& t : u.tokens) ju["pos"].push_back(*t.pos);
    } else {
      ju["pos"] = nullptr;
    }
    if (has_ner) {
      ju["ner"] = nlohmann::json::array();
      for (const Token& t : u.tokens) ju["ner"].push_back(*t.ner);
    } else {
      ju["ner"] = nullptr;
    }
    units.push_back(std::move(ju));
  }
  j["units"] = std::move(units);
  return j.dump();
}

}  // namespace opinsum
