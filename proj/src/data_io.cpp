#include "synflow/data_io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include "synflow/error.hpp"
#include "synflow/flow.hpp"

namespace synflow {
namespace {

std::vector<std::string> split_ws(const std::string &line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string field;
  while (ss >> field) out.push_back(field);
  return out;
}

bool parse_double(const std::string &s, double &out) {
  const char *begin = s.c_str();
  char *end = nullptr;
  errno = 0;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0' && errno != ERANGE;
}

bool parse_int(const std::string &s, long &out) {
  const char *begin = s.c_str();
  char *end = nullptr;
  errno = 0;
  out = std::strtol(begin, &end, 10);
  return end != begin && *end == '\0' && errno != ERANGE;
}

// All lines of a stream, with a single trailing empty line dropped.
std::vector<std::string> read_lines(std::istream &in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t") ==
                               std::string::npos) {
    lines.pop_back();
  }
  return lines;
}

std::ifstream open_input(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string &path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

// Resolves each kept token's head through removed tokens. Returns new 1-based
// heads (0 = root) over the kept tokens.
std::vector<int> remap_heads(const std::vector<int> &heads,
                             const std::vector<bool> &removed) {
  const int n = static_cast<int>(heads.size());
  std::vector<int> new_index(n + 1, 0);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (!removed[i]) new_index[i + 1] = ++next;
  }
  std::vector<int> out;
  out.reserve(next);
  for (int i = 0; i < n; ++i) {
    if (removed[i]) continue;
    int h = heads[i];
    int steps = 0;
    while (h != 0 && removed[h - 1]) {
      h = heads[h - 1];
      if (++steps > n) throw Error("head re-mapping found a cycle");
    }
    out.push_back(h == 0 ? 0 : new_index[h]);
  }
  // A removed root leaves several roots behind; the leftmost one keeps the
  // root position and the others attach to it.
  int root = 0;
  for (int i = 0; i < next; ++i) {
    if (out[i] != 0) continue;
    if (root == 0) {
      root = i + 1;
    } else {
      out[i] = root;
    }
  }
  if (next > 0 && !is_single_rooted_tree(out)) {
    throw Error("head re-mapping found a cycle");
  }
  return out;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> vocab,
                               Eigen::MatrixXd vectors, UnkPolicy unk_policy)
    : vocab_(std::move(vocab)),
      vectors_(std::move(vectors)),
      unk_policy_(unk_policy) {
  if (static_cast<Eigen::Index>(vocab_.size()) != vectors_.rows()) {
    throw ShapeError("vocabulary size does not match vector count");
  }
  if (!vectors_.allFinite()) throw NumericalError("non-finite embedding value");
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], i).second) {
      throw ParseError("duplicate token '" + vocab_[i] + "'");
    }
  }
}

bool EmbeddingTable::contains(const std::string &token) const {
  return index_.count(token) > 0;
}

Eigen::VectorXd EmbeddingTable::mean_vector() const {
  if (vectors_.rows() == 0) throw Error("empty embedding table");
  return vectors_.colwise().mean().transpose();
}

Eigen::VectorXd EmbeddingTable::lookup(const std::string &token) const {
  auto it = index_.find(token);
  if (it != index_.end()) return vectors_.row(it->second).transpose();
  if (unk_policy_ == UnkPolicy::Error) {
    throw Error("unknown token '" + token + "'");
  }
  return mean_vector();
}

int Corpus::dim() const {
  return sentences.empty() ? 0
                           : static_cast<int>(sentences.front().embeddings.cols());
}

std::size_t Corpus::num_tokens() const {
  std::size_t n = 0;
  for (const auto &s : sentences) n += s.tokens.size();
  return n;
}

bool Corpus::has_gold_tags() const {
  if (sentences.empty()) return false;
  for (const auto &s : sentences)
    if (!s.gold_tags) return false;
  return true;
}

bool Corpus::has_gold_heads() const {
  if (sentences.empty()) return false;
  for (const auto &s : sentences)
    if (!s.gold_heads) return false;
  return true;
}

void Corpus::validate() const {
  if (sentences.empty()) throw Error("empty corpus");
  const int d = dim();
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto &s = sentences[i];
    const auto n = static_cast<Eigen::Index>(s.tokens.size());
    if (n == 0) throw ShapeError("sentence " + std::to_string(i) + " is empty");
    if (s.embeddings.rows() != n || s.embeddings.cols() != d) {
      throw ShapeError("sentence " + std::to_string(i) +
                       " has inconsistent embedding shape");
    }
    if (s.gold_tags && static_cast<Eigen::Index>(s.gold_tags->size()) != n) {
      throw ShapeError("sentence " + std::to_string(i) + " tag count mismatch");
    }
    if (s.gold_heads && static_cast<Eigen::Index>(s.gold_heads->size()) != n) {
      throw ShapeError("sentence " + std::to_string(i) + " head count mismatch");
    }
  }
}

bool is_single_rooted_tree(const std::vector<int> &heads) {
  const int n = static_cast<int>(heads.size());
  int roots = 0;
  for (int h : heads) {
    if (h < 0 || h > n) return false;
    if (h == 0) ++roots;
  }
  if (roots != 1) return false;
  // Every token must reach the root without revisiting a token.
  for (int i = 0; i < n; ++i) {
    int h = heads[i];
    int steps = 0;
    while (h != 0) {
      if (++steps > n) return false;
      h = heads[h - 1];
    }
  }
  return true;
}

bool is_projective(const std::vector<int> &heads) {
  const int n = static_cast<int>(heads.size());
  // Two arcs cross when exactly one endpoint of one lies strictly inside the
  // other. Root arcs span from position 0.
  for (int i = 1; i <= n; ++i) {
    const int a1 = std::min(i, heads[i - 1]);
    const int b1 = std::max(i, heads[i - 1]);
    for (int j = i + 1; j <= n; ++j) {
      const int a2 = std::min(j, heads[j - 1]);
      const int b2 = std::max(j, heads[j - 1]);
      if ((a1 < a2 && a2 < b1 && b1 < b2) || (a2 < a1 && a1 < b2 && b2 < b1)) {
        return false;
      }
    }
  }
  return true;
}

EmbeddingTable read_embeddings(std::istream &in,
                               std::optional<int> expected_dim) {
  std::vector<std::string> vocab;
  std::vector<std::vector<double>> rows;
  std::unordered_set<std::string> seen;
  int dim = expected_dim.value_or(0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      long v = 0, d = 0;
      if (parse_int(fields[0], v) && parse_int(fields[1], d)) {
        if (d <= 0) throw ParseError("invalid header dimension", line_no);
        if (expected_dim && d != *expected_dim) {
          throw ParseError("dimension mismatch", line_no);
        }
        dim = static_cast<int>(d);
        continue;
      }
    }
    const int n = static_cast<int>(fields.size()) - 1;
    if (n <= 0) throw ParseError("record has no values", line_no);
    if (dim == 0) dim = n;
    if (n != dim) throw ParseError("dimension mismatch", line_no);
    std::vector<double> row(dim);
    for (int j = 0; j < dim; ++j) {
      if (!parse_double(fields[j + 1], row[j]) || !std::isfinite(row[j])) {
        throw ParseError("non-numeric value '" + fields[j + 1] + "'", line_no);
      }
    }
    if (!seen.insert(fields[0]).second) {
      throw ParseError("duplicate token '" + fields[0] + "'", line_no);
    }
    vocab.push_back(std::move(fields[0]));
    rows.push_back(std::move(row));
  }
  if (vocab.empty()) throw ParseError("embedding file has no records");
  Eigen::MatrixXd vectors(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < dim; ++j) vectors(i, j) = rows[i][j];
  return EmbeddingTable(std::move(vocab), std::move(vectors));
}

EmbeddingTable load_embeddings(const std::string &path,
                               std::optional<int> expected_dim) {
  auto in = open_input(path);
  return read_embeddings(in, expected_dim);
}

Corpus read_corpus(std::istream &tokens, const EmbeddingTable &table,
                   std::istream *tags, std::istream *heads) {
  const auto token_lines = read_lines(tokens);
  std::vector<std::string> tag_lines, head_lines;
  if (tags != nullptr) {
    tag_lines = read_lines(*tags);
    if (tag_lines.size() != token_lines.size()) {
      throw ShapeError("tags file has " + std::to_string(tag_lines.size()) +
                       " lines, tokens file has " +
                       std::to_string(token_lines.size()));
    }
  }
  if (heads != nullptr) {
    head_lines = read_lines(*heads);
    if (head_lines.size() != token_lines.size()) {
      throw ShapeError("heads file has " + std::to_string(head_lines.size()) +
                       " lines, tokens file has " +
                       std::to_string(token_lines.size()));
    }
  }

  Corpus corpus;
  corpus.sentences.reserve(token_lines.size());
  for (std::size_t s = 0; s < token_lines.size(); ++s) {
    const std::size_t line_no = s + 1;
    Sentence sent;
    sent.tokens = split_ws(token_lines[s]);
    const int n = sent.length();
    if (n == 0) throw ParseError("empty sentence", line_no);
    sent.embeddings.resize(n, table.dim());
    for (int i = 0; i < n; ++i) {
      sent.embeddings.row(i) = table.lookup(sent.tokens[i]).transpose();
    }
    if (tags != nullptr) {
      auto t = split_ws(tag_lines[s]);
      if (static_cast<int>(t.size()) != n) {
        throw ShapeError("tag count does not match token count at line " +
                         std::to_string(line_no));
      }
      corpus.tag_inventory.insert(t.begin(), t.end());
      sent.gold_tags = std::move(t);
    }
    if (heads != nullptr) {
      auto fields = split_ws(head_lines[s]);
      if (static_cast<int>(fields.size()) != n) {
        throw ShapeError("head count does not match token count at line " +
                         std::to_string(line_no));
      }
      std::vector<int> h(n);
      for (int i = 0; i < n; ++i) {
        long v = 0;
        if (!parse_int(fields[i], v)) {
          throw ParseError("non-integer head '" + fields[i] + "'", line_no);
        }
        if (v < 0 || v > n) throw ParseError("head out of range", line_no);
        h[i] = static_cast<int>(v);
      }
      if (!is_single_rooted_tree(h)) {
        throw ParseError("heads do not form a single-rooted tree", line_no);
      }
      sent.projective = is_projective(h);
      sent.gold_heads = std::move(h);
    }
    corpus.sentences.push_back(std::move(sent));
  }
  corpus.validate();
  return corpus;
}

Corpus load_corpus(const std::string &tokens_path, const EmbeddingTable &table,
                   const std::optional<std::string> &tags_path,
                   const std::optional<std::string> &heads_path) {
  auto tokens = open_input(tokens_path);
  std::ifstream tags, heads;
  if (tags_path) tags = open_input(*tags_path);
  if (heads_path) heads = open_input(*heads_path);
  return read_corpus(tokens, table, tags_path ? &tags : nullptr,
                     heads_path ? &heads : nullptr);
}

Corpus filter_by_length(const Corpus &corpus, int max_len, bool strip_punct,
                        const std::set<std::string> &punct_set) {
  if (max_len < 1) throw Error("max_len must be at least 1");
  Corpus out;
  for (const auto &sent : corpus.sentences) {
    const int n = sent.length();
    std::vector<bool> removed(n, false);
    int kept = n;
    if (strip_punct) {
      for (int i = 0; i < n; ++i) {
        if (punct_set.count(sent.tokens[i])) {
          removed[i] = true;
          --kept;
        }
      }
    }
    if (kept == 0 || kept > max_len) continue;

    Sentence s;
    s.embeddings.resize(kept, sent.embeddings.cols());
    if (sent.gold_tags) s.gold_tags.emplace();
    for (int i = 0, j = 0; i < n; ++i) {
      if (removed[i]) continue;
      s.tokens.push_back(sent.tokens[i]);
      s.embeddings.row(j++) = sent.embeddings.row(i);
      if (sent.gold_tags) s.gold_tags->push_back((*sent.gold_tags)[i]);
    }
    if (sent.gold_heads) {
      s.gold_heads = kept == n ? *sent.gold_heads
                               : remap_heads(*sent.gold_heads, removed);
      s.projective = is_projective(*s.gold_heads);
    }
    if (s.gold_tags) out.tag_inventory.insert(s.gold_tags->begin(),
                                              s.gold_tags->end());
    out.sentences.push_back(std::move(s));
  }
  if (out.empty()) throw Error("empty corpus after filtering");
  return out;
}

const std::set<std::string> &default_punct_set() {
  static const std::set<std::string> kPunct = {
      ",", ".", ":", ";", "?", "!", "``", "''", "`", "'", "\"", "--", "...",
      "-LRB-", "-RRB-", "-LCB-", "-RCB-", "-LSB-", "-RSB-", "(", ")", "{", "}",
      "[", "]"};
  return kPunct;
}

void write_embeddings(std::ostream &out, const std::vector<std::string> &vocab,
                      const Eigen::MatrixXd &vectors) {
  if (static_cast<Eigen::Index>(vocab.size()) != vectors.rows()) {
    throw ShapeError("vocabulary size does not match vector count");
  }
  out << std::setprecision(17);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << vocab[i];
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) out << ' ' << vectors(i, j);
    out << '\n';
  }
  if (!out) throw Error("write failed");
}

void write_latent(std::ostream &out, const Corpus &corpus, const Flow &flow) {
  if (corpus.empty()) throw Error("empty corpus");
  std::vector<std::string> vocab;
  std::vector<const Sentence *> source;
  std::vector<int> position;
  std::unordered_set<std::string> seen;
  for (const auto &s : corpus.sentences) {
    for (int i = 0; i < s.length(); ++i) {
      if (seen.insert(s.tokens[i]).second) {
        vocab.push_back(s.tokens[i]);
        source.push_back(&s);
        position.push_back(i);
      }
    }
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(vocab.size()), corpus.dim());
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    x.row(t) = source[t]->embeddings.row(position[t]);
  }
  write_embeddings(out, vocab, inverse_apply_rows(flow, x));
}

void export_latent(const Corpus &corpus, const Flow &flow,
                   const std::string &path) {
  if (corpus.empty()) throw Error("empty corpus");
  auto out = open_output(path);
  write_latent(out, corpus, flow);
}

void write_tokens(std::ostream &out, const Corpus &corpus) {
  for (const auto &s : corpus.sentences) {
    for (int i = 0; i < s.length(); ++i) out << (i ? " " : "") << s.tokens[i];
    out << '\n';
  }
}

void write_tags(std::ostream &out, const Corpus &corpus) {
  for (const auto &s : corpus.sentences) {
    if (!s.gold_tags) throw Error("corpus has no gold tags");
    for (std::size_t i = 0; i < s.gold_tags->size(); ++i)
      out << (i ? " " : "") << (*s.gold_tags)[i];
    out << '\n';
  }
}

void write_heads(std::ostream &out, const Corpus &corpus) {
  std::vector<std::vector<int>> lines;
  for (const auto &s : corpus.sentences) {
    if (!s.gold_heads) throw Error("corpus has no gold heads");
    lines.push_back(*s.gold_heads);
  }
  write_int_lines(out, lines);
}

void write_int_lines(std::ostream &out,
                     const std::vector<std::vector<int>> &lines) {
  for (const auto &line : lines) {
    for (std::size_t i = 0; i < line.size(); ++i) out << (i ? " " : "") << line[i];
    out << '\n';
  }
  if (!out) throw Error("write failed");
}

void write_int_lines(const std::string &path,
                     const std::vector<std::vector<int>> &lines) {
  auto out = open_output(path);
  write_int_lines(out, lines);
}

std::vector<std::vector<int>> read_int_lines(std::istream &in) {
  std::vector<std::vector<int>> out;
  const auto lines = read_lines(in);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    std::vector<int> row;
    for (const auto &f : split_ws(lines[l])) {
      long v = 0;
      if (!parse_int(f, v)) throw ParseError("non-integer value '" + f + "'", l + 1);
      row.push_back(static_cast<int>(v));
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<std::vector<int>> read_int_lines(const std::string &path) {
  auto in = open_input(path);
  return read_int_lines(in);
}

std::vector<std::vector<std::string>> read_token_lines(std::istream &in) {
  std::vector<std::vector<std::string>> out;
  for (const auto &line : read_lines(in)) out.push_back(split_ws(line));
  return out;
}

std::vector<std::vector<std::string>> read_token_lines(const std::string &path) {
  auto in = open_input(path);
  return read_token_lines(in);
}

}  // namespace synflow
