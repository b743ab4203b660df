#ifndef SYNFLOW_DATA_IO_HPP_
#define SYNFLOW_DATA_IO_HPP_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace synflow {

struct Flow;

enum class UnkPolicy { Error, MeanVector };

// Pre-trained word vectors keyed by token string. Rows of `vectors` follow the
// order of `vocab`.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> vocab, Eigen::MatrixXd vectors,
                 UnkPolicy unk_policy = UnkPolicy::MeanVector);

  std::size_t size() const { return vocab_.size(); }
  int dim() const { return static_cast<int>(vectors_.cols()); }
  const std::vector<std::string> &vocab() const { return vocab_; }
  const Eigen::MatrixXd &vectors() const { return vectors_; }
  UnkPolicy unk_policy() const { return unk_policy_; }
  void set_unk_policy(UnkPolicy policy) { unk_policy_ = policy; }

  bool contains(const std::string &token) const;
  // Vector for `token`, resolving unknown tokens per the table's policy.
  // Throws Error for an unknown token under UnkPolicy::Error.
  Eigen::VectorXd lookup(const std::string &token) const;
  Eigen::VectorXd mean_vector() const;

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  Eigen::MatrixXd vectors_;
  UnkPolicy unk_policy_ = UnkPolicy::MeanVector;
};

struct Sentence {
  std::vector<std::string> tokens;
  Eigen::MatrixXd embeddings;  // length() x dim
  std::optional<std::vector<std::string>> gold_tags;
  // 0 = root, otherwise the 1-based position of the head.
  std::optional<std::vector<int>> gold_heads;
  // False when gold_heads is present but not projective. Such sentences are
  // kept for evaluation.
  bool projective = true;

  int length() const { return static_cast<int>(tokens.size()); }
};

struct Corpus {
  std::vector<Sentence> sentences;
  std::set<std::string> tag_inventory;

  std::size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }
  int dim() const;
  std::size_t num_tokens() const;
  bool has_gold_tags() const;
  bool has_gold_heads() const;
  // Checks the Corpus invariants; throws on violation.
  void validate() const;
};

// Tree checks over 0-for-root, 1-based head vectors.
bool is_single_rooted_tree(const std::vector<int> &heads);
bool is_projective(const std::vector<int> &heads);

EmbeddingTable read_embeddings(std::istream &in,
                               std::optional<int> expected_dim = std::nullopt);
EmbeddingTable load_embeddings(const std::string &path,
                               std::optional<int> expected_dim = std::nullopt);

Corpus read_corpus(std::istream &tokens, const EmbeddingTable &table,
                   std::istream *tags = nullptr, std::istream *heads = nullptr);
Corpus load_corpus(const std::string &tokens_path, const EmbeddingTable &table,
                   const std::optional<std::string> &tags_path = std::nullopt,
                   const std::optional<std::string> &heads_path = std::nullopt);

// Strips punctuation (re-attaching orphaned dependents to the removed token's
// own head) and then drops sentences longer than max_len.
Corpus filter_by_length(const Corpus &corpus, int max_len, bool strip_punct,
                        const std::set<std::string> &punct_set);

// The punctuation tokens of the Penn Treebank tag set's punctuation classes.
const std::set<std::string> &default_punct_set();

// One record per token type, in first-appearance order: the token followed by
// the latent vector obtained by running the inverse projection on its
// embedding. Same text format read by load_embeddings.
void write_latent(std::ostream &out, const Corpus &corpus, const Flow &flow);
void export_latent(const Corpus &corpus, const Flow &flow,
                   const std::string &path);

void write_embeddings(std::ostream &out, const std::vector<std::string> &vocab,
                      const Eigen::MatrixXd &vectors);

// Line-per-sentence writers for the corpus formats.
void write_tokens(std::ostream &out, const Corpus &corpus);
void write_tags(std::ostream &out, const Corpus &corpus);
void write_heads(std::ostream &out, const Corpus &corpus);
void write_int_lines(std::ostream &out,
                     const std::vector<std::vector<int>> &lines);
void write_int_lines(const std::string &path,
                     const std::vector<std::vector<int>> &lines);

std::vector<std::vector<int>> read_int_lines(std::istream &in);
std::vector<std::vector<int>> read_int_lines(const std::string &path);
std::vector<std::vector<std::string>> read_token_lines(std::istream &in);
std::vector<std::vector<std::string>> read_token_lines(const std::string &path);

}  // namespace synflow

#endif  // SYNFLOW_DATA_IO_HPP_
