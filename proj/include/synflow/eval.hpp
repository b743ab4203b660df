#ifndef SYNFLOW_EVAL_HPP_
#define SYNFLOW_EVAL_HPP_

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace synflow {

// Counts of (predicted cluster, gold tag) pairs over tokens.
class ContingencyTable {
 public:
  ContingencyTable() = default;
  explicit ContingencyTable(Eigen::MatrixXi counts);
  // Builds a table from parallel token sequences. Cluster and tag ids must lie
  // in [0, num_pred) and [0, num_gold).
  static ContingencyTable from_sequences(const std::vector<std::vector<int>> &pred,
                                         const std::vector<std::vector<int>> &gold,
                                         int num_pred, int num_gold);

  const Eigen::MatrixXi &counts() const { return counts_; }
  int num_pred() const { return static_cast<int>(counts_.rows()); }
  int num_gold() const { return static_cast<int>(counts_.cols()); }
  long total() const { return total_; }

 private:
  Eigen::MatrixXi counts_;
  long total_ = 0;
};

// Each cluster mapped to its majority gold tag (ties to the lower index).
double many_to_one(const ContingencyTable &table);

struct VMeasure {
  double vm = 0.0;
  double homogeneity = 0.0;
  double completeness = 0.0;
};

// Entropies in nats. h = 1 when H(gold) = 0, c = 1 when H(pred) = 0, and
// vm = 0 when h + c = 0.
VMeasure v_measure(const ContingencyTable &table);

struct OneToOneMap {
  std::vector<int> pred_to_gold;  // -1 for unmatched clusters
  long matched = 0;               // tokens on matched (pred, gold) pairs
  double accuracy = 0.0;          // matched / total
};

// Optimal injective cluster -> tag assignment (maximum-weight matching).
OneToOneMap one_to_one_map(const ContingencyTable &table);

// Row-normalized confusion matrix restricted to `gold_subset`. Row g is gold
// tag gold_subset[g]; column j counts tokens whose cluster is mapped to
// gold_subset[j]; a final column collects everything else, so rows sum to 1
// (rows with no tokens are zero).
Eigen::MatrixXd confusion_matrix(const ContingencyTable &table,
                                 const OneToOneMap &mapping,
                                 const std::vector<int> &gold_subset);

// Dense ids for string labels, in sorted order.
class LabelIndex {
 public:
  LabelIndex() = default;
  explicit LabelIndex(const std::vector<std::vector<std::string>> &sequences);
  int size() const { return static_cast<int>(labels_.size()); }
  int id(const std::string &label) const;
  const std::string &label(int id) const { return labels_.at(id); }
  const std::vector<std::string> &labels() const { return labels_; }
  std::vector<std::vector<int>> encode(
      const std::vector<std::vector<std::string>> &sequences) const;

 private:
  std::vector<std::string> labels_;
  std::map<std::string, int> ids_;
};

struct DependencyAccuracy {
  double all = 0.0;
  double short_sentences = 0.0;  // sentences of length <= short_length
  long tokens = 0;
  long short_tokens = 0;
};

// Fraction of tokens whose predicted head equals the gold head (0 = root).
double directed_accuracy(const std::vector<std::vector<int>> &pred_heads,
                         const std::vector<std::vector<int>> &gold_heads);
DependencyAccuracy directed_accuracy_by_length(
    const std::vector<std::vector<int>> &pred_heads,
    const std::vector<std::vector<int>> &gold_heads, int short_length = 10);

}  // namespace synflow

#endif  // SYNFLOW_EVAL_HPP_
