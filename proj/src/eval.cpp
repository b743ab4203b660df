#include "synflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "synflow/error.hpp"

namespace synflow {
namespace {

void require_total(const ContingencyTable &t) {
  if (t.total() <= 0) throw Error("contingency table is empty");
}

double entropy(const Eigen::VectorXd &counts, double total) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts(i) > 0) {
      const double p = counts(i) / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

// Minimum-cost perfect assignment on a square matrix (shortest augmenting
// paths with potentials). Returns row -> column.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd &cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int col = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col] = true;
      const int row = match[col];
      double delta = inf;
      int next = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(row - 1, j - 1) - u[row] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = col;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          next = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      col = next;
    } while (match[col] != 0);
    do {
      const int prev = way[col];
      match[col] = match[prev];
      col = prev;
    } while (col != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

ContingencyTable::ContingencyTable(Eigen::MatrixXi counts)
    : counts_(std::move(counts)) {
  if (counts_.size() > 0 && counts_.minCoeff() < 0) {
    throw Error("contingency counts must be non-negative");
  }
  total_ = counts_.cast<long>().sum();
}

ContingencyTable ContingencyTable::from_sequences(
    const std::vector<std::vector<int>> &pred,
    const std::vector<std::vector<int>> &gold, int num_pred, int num_gold) {
  if (pred.size() != gold.size()) {
    throw ShapeError("predicted and gold files have different sentence counts");
  }
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(num_pred, num_gold);
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != gold[s].size()) {
      throw ShapeError("length mismatch in sentence " + std::to_string(s + 1));
    }
    for (std::size_t i = 0; i < pred[s].size(); ++i) {
      const int p = pred[s][i], g = gold[s][i];
      if (p < 0 || p >= num_pred || g < 0 || g >= num_gold) {
        throw Error("label id out of range in sentence " + std::to_string(s + 1));
      }
      ++counts(p, g);
    }
  }
  return ContingencyTable(std::move(counts));
}

double many_to_one(const ContingencyTable &table) {
  require_total(table);
  long hit = 0;
  for (int p = 0; p < table.num_pred(); ++p) {
    hit += table.num_gold() > 0 ? table.counts().row(p).maxCoeff() : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(table.total());
}

VMeasure v_measure(const ContingencyTable &table) {
  require_total(table);
  const Eigen::MatrixXd c = table.counts().cast<double>();
  const double n = static_cast<double>(table.total());
  const double h_gold = entropy(c.colwise().sum().transpose(), n);
  const double h_pred = entropy(c.rowwise().sum(), n);
  // Conditional entropies H(gold | pred) and H(pred | gold).
  double h_gold_given_pred = 0.0, h_pred_given_gold = 0.0;
  const Eigen::VectorXd pred_tot = c.rowwise().sum();
  const Eigen::VectorXd gold_tot = c.colwise().sum().transpose();
  for (Eigen::Index p = 0; p < c.rows(); ++p) {
    for (Eigen::Index g = 0; g < c.cols(); ++g) {
      const double x = c(p, g);
      if (x <= 0) continue;
      h_gold_given_pred -= x / n * std::log(x / pred_tot(p));
      h_pred_given_gold -= x / n * std::log(x / gold_tot(g));
    }
  }
  VMeasure out;
  out.homogeneity = h_gold == 0.0 ? 1.0 : 1.0 - h_gold_given_pred / h_gold;
  out.completeness = h_pred == 0.0 ? 1.0 : 1.0 - h_pred_given_gold / h_pred;
  const double s = out.homogeneity + out.completeness;
  out.vm = s == 0.0 ? 0.0 : 2.0 * out.homogeneity * out.completeness / s;
  return out;
}

OneToOneMap one_to_one_map(const ContingencyTable &table) {
  require_total(table);
  const int np = table.num_pred(), ng = table.num_gold();
  const int n = std::max(np, ng);
  const double top = table.counts().maxCoeff();
  // Padding cells cost as much as a zero count.
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, top);
  cost.topLeftCorner(np, ng) =
      (top - table.counts().cast<double>().array()).matrix();
  const std::vector<int> assign = min_cost_assignment(cost);

  OneToOneMap out;
  out.pred_to_gold.assign(np, -1);
  for (int p = 0; p < np; ++p) {
    if (assign[p] < ng) {
      out.pred_to_gold[p] = assign[p];
      out.matched += table.counts()(p, assign[p]);
    }
  }
  out.accuracy = static_cast<double>(out.matched) / static_cast<double>(table.total());
  return out;
}

Eigen::MatrixXd confusion_matrix(const ContingencyTable &table,
                                 const OneToOneMap &mapping,
                                 const std::vector<int> &gold_subset) {
  const int m = static_cast<int>(gold_subset.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m + 1);
  for (int r = 0; r < m; ++r) {
    const int g = gold_subset[r];
    if (g < 0 || g >= table.num_gold()) throw Error("gold tag id out of range");
    double row_total = 0.0;
    for (int p = 0; p < table.num_pred(); ++p) {
      const double x = table.counts()(p, g);
      row_total += x;
      const auto it = std::find(gold_subset.begin(), gold_subset.end(),
                                mapping.pred_to_gold[p]);
      const int col = it == gold_subset.end()
                          ? m
                          : static_cast<int>(it - gold_subset.begin());
      out(r, col) += x;
    }
    if (row_total > 0) out.row(r) /= row_total;
  }
  return out;
}

LabelIndex::LabelIndex(const std::vector<std::vector<std::string>> &sequences) {
  for (const auto &seq : sequences) {
    for (const auto &s : seq) ids_.emplace(s, 0);
  }
  for (auto &[label, id] : ids_) {
    id = static_cast<int>(labels_.size());
    labels_.push_back(label);
  }
}

int LabelIndex::id(const std::string &label) const {
  auto it = ids_.find(label);
  if (it == ids_.end()) throw Error("unknown label '" + label + "'");
  return it->second;
}

std::vector<std::vector<int>> LabelIndex::encode(
    const std::vector<std::vector<std::string>> &sequences) const {
  std::vector<std::vector<int>> out;
  out.reserve(sequences.size());
  for (const auto &seq : sequences) {
    std::vector<int> row;
    row.reserve(seq.size());
    for (const auto &s : seq) row.push_back(id(s));
    out.push_back(std::move(row));
  }
  return out;
}

DependencyAccuracy directed_accuracy_by_length(
    const std::vector<std::vector<int>> &pred_heads,
    const std::vector<std::vector<int>> &gold_heads, int short_length) {
  if (pred_heads.size() != gold_heads.size()) {
    throw ShapeError("predicted and gold files have different sentence counts");
  }
  long hit = 0, short_hit = 0;
  DependencyAccuracy out;
  for (std::size_t s = 0; s < pred_heads.size(); ++s) {
    const auto &p = pred_heads[s];
    const auto &g = gold_heads[s];
    if (p.size() != g.size()) {
      throw ShapeError("length mismatch in sentence " + std::to_string(s + 1));
    }
    const bool is_short = static_cast<int>(g.size()) <= short_length;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool ok = p[i] == g[i];
      hit += ok;
      ++out.tokens;
      if (is_short) {
        short_hit += ok;
        ++out.short_tokens;
      }
    }
  }
  if (out.tokens == 0) throw Error("no tokens to evaluate");
  out.all = static_cast<double>(hit) / static_cast<double>(out.tokens);
  out.short_sentences = out.short_tokens == 0
                            ? 0.0
                            : static_cast<double>(short_hit) /
                                  static_cast<double>(out.short_tokens);
  return out;
}

double directed_accuracy(const std::vector<std::vector<int>> &pred_heads,
                         const std::vector<std::vector<int>> &gold_heads) {
  return directed_accuracy_by_length(pred_heads, gold_heads).all;
}

}  // namespace synflow
