#ifndef SYNFLOW_DMV_HPP_
#define SYNFLOW_DMV_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "synflow/markov.hpp"

namespace synflow {

enum Direction : int { kLeft = 0, kRight = 1 };
enum Valence : int { kAdjacent = 0, kNonAdjacent = 1 };

// Dependency model with valence over K latent tags.
//
// The root generates one head tag. Each head, independently per direction,
// repeatedly decides STOP or CONTINUE (valence Adjacent before its first child
// on that side, NonAdjacent afterwards) and on CONTINUE attaches a child tag.
// Children are generated from the head outward.
struct DmvParams {
  Eigen::VectorXd root_logits;    // K
  Eigen::MatrixXd attach_logits;  // (2K) x K, row = 2 * head + direction
  Eigen::MatrixXd stop_logits;    // K x 4, column = 2 * direction + valence

  int num_tags() const { return static_cast<int>(root_logits.size()); }
  void validate() const;

  double &attach(int head, int dir, int child) {
    return attach_logits(2 * head + dir, child);
  }
  double attach(int head, int dir, int child) const {
    return attach_logits(2 * head + dir, child);
  }
  // Logit of P(STOP); P(CONTINUE) = 1 - sigmoid(stop).
  double &stop(int head, int dir, int valence) {
    return stop_logits(head, 2 * dir + valence);
  }
  double stop(int head, int dir, int valence) const {
    return stop_logits(head, 2 * dir + valence);
  }
};

struct DependencyParse {
  std::vector<int> heads;  // 0 = root, otherwise 1-based head position
  std::vector<int> tags;
  double log_score = 0.0;
};

// Inside chart over split-head items. For head h with tag t:
//   right_open(h, j)  : right dependents cover (h, j], head has not stopped
//   right_closed(h, j): as right_open, then STOP to the right
//   left_open(j, h), left_closed(j, h): the mirror images
// and the incomplete items right_incomplete(h, m, t, c) / left_incomplete
// hold an attached child m of tag c whose outer half is still missing.
class DmvChart {
 public:
  DmvChart(int length, int num_tags);

  int length() const { return n_; }
  int num_tags() const { return k_; }
  double log_marginal() const { return log_marginal_; }
  // Number of terms summed while filling the chart; Theta(n^3 K^2).
  std::size_t term_count() const { return terms_; }

 private:
  friend DmvChart dmv_inside(const DmvParams &, const EmissionScores &);
  friend struct DmvChartAccess;

  std::size_t span(int a, int b, int t) const {
    return (static_cast<std::size_t>(a) * n_ + b) * k_ + t;
  }
  std::size_t pair(int h, int m, int t, int c) const {
    return ((static_cast<std::size_t>(h) * n_ + m) * k_ + t) * k_ + c;
  }

  int n_, k_;
  std::vector<double> right_open_, right_closed_, left_open_, left_closed_;
  std::vector<double> right_incomplete_, left_incomplete_;
  double log_marginal_ = 0.0;
  std::size_t terms_ = 0;
};

struct DmvGradient {
  Eigen::VectorXd root_logits;
  Eigen::MatrixXd attach_logits;
  Eigen::MatrixXd stop_logits;
  Eigen::MatrixXd scores;  // tag posteriors, length x K
  double log_marginal = 0.0;
};

// Expected (or observed) event counts in the layout of DmvParams.
struct DmvCounts {
  Eigen::VectorXd root;
  Eigen::MatrixXd attach;
  Eigen::MatrixXd stop;
  Eigen::MatrixXd cont;

  explicit DmvCounts(int num_tags);
};

DmvChart dmv_inside(const DmvParams &params, const EmissionScores &scores);

// log sum over projective trees and tag sequences of the joint probability
// times prod_i exp(scores(i, tag_i)).
double dmv_log_marginal(const DmvParams &params, const EmissionScores &scores);

// Gradient of dmv_log_marginal via the outside pass.
DmvGradient dmv_expected_counts(const DmvParams &params,
                                const EmissionScores &scores);

// Best (tree, tags). Ties prefer the smaller head index, then the smaller tag.
DependencyParse dmv_viterbi(const DmvParams &params,
                            const EmissionScores &scores);

// Posterior expected event counts.
DmvCounts dmv_posterior_counts(const DmvParams &params,
                               const EmissionScores &scores);

// Events used by a single derivation.
DmvCounts count_events(const DependencyParse &parse, int num_tags);

DmvParams init_dmv(int num_tags, std::uint64_t seed);
DmvParams init_dmv(int num_tags, std::mt19937_64 &rng);
// All logits zero: uniform root/attach, STOP with probability 1/2.
DmvParams uniform_dmv(int num_tags);

// Logits reproducing the smoothed relative frequencies of `counts`.
DmvParams dmv_from_counts(const DmvCounts &counts, double smoothing);

// Smoothed relative frequencies of the expected counts when every tree is
// equally likely (uniform DMV) and tags are observed.
DmvParams dmv_uniform_posterior(const std::vector<std::vector<int>> &tag_sequences,
                                int num_tags, double smoothing);

struct ViterbiEmResult {
  DmvParams params;
  // Per iteration, before the update: summed Viterbi log joint of the corpus,
  // and that value plus the smoothing prior (smoothing * sum log theta).
  std::vector<double> viterbi_scores;
  std::vector<double> objectives;
};

// Hard EM on observed tag sequences with additive smoothing.
ViterbiEmResult train_dmv_viterbi_em(
    const std::vector<std::vector<int>> &tag_sequences, int num_tags,
    int iterations, double smoothing,
    const std::optional<DmvParams> &initial = std::nullopt);

// Emission scores that pin each token to its observed tag.
EmissionScores observed_tag_scores(const std::vector<int> &tags, int num_tags);

}  // namespace synflow

#endif  // SYNFLOW_DMV_HPP_
