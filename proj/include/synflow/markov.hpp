#ifndef SYNFLOW_MARKOV_HPP_
#define SYNFLOW_MARKOV_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace synflow {

// Per-token log emission values, length x K. Entries may be -inf, but each row
// needs at least one finite entry.
using EmissionScores = Eigen::MatrixXd;

// First-order Markov chain over K latent states. Probabilities are the softmax
// of the logits; row j of trans_logits is the distribution after state j.
struct MarkovParams {
  Eigen::VectorXd init_logits;
  Eigen::MatrixXd trans_logits;

  int num_states() const { return static_cast<int>(init_logits.size()); }
  void validate() const;
};

struct ForwardBackward {
  Eigen::MatrixXd gamma;           // length x K, p(z_i = k | x)
  std::vector<Eigen::MatrixXd> xi;  // length-1 of K x K, p(z_i = j, z_i+1 = k | x)
  double log_marginal = 0.0;
};

struct MarkovGradient {
  Eigen::VectorXd init_logits;
  Eigen::MatrixXd trans_logits;
  Eigen::MatrixXd scores;  // equals the state posteriors
  double log_marginal = 0.0;
};

// log sum_z prod_i p(z_i | z_i-1) exp(scores(i, z_i)).
double log_marginal(const MarkovParams &params, const EmissionScores &scores);

ForwardBackward forward_backward(const MarkovParams &params,
                                 const EmissionScores &scores);

// Best state sequence. Ties go to the lower state index.
std::vector<int> viterbi(const MarkovParams &params,
                         const EmissionScores &scores);

MarkovGradient grad_log_marginal(const MarkovParams &params,
                                 const EmissionScores &scores);

// Logits drawn i.i.d. from U[0, 1], so probabilities are proportional to
// exp(u).
MarkovParams init_markov(int num_states, std::uint64_t seed);
MarkovParams init_markov(int num_states, std::mt19937_64 &rng);

}  // namespace synflow

#endif  // SYNFLOW_MARKOV_HPP_
