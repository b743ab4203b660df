#ifndef SYNFLOW_JOINT_MODEL_HPP_
#define SYNFLOW_JOINT_MODEL_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "synflow/data_io.hpp"
#include "synflow/dmv.hpp"
#include "synflow/flow.hpp"
#include "synflow/markov.hpp"

namespace synflow {

enum class Structure { Markov, Dmv };

std::string to_string(Structure s);
Structure structure_from_string(const std::string &s);

// Per-state diagonal Gaussians over the latent space.
struct GaussianEmissions {
  static constexpr double kVarianceFloor = 1e-6;

  Eigen::MatrixXd means;      // K x d
  Eigen::MatrixXd variances;  // K x d
  bool trainable_variance = false;

  int num_states() const { return static_cast<int>(means.rows()); }
  int dim() const { return static_cast<int>(means.cols()); }
  void clamp_variances();
  void validate() const;
};

using SyntaxParams = std::variant<MarkovParams, DmvParams>;

struct JointModel {
  Flow flow;
  GaussianEmissions emissions;
  SyntaxParams syntax;

  Structure structure() const;
  int num_states() const;
  int dim() const { return emissions.dim(); }
  // Checks K and dimension agreement between the parts.
  void validate() const;
};

struct EmissionResult {
  EmissionScores scores;   // length x K
  Eigen::MatrixXd latent;  // length x d
};

// scores(i, k) = log N(latent_i; mu_k, diag var_k) + log|det J(x_i)|.
EmissionResult emission_log_scores(const JointModel &model,
                                   const Eigen::MatrixXd &embeddings);

double sentence_log_likelihood(const JointModel &model, const Sentence &sentence);
double corpus_log_likelihood(const JointModel &model, const Corpus &corpus);

using SyntaxGradient = std::variant<MarkovGradient, DmvGradient>;

struct ModelGradient {
  FlowGradient flow;
  Eigen::MatrixXd means;
  Eigen::MatrixXd variances;  // zero unless variances are trainable
  SyntaxGradient syntax;
  double log_likelihood = 0.0;

  static ModelGradient zeros_like(const JointModel &model);
  // Adds parameter gradients and the log-likelihood of `other`.
  ModelGradient &operator+=(const ModelGradient &other);
};

// Adds the gradient of sentence_log_likelihood into `accum` and returns the
// sentence log-likelihood.
double accumulate_gradient(const JointModel &model, const Sentence &sentence,
                           ModelGradient &accum);
ModelGradient grad_sentence(const JointModel &model, const Sentence &sentence);

// Most likely state per token ignoring the syntax model.
std::vector<int> map_states(const JointModel &model,
                            const Eigen::MatrixXd &embeddings);

// Viterbi tags (Markov) for every sentence.
std::vector<std::vector<int>> decode_tags(const JointModel &model,
                                          const Corpus &corpus);
// Viterbi parses (DMV) for every sentence.
std::vector<DependencyParse> decode_parses(const JointModel &model,
                                           const Corpus &corpus);

// Means: empirical latent mean plus N(0, noise^2) per coordinate. Variances:
// empirical per-coordinate latent variance (floored).
GaussianEmissions init_gaussians(const Corpus &corpus, const Flow &flow,
                                 int num_states, std::mt19937_64 &rng,
                                 double noise = 0.1);

struct LengthDistribution {
  int min_length = 1;
  int max_length = 10;
  void validate() const;
};

// Ancestral sampling: syntax -> latent Gaussians -> forward projection.
// Gold tags are state indices as strings; DMV samples also carry gold heads.
// DMV derivations whose length falls outside the range are rejected.
Corpus sample_corpus(const JointModel &model, int num_sentences,
                     const LengthDistribution &lengths, std::uint64_t seed);

}  // namespace synflow

#endif  // SYNFLOW_JOINT_MODEL_HPP_
