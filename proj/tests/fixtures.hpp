// Random models and sentences shared by the joint-model tests.
#ifndef SYNFLOW_TESTS_FIXTURES_HPP_
#define SYNFLOW_TESTS_FIXTURES_HPP_

#include <cmath>
#include <random>
#include <string>

#include "oracles.hpp"
#include "synflow/data_io.hpp"
#include "synflow/joint_model.hpp"

namespace fixture {

inline const double kHalfLog2Pi = 0.5 * std::log(2 * M_PI);

// Diagonal Gaussian log density written out coordinate by coordinate.
inline double gaussian(const Eigen::VectorXd &e, const Eigen::VectorXd &mu,
                       const Eigen::VectorXd &var) {
  double lp = 0;
  for (Eigen::Index j = 0; j < e.size(); ++j)
    lp += -kHalfLog2Pi - 0.5 * std::log(var(j)) - 0.5 * (e(j) - mu(j)) * (e(j) - mu(j)) / var(j);
  return lp;
}

inline Eigen::MatrixXd oracle_scores(const synflow::JointModel &m, const Eigen::MatrixXd &x) {
  Eigen::MatrixXd s(x.rows(), m.num_states());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::VectorXd e = oracle::scalar_inverse(m.flow, x.row(i).transpose());
    for (int k = 0; k < m.num_states(); ++k)
      s(i, k) = gaussian(e, m.emissions.means.row(k).transpose(),
                         m.emissions.variances.row(k).transpose());
  }
  return s;
}

inline synflow::JointModel random_model(synflow::Structure st, int dim, int k, int depth,
                                        std::mt19937_64 &rng, bool trainable_variance = false) {
  using namespace synflow;
  JointModel m;
  m.flow = init_flow(dim, depth, rng());
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto &l : m.flow.layers) {
    for (Eigen::Index i = 0; i < l.b1.size(); ++i) l.b1(i) = u(rng);
    for (Eigen::Index i = 0; i < l.b2.size(); ++i) l.b2(i) = u(rng);
  }
  m.emissions.means = oracle::random_matrix(k, dim, rng, -1, 1);
  m.emissions.variances = oracle::random_matrix(k, dim, rng, 0.5, 2);
  m.emissions.trainable_variance = trainable_variance;
  if (st == Structure::Markov) {
    m.syntax = MarkovParams{oracle::random_matrix(k, 1, rng), oracle::random_matrix(k, k, rng)};
  } else {
    m.syntax = DmvParams{oracle::random_matrix(k, 1, rng), oracle::random_matrix(2 * k, k, rng),
                         oracle::random_matrix(k, 4, rng)};
  }
  return m;
}

inline synflow::Sentence random_sentence(int n, int dim, std::mt19937_64 &rng) {
  synflow::Sentence s;
  for (int i = 0; i < n; ++i) s.tokens.push_back("t" + std::to_string(i));
  s.embeddings = oracle::random_matrix(n, dim, rng, -1.5, 1.5);
  return s;
}

}  // namespace fixture

#endif  // SYNFLOW_TESTS_FIXTURES_HPP_
