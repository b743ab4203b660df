#include "synflow/markov.hpp"

#include <string>

#include "synflow/error.hpp"
#include "synflow/logmath.hpp"

namespace synflow {
namespace {

void check_inputs(const MarkovParams &params, const EmissionScores &scores) {
  const int k = params.num_states();
  if (k < 1) throw ShapeError("Markov model needs at least one state");
  if (params.trans_logits.rows() != k || params.trans_logits.cols() != k) {
    throw ShapeError("transition logits must be K x K");
  }
  if (scores.cols() != k) {
    throw ShapeError("emission scores have " + std::to_string(scores.cols()) +
                     " columns, model has " + std::to_string(k) + " states");
  }
  if (scores.rows() < 1) throw ShapeError("empty sentence");
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    if (!(scores.row(i).maxCoeff() > kNegInf)) {
      throw NumericalError("token " + std::to_string(i) +
                           " has no state with finite emission score");
    }
  }
}

// alpha(i, k) = log p(x_1..i, z_i = k).
Eigen::MatrixXd forward_pass(const Eigen::VectorXd &log_init,
                             const Eigen::MatrixXd &log_trans,
                             const EmissionScores &scores) {
  const Eigen::Index n = scores.rows(), k = scores.cols();
  Eigen::MatrixXd alpha(n, k);
  alpha.row(0) = log_init.transpose() + scores.row(0);
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index to = 0; to < k; ++to) {
      LogSum acc;
      for (Eigen::Index from = 0; from < k; ++from) {
        acc.add(alpha(i - 1, from) + log_trans(from, to));
      }
      alpha(i, to) = acc.value() + scores(i, to);
    }
  }
  return alpha;
}

// beta(i, k) = log p(x_i+1..n | z_i = k).
Eigen::MatrixXd backward_pass(const Eigen::MatrixXd &log_trans,
                              const EmissionScores &scores) {
  const Eigen::Index n = scores.rows(), k = scores.cols();
  Eigen::MatrixXd beta(n, k);
  beta.row(n - 1).setZero();
  for (Eigen::Index i = n - 1; i-- > 0;) {
    for (Eigen::Index from = 0; from < k; ++from) {
      LogSum acc;
      for (Eigen::Index to = 0; to < k; ++to) {
        acc.add(log_trans(from, to) + scores(i + 1, to) + beta(i + 1, to));
      }
      beta(i, from) = acc.value();
    }
  }
  return beta;
}

double final_log_marginal(const Eigen::MatrixXd &alpha) {
  const double z = log_sum_exp(alpha.row(alpha.rows() - 1));
  if (!std::isfinite(z)) throw NumericalError("log marginal is not finite");
  return z;
}

}  // namespace

void MarkovParams::validate() const {
  const int k = num_states();
  if (k < 1) throw ShapeError("Markov model needs at least one state");
  if (trans_logits.rows() != k || trans_logits.cols() != k) {
    throw ShapeError("transition logits must be K x K");
  }
  if (!init_logits.allFinite() || !trans_logits.allFinite()) {
    throw NumericalError("non-finite Markov logits");
  }
}

double log_marginal(const MarkovParams &params, const EmissionScores &scores) {
  check_inputs(params, scores);
  return final_log_marginal(forward_pass(log_softmax(params.init_logits),
                                         log_softmax_rows(params.trans_logits),
                                         scores));
}

ForwardBackward forward_backward(const MarkovParams &params,
                                 const EmissionScores &scores) {
  check_inputs(params, scores);
  const Eigen::VectorXd log_init = log_softmax(params.init_logits);
  const Eigen::MatrixXd log_trans = log_softmax_rows(params.trans_logits);
  const Eigen::MatrixXd alpha = forward_pass(log_init, log_trans, scores);
  const Eigen::MatrixXd beta = backward_pass(log_trans, scores);

  ForwardBackward out;
  out.log_marginal = final_log_marginal(alpha);
  const Eigen::Index n = scores.rows(), k = scores.cols();
  out.gamma = (alpha + beta).array() - out.log_marginal;
  out.gamma = exact_exp(out.gamma).matrix();
  out.xi.reserve(n - 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    Eigen::MatrixXd x(k, k);
    for (Eigen::Index from = 0; from < k; ++from) {
      for (Eigen::Index to = 0; to < k; ++to) {
        x(from, to) = std::exp(alpha(i, from) + log_trans(from, to) +
                               scores(i + 1, to) + beta(i + 1, to) -
                               out.log_marginal);
      }
    }
    out.xi.push_back(std::move(x));
  }
  return out;
}

std::vector<int> viterbi(const MarkovParams &params,
                         const EmissionScores &scores) {
  check_inputs(params, scores);
  const Eigen::VectorXd log_init = log_softmax(params.init_logits);
  const Eigen::MatrixXd log_trans = log_softmax_rows(params.trans_logits);
  const Eigen::Index n = scores.rows(), k = scores.cols();

  Eigen::MatrixXd best(n, k);
  Eigen::MatrixXi back(n, k);
  best.row(0) = log_init.transpose() + scores.row(0);
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index to = 0; to < k; ++to) {
      double top = kNegInf;
      int arg = 0;
      for (Eigen::Index from = 0; from < k; ++from) {
        const double v = best(i - 1, from) + log_trans(from, to);
        if (v > top) {
          top = v;
          arg = static_cast<int>(from);
        }
      }
      best(i, to) = top + scores(i, to);
      back(i, to) = arg;
    }
  }
  std::vector<int> path(n);
  double top = kNegInf;
  int arg = 0;
  for (Eigen::Index s = 0; s < k; ++s) {
    if (best(n - 1, s) > top) {
      top = best(n - 1, s);
      arg = static_cast<int>(s);
    }
  }
  path[n - 1] = arg;
  for (Eigen::Index i = n - 1; i > 0; --i) path[i - 1] = back(i, path[i]);
  return path;
}

MarkovGradient grad_log_marginal(const MarkovParams &params,
                                 const EmissionScores &scores) {
  ForwardBackward fb = forward_backward(params, scores);
  const int k = params.num_states();
  MarkovGradient g;
  g.log_marginal = fb.log_marginal;

  // d/d logit = expected count - softmax * expected total.
  const Eigen::VectorXd p_init = softmax(params.init_logits);
  g.init_logits = fb.gamma.row(0).transpose() - p_init;

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, k);
  for (const auto &x : fb.xi) counts += x;
  const Eigen::MatrixXd p_trans =
      exact_exp(log_softmax_rows(params.trans_logits)).matrix();
  const Eigen::VectorXd totals = counts.rowwise().sum();
  g.trans_logits = counts - (p_trans.array().colwise() * totals.array()).matrix();

  g.scores = std::move(fb.gamma);
  return g;
}

MarkovParams init_markov(int num_states, std::mt19937_64 &rng) {
  if (num_states < 1) throw Error("number of states must be at least 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MarkovParams p;
  p.init_logits.resize(num_states);
  p.trans_logits.resize(num_states, num_states);
  for (int i = 0; i < num_states; ++i) p.init_logits(i) = u(rng);
  for (int r = 0; r < num_states; ++r)
    for (int c = 0; c < num_states; ++c) p.trans_logits(r, c) = u(rng);
  return p;
}

MarkovParams init_markov(int num_states, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return init_markov(num_states, rng);
}

}  // namespace synflow
