#ifndef SYNFLOW_LOGMATH_HPP_
#define SYNFLOW_LOGMATH_HPP_

#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace synflow {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Streaming log-sum-exp: one exp() per added term.
class LogSum {
 public:
  void add(double x) {
    if (x == kNegInf) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  double value() const {
    return max_ == kNegInf ? kNegInf : max_ + std::log(sum_);
  }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

// Elementwise exp that maps -inf to exactly 0 (Eigen's vectorized exp does
// not).
template <typename Derived>
Eigen::Array<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>
exact_exp(const Eigen::DenseBase<Derived> &v) {
  return v.derived().array().unaryExpr([](double x) { return std::exp(x); });
}

template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived> &v) {
  const double m = v.maxCoeff();
  if (m == kNegInf) return kNegInf;
  return m + std::log(exact_exp(v.array() - m).sum());
}

// Row-wise log-softmax of a matrix of logits.
inline Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd &logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    out.row(r) = logits.row(r).array() - log_sum_exp(logits.row(r));
  }
  return out;
}

inline Eigen::VectorXd log_softmax(const Eigen::VectorXd &logits) {
  return logits.array() - log_sum_exp(logits);
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd &logits) {
  return exact_exp(log_softmax(logits)).matrix();
}

// log sigmoid(x), stable for large |x|.
inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace synflow

#endif  // SYNFLOW_LOGMATH_HPP_
