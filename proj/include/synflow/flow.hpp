#ifndef SYNFLOW_FLOW_HPP_
#define SYNFLOW_FLOW_HPP_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace synflow {

// Which half of the input passes through a coupling layer unchanged. The left
// half is coordinates [0, d/2), the right half [d/2, d).
enum class CouplingSide { LeftFixed, RightFixed };

// Additive coupling layer. With LeftFixed:
//   h_l = x_l,   h_r = x_r + g(x_l)
// and symmetrically for RightFixed. The coupling function is
//   g(u) = w2 * max(0, w1 * u + b1) + b2
// with as many hidden units as inputs (d/2).
struct CouplingLayer {
  CouplingSide side = CouplingSide::LeftFixed;
  Eigen::MatrixXd w1;  // hidden x half
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // half x hidden
  Eigen::VectorXd b2;

  int half() const { return static_cast<int>(w1.cols()); }
  int dim() const { return 2 * half(); }
};

// Stack of coupling layers with alternating sides. Applying the layers in list
// order is the inverse projection (observed -> latent). An empty stack is the
// identity on any dimension.
struct Flow {
  int dim = 0;
  std::vector<CouplingLayer> layers;

  int depth() const { return static_cast<int>(layers.size()); }
  std::size_t num_parameters() const;
  // Checks shapes, alternation and finiteness. Throws ShapeError.
  void validate() const;
};

// Gradient accumulator shaped like a Flow.
struct FlowGradient {
  struct Layer {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
  };
  std::vector<Layer> layers;

  static FlowGradient zeros_like(const Flow &flow);
  FlowGradient &operator+=(const FlowGradient &other);
  void set_zero();
};

struct InverseResult {
  Eigen::VectorXd latent;
  double log_det = 0.0;
};

// Weights uniform on [-sqrt(3/n_in), sqrt(3/n_in)] (mean 0, std sqrt(1/n_in))
// times `scale`; biases zero. Deterministic in `seed`. Throws for odd dim when
// depth > 0.
Flow init_flow(int dim, int depth, std::uint64_t seed, double scale = 1.0);

// Inverse projection of a single vector. log_det is the log absolute Jacobian
// determinant, identically zero for additive couplings.
InverseResult inverse_apply(const Flow &flow, const Eigen::VectorXd &x);
Eigen::VectorXd forward_apply(const Flow &flow, const Eigen::VectorXd &latent);

// Row-wise versions over an n x dim matrix. log_det receives one entry per row.
Eigen::MatrixXd inverse_apply_rows(const Flow &flow, const Eigen::MatrixXd &x,
                                   Eigen::VectorXd *log_det = nullptr);
Eigen::MatrixXd forward_apply_rows(const Flow &flow,
                                   const Eigen::MatrixXd &latent);

struct InverseGradResult {
  Eigen::MatrixXd latent;      // n x dim
  Eigen::MatrixXd grad_input;  // n x dim
};

// Runs the inverse projection and back-propagates `upstream` (d objective /
// d latent, n x dim). Parameter gradients are added into `accum`; the
// rectifier's subgradient at 0 is taken as 0.
InverseGradResult inverse_apply_with_grad(const Flow &flow,
                                          const Eigen::MatrixXd &x,
                                          const Eigen::MatrixXd &upstream,
                                          FlowGradient &accum);

// Single-vector convenience overload.
InverseGradResult inverse_apply_with_grad(const Flow &flow,
                                          const Eigen::VectorXd &x,
                                          const Eigen::VectorXd &upstream,
                                          FlowGradient &accum);

}  // namespace synflow

#endif  // SYNFLOW_FLOW_HPP_
