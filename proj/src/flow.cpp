#include "synflow/flow.hpp"

#include <cmath>
#include <random>

#include "synflow/error.hpp"

namespace synflow {
namespace {

// Column ranges of the half that stays fixed and the half that is shifted.
struct Halves {
  Eigen::Index fixed;
  Eigen::Index moved;
};

Halves halves(const CouplingLayer &layer) {
  const Eigen::Index h = layer.half();
  return layer.side == CouplingSide::LeftFixed ? Halves{0, h} : Halves{h, 0};
}

void check_input(const Flow &flow, Eigen::Index cols) {
  if (flow.depth() > 0 && cols != flow.dim) {
    throw ShapeError("flow expects dimension " + std::to_string(flow.dim) +
                     ", got " + std::to_string(cols));
  }
}

// Pre-activations of g for every row of `fixed`.
Eigen::MatrixXd pre_activation(const CouplingLayer &layer,
                               const Eigen::MatrixXd &fixed) {
  Eigen::MatrixXd pre = fixed * layer.w1.transpose();
  pre.rowwise() += layer.b1.transpose();
  return pre;
}

Eigen::MatrixXd coupling_output(const CouplingLayer &layer,
                                const Eigen::MatrixXd &hidden) {
  Eigen::MatrixXd out = hidden * layer.w2.transpose();
  out.rowwise() += layer.b2.transpose();
  return out;
}

Eigen::MatrixXd coupling(const CouplingLayer &layer,
                         const Eigen::MatrixXd &fixed) {
  return coupling_output(layer, pre_activation(layer, fixed).cwiseMax(0.0));
}

}  // namespace

std::size_t Flow::num_parameters() const {
  std::size_t n = 0;
  for (const auto &l : layers) {
    n += l.w1.size() + l.b1.size() + l.w2.size() + l.b2.size();
  }
  return n;
}

void Flow::validate() const {
  if (layers.empty()) return;
  if (dim <= 0 || dim % 2 != 0) {
    throw ShapeError("coupling layers need an even, positive dimension");
  }
  const int h = dim / 2;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto &l = layers[i];
    if (l.w1.rows() != h || l.w1.cols() != h || l.b1.size() != h ||
        l.w2.rows() != h || l.w2.cols() != h || l.b2.size() != h) {
      throw ShapeError("coupling layer " + std::to_string(i) +
                       " has inconsistent shapes");
    }
    const auto expected =
        i % 2 == 0 ? CouplingSide::LeftFixed : CouplingSide::RightFixed;
    if (l.side != expected) {
      throw ShapeError("coupling layers must alternate sides");
    }
    if (!l.w1.allFinite() || !l.b1.allFinite() || !l.w2.allFinite() ||
        !l.b2.allFinite()) {
      throw NumericalError("non-finite flow parameter in layer " +
                           std::to_string(i));
    }
  }
}

FlowGradient FlowGradient::zeros_like(const Flow &flow) {
  FlowGradient g;
  g.layers.reserve(flow.layers.size());
  for (const auto &l : flow.layers) {
    g.layers.push_back({Eigen::MatrixXd::Zero(l.w1.rows(), l.w1.cols()),
                        Eigen::VectorXd::Zero(l.b1.size()),
                        Eigen::MatrixXd::Zero(l.w2.rows(), l.w2.cols()),
                        Eigen::VectorXd::Zero(l.b2.size())});
  }
  return g;
}

FlowGradient &FlowGradient::operator+=(const FlowGradient &other) {
  if (other.layers.size() != layers.size()) {
    throw ShapeError("flow gradient depth mismatch");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].w1 += other.layers[i].w1;
    layers[i].b1 += other.layers[i].b1;
    layers[i].w2 += other.layers[i].w2;
    layers[i].b2 += other.layers[i].b2;
  }
  return *this;
}

void FlowGradient::set_zero() {
  for (auto &l : layers) {
    l.w1.setZero();
    l.b1.setZero();
    l.w2.setZero();
    l.b2.setZero();
  }
}

Flow init_flow(int dim, int depth, std::uint64_t seed, double scale) {
  if (depth < 0) throw Error("flow depth must be non-negative");
  if (dim <= 0) throw ShapeError("flow dimension must be positive");
  if (depth > 0 && dim % 2 != 0) {
    throw ShapeError("coupling layers need an even dimension, got " +
                     std::to_string(dim));
  }
  Flow flow;
  flow.dim = dim;
  if (depth == 0) return flow;

  const int h = dim / 2;
  std::mt19937_64 rng(seed);
  // Both affine maps of g have h inputs.
  const double bound = scale * std::sqrt(3.0 / h);
  std::uniform_real_distribution<double> uniform(-bound, bound);
  auto draw = [&](Eigen::MatrixXd &m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = uniform(rng);
  };
  for (int i = 0; i < depth; ++i) {
    CouplingLayer layer;
    layer.side = i % 2 == 0 ? CouplingSide::LeftFixed : CouplingSide::RightFixed;
    layer.w1.resize(h, h);
    layer.w2.resize(h, h);
    draw(layer.w1);
    draw(layer.w2);
    layer.b1 = Eigen::VectorXd::Zero(h);
    layer.b2 = Eigen::VectorXd::Zero(h);
    flow.layers.push_back(std::move(layer));
  }
  return flow;
}

Eigen::MatrixXd inverse_apply_rows(const Flow &flow, const Eigen::MatrixXd &x,
                                   Eigen::VectorXd *log_det) {
  check_input(flow, x.cols());
  Eigen::MatrixXd h = x;
  for (const auto &layer : flow.layers) {
    const auto [fixed, moved] = halves(layer);
    const Eigen::Index n = layer.half();
    h.middleCols(moved, n) += coupling(layer, h.middleCols(fixed, n));
  }
  if (log_det != nullptr) *log_det = Eigen::VectorXd::Zero(x.rows());
  return h;
}

Eigen::MatrixXd forward_apply_rows(const Flow &flow,
                                   const Eigen::MatrixXd &latent) {
  check_input(flow, latent.cols());
  Eigen::MatrixXd x = latent;
  for (auto it = flow.layers.rbegin(); it != flow.layers.rend(); ++it) {
    const auto [fixed, moved] = halves(*it);
    const Eigen::Index n = it->half();
    x.middleCols(moved, n) -= coupling(*it, x.middleCols(fixed, n));
  }
  return x;
}

InverseResult inverse_apply(const Flow &flow, const Eigen::VectorXd &x) {
  Eigen::VectorXd log_det;
  Eigen::MatrixXd e = inverse_apply_rows(flow, x.transpose(), &log_det);
  return {e.row(0).transpose(), log_det(0)};
}

Eigen::VectorXd forward_apply(const Flow &flow, const Eigen::VectorXd &latent) {
  return forward_apply_rows(flow, latent.transpose()).row(0).transpose();
}

InverseGradResult inverse_apply_with_grad(const Flow &flow,
                                          const Eigen::MatrixXd &x,
                                          const Eigen::MatrixXd &upstream,
                                          FlowGradient &accum) {
  check_input(flow, x.cols());
  if (upstream.rows() != x.rows() || upstream.cols() != x.cols()) {
    throw ShapeError("upstream gradient shape does not match input");
  }
  if (accum.layers.size() != flow.layers.size()) {
    throw ShapeError("gradient accumulator depth does not match flow");
  }

  // Forward pass, keeping each layer's input.
  std::vector<Eigen::MatrixXd> inputs;
  inputs.reserve(flow.layers.size());
  Eigen::MatrixXd h = x;
  for (const auto &layer : flow.layers) {
    inputs.push_back(h);
    const auto [fixed, moved] = halves(layer);
    const Eigen::Index n = layer.half();
    h.middleCols(moved, n) += coupling(layer, h.middleCols(fixed, n));
  }

  Eigen::MatrixXd grad = upstream;
  for (std::size_t li = flow.layers.size(); li-- > 0;) {
    const auto &layer = flow.layers[li];
    auto &g = accum.layers[li];
    const auto [fixed, moved] = halves(layer);
    const Eigen::Index n = layer.half();

    const Eigen::MatrixXd u = inputs[li].middleCols(fixed, n);
    const Eigen::MatrixXd pre = pre_activation(layer, u);
    const Eigen::MatrixXd act = pre.cwiseMax(0.0);
    const Eigen::MatrixXd d_out = grad.middleCols(moved, n);

    g.w2.noalias() += d_out.transpose() * act;
    g.b2 += d_out.colwise().sum().transpose();
    Eigen::MatrixXd d_pre = d_out * layer.w2;
    d_pre = (pre.array() > 0.0).select(d_pre, 0.0);
    g.w1.noalias() += d_pre.transpose() * u;
    g.b1 += d_pre.colwise().sum().transpose();
    // The moved half passes its gradient straight through.
    grad.middleCols(fixed, n) += d_pre * layer.w1;
  }
  return {std::move(h), std::move(grad)};
}

InverseGradResult inverse_apply_with_grad(const Flow &flow,
                                          const Eigen::VectorXd &x,
                                          const Eigen::VectorXd &upstream,
                                          FlowGradient &accum) {
  return inverse_apply_with_grad(flow, Eigen::MatrixXd(x.transpose()),
                                 Eigen::MatrixXd(upstream.transpose()), accum);
}

}  // namespace synflow
