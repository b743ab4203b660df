#include "synflow/dmv.hpp"

#include <string>

#include "synflow/error.hpp"
#include "synflow/logmath.hpp"

namespace synflow {

// Gives the outside pass and the Viterbi decoder access to chart storage.
struct DmvChartAccess {
  static std::vector<double> &ro(DmvChart &c) { return c.right_open_; }
  static std::vector<double> &rc(DmvChart &c) { return c.right_closed_; }
  static std::vector<double> &lo(DmvChart &c) { return c.left_open_; }
  static std::vector<double> &lc(DmvChart &c) { return c.left_closed_; }
  static std::vector<double> &ri(DmvChart &c) { return c.right_incomplete_; }
  static std::vector<double> &li(DmvChart &c) { return c.left_incomplete_; }
  static std::size_t span(const DmvChart &c, int a, int b, int t) {
    return c.span(a, b, t);
  }
  static std::size_t pair(const DmvChart &c, int h, int m, int t, int x) {
    return c.pair(h, m, t, x);
  }
};

namespace {

// Log-probability tables derived from the logits.
struct LogTables {
  int k;
  Eigen::VectorXd root;
  Eigen::MatrixXd attach;  // (2K) x K
  Eigen::MatrixXd stop;    // K x 4
  Eigen::MatrixXd cont;    // K x 4

  explicit LogTables(const DmvParams &p)
      : k(p.num_tags()),
        root(log_softmax(p.root_logits)),
        attach(log_softmax_rows(p.attach_logits)),
        stop(p.stop_logits.rows(), 4),
        cont(p.stop_logits.rows(), 4) {
    for (Eigen::Index t = 0; t < stop.rows(); ++t) {
      for (int j = 0; j < 4; ++j) {
        stop(t, j) = log_sigmoid(p.stop_logits(t, j));
        cont(t, j) = log_sigmoid(-p.stop_logits(t, j));
      }
    }
  }
  double att(int h, int dir, int c) const { return attach(2 * h + dir, c); }
  double st(int h, int dir, int v) const { return stop(h, 2 * dir + v); }
  double ct(int h, int dir, int v) const { return cont(h, 2 * dir + v); }
};

void check_inputs(const DmvParams &params, const EmissionScores &scores) {
  const int k = params.num_tags();
  if (k < 1) throw ShapeError("DMV needs at least one tag");
  if (params.attach_logits.rows() != 2 * k || params.attach_logits.cols() != k ||
      params.stop_logits.rows() != k || params.stop_logits.cols() != 4) {
    throw ShapeError("DMV parameter shapes are inconsistent");
  }
  if (scores.rows() < 1) throw ShapeError("empty sentence");
  if (scores.cols() != k) {
    throw ShapeError("emission scores have " + std::to_string(scores.cols()) +
                     " columns, model has " + std::to_string(k) + " tags");
  }
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    if (!(scores.row(i).maxCoeff() > kNegInf)) {
      throw NumericalError("token " + std::to_string(i) +
                           " has no tag with finite emission score");
    }
  }
}

int valence_right(int head, int k) { return k > head ? kNonAdjacent : kAdjacent; }
int valence_left(int head, int k) { return k < head ? kNonAdjacent : kAdjacent; }

}  // namespace

void DmvParams::validate() const {
  const int k = num_tags();
  if (k < 1) throw ShapeError("DMV needs at least one tag");
  if (attach_logits.rows() != 2 * k || attach_logits.cols() != k ||
      stop_logits.rows() != k || stop_logits.cols() != 4) {
    throw ShapeError("DMV parameter shapes are inconsistent");
  }
  if (!root_logits.allFinite() || !attach_logits.allFinite() ||
      !stop_logits.allFinite()) {
    throw NumericalError("non-finite DMV logits");
  }
}

DmvChart::DmvChart(int length, int num_tags)
    : n_(length),
      k_(num_tags),
      right_open_(static_cast<std::size_t>(length) * length * num_tags, kNegInf),
      right_closed_(right_open_.size(), kNegInf),
      left_open_(right_open_.size(), kNegInf),
      left_closed_(right_open_.size(), kNegInf),
      right_incomplete_(right_open_.size() * num_tags, kNegInf),
      left_incomplete_(right_open_.size() * num_tags, kNegInf) {}

DmvCounts::DmvCounts(int num_tags)
    : root(Eigen::VectorXd::Zero(num_tags)),
      attach(Eigen::MatrixXd::Zero(2 * num_tags, num_tags)),
      stop(Eigen::MatrixXd::Zero(num_tags, 4)),
      cont(Eigen::MatrixXd::Zero(num_tags, 4)) {}

DmvChart dmv_inside(const DmvParams &params, const EmissionScores &scores) {
  check_inputs(params, scores);
  const LogTables lp(params);
  const int n = static_cast<int>(scores.rows());
  const int k = lp.k;
  DmvChart chart(n, k);
  auto &ro = chart.right_open_;
  auto &rc = chart.right_closed_;
  auto &lo = chart.left_open_;
  auto &lc = chart.left_closed_;
  auto &ri = chart.right_incomplete_;
  auto &li = chart.left_incomplete_;
  std::size_t terms = 0;

  for (int h = 0; h < n; ++h) {
    for (int t = 0; t < k; ++t) {
      ro[chart.span(h, h, t)] = 0.0;
      lo[chart.span(h, h, t)] = 0.0;
      rc[chart.span(h, h, t)] = lp.st(t, kRight, kAdjacent);
      lc[chart.span(h, h, t)] = lp.st(t, kLeft, kAdjacent);
    }
  }

  for (int w = 1; w < n; ++w) {
    for (int a = 0; a + w < n; ++a) {
      const int b = a + w;
      // Head a takes child b on the right; head b takes child a on the left.
      for (int t = 0; t < k; ++t) {
        for (int c = 0; c < k; ++c) {
          LogSum right, left;
          for (int s = a; s < b; ++s) {
            right.add(ro[chart.span(a, s, t)] +
                      lp.ct(t, kRight, valence_right(a, s)) +
                      lp.att(t, kRight, c) + lc[chart.span(s + 1, b, c)]);
            left.add(lo[chart.span(s + 1, b, t)] +
                     lp.ct(t, kLeft, valence_left(b, s + 1)) +
                     lp.att(t, kLeft, c) + rc[chart.span(a, s, c)]);
          }
          terms += 2 * static_cast<std::size_t>(w);
          ri[chart.pair(a, b, t, c)] = right.value();
          li[chart.pair(b, a, t, c)] = left.value();
        }
      }
      for (int t = 0; t < k; ++t) {
        LogSum right, left;
        for (int m = a + 1; m <= b; ++m) {
          for (int c = 0; c < k; ++c) {
            right.add(ri[chart.pair(a, m, t, c)] + scores(m, c) +
                      rc[chart.span(m, b, c)]);
          }
        }
        for (int m = a; m < b; ++m) {
          for (int c = 0; c < k; ++c) {
            left.add(li[chart.pair(b, m, t, c)] + scores(m, c) +
                     lc[chart.span(a, m, c)]);
          }
        }
        terms += 2 * static_cast<std::size_t>(w) * k;
        ro[chart.span(a, b, t)] = right.value();
        lo[chart.span(a, b, t)] = left.value();
        rc[chart.span(a, b, t)] = right.value() + lp.st(t, kRight, kNonAdjacent);
        lc[chart.span(a, b, t)] = left.value() + lp.st(t, kLeft, kNonAdjacent);
      }
    }
  }

  LogSum goal;
  for (int h = 0; h < n; ++h) {
    for (int t = 0; t < k; ++t) {
      goal.add(lp.root(t) + scores(h, t) + lc[chart.span(0, h, t)] +
               rc[chart.span(h, n - 1, t)]);
    }
  }
  chart.log_marginal_ = goal.value();
  chart.terms_ = terms;
  if (!std::isfinite(chart.log_marginal_)) {
    throw NumericalError("DMV log marginal is not finite");
  }
  return chart;
}

double dmv_log_marginal(const DmvParams &params, const EmissionScores &scores) {
  return dmv_inside(params, scores).log_marginal();
}

namespace {

struct Posterior {
  DmvCounts counts;
  Eigen::MatrixXd scores;
  double log_marginal;
};

Posterior posterior_pass(const DmvParams &params, const EmissionScores &scores) {
  DmvChart chart = dmv_inside(params, scores);
  const LogTables lp(params);
  const int n = chart.length();
  const int k = chart.num_tags();
  const double z = chart.log_marginal();
  using A = DmvChartAccess;
  const auto &ro = A::ro(chart);
  const auto &rc = A::rc(chart);
  const auto &lo = A::lo(chart);
  const auto &lc = A::lc(chart);
  const auto &ri = A::ri(chart);
  const auto &li = A::li(chart);
  auto span = [&](int a, int b, int t) { return A::span(chart, a, b, t); };
  auto pair = [&](int h, int m, int t, int c) { return A::pair(chart, h, m, t, c); };

  // Adjoints: d log Z / d (log item), i.e. posterior item weights.
  std::vector<double> d_ro(ro.size(), 0.0), d_rc(rc.size(), 0.0),
      d_lo(lo.size(), 0.0), d_lc(lc.size(), 0.0), d_ri(ri.size(), 0.0),
      d_li(li.size(), 0.0);
  DmvCounts counts(k);
  Eigen::MatrixXd d_scores = Eigen::MatrixXd::Zero(n, k);

  for (int h = 0; h < n; ++h) {
    for (int t = 0; t < k; ++t) {
      const double term = lp.root(t) + scores(h, t) + lc[span(0, h, t)] +
                          rc[span(h, n - 1, t)];
      if (term == kNegInf) continue;
      const double p = std::exp(term - z);
      counts.root(t) += p;
      d_scores(h, t) += p;
      d_lc[span(0, h, t)] += p;
      d_rc[span(h, n - 1, t)] += p;
    }
  }

  for (int w = n - 1; w >= 1; --w) {
    for (int a = 0; a + w < n; ++a) {
      const int b = a + w;
      for (int t = 0; t < k; ++t) {
        const std::size_t ab = span(a, b, t);
        counts.stop(t, 2 * kRight + kNonAdjacent) += d_rc[ab];
        d_ro[ab] += d_rc[ab];
        counts.stop(t, 2 * kLeft + kNonAdjacent) += d_lc[ab];
        d_lo[ab] += d_lc[ab];

        if (d_ro[ab] != 0.0 && ro[ab] != kNegInf) {
          for (int m = a + 1; m <= b; ++m) {
            for (int c = 0; c < k; ++c) {
              const double term =
                  ri[pair(a, m, t, c)] + scores(m, c) + rc[span(m, b, c)];
              if (term == kNegInf) continue;
              const double g = d_ro[ab] * std::exp(term - ro[ab]);
              d_ri[pair(a, m, t, c)] += g;
              d_scores(m, c) += g;
              d_rc[span(m, b, c)] += g;
            }
          }
        }
        if (d_lo[ab] != 0.0 && lo[ab] != kNegInf) {
          for (int m = a; m < b; ++m) {
            for (int c = 0; c < k; ++c) {
              const double term =
                  li[pair(b, m, t, c)] + scores(m, c) + lc[span(a, m, c)];
              if (term == kNegInf) continue;
              const double g = d_lo[ab] * std::exp(term - lo[ab]);
              d_li[pair(b, m, t, c)] += g;
              d_scores(m, c) += g;
              d_lc[span(a, m, c)] += g;
            }
          }
        }
      }
      for (int t = 0; t < k; ++t) {
        for (int c = 0; c < k; ++c) {
          const std::size_t rx = pair(a, b, t, c);
          if (d_ri[rx] != 0.0 && ri[rx] != kNegInf) {
            for (int s = a; s < b; ++s) {
              const int v = valence_right(a, s);
              const double term = ro[span(a, s, t)] + lp.ct(t, kRight, v) +
                                  lp.att(t, kRight, c) + lc[span(s + 1, b, c)];
              if (term == kNegInf) continue;
              const double g = d_ri[rx] * std::exp(term - ri[rx]);
              d_ro[span(a, s, t)] += g;
              counts.cont(t, 2 * kRight + v) += g;
              counts.attach(2 * t + kRight, c) += g;
              d_lc[span(s + 1, b, c)] += g;
            }
          }
          const std::size_t lx = pair(b, a, t, c);
          if (d_li[lx] != 0.0 && li[lx] != kNegInf) {
            for (int s = a; s < b; ++s) {
              const int v = valence_left(b, s + 1);
              const double term = lo[span(s + 1, b, t)] + lp.ct(t, kLeft, v) +
                                  lp.att(t, kLeft, c) + rc[span(a, s, c)];
              if (term == kNegInf) continue;
              const double g = d_li[lx] * std::exp(term - li[lx]);
              d_lo[span(s + 1, b, t)] += g;
              counts.cont(t, 2 * kLeft + v) += g;
              counts.attach(2 * t + kLeft, c) += g;
              d_rc[span(a, s, c)] += g;
            }
          }
        }
      }
    }
  }
  for (int h = 0; h < n; ++h) {
    for (int t = 0; t < k; ++t) {
      counts.stop(t, 2 * kRight + kAdjacent) += d_rc[span(h, h, t)];
      counts.stop(t, 2 * kLeft + kAdjacent) += d_lc[span(h, h, t)];
    }
  }

  return {std::move(counts), std::move(d_scores), z};
}

}  // namespace

DmvCounts dmv_posterior_counts(const DmvParams &params,
                               const EmissionScores &scores) {
  return posterior_pass(params, scores).counts;
}

DmvGradient dmv_expected_counts(const DmvParams &params,
                                const EmissionScores &scores) {
  Posterior post = posterior_pass(params, scores);
  const DmvCounts &counts = post.counts;
  const LogTables lp(params);
  const int k = params.num_tags();
  // Chain rule from log-probabilities to logits.
  DmvGradient g;
  g.log_marginal = post.log_marginal;
  g.root_logits = counts.root - softmax(params.root_logits) * counts.root.sum();
  const Eigen::MatrixXd p_attach = exact_exp(lp.attach).matrix();
  const Eigen::VectorXd totals = counts.attach.rowwise().sum();
  g.attach_logits =
      counts.attach - (p_attach.array().colwise() * totals.array()).matrix();
  g.stop_logits.resize(k, 4);
  for (int t = 0; t < k; ++t) {
    for (int j = 0; j < 4; ++j) {
      const double p = sigmoid(params.stop_logits(t, j));
      g.stop_logits(t, j) = counts.stop(t, j) * (1.0 - p) - counts.cont(t, j) * p;
    }
  }
  g.scores = std::move(post.scores);
  return g;
}

namespace {

// Max-product chart with back-pointers. Items are keyed as in DmvChart.
class ViterbiChart {
 public:
  ViterbiChart(const DmvParams &params, const EmissionScores &scores)
      : lp_(params), scores_(scores), n_(static_cast<int>(scores.rows())),
        k_(lp_.k) {
    const std::size_t spans = static_cast<std::size_t>(n_) * n_ * k_;
    ro_.assign(spans, kNegInf);
    rc_.assign(spans, kNegInf);
    lo_.assign(spans, kNegInf);
    lc_.assign(spans, kNegInf);
    ri_.assign(spans * k_, kNegInf);
    li_.assign(spans * k_, kNegInf);
    ro_back_.assign(spans, {-1, -1});
    lo_back_.assign(spans, {-1, -1});
    ri_back_.assign(spans * k_, -1);
    li_back_.assign(spans * k_, -1);
  }

  DependencyParse decode() {
    fill();
    double best = kNegInf;
    int best_h = -1, best_t = -1;
    for (int h = 0; h < n_; ++h) {
      for (int t = 0; t < k_; ++t) {
        const double v = lp_.root(t) + scores_(h, t) + lc_[span(0, h, t)] +
                         rc_[span(h, n_ - 1, t)];
        if (v > best) {
          best = v;
          best_h = h;
          best_t = t;
        }
      }
    }
    if (best_h < 0) throw NumericalError("no DMV derivation has finite score");
    DependencyParse parse;
    parse.heads.assign(n_, -1);
    parse.tags.assign(n_, -1);
    parse.log_score = best;
    parse.heads[best_h] = 0;
    parse.tags[best_h] = best_t;
    left_closed(0, best_h, best_t, parse);
    right_closed(best_h, n_ - 1, best_t, parse);
    return parse;
  }

 private:
  std::size_t span(int a, int b, int t) const {
    return (static_cast<std::size_t>(a) * n_ + b) * k_ + t;
  }
  std::size_t pair(int h, int m, int t, int c) const {
    return ((static_cast<std::size_t>(h) * n_ + m) * k_ + t) * k_ + c;
  }

  void fill() {
    for (int h = 0; h < n_; ++h) {
      for (int t = 0; t < k_; ++t) {
        ro_[span(h, h, t)] = 0.0;
        lo_[span(h, h, t)] = 0.0;
        rc_[span(h, h, t)] = lp_.st(t, kRight, kAdjacent);
        lc_[span(h, h, t)] = lp_.st(t, kLeft, kAdjacent);
      }
    }
    for (int w = 1; w < n_; ++w) {
      for (int a = 0; a + w < n_; ++a) {
        const int b = a + w;
        for (int t = 0; t < k_; ++t) {
          for (int c = 0; c < k_; ++c) {
            double rbest = kNegInf, lbest = kNegInf;
            int rarg = -1, larg = -1;
            for (int s = a; s < b; ++s) {
              const double r = ro_[span(a, s, t)] +
                               lp_.ct(t, kRight, valence_right(a, s)) +
                               lp_.att(t, kRight, c) + lc_[span(s + 1, b, c)];
              if (r > rbest) {
                rbest = r;
                rarg = s;
              }
              const double l = lo_[span(s + 1, b, t)] +
                               lp_.ct(t, kLeft, valence_left(b, s + 1)) +
                               lp_.att(t, kLeft, c) + rc_[span(a, s, c)];
              if (l > lbest) {
                lbest = l;
                larg = s;
              }
            }
            ri_[pair(a, b, t, c)] = rbest;
            ri_back_[pair(a, b, t, c)] = rarg;
            li_[pair(b, a, t, c)] = lbest;
            li_back_[pair(b, a, t, c)] = larg;
          }
        }
        for (int t = 0; t < k_; ++t) {
          double rbest = kNegInf, lbest = kNegInf;
          std::pair<int, int> rarg{-1, -1}, larg{-1, -1};
          for (int m = a + 1; m <= b; ++m) {
            for (int c = 0; c < k_; ++c) {
              const double v =
                  ri_[pair(a, m, t, c)] + scores_(m, c) + rc_[span(m, b, c)];
              if (v > rbest) {
                rbest = v;
                rarg = {m, c};
              }
            }
          }
          for (int m = a; m < b; ++m) {
            for (int c = 0; c < k_; ++c) {
              const double v =
                  li_[pair(b, m, t, c)] + scores_(m, c) + lc_[span(a, m, c)];
              if (v > lbest) {
                lbest = v;
                larg = {m, c};
              }
            }
          }
          ro_[span(a, b, t)] = rbest;
          ro_back_[span(a, b, t)] = rarg;
          lo_[span(a, b, t)] = lbest;
          lo_back_[span(a, b, t)] = larg;
          rc_[span(a, b, t)] = rbest + lp_.st(t, kRight, kNonAdjacent);
          lc_[span(a, b, t)] = lbest + lp_.st(t, kLeft, kNonAdjacent);
        }
      }
    }
  }

  // Head a, tag t, right dependents covering (a, b].
  void right_closed(int a, int b, int t, DependencyParse &parse) const {
    while (b > a) {
      const auto [m, c] = ro_back_[span(a, b, t)];
      parse.heads[m] = a + 1;
      parse.tags[m] = c;
      right_closed(m, b, c, parse);
      const int s = ri_back_[pair(a, m, t, c)];
      left_closed(s + 1, m, c, parse);
      b = s;
    }
  }

  // Head b, tag t, left dependents covering [a, b).
  void left_closed(int a, int b, int t, DependencyParse &parse) const {
    while (a < b) {
      const auto [m, c] = lo_back_[span(a, b, t)];
      parse.heads[m] = b + 1;
      parse.tags[m] = c;
      left_closed(a, m, c, parse);
      const int s = li_back_[pair(b, m, t, c)];
      right_closed(m, s, c, parse);
      a = s + 1;
    }
  }

  LogTables lp_;
  const EmissionScores &scores_;
  int n_, k_;
  std::vector<double> ro_, rc_, lo_, lc_, ri_, li_;
  std::vector<std::pair<int, int>> ro_back_, lo_back_;
  std::vector<int> ri_back_, li_back_;
};

}  // namespace

DependencyParse dmv_viterbi(const DmvParams &params,
                            const EmissionScores &scores) {
  check_inputs(params, scores);
  ViterbiChart chart(params, scores);
  return chart.decode();
}

DmvCounts count_events(const DependencyParse &parse, int num_tags) {
  const int n = static_cast<int>(parse.heads.size());
  if (static_cast<int>(parse.tags.size()) != n) {
    throw ShapeError("parse heads and tags differ in length");
  }
  DmvCounts counts(num_tags);
  for (int h = 0; h < n; ++h) {
    const int t = parse.tags[h];
    if (t < 0 || t >= num_tags) throw ShapeError("tag index out of range");
    if (parse.heads[h] == 0) counts.root(t) += 1.0;
    // Left children, nearest first.
    int v = kAdjacent;
    for (int m = h - 1; m >= 0; --m) {
      if (parse.heads[m] != h + 1) continue;
      counts.cont(t, 2 * kLeft + v) += 1.0;
      counts.attach(2 * t + kLeft, parse.tags[m]) += 1.0;
      v = kNonAdjacent;
    }
    counts.stop(t, 2 * kLeft + v) += 1.0;
    v = kAdjacent;
    for (int m = h + 1; m < n; ++m) {
      if (parse.heads[m] != h + 1) continue;
      counts.cont(t, 2 * kRight + v) += 1.0;
      counts.attach(2 * t + kRight, parse.tags[m]) += 1.0;
      v = kNonAdjacent;
    }
    counts.stop(t, 2 * kRight + v) += 1.0;
  }
  return counts;
}

DmvParams init_dmv(int num_tags, std::mt19937_64 &rng) {
  if (num_tags < 1) throw Error("number of tags must be at least 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DmvParams p;
  p.root_logits.resize(num_tags);
  p.attach_logits.resize(2 * num_tags, num_tags);
  p.stop_logits.resize(num_tags, 4);
  for (int i = 0; i < num_tags; ++i) p.root_logits(i) = u(rng);
  for (Eigen::Index r = 0; r < p.attach_logits.rows(); ++r)
    for (int c = 0; c < num_tags; ++c) p.attach_logits(r, c) = u(rng);
  for (int r = 0; r < num_tags; ++r)
    for (int c = 0; c < 4; ++c) p.stop_logits(r, c) = u(rng);
  return p;
}

DmvParams init_dmv(int num_tags, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return init_dmv(num_tags, rng);
}

DmvParams uniform_dmv(int num_tags) {
  if (num_tags < 1) throw Error("number of tags must be at least 1");
  DmvParams p;
  p.root_logits = Eigen::VectorXd::Zero(num_tags);
  p.attach_logits = Eigen::MatrixXd::Zero(2 * num_tags, num_tags);
  p.stop_logits = Eigen::MatrixXd::Zero(num_tags, 4);
  return p;
}

DmvParams dmv_from_counts(const DmvCounts &counts, double smoothing) {
  if (!(smoothing > 0.0)) throw Error("smoothing must be positive");
  const int k = static_cast<int>(counts.root.size());
  DmvParams p;
  // Log relative frequencies are valid logits: their softmax is the
  // normalized distribution itself.
  const Eigen::ArrayXd root = counts.root.array() + smoothing;
  p.root_logits = (root / root.sum()).log().matrix();
  p.attach_logits.resize(2 * k, k);
  for (int r = 0; r < 2 * k; ++r) {
    const Eigen::ArrayXd row = counts.attach.row(r).transpose().array() + smoothing;
    p.attach_logits.row(r) = (row / row.sum()).log().matrix().transpose();
  }
  p.stop_logits.resize(k, 4);
  for (int t = 0; t < k; ++t) {
    for (int j = 0; j < 4; ++j) {
      p.stop_logits(t, j) = std::log(counts.stop(t, j) + smoothing) -
                            std::log(counts.cont(t, j) + smoothing);
    }
  }
  return p;
}

EmissionScores observed_tag_scores(const std::vector<int> &tags, int num_tags) {
  EmissionScores s =
      EmissionScores::Constant(static_cast<Eigen::Index>(tags.size()), num_tags,
                               kNegInf);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] < 0 || tags[i] >= num_tags) {
      throw Error("tag " + std::to_string(tags[i]) + " outside [0, " +
                  std::to_string(num_tags) + ")");
    }
    s(static_cast<Eigen::Index>(i), tags[i]) = 0.0;
  }
  return s;
}

DmvParams dmv_uniform_posterior(const std::vector<std::vector<int>> &tag_sequences,
                                int num_tags, double smoothing) {
  const DmvParams uniform = uniform_dmv(num_tags);
  DmvCounts counts(num_tags);
  for (const auto &seq : tag_sequences) {
    const DmvCounts c = dmv_posterior_counts(uniform, observed_tag_scores(seq, num_tags));
    counts.root += c.root;
    counts.attach += c.attach;
    counts.stop += c.stop;
    counts.cont += c.cont;
  }
  return dmv_from_counts(counts, smoothing);
}

namespace {

double log_prior(const DmvParams &p, double smoothing) {
  double sum = log_softmax(p.root_logits).sum();
  sum += log_softmax_rows(p.attach_logits).sum();
  for (Eigen::Index t = 0; t < p.stop_logits.rows(); ++t) {
    for (int j = 0; j < 4; ++j) {
      sum += log_sigmoid(p.stop_logits(t, j)) + log_sigmoid(-p.stop_logits(t, j));
    }
  }
  return smoothing * sum;
}

}  // namespace

ViterbiEmResult train_dmv_viterbi_em(
    const std::vector<std::vector<int>> &tag_sequences, int num_tags,
    int iterations, double smoothing, const std::optional<DmvParams> &initial) {
  if (!(smoothing > 0.0)) throw Error("smoothing must be positive");
  if (iterations < 0) throw Error("iterations must be non-negative");
  if (tag_sequences.empty()) throw Error("no tag sequences");
  int max_tag = -1;
  for (const auto &seq : tag_sequences) {
    if (seq.empty()) throw ShapeError("empty tag sequence");
    for (int t : seq) {
      if (t < 0) throw Error("negative tag index");
      max_tag = std::max(max_tag, t);
    }
  }
  if (max_tag >= num_tags) {
    throw Error("K = " + std::to_string(num_tags) +
                " is too small for observed tag " + std::to_string(max_tag));
  }

  ViterbiEmResult result{initial ? *initial : uniform_dmv(num_tags), {}, {}};
  result.params.validate();
  if (result.params.num_tags() != num_tags) {
    throw ShapeError("initial DMV has the wrong number of tags");
  }
  for (int it = 0; it < iterations; ++it) {
    DmvCounts counts(num_tags);
    double total = 0.0;
    for (const auto &seq : tag_sequences) {
      const DependencyParse parse =
          dmv_viterbi(result.params, observed_tag_scores(seq, num_tags));
      total += parse.log_score;
      const DmvCounts c = count_events(parse, num_tags);
      counts.root += c.root;
      counts.attach += c.attach;
      counts.stop += c.stop;
      counts.cont += c.cont;
    }
    result.viterbi_scores.push_back(total);
    result.objectives.push_back(total + log_prior(result.params, smoothing));
    result.params = dmv_from_counts(counts, smoothing);
  }
  return result;
}

}  // namespace synflow
