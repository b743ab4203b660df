// Acceptance suite. Prints one PASS/FAIL line per criterion; pass criterion
// numbers as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "synflow/data_io.hpp"
#include "synflow/dmv.hpp"
#include "synflow/eval.hpp"
#include "synflow/flow.hpp"
#include "synflow/joint_model.hpp"
#include "synflow/markov.hpp"
#include "synflow/optim.hpp"

using namespace synflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char *f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string sci(double v) { return fmt("%.3g", v); }
std::string pct(double v) { return fmt("%.4f", v); }

// 1. Flow round trip and unit Jacobian determinant.
Outcome flow_correctness() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> depth_of(0, 16), dim_of(2, 100), small_dim_of(2, 8);
  double worst_trip = 0, worst_logdet = 0;
  int logdet_cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int depth = depth_of(rng);
    int d = trial % 4 == 0 ? small_dim_of(rng) : dim_of(rng);
    if (depth > 0 && d % 2) ++d;
    const Flow flow = init_flow(d, depth, rng());
    const Eigen::VectorXd x = oracle::random_matrix(d, 1, rng, -3, 3);
    const Eigen::VectorXd e = inverse_apply(flow, x).latent;
    worst_trip = std::max(worst_trip, (forward_apply(flow, e) - x).cwiseAbs().maxCoeff());
    if (d <= 8) {
      const double h = 1e-6;
      Eigen::MatrixXd jac(d, d);
      for (int j = 0; j < d; ++j) {
        Eigen::VectorXd up = x, down = x;
        up(j) += h;
        down(j) -= h;
        jac.col(j) = (inverse_apply(flow, up).latent - inverse_apply(flow, down).latent) / (2 * h);
      }
      worst_logdet = std::max(worst_logdet, std::abs(std::log(std::abs(jac.determinant()))));
      ++logdet_cases;
    }
  }
  return {worst_trip <= 1e-9 && worst_logdet <= 1e-4,
          "round_trip=" + sci(worst_trip) + " log_det=" + sci(worst_logdet) + " over " +
              std::to_string(logdet_cases) + " d<=8 cases"};
}

// 2. Inference against exhaustive enumeration.
Outcome inference_oracles() {
  std::mt19937_64 rng(1002);
  std::uniform_int_distribution<int> len(1, 5), markov_k(1, 4), dmv_k(1, 3);
  double worst_markov = 0, worst_dmv = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng), k = markov_k(rng);
    MarkovParams p{oracle::random_matrix(k, 1, rng, -2, 2), oracle::random_matrix(k, k, rng, -2, 2)};
    const Eigen::MatrixXd scores = oracle::random_matrix(n, k, rng, -5, 2);
    const auto want = oracle::enumerate_markov(p, scores);
    const auto fb = forward_backward(p, scores);
    worst_markov = std::max({worst_markov, std::abs(log_marginal(p, scores) - want.log_marginal),
                             (fb.gamma - want.gamma).cwiseAbs().maxCoeff()});
  }
  for (int trial = 0; trial < 100; ++trial) {
    const int n = len(rng), k = dmv_k(rng);
    DmvParams p{oracle::random_matrix(k, 1, rng, -2, 2), oracle::random_matrix(2 * k, k, rng, -2, 2),
                oracle::random_matrix(k, 4, rng, -2, 2)};
    const Eigen::MatrixXd scores = oracle::random_matrix(n, k, rng, -5, 2);
    const auto want = oracle::enumerate_dmv(p, scores);
    const auto got = dmv_expected_counts(p, scores);
    worst_dmv = std::max({worst_dmv, std::abs(dmv_log_marginal(p, scores) - want.log_marginal),
                          (got.scores - want.tag_posterior).cwiseAbs().maxCoeff()});
  }
  return {worst_markov <= 1e-10 && worst_dmv <= 1e-10,
          "markov=" + sci(worst_markov) + " dmv=" + sci(worst_dmv)};
}

// 3. Analytic gradients against central finite differences.
Outcome gradient_exactness() {
  std::mt19937_64 rng(1003);
  double worst = 0;
  int instances = 0;
  for (int trial = 0; trial < 24; ++trial) {
    const Structure st = trial % 2 ? Structure::Dmv : Structure::Markov;
    const bool tv = (trial / 2) % 2;
    const int dim = trial % 3 == 0 ? 2 : 4, depth = 1 + trial % 3, k = 2 + trial % 2;
    JointModel m = fixture::random_model(st, dim, k, depth, rng, tv);
    const Sentence s = fixture::random_sentence(2 + trial % 3, dim, rng);
    const ModelGradient g = grad_sentence(m, s);
    JointModel probe = m;
    auto f = [&](const Eigen::VectorXd &v) {
      unpack_parameters(v, probe);
      return sentence_log_likelihood(probe, s);
    };
    worst = std::max(worst, oracle::max_rel_error(pack_gradient(g, m),
                                                  oracle::fd_gradient(f, pack_parameters(m))));
    ++instances;
  }
  return {worst <= 1e-4, "max_rel_error=" + sci(worst) + " over " + std::to_string(instances) +
                             " instances (flow, means, variances, markov, dmv)"};
}

// Forward algorithm for a Gaussian HMM, one scalar at a time.
double gaussian_hmm_ll(const JointModel &m, const Eigen::MatrixXd &x) {
  const auto &p = std::get<MarkovParams>(m.syntax);
  const int k = p.num_states();
  const auto init = oracle::probs(p.init_logits);
  std::vector<std::vector<double>> trans;
  for (int j = 0; j < k; ++j) trans.push_back(oracle::probs(p.trans_logits.row(j).transpose()));
  auto emit = [&](int i, int s) {
    return fixture::gaussian(x.row(i).transpose(), m.emissions.means.row(s).transpose(),
                             m.emissions.variances.row(s).transpose());
  };
  std::vector<double> alpha(k);
  for (int s = 0; s < k; ++s) alpha[s] = std::log(init[s]) + emit(0, s);
  for (Eigen::Index i = 1; i < x.rows(); ++i) {
    std::vector<double> next(k);
    for (int s = 0; s < k; ++s) {
      double mx = -INFINITY;
      for (int r = 0; r < k; ++r) mx = std::max(mx, alpha[r] + std::log(trans[r][s]));
      double z = 0;
      for (int r = 0; r < k; ++r) z += std::exp(alpha[r] + std::log(trans[r][s]) - mx);
      next[s] = mx + std::log(z) + emit(static_cast<int>(i), s);
    }
    alpha = next;
  }
  const double mx = *std::max_element(alpha.begin(), alpha.end());
  double z = 0;
  for (double a : alpha) z += std::exp(a - mx);
  return mx + std::log(z);
}

// 4. Depth 0 is a Gaussian HMM; likelihood transports through the flow.
Outcome degenerate_equivalence() {
  std::mt19937_64 rng(1004);
  double worst_hmm = 0, worst_transport = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 5;
    const JointModel m = fixture::random_model(Structure::Markov, dim, 2 + trial % 4, 0, rng);
    const Sentence s = fixture::random_sentence(1 + trial % 12, dim, rng);
    worst_hmm = std::max(worst_hmm,
                         std::abs(sentence_log_likelihood(m, s) - gaussian_hmm_ll(m, s.embeddings)));
  }
  for (int trial = 0; trial < 50; ++trial) {
    const Structure st = trial % 2 ? Structure::Dmv : Structure::Markov;
    const int dim = 2 * (1 + trial % 4);
    const JointModel a = fixture::random_model(st, dim, 3, 1 + trial % 6, rng);
    JointModel b = a;
    b.flow = init_flow(dim, 0, 0);
    const Sentence s = fixture::random_sentence(1 + trial % 7, dim, rng);
    Sentence moved = s;
    moved.embeddings = inverse_apply_rows(a.flow, s.embeddings);
    worst_transport = std::max(worst_transport, std::abs(sentence_log_likelihood(a, s) -
                                                         sentence_log_likelihood(b, moved)));
  }
  return {worst_hmm <= 1e-10 && worst_transport <= 1e-9,
          "gaussian_hmm=" + sci(worst_hmm) + " transport=" + sci(worst_transport)};
}

// Planted Markov corpus: depth-2 flow, three unit-variance Gaussians at least
// ten standard deviations apart, 2000 sentences of length 3 to 12.
Corpus planted_markov_corpus() {
  const int d = 32;
  std::mt19937_64 rng(11);
  JointModel m;
  m.flow = init_flow(d, 2, 101);
  m.emissions.means.resize(3, d);
  std::normal_distribution<double> normal(0, 1.4);
  double closest = 0;
  while (closest < 10) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < d; ++j) m.emissions.means(i, j) = normal(rng);
    closest = INFINITY;
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b)
        closest = std::min(closest, (m.emissions.means.row(a) - m.emissions.means.row(b)).norm());
  }
  m.emissions.variances = Eigen::MatrixXd::Ones(3, d);
  MarkovParams p = init_markov(3, rng);
  p.trans_logits *= 2;
  m.syntax = p;
  return sample_corpus(m, 2000, {3, 12}, 5);
}

std::vector<std::vector<int>> gold_tag_ids(const Corpus &c) {
  std::vector<std::vector<int>> gold;
  for (const auto &s : c.sentences) {
    std::vector<int> g;
    for (const auto &t : *s.gold_tags) g.push_back(std::stoi(t));
    gold.push_back(g);
  }
  return gold;
}

VMeasure tagging_scores(const JointModel &m, const Corpus &c, double &m1) {
  const auto table = ContingencyTable::from_sequences(decode_tags(m, c), gold_tag_ids(c),
                                                      m.num_states(), 3);
  m1 = many_to_one(table);
  return v_measure(table);
}

TrainConfig markov_protocol() {
  TrainConfig cfg;
  cfg.num_states = 3;
  cfg.depth = 4;
  cfg.epochs = 50;
  cfg.restarts = 5;
  cfg.batch_size = 32;
  cfg.adam.learning_rate = 1e-3;
  cfg.seed = 1;
  return cfg;
}

// 5. Recovery of planted tags.
Outcome markov_recovery() {
  const Corpus c = planted_markov_corpus();
  const auto run = pretrain_pipeline(c, markov_protocol());
  double m1 = 0;
  const VMeasure vm = tagging_scores(run.best().model, c, m1);
  return {m1 >= 0.95 && vm.vm >= 0.85, "m1=" + pct(m1) + " vm=" + pct(vm.vm)};
}

// 6. Flow advantage on observations warped by a fixed volume-preserving map.
Outcome flow_advantage() {
  Corpus c = planted_markov_corpus();
  const Flow warp = init_flow(c.dim(), 2, 202, 1.5);
  for (auto &s : c.sentences) s.embeddings = forward_apply_rows(warp, s.embeddings);
  const auto run = pretrain_pipeline(c, markov_protocol());
  double m1_flat = 0, m1_flow = 0;
  tagging_scores(run.stage1.best.model, c, m1_flat);
  tagging_scores(run.best().model, c, m1_flow);
  return {m1_flow - m1_flat >= 0.05,
          "depth0_m1=" + pct(m1_flat) + " depth4_m1=" + pct(m1_flow) +
              " gain=" + pct(m1_flow - m1_flat)};
}

double dda(const JointModel &m, const Corpus &c) {
  std::vector<std::vector<int>> pred, gold;
  for (const auto &p : decode_parses(m, c)) pred.push_back(p.heads);
  for (const auto &s : c.sentences) gold.push_back(*s.gold_heads);
  return directed_accuracy(pred, gold);
}

// 7. Recovery of planted trees: a head-final two-tag grammar.
Outcome dmv_recovery() {
  const int d = 16;
  std::mt19937_64 rng(13);
  JointModel m;
  m.flow = init_flow(d, 2, 303);
  m.emissions.means.resize(2, d);
  std::normal_distribution<double> normal(0, 2);
  do {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < d; ++j) m.emissions.means(i, j) = normal(rng);
  } while ((m.emissions.means.row(0) - m.emissions.means.row(1)).norm() < 10);
  m.emissions.variances = Eigen::MatrixXd::Ones(2, d);
  DmvParams p = uniform_dmv(2);
  p.root_logits << 4, -4;
  p.attach(0, kLeft, 1) = 4;
  p.attach(0, kRight, 1) = 4;
  p.stop(0, kLeft, kAdjacent) = -3;
  p.stop(0, kLeft, kNonAdjacent) = -0.5;
  p.stop(0, kRight, kAdjacent) = 2;
  p.stop(0, kRight, kNonAdjacent) = 3;
  p.stop(1, kLeft, kAdjacent) = 2;
  p.stop(1, kLeft, kNonAdjacent) = 3;
  p.stop(1, kRight, kAdjacent) = 3;
  p.stop(1, kRight, kNonAdjacent) = 3;
  m.syntax = p;
  const Corpus c = sample_corpus(m, 1000, {1, 8}, 7);

  TrainConfig cfg;
  cfg.structure = Structure::Dmv;
  cfg.num_states = 2;
  cfg.depth = 4;
  cfg.epochs = 50;
  cfg.restarts = 5;
  cfg.batch_size = 32;
  cfg.adam.learning_rate = 0.05;
  cfg.seed = 1;
  const auto run = pretrain_pipeline(c, cfg);
  const double flat = dda(run.stage1.best.model, c), full = dda(run.best().model, c);
  return {full >= 0.75 && full >= flat - 0.01,
          "depth0_dda=" + pct(flat) + " depth4_dda=" + pct(full) +
              " planted_dda=" + pct(dda(m, c))};
}

// Homogeneity, completeness and V from marginal and joint entropies.
VMeasure direct_vm(const Eigen::MatrixXi &c) {
  const double n = c.sum();
  auto entropy = [](const std::vector<double> &p) {
    double h = 0;
    for (double x : p)
      if (x > 0) h -= x * std::log(x);
    return h;
  };
  std::vector<double> joint, pred, gold;
  for (int i = 0; i < c.rows(); ++i) pred.push_back(c.row(i).sum() / n);
  for (int j = 0; j < c.cols(); ++j) gold.push_back(c.col(j).sum() / n);
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < c.cols(); ++j) joint.push_back(c(i, j) / n);
  const double hg = entropy(gold), hp = entropy(pred), hj = entropy(joint);
  VMeasure v;
  v.homogeneity = hg == 0 ? 1 : 1 - (hj - hp) / hg;
  v.completeness = hp == 0 ? 1 : 1 - (hj - hg) / hp;
  v.vm = v.homogeneity + v.completeness == 0
             ? 0
             : 2 * v.homogeneity * v.completeness / (v.homogeneity + v.completeness);
  return v;
}

ContingencyTable table(std::initializer_list<std::initializer_list<int>> rows) {
  Eigen::MatrixXi m(rows.size(), rows.begin()->size());
  int r = 0;
  for (const auto &row : rows) {
    int c = 0;
    for (int v : row) m(r, c++) = v;
    ++r;
  }
  return ContingencyTable(m);
}

// 8. Metric examples and invariants.
Outcome metric_suite() {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string &what) {
    if (!ok) failed.push_back(what);
  };
  check(many_to_one(table({{4, 0}, {0, 6}})) == 1.0, "m1 diagonal");
  check(many_to_one(table({{5, 5}, {5, 5}})) == 0.5, "m1 ties");
  check(many_to_one(table({{8, 2}, {3, 7}})) == 0.75, "m1 8/2/3/7");
  check(std::abs(v_measure(table({{3, 0, 0}, {0, 5, 0}, {0, 0, 2}})).vm - 1.0) < 1e-12, "vm perfect");
  const VMeasure one = v_measure(table({{3, 4, 5}}));
  check(one.homogeneity == 0.0 && one.vm == 0.0 && one.completeness == 1.0, "vm single cluster");
  check(v_measure(table({{3}, {4}})).homogeneity == 1.0, "vm single gold tag");
  Eigen::MatrixXi t(2, 2);
  t << 10, 0, 5, 5;
  check(std::abs(v_measure(ContingencyTable(t)).vm - direct_vm(t).vm) <= 1e-12, "vm direct entropy");
  check(one_to_one_map(table({{5, 0}, {0, 5}})).pred_to_gold == std::vector<int>{0, 1}, "1-1 identity");
  check(one_to_one_map(table({{1, 9}, {9, 1}})).pred_to_gold == std::vector<int>{1, 0}, "1-1 crossed");
  check(directed_accuracy({{2, 0}, {0}}, {{2, 0}, {0}}) == 1.0, "dda identical");
  check(directed_accuracy({{0, 1}}, {{2, 0}}) == 0.0, "dda reversed");

  std::mt19937_64 rng(1008);
  std::uniform_int_distribution<int> count(0, 20);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXi c(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) c(i, j) = count(rng);
    c(0, 0) += 1;
    const ContingencyTable ct(c);
    std::vector<int> perm{0, 1, 2};
    long best = 0;
    do {
      best = std::max(best, static_cast<long>(c(0, perm[0]) + c(1, perm[1]) + c(2, perm[2])));
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto map = one_to_one_map(ct);
    check(map.matched == best, "1-1 brute force");
    check(many_to_one(ct) >= map.accuracy, "m1 dominates 1-1");
    const VMeasure a = v_measure(ct), b = v_measure(ContingencyTable(c.transpose()));
    check(std::abs(a.homogeneity - b.completeness) < 1e-12 &&
              std::abs(a.completeness - b.homogeneity) < 1e-12,
          "vm transpose");
    Eigen::MatrixXi relabeled = c;
    relabeled.row(0).swap(relabeled.row(2));
    relabeled.col(0).swap(relabeled.col(1));
    check(std::abs(v_measure(ContingencyTable(relabeled)).vm - a.vm) < 1e-12, "vm relabel");
    check(std::abs(a.vm - direct_vm(c).vm) < 1e-12, "vm oracle");
    check(a.vm >= 0 && a.vm <= 1 + 1e-12 && map.accuracy <= 1 && many_to_one(ct) <= 1, "range");
  }

  // Sentence order.
  std::vector<std::vector<int>> pred, gold, heads_pred, heads_gold;
  std::uniform_int_distribution<int> tag(0, 3), len(1, 6);
  for (int s = 0; s < 20; ++s) {
    const int n = len(rng);
    std::vector<int> p(n), g(n), hp(n), hg(n);
    for (int i = 0; i < n; ++i) {
      p[i] = tag(rng);
      g[i] = tag(rng);
      hp[i] = std::uniform_int_distribution<int>(0, n)(rng);
      hg[i] = std::uniform_int_distribution<int>(0, n)(rng);
    }
    pred.push_back(p), gold.push_back(g), heads_pred.push_back(hp), heads_gold.push_back(hg);
  }
  const auto before = ContingencyTable::from_sequences(pred, gold, 4, 4);
  const double dda_before = directed_accuracy(heads_pred, heads_gold);
  std::vector<int> order(20);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto permute = [&](const std::vector<std::vector<int>> &v) {
    std::vector<std::vector<int>> out;
    for (int i : order) out.push_back(v[i]);
    return out;
  };
  const auto after = ContingencyTable::from_sequences(permute(pred), permute(gold), 4, 4);
  check(many_to_one(after) == many_to_one(before) &&
            v_measure(after).vm == v_measure(before).vm &&
            one_to_one_map(after).matched == one_to_one_map(before).matched &&
            directed_accuracy(permute(heads_pred), permute(heads_gold)) == dda_before,
        "sentence order");

  std::string detail = failed.empty() ? "all examples and invariants hold" : "failed:";
  for (const auto &f : failed) detail += " [" + f + "]";
  return {failed.empty(), detail};
}

std::string slurp(const fs::path &path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 9. The train command on a 500-sentence toy corpus.
Outcome protocol_fidelity() {
  const fs::path dir = fs::temp_directory_path() /
                       ("synflow_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  struct Cleanup {
    fs::path dir;
    ~Cleanup() { fs::remove_all(dir); }
  } cleanup{dir};
  std::ofstream(dir / "spec.json")
      << R"({"structure": "markov", "num_states": 5, "dim": 8, "depth": 2, "mean_scale": 3, "seed": 9})";
  std::ostringstream out, err;
  int code = cli::run({"generate", "--spec", (dir / "spec.json").string(), "--n", "500",
                       "--min-len", "3", "--max-len", "10", "--seed", "9", "--out",
                       (dir / "data").string()},
                      out, err);
  if (code != 0) return {false, "generate exited " + std::to_string(code) + ": " + err.str()};
  code = cli::run({"train", "--embeddings", (dir / "data/embeddings.txt").string(), "--corpus",
                   (dir / "data/tokens.txt").string(), "--structure", "markov", "--k", "45",
                   "--restarts", "10", "--epochs", "50", "--depth", "8", "--pretrain", "auto",
                   "--out", (dir / "run").string(), "--quiet"},
                  out, err);
  if (code != 0) return {false, "train exited " + std::to_string(code) + ": " + err.str()};

  std::istringstream table(slurp(dir / "run/restarts.tsv"));
  std::string line;
  std::getline(table, line);
  int rows = 0, ok_rows = 0, selected = 0;
  double max_ll = -INFINITY, selected_ll = NAN;
  while (std::getline(table, line)) {
    std::istringstream row(line);
    std::string stage, restart, seed, status, init_ll, final_ll, epochs, sel;
    std::getline(row, stage, '\t');
    std::getline(row, restart, '\t');
    std::getline(row, seed, '\t');
    std::getline(row, status, '\t');
    std::getline(row, init_ll, '\t');
    std::getline(row, final_ll, '\t');
    std::getline(row, epochs, '\t');
    std::getline(row, sel, '\t');
    if (stage != "stage2") continue;
    ++rows;
    if (status != "ok") continue;
    ++ok_rows;
    const double ll = std::stod(final_ll);
    max_ll = std::max(max_ll, ll);
    if (sel == "1") {
      ++selected;
      selected_ll = ll;
    }
  }
  const double saved_ll = nlohmann::json::parse(slurp(dir / "run/model.json")).at("train_ll");
  const bool pass = rows == 10 && selected == 1 && selected_ll == max_ll && saved_ll == max_ll &&
                    fs::exists(dir / "run/stage1.json");
  return {pass, "stage2_rows=" + std::to_string(rows) + " ok=" + std::to_string(ok_rows) +
                    " selected_ll=" + fmt("%.17g", selected_ll) + " max_ll=" + fmt("%.17g", max_ll) +
                    " checkpoint_ll=" + fmt("%.17g", saved_ll)};
}

// 10. Viterbi EM never lowers the summed Viterbi score.
Outcome viterbi_em_monotone() {
  std::mt19937_64 rng(1010);
  double worst_drop = 0;
  int steps = 0;
  for (int corpus = 0; corpus < 5; ++corpus) {
    const int k = 2 + corpus;
    std::uniform_int_distribution<int> len(1, 8), tag(0, k - 1);
    std::vector<std::vector<int>> data(40);
    for (auto &s : data) {
      s.resize(len(rng));
      for (int &t : s) t = tag(rng);
    }
    for (const auto &start : {uniform_dmv(k), dmv_uniform_posterior(data, k, 1.0)}) {
      const auto r = train_dmv_viterbi_em(data, k, 15, 1.0, start);
      for (std::size_t i = 1; i < r.viterbi_scores.size(); ++i, ++steps)
        worst_drop = std::max(worst_drop, r.viterbi_scores[i - 1] - r.viterbi_scores[i]);
    }
  }
  return {worst_drop <= 0, "largest_drop=" + sci(worst_drop) + " over " + std::to_string(steps) +
                               " iterations"};
}

}  // namespace

int main(int argc, char **argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"flow correctness", flow_correctness},
      {"inference oracles", inference_oracles},
      {"gradient exactness", gradient_exactness},
      {"degenerate equivalence", degenerate_equivalence},
      {"markov recovery", markov_recovery},
      {"flow advantage", flow_advantage},
      {"dmv recovery", dmv_recovery},
      {"metric suite", metric_suite},
      {"protocol fidelity", protocol_fidelity},
      {"viterbi em monotonicity", viterbi_em_monotone},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": "
              << o.detail << " (" << fmt("%.1f", secs) << "s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
