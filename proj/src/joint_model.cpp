#include "synflow/joint_model.hpp"

#include <cmath>
#include <numbers>
#include <optional>

#include "synflow/error.hpp"
#include "synflow/logmath.hpp"

namespace synflow {

std::string to_string(Structure s) {
  return s == Structure::Markov ? "markov" : "dmv";
}

Structure structure_from_string(const std::string &s) {
  if (s == "markov") return Structure::Markov;
  if (s == "dmv") return Structure::Dmv;
  throw Error("unknown structure '" + s + "' (expected markov or dmv)");
}

void GaussianEmissions::clamp_variances() {
  variances = variances.cwiseMax(kVarianceFloor);
}

void GaussianEmissions::validate() const {
  if (means.rows() < 1 || means.cols() < 1) {
    throw ShapeError("Gaussian emissions need K >= 1 and d >= 1");
  }
  if (variances.rows() != means.rows() || variances.cols() != means.cols()) {
    throw ShapeError("means and variances differ in shape");
  }
  if (!means.allFinite() || !variances.allFinite()) {
    throw NumericalError("non-finite Gaussian parameter");
  }
  if (variances.minCoeff() < kVarianceFloor) {
    throw NumericalError("variance below floor");
  }
}

Structure JointModel::structure() const {
  return std::holds_alternative<MarkovParams>(syntax) ? Structure::Markov
                                                      : Structure::Dmv;
}

int JointModel::num_states() const {
  return std::visit([](const auto &p) {
    if constexpr (std::is_same_v<std::decay_t<decltype(p)>, MarkovParams>) {
      return p.num_states();
    } else {
      return p.num_tags();
    }
  }, syntax);
}

void JointModel::validate() const {
  emissions.validate();
  flow.validate();
  std::visit([](const auto &p) { p.validate(); }, syntax);
  if (num_states() != emissions.num_states()) {
    throw ShapeError("syntax model has " + std::to_string(num_states()) +
                     " states, emissions have " +
                     std::to_string(emissions.num_states()));
  }
  if (flow.depth() > 0 && flow.dim != emissions.dim()) {
    throw ShapeError("flow dimension does not match emission dimension");
  }
}

EmissionResult emission_log_scores(const JointModel &model,
                                   const Eigen::MatrixXd &embeddings) {
  const auto &em = model.emissions;
  if (embeddings.cols() != em.dim()) {
    throw ShapeError("embedding dimension " + std::to_string(embeddings.cols()) +
                     " does not match model dimension " + std::to_string(em.dim()));
  }
  Eigen::VectorXd log_det;
  EmissionResult out;
  out.latent = inverse_apply_rows(model.flow, embeddings, &log_det);
  const Eigen::Index n = embeddings.rows(), k = em.num_states(), d = em.dim();
  const Eigen::ArrayXXd inv_var = em.variances.array().inverse();
  const Eigen::VectorXd norm =
      -0.5 * (2.0 * std::numbers::pi * em.variances.array()).log().rowwise().sum();
  out.scores.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index s = 0; s < k; ++s) {
      double quad = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = out.latent(i, j) - em.means(s, j);
        quad += diff * diff * inv_var(s, j);
      }
      out.scores(i, s) = norm(s) - 0.5 * quad + log_det(i);
    }
  }
  return out;
}

double sentence_log_likelihood(const JointModel &model, const Sentence &sentence) {
  const EmissionResult em = emission_log_scores(model, sentence.embeddings);
  if (const auto *markov = std::get_if<MarkovParams>(&model.syntax)) {
    return log_marginal(*markov, em.scores);
  }
  return dmv_log_marginal(std::get<DmvParams>(model.syntax), em.scores);
}

double corpus_log_likelihood(const JointModel &model, const Corpus &corpus) {
  double total = 0.0;
  for (const auto &s : corpus.sentences) total += sentence_log_likelihood(model, s);
  return total;
}

ModelGradient ModelGradient::zeros_like(const JointModel &model) {
  ModelGradient g;
  g.flow = FlowGradient::zeros_like(model.flow);
  g.means = Eigen::MatrixXd::Zero(model.emissions.means.rows(),
                                  model.emissions.means.cols());
  g.variances = Eigen::MatrixXd::Zero(g.means.rows(), g.means.cols());
  const int k = model.num_states();
  if (model.structure() == Structure::Markov) {
    MarkovGradient m;
    m.init_logits = Eigen::VectorXd::Zero(k);
    m.trans_logits = Eigen::MatrixXd::Zero(k, k);
    g.syntax = std::move(m);
  } else {
    DmvGradient d;
    d.root_logits = Eigen::VectorXd::Zero(k);
    d.attach_logits = Eigen::MatrixXd::Zero(2 * k, k);
    d.stop_logits = Eigen::MatrixXd::Zero(k, 4);
    g.syntax = std::move(d);
  }
  return g;
}

ModelGradient &ModelGradient::operator+=(const ModelGradient &other) {
  flow += other.flow;
  means += other.means;
  variances += other.variances;
  log_likelihood += other.log_likelihood;
  if (auto *m = std::get_if<MarkovGradient>(&syntax)) {
    const auto &o = std::get<MarkovGradient>(other.syntax);
    m->init_logits += o.init_logits;
    m->trans_logits += o.trans_logits;
  } else {
    auto &d = std::get<DmvGradient>(syntax);
    const auto &o = std::get<DmvGradient>(other.syntax);
    d.root_logits += o.root_logits;
    d.attach_logits += o.attach_logits;
    d.stop_logits += o.stop_logits;
  }
  return *this;
}

double accumulate_gradient(const JointModel &model, const Sentence &sentence,
                           ModelGradient &accum) {
  const EmissionResult em = emission_log_scores(model, sentence.embeddings);
  Eigen::MatrixXd posterior;
  double ll = 0.0;
  if (const auto *markov = std::get_if<MarkovParams>(&model.syntax)) {
    MarkovGradient g = grad_log_marginal(*markov, em.scores);
    auto &acc = std::get<MarkovGradient>(accum.syntax);
    acc.init_logits += g.init_logits;
    acc.trans_logits += g.trans_logits;
    posterior = std::move(g.scores);
    ll = g.log_marginal;
  } else {
    DmvGradient g = dmv_expected_counts(std::get<DmvParams>(model.syntax), em.scores);
    auto &acc = std::get<DmvGradient>(accum.syntax);
    acc.root_logits += g.root_logits;
    acc.attach_logits += g.attach_logits;
    acc.stop_logits += g.stop_logits;
    posterior = std::move(g.scores);
    ll = g.log_marginal;
  }

  const auto &gauss = model.emissions;
  const Eigen::Index n = em.latent.rows(), k = gauss.num_states();
  const Eigen::ArrayXXd inv_var = gauss.variances.array().inverse();
  Eigen::MatrixXd d_latent = Eigen::MatrixXd::Zero(n, gauss.dim());
  for (Eigen::Index s = 0; s < k; ++s) {
    const Eigen::RowVectorXd mu = gauss.means.row(s);
    const Eigen::ArrayXXd diff = em.latent.rowwise() - mu;  // n x d
    const Eigen::ArrayXXd scaled = diff.rowwise() * inv_var.row(s);
    const Eigen::ArrayXd w = posterior.col(s).array();
    accum.means.row(s) += (scaled.colwise() * w).colwise().sum().matrix();
    d_latent -= (scaled.colwise() * w).matrix();
    if (gauss.trainable_variance) {
      const Eigen::ArrayXXd term =
          (scaled.square()).rowwise() - inv_var.row(s);
      accum.variances.row(s) += 0.5 * (term.colwise() * w).colwise().sum().matrix();
    }
  }
  if (model.flow.depth() > 0) {
    inverse_apply_with_grad(model.flow, sentence.embeddings, d_latent, accum.flow);
  }
  accum.log_likelihood += ll;
  return ll;
}

ModelGradient grad_sentence(const JointModel &model, const Sentence &sentence) {
  ModelGradient g = ModelGradient::zeros_like(model);
  accumulate_gradient(model, sentence, g);
  return g;
}

std::vector<int> map_states(const JointModel &model,
                            const Eigen::MatrixXd &embeddings) {
  const EmissionResult em = emission_log_scores(model, embeddings);
  std::vector<int> out(em.scores.rows());
  for (Eigen::Index i = 0; i < em.scores.rows(); ++i) {
    Eigen::Index arg = 0;
    em.scores.row(i).maxCoeff(&arg);
    out[i] = static_cast<int>(arg);
  }
  return out;
}

std::vector<std::vector<int>> decode_tags(const JointModel &model,
                                          const Corpus &corpus) {
  const auto *markov = std::get_if<MarkovParams>(&model.syntax);
  if (markov == nullptr) throw StructureMismatch("tag induction needs a Markov model");
  std::vector<std::vector<int>> out;
  out.reserve(corpus.size());
  for (const auto &s : corpus.sentences) {
    out.push_back(viterbi(*markov, emission_log_scores(model, s.embeddings).scores));
  }
  return out;
}

std::vector<DependencyParse> decode_parses(const JointModel &model,
                                           const Corpus &corpus) {
  const auto *dmv = std::get_if<DmvParams>(&model.syntax);
  if (dmv == nullptr) throw StructureMismatch("parsing needs a DMV model");
  std::vector<DependencyParse> out;
  out.reserve(corpus.size());
  for (const auto &s : corpus.sentences) {
    out.push_back(dmv_viterbi(*dmv, emission_log_scores(model, s.embeddings).scores));
  }
  return out;
}

GaussianEmissions init_gaussians(const Corpus &corpus, const Flow &flow,
                                 int num_states, std::mt19937_64 &rng,
                                 double noise) {
  if (corpus.empty()) throw Error("empty corpus");
  if (num_states < 1) throw Error("number of states must be at least 1");
  const int d = corpus.dim();
  Eigen::MatrixXd all(static_cast<Eigen::Index>(corpus.num_tokens()), d);
  Eigen::Index row = 0;
  for (const auto &s : corpus.sentences) {
    all.middleRows(row, s.length()) = s.embeddings;
    row += s.length();
  }
  const Eigen::MatrixXd latent = inverse_apply_rows(flow, all);
  const Eigen::RowVectorXd mean = latent.colwise().mean();
  const Eigen::RowVectorXd var =
      (latent.rowwise() - mean).array().square().colwise().mean();

  GaussianEmissions g;
  g.means.resize(num_states, d);
  std::normal_distribution<double> gauss(0.0, noise);
  for (int k = 0; k < num_states; ++k) {
    for (int j = 0; j < d; ++j) g.means(k, j) = mean(j) + gauss(rng);
  }
  g.variances = var.replicate(num_states, 1);
  g.clamp_variances();
  return g;
}

void LengthDistribution::validate() const {
  if (min_length < 1 || max_length < min_length) {
    throw Error("invalid length range [" + std::to_string(min_length) + ", " +
                std::to_string(max_length) + "]");
  }
}

namespace {

int draw_categorical(const Eigen::VectorXd &logits, std::mt19937_64 &rng) {
  const Eigen::VectorXd p = softmax(logits);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  for (Eigen::Index i = 0; i + 1 < p.size(); ++i) {
    if (r < p(i)) return static_cast<int>(i);
    r -= p(i);
  }
  return static_cast<int>(p.size() - 1);
}

// Head-outward DMV derivation. Children are stored nearest-first.
struct DerivationNode {
  int tag = 0;
  std::vector<DerivationNode> children[2];
};

// Returns false once the derivation grows past `budget` nodes.
bool derive(const DmvParams &p, int tag, int &budget, std::mt19937_64 &rng,
            DerivationNode &node) {
  node.tag = tag;
  if (--budget < 0) return false;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int dir : {kLeft, kRight}) {
    int valence = kAdjacent;
    while (u(rng) >= sigmoid(p.stop(tag, dir, valence))) {
      const int child = draw_categorical(
          p.attach_logits.row(2 * tag + dir).transpose(), rng);
      node.children[dir].emplace_back();
      if (!derive(p, child, budget, rng, node.children[dir].back())) return false;
      valence = kNonAdjacent;
    }
  }
  return true;
}

// In-order flattening; head_pos is the 1-based position of the parent.
void flatten(const DerivationNode &node, int head_pos, std::vector<int> &tags,
             std::vector<int> &heads) {
  // Left children farthest-first, then the head, then right children. Left
  // subtree roots are written with head -1 and patched once the head's
  // position is known.
  const std::size_t start = tags.size();
  const auto &left = node.children[kLeft];
  for (auto it = left.rbegin(); it != left.rend(); ++it) {
    flatten(*it, -1, tags, heads);
  }
  const int self = static_cast<int>(tags.size()) + 1;
  tags.push_back(node.tag);
  heads.push_back(head_pos);
  for (std::size_t i = start; i + 1 < tags.size(); ++i) {
    if (heads[i] == -1) heads[i] = self;
  }
  for (const auto &child : node.children[kRight]) flatten(child, self, tags, heads);
}

}  // namespace

Corpus sample_corpus(const JointModel &model, int num_sentences,
                     const LengthDistribution &lengths, std::uint64_t seed) {
  if (num_sentences < 1) throw Error("number of sentences must be positive");
  lengths.validate();
  model.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  const auto &gauss = model.emissions;
  const Eigen::MatrixXd stddev = gauss.variances.array().sqrt();

  Corpus corpus;
  corpus.sentences.reserve(num_sentences);
  for (int s = 0; s < num_sentences; ++s) {
    std::vector<int> tags;
    std::optional<std::vector<int>> heads;
    if (const auto *markov = std::get_if<MarkovParams>(&model.syntax)) {
      std::uniform_int_distribution<int> len(lengths.min_length, lengths.max_length);
      const int n = len(rng);
      tags.push_back(draw_categorical(markov->init_logits, rng));
      for (int i = 1; i < n; ++i) {
        tags.push_back(
            draw_categorical(markov->trans_logits.row(tags.back()).transpose(), rng));
      }
    } else {
      const auto &dmv = std::get<DmvParams>(model.syntax);
      bool ok = false;
      for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
        DerivationNode root;
        int budget = lengths.max_length;
        if (!derive(dmv, draw_categorical(dmv.root_logits, rng), budget, rng, root)) {
          continue;
        }
        tags.clear();
        std::vector<int> h;
        flatten(root, 0, tags, h);
        if (static_cast<int>(tags.size()) >= lengths.min_length) {
          heads = std::move(h);
          ok = true;
        }
      }
      if (!ok) throw Error("could not sample a DMV derivation in the length range");
    }

    const int n = static_cast<int>(tags.size());
    Eigen::MatrixXd latent(n, gauss.dim());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < gauss.dim(); ++j) {
        latent(i, j) = gauss.means(tags[i], j) + stddev(tags[i], j) * std_normal(rng);
      }
    }
    Sentence sent;
    sent.embeddings = forward_apply_rows(model.flow, latent);
    sent.gold_tags.emplace();
    for (int i = 0; i < n; ++i) {
      sent.tokens.push_back("w" + std::to_string(s) + "_" + std::to_string(i));
      sent.gold_tags->push_back(std::to_string(tags[i]));
      corpus.tag_inventory.insert(sent.gold_tags->back());
    }
    if (heads) {
      sent.projective = is_projective(*heads);
      sent.gold_heads = std::move(heads);
    }
    corpus.sentences.push_back(std::move(sent));
  }
  return corpus;
}

}  // namespace synflow
