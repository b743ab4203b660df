#include "synflow/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "synflow/error.hpp"

namespace synflow {
namespace {

// Visits every trainable tensor of a model-shaped object in packing order.
template <typename FlowT, typename Fn>
void for_each_flow_tensor(FlowT &layers, Fn &&fn) {
  for (auto &l : layers) {
    fn(l.w1);
    fn(l.b1);
    fn(l.w2);
    fn(l.b2);
  }
}

template <typename Model, typename Fn>
void for_each_syntax_tensor(Model &syntax, Fn &&fn) {
  std::visit(
      [&](auto &p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MarkovParams> ||
                      std::is_same_v<T, MarkovGradient>) {
          fn(p.init_logits);
          fn(p.trans_logits);
        } else {
          fn(p.root_logits);
          fn(p.attach_logits);
          fn(p.stop_logits);
        }
      },
      syntax);
}

template <typename Tensor>
void write_block(Eigen::VectorXd &flat, Eigen::Index &pos, const Tensor &t) {
  flat.segment(pos, t.size()) = Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
  pos += t.size();
}

template <typename Tensor>
void read_block(const Eigen::VectorXd &flat, Eigen::Index &pos, Tensor &t) {
  Eigen::Map<Eigen::VectorXd>(t.data(), t.size()) = flat.segment(pos, t.size());
  pos += t.size();
}

Eigen::Index packed_size(const JointModel &model) {
  Eigen::Index n = static_cast<Eigen::Index>(model.flow.num_parameters());
  n += model.emissions.means.size();
  if (model.emissions.trainable_variance) n += model.emissions.variances.size();
  std::visit([&](const auto &p) {
    using T = std::decay_t<decltype(p)>;
    if constexpr (std::is_same_v<T, MarkovParams>) {
      n += p.init_logits.size() + p.trans_logits.size();
    } else {
      n += p.root_logits.size() + p.attach_logits.size() + p.stop_logits.size();
    }
  }, model.syntax);
  return n;
}

}  // namespace

AdamState::AdamState(std::size_t size, AdamConfig cfg)
    : config(cfg),
      m(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      v(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))) {}

void adam_step(AdamState &state, Eigen::VectorXd &params,
               const Eigen::VectorXd &grads) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("Adam state, parameters and gradients differ in size");
  }
  for (Eigen::Index i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads(i))) {
      throw NumericalError("non-finite gradient at coordinate " + std::to_string(i));
    }
  }
  const auto &c = state.config;
  ++state.step;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grads;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grads.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  params.array() += c.learning_rate * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + c.epsilon);
}

Eigen::VectorXd pack_parameters(const JointModel &model) {
  Eigen::VectorXd flat(packed_size(model));
  Eigen::Index pos = 0;
  auto put = [&](const auto &t) { write_block(flat, pos, t); };
  for_each_flow_tensor(model.flow.layers, put);
  put(model.emissions.means);
  if (model.emissions.trainable_variance) put(model.emissions.variances);
  for_each_syntax_tensor(model.syntax, put);
  return flat;
}

void unpack_parameters(const Eigen::VectorXd &flat, JointModel &model) {
  if (flat.size() != packed_size(model)) {
    throw ShapeError("flat parameter vector has the wrong size");
  }
  Eigen::Index pos = 0;
  auto get = [&](auto &t) { read_block(flat, pos, t); };
  for_each_flow_tensor(model.flow.layers, get);
  get(model.emissions.means);
  if (model.emissions.trainable_variance) {
    get(model.emissions.variances);
    model.emissions.clamp_variances();
  }
  for_each_syntax_tensor(model.syntax, get);
}

Eigen::VectorXd pack_gradient(const ModelGradient &grad, const JointModel &model) {
  Eigen::VectorXd flat(packed_size(model));
  Eigen::Index pos = 0;
  auto put = [&](const auto &t) { write_block(flat, pos, t); };
  for_each_flow_tensor(grad.flow.layers, put);
  put(grad.means);
  if (model.emissions.trainable_variance) put(grad.variances);
  for_each_syntax_tensor(grad.syntax, put);
  if (pos != flat.size()) throw ShapeError("gradient does not match model shape");
  return flat;
}

double TrainConfig::effective_converge_tol() const {
  if (converge_tol >= 0.0) return converge_tol;
  return structure == Structure::Dmv ? 1e-5 : 0.0;
}

void TrainConfig::validate() const {
  if (num_states < 1) throw Error("number of states must be at least 1");
  if (depth < 0) throw Error("depth must be non-negative");
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (restarts < 1) throw Error("restarts must be at least 1");
  if (batch_size < 1) throw Error("batch size must be at least 1");
  if (!(adam.learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (threads < 1) throw Error("threads must be at least 1");
  if (max_len < 0) throw Error("max_len must be non-negative");
  if (!(viterbi_em_smoothing > 0.0)) throw Error("smoothing must be positive");
  if (init_mode == InitMode::Pretrained && pretrained_path.empty()) {
    throw Error("pretrained init needs a checkpoint path");
  }
}

JointModel init_model(const Corpus &corpus, const TrainConfig &config,
                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  JointModel model;
  model.flow = init_flow(corpus.dim(), config.depth, rng(), config.flow_init_scale);
  model.emissions =
      init_gaussians(corpus, model.flow, config.num_states, rng, config.mean_noise);
  model.emissions.trainable_variance = !config.fixed_variance;
  if (config.structure == Structure::Markov) {
    model.syntax = init_markov(config.num_states, rng);
  } else {
    model.syntax = init_dmv(config.num_states, rng);
  }
  return model;
}

namespace {

// Sum of per-sentence gradients over `batch`. With several threads the batch
// is cut into contiguous chunks whose sums are added in chunk order.
ModelGradient batch_gradient(const JointModel &model, const Corpus &corpus,
                             const std::vector<std::size_t> &order,
                             std::size_t begin, std::size_t end, int threads) {
  ModelGradient total = ModelGradient::zeros_like(model);
  const std::size_t n = end - begin;
  const std::size_t workers = std::min<std::size_t>(threads, n);
  if (workers <= 1) {
    for (std::size_t i = begin; i < end; ++i) {
      accumulate_gradient(model, corpus.sentences[order[i]], total);
    }
    return total;
  }
  std::vector<ModelGradient> parts(workers, total);
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          const std::size_t lo = begin + n * w / workers;
          const std::size_t hi = begin + n * (w + 1) / workers;
          for (std::size_t i = lo; i < hi; ++i) {
            accumulate_gradient(model, corpus.sentences[order[i]], parts[w]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (std::size_t w = 0; w < workers; ++w) {
    if (errors[w]) std::rethrow_exception(errors[w]);
    total += parts[w];
  }
  return total;
}

JointModel starting_model(const Corpus &corpus, const TrainConfig &config,
                          const std::optional<JointModel> &init,
                          std::uint64_t seed) {
  if (!init) return init_model(corpus, config, seed);
  if (init->structure() != config.structure) {
    throw StructureMismatch("initial model is " + to_string(init->structure()) +
                            ", training config asks for " +
                            to_string(config.structure));
  }
  if (init->num_states() != config.num_states) {
    throw ShapeError("initial model has " + std::to_string(init->num_states()) +
                     " states, config asks for " +
                     std::to_string(config.num_states));
  }
  JointModel model = *init;
  if (model.flow.depth() != config.depth) {
    std::mt19937_64 rng(seed);
    model.flow = init_flow(corpus.dim(), config.depth, rng(), config.flow_init_scale);
  }
  model.emissions.trainable_variance = !config.fixed_variance;
  return model;
}

}  // namespace

TrainResult train(const Corpus &corpus, const TrainConfig &config,
                  const std::optional<JointModel> &init, const TrainLogger &log,
                  const std::string &stage) {
  config.validate();
  corpus.validate();
  std::optional<JointModel> start = init;
  if (!start && config.init_mode == InitMode::Pretrained) {
    start = load_checkpoint(config.pretrained_path, config.structure).model;
  }
  if (start && start->dim() != corpus.dim()) {
    throw ShapeError("initial model dimension does not match corpus");
  }

  TrainResult result;
  bool have_best = false;
  const double tol = config.effective_converge_tol();
  for (int r = 0; r < config.restarts; ++r) {
    RestartRecord rec;
    rec.restart = r;
    rec.seed = config.seed + static_cast<std::uint64_t>(r);
    JointModel model;
    try {
      model = starting_model(corpus, config, start, rec.seed);
      model.validate();
      rec.init_ll = corpus_log_likelihood(model, corpus);

      std::mt19937_64 rng(rec.seed ^ 0x9e3779b97f4a7c15ULL);
      Eigen::VectorXd params = pack_parameters(model);
      AdamState adam(static_cast<std::size_t>(params.size()), config.adam);
      std::vector<std::size_t> order(corpus.size());
      std::iota(order.begin(), order.end(), 0);
      double previous = 0.0;
      for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_ll = 0.0;
        int batch = 0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size, ++batch) {
          const std::size_t e =
              std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
          const ModelGradient g =
              batch_gradient(model, corpus, order, b, e, config.threads);
          if (!std::isfinite(g.log_likelihood)) {
            throw NumericalError("non-finite batch log-likelihood");
          }
          Eigen::VectorXd flat = pack_gradient(g, model) / static_cast<double>(e - b);
          adam_step(adam, params, flat);
          unpack_parameters(params, model);
          if (model.emissions.trainable_variance) {
            // Keep the packed copy consistent with the clamped variances.
            params = pack_parameters(model);
          }
          epoch_ll += g.log_likelihood;
          if (log) {
            log({stage, r, epoch, batch, g.log_likelihood, flat.norm()});
          }
        }
        rec.epoch_ll.push_back(epoch_ll);
        if (tol > 0.0 && epoch > 0 &&
            std::abs(epoch_ll - previous) <= tol * std::abs(previous)) {
          break;
        }
        previous = epoch_ll;
      }
      rec.final_ll = corpus_log_likelihood(model, corpus);
      if (!std::isfinite(rec.final_ll)) {
        throw NumericalError("non-finite final log-likelihood");
      }
    } catch (const NumericalError &err) {
      rec.failed = true;
      rec.failure = err.what();
    }
    if (!rec.failed && (!have_best || rec.final_ll > result.best.train_ll)) {
      result.best = Checkpoint{model, config, rec.final_ll, rec.seed, r};
      have_best = true;
    }
    result.restarts.push_back(std::move(rec));
  }
  if (!have_best) throw NumericalError("every restart failed");
  return result;
}

PipelineResult pretrain_pipeline(const Corpus &corpus, const TrainConfig &config,
                                 const TrainLogger &log) {
  config.validate();
  TrainConfig base = config;
  base.depth = 0;
  base.init_mode = InitMode::Random;
  if (config.pretrain_epochs >= 0) base.epochs = config.pretrain_epochs;

  PipelineResult out;
  std::optional<JointModel> stage1_init;
  if (config.structure == Structure::Dmv && config.dmv_tag_init) {
    TrainConfig tagger = base;
    tagger.structure = Structure::Markov;
    out.tagger = train(corpus, tagger, std::nullopt, log, "tagger");
    const JointModel &hmm = out.tagger->best.model;
    const auto tags = decode_tags(hmm, corpus);
    out.dmv_init = train_dmv_viterbi_em(
        tags, config.num_states, config.viterbi_em_iterations,
        config.viterbi_em_smoothing,
        dmv_uniform_posterior(tags, config.num_states, config.viterbi_em_smoothing));
    JointModel init;
    init.flow = Flow{corpus.dim(), {}};
    init.emissions = hmm.emissions;
    init.syntax = out.dmv_init->params;
    stage1_init = std::move(init);
  } else if (config.init_mode == InitMode::Pretrained) {
    stage1_init = load_checkpoint(config.pretrained_path, config.structure).model;
    stage1_init->flow = Flow{corpus.dim(), {}};
  }
  out.stage1 = train(corpus, base, stage1_init, log, "stage1");
  if (config.depth == 0) {
    out.stage2 = out.stage1;
    out.stage2.best.config = config;
    return out;
  }
  TrainConfig full = config;
  full.init_mode = InitMode::Random;
  out.stage2 = train(corpus, full, out.stage1.best.model, log, "stage2");
  return out;
}

}  // namespace synflow
