#ifndef SYNFLOW_OPTIM_HPP_
#define SYNFLOW_OPTIM_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "synflow/data_io.hpp"
#include "synflow/dmv.hpp"
#include "synflow/joint_model.hpp"

namespace synflow {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  AdamState() = default;
  AdamState(std::size_t size, AdamConfig cfg);
};

// One bias-corrected Adam step that *ascends* the objective:
//   params += lr * m_hat / (sqrt(v_hat) + eps).
// Throws ShapeError on size mismatch and NumericalError on non-finite grads.
void adam_step(AdamState &state, Eigen::VectorXd &params,
               const Eigen::VectorXd &grads);

// Trainable parameters of a model as one flat vector: flow layers
// (w1, b1, w2, b2), means, variances when trainable, then syntax logits.
Eigen::VectorXd pack_parameters(const JointModel &model);
void unpack_parameters(const Eigen::VectorXd &flat, JointModel &model);
Eigen::VectorXd pack_gradient(const ModelGradient &grad, const JointModel &model);

enum class InitMode { Random, Pretrained };

struct TrainConfig {
  Structure structure = Structure::Markov;
  int num_states = 45;
  int depth = 8;
  int epochs = 50;
  int restarts = 10;
  int batch_size = 32;
  std::uint64_t seed = 1;
  AdamConfig adam;
  InitMode init_mode = InitMode::Random;
  std::string pretrained_path;
  bool fixed_variance = true;
  double mean_noise = 0.1;
  double flow_init_scale = 1.0;
  // Stop a run once an epoch improves the summed batch LL by less than this
  // relative amount. Negative: 1e-5 for DMV, disabled for Markov.
  double converge_tol = -1.0;
  int max_len = 0;  // 0 = no length filter
  bool strip_punct = false;
  int threads = 1;
  // Pre-training.
  int pretrain_epochs = -1;  // negative: same as epochs
  bool dmv_tag_init = true;
  int viterbi_em_iterations = 10;
  double viterbi_em_smoothing = 1.0;

  double effective_converge_tol() const;
  void validate() const;
};

struct TrainLogRecord {
  std::string stage;
  int restart = 0;
  int epoch = 0;
  int batch = 0;
  double log_likelihood = 0.0;  // summed over the batch, before the update
  double grad_norm = 0.0;
};

using TrainLogger = std::function<void(const TrainLogRecord &)>;

struct Checkpoint {
  JointModel model;
  TrainConfig config;
  double train_ll = 0.0;
  std::uint64_t seed = 0;
  int restart = 0;
};

struct RestartRecord {
  int restart = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  double init_ll = 0.0;
  double final_ll = 0.0;
  std::vector<double> epoch_ll;  // summed batch LL per epoch
};

struct TrainResult {
  Checkpoint best;
  std::vector<RestartRecord> restarts;
};

// Builds a randomly initialized model for `corpus`.
JointModel init_model(const Corpus &corpus, const TrainConfig &config,
                      std::uint64_t seed);

// Runs config.restarts independent runs (seed + r) and keeps the one with the
// highest full-corpus log-likelihood after training. With `init` every run
// starts from it (a fresh flow replaces its flow when the depth differs);
// otherwise from init_model, or from config.pretrained_path in Pretrained mode.
TrainResult train(const Corpus &corpus, const TrainConfig &config,
                  const std::optional<JointModel> &init = std::nullopt,
                  const TrainLogger &log = nullptr,
                  const std::string &stage = "train");

struct PipelineResult {
  // Depth-0 Gaussian HMM used to induce tags (DMV with dmv_tag_init only).
  std::optional<TrainResult> tagger;
  std::optional<ViterbiEmResult> dmv_init;
  TrainResult stage1;  // depth-0 model
  TrainResult stage2;  // full-depth model, equals stage1 when depth is 0
  const Checkpoint &best() const { return stage2.best; }
};

// Two-stage training: a depth-0 Gaussian baseline, then the full-depth model
// initialized from it. For DMV, the baseline's multinomials can come from
// Viterbi EM on tags induced by a Gaussian HMM.
PipelineResult pretrain_pipeline(const Corpus &corpus, const TrainConfig &config,
                                 const TrainLogger &log = nullptr);

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint &ckpt, const std::string &path);
Checkpoint load_checkpoint(const std::string &path,
                           std::optional<Structure> expected = std::nullopt);
std::string checkpoint_to_string(const Checkpoint &ckpt);
Checkpoint checkpoint_from_string(const std::string &text);

}  // namespace synflow

#endif  // SYNFLOW_OPTIM_HPP_
