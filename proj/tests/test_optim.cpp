#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "synflow/error.hpp"
#include "synflow/joint_model.hpp"
#include "synflow/optim.hpp"

using namespace synflow;

namespace {

JointModel planted(Structure st, int dim, int depth, std::uint64_t seed) {
  JointModel m;
  m.flow = init_flow(dim, depth, seed);
  m.emissions.means = Eigen::MatrixXd::Zero(2, dim);
  m.emissions.means(1, 0) = 8;
  m.emissions.variances = Eigen::MatrixXd::Ones(2, dim);
  if (st == Structure::Markov) {
    Eigen::MatrixXd t(2, 2);
    t << -1, 1, 1, -1;
    m.syntax = MarkovParams{Eigen::VectorXd::Zero(2), t};
  } else {
    DmvParams p = uniform_dmv(2);
    p.stop_logits.setConstant(0.5);
    m.syntax = p;
  }
  return m;
}

Corpus toy(Structure st, int n, int depth = 0, std::uint64_t seed = 3) {
  return sample_corpus(planted(st, 2, depth, seed), n, {2, 6}, seed);
}

TrainConfig small_config(Structure st) {
  TrainConfig c;
  c.structure = st;
  c.num_states = 2;
  c.depth = 0;
  c.epochs = 3;
  c.restarts = 2;
  c.batch_size = 8;
  c.adam.learning_rate = 0.05;
  return c;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("synflow_optim_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string &name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("adam step") {
  AdamState s(1, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  Eigen::VectorXd p = Eigen::VectorXd::Zero(1), g = Eigen::VectorXd::Ones(1);
  adam_step(s, p, g);
  CHECK(std::abs(p(0) - 0.1 / (1 + 1e-8)) < 1e-12);
  CHECK(s.step == 1);
  for (int i = 0; i < 100; ++i) {
    const double before = p(0);
    adam_step(s, p, g);
    CHECK(p(0) > before);
  }
  Eigen::VectorXd q = Eigen::VectorXd::Constant(1, 0.5);
  AdamState z(1, AdamConfig{});
  adam_step(z, q, Eigen::VectorXd::Zero(1));
  CHECK(q(0) == 0.5);
  Eigen::VectorXd neg = -Eigen::VectorXd::Ones(1);
  AdamState n(1, AdamConfig{});
  Eigen::VectorXd r = Eigen::VectorXd::Zero(1);
  for (int i = 0; i < 10; ++i) {
    const double before = r(0);
    adam_step(n, r, neg);
    CHECK(r(0) < before);
  }
  CHECK_THROWS_AS(adam_step(n, r, Eigen::VectorXd::Zero(2)), ShapeError);
  Eigen::VectorXd bad(1);
  bad << std::nan("");
  CHECK_THROWS_AS(adam_step(n, r, bad), NumericalError);
}

TEST_CASE("packing round trips") {
  std::mt19937_64 rng(1);
  for (Structure st : {Structure::Markov, Structure::Dmv}) {
    JointModel m = planted(st, 4, 2, 5);
    m.emissions.trainable_variance = true;
    Eigen::VectorXd p = pack_parameters(m);
    Eigen::VectorXd q = p + oracle::random_matrix(p.size(), 1, rng, 0, 0.1);
    unpack_parameters(q, m);
    CHECK(pack_parameters(m) == q);
    CHECK_THROWS_AS(unpack_parameters(Eigen::VectorXd::Zero(3), m), ShapeError);
  }
}

TEST_CASE("zero epochs returns the initialization") {
  Corpus c = toy(Structure::Markov, 30);
  TrainConfig cfg = small_config(Structure::Markov);
  cfg.epochs = 0;
  cfg.restarts = 1;
  auto r = train(c, cfg);
  JointModel init = init_model(c, cfg, cfg.seed);
  CHECK(r.best.train_ll == corpus_log_likelihood(init, c));
  CHECK(r.restarts[0].init_ll == r.restarts[0].final_ll);
}

TEST_CASE("training improves likelihood and selects the best restart") {
  Corpus c = toy(Structure::Markov, 60);
  TrainConfig cfg = small_config(Structure::Markov);
  cfg.restarts = 3;
  cfg.epochs = 5;
  std::vector<TrainLogRecord> records;
  auto r = train(c, cfg, std::nullopt, [&](const TrainLogRecord &x) { records.push_back(x); });
  REQUIRE(r.restarts.size() == 3);
  double best = -1e300;
  for (const auto &rec : r.restarts) {
    CHECK(rec.final_ll >= rec.init_ll);
    CHECK(rec.seed == cfg.seed + static_cast<std::uint64_t>(rec.restart));
    best = std::max(best, rec.final_ll);
  }
  CHECK(r.best.train_ll == best);
  CHECK(r.best.train_ll == corpus_log_likelihood(r.best.model, c));
  CHECK(r.best.seed == r.restarts[r.best.restart].seed);
  // 60 sentences in batches of 8 -> 8 batches per epoch
  CHECK(records.size() == 3 * 5 * 8);
}

TEST_CASE("training is deterministic") {
  Corpus c = toy(Structure::Dmv, 40);
  TrainConfig cfg = small_config(Structure::Dmv);
  cfg.depth = 2;
  std::vector<double> a, b, t;
  auto grab = [](std::vector<double> &v) {
    return [&v](const TrainLogRecord &x) { v.push_back(x.log_likelihood); };
  };
  auto ra = train(c, cfg, std::nullopt, grab(a));
  train(c, cfg, std::nullopt, grab(b));
  CHECK(a == b);
  cfg.threads = 3;
  auto rt = train(c, cfg, std::nullopt, grab(t));
  REQUIRE(t.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - t[i]) <= 1e-8 * std::abs(a[i]));
  CHECK(std::abs(ra.best.train_ll - rt.best.train_ll) <= 1e-8 * std::abs(ra.best.train_ll));
}

TEST_CASE("diverging restarts are recorded and skipped") {
  Corpus c = toy(Structure::Markov, 20);
  TrainConfig cfg = small_config(Structure::Markov);
  cfg.depth = 2;
  cfg.restarts = 3;
  cfg.fixed_variance = false;
  cfg.adam.learning_rate = 1e3;
  cfg.epochs = 4;
  auto r = train(c, cfg);
  int failed = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto &rec : r.restarts) {
    if (rec.failed) {
      ++failed;
      CHECK_FALSE(rec.failure.empty());
      CHECK(r.best.restart != rec.restart);
    } else {
      best = std::max(best, rec.final_ll);
    }
  }
  CHECK(failed >= 1);
  CHECK(failed < 3);
  CHECK(r.best.train_ll == best);
  cfg.adam.learning_rate = 1e9;
  CHECK_THROWS_AS(train(c, cfg), NumericalError);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.restarts = 0;
  CHECK_THROWS(cfg.validate());
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS(cfg.validate());
  cfg = TrainConfig{};
  CHECK(cfg.effective_converge_tol() == 0.0);
  cfg.structure = Structure::Dmv;
  CHECK(cfg.effective_converge_tol() == 1e-5);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir;
  for (Structure st : {Structure::Markov, Structure::Dmv}) {
    Corpus c = toy(st, 20, 2);
    TrainConfig cfg = small_config(st);
    cfg.depth = 2;
    cfg.restarts = 1;
    auto r = train(c, cfg);
    const std::string path = dir.file(to_string(st) + ".json");
    save_checkpoint(r.best, path);
    Checkpoint back = load_checkpoint(path, st);
    CHECK(std::abs(corpus_log_likelihood(back.model, c) - r.best.train_ll) <= 1e-12);
    CHECK(pack_parameters(back.model) == pack_parameters(r.best.model));
    CHECK(back.config.depth == 2);
    CHECK(back.seed == r.best.seed);
    CHECK(back.train_ll == r.best.train_ll);
    const Structure other = st == Structure::Markov ? Structure::Dmv : Structure::Markov;
    CHECK_THROWS_AS(load_checkpoint(path, other), StructureMismatch);

    const std::string text = checkpoint_to_string(r.best);
    CHECK_THROWS_AS(checkpoint_from_string(text.substr(0, text.size() / 2)), SchemaError);
    std::string wrong = text;
    const auto pos = wrong.find("\"version\": 1");
    REQUIRE(pos != std::string::npos);
    wrong.replace(pos, 12, "\"version\": 9");
    CHECK_THROWS_AS(checkpoint_from_string(wrong), SchemaError);
  }
  CHECK_THROWS_AS(checkpoint_from_string("{\"format\": \"synflow-checkpoint\"}"), SchemaError);
  CHECK_THROWS(load_checkpoint(dir.file("missing.json")));
}

TEST_CASE("pretrained initialization") {
  TempDir dir;
  Corpus c = toy(Structure::Markov, 30);
  TrainConfig cfg = small_config(Structure::Markov);
  cfg.restarts = 1;
  auto first = train(c, cfg);
  save_checkpoint(first.best, dir.file("m.json"));
  cfg.init_mode = InitMode::Pretrained;
  cfg.pretrained_path = dir.file("m.json");
  cfg.epochs = 0;
  auto second = train(c, cfg);
  CHECK(second.best.train_ll == first.best.train_ll);
  cfg.structure = Structure::Dmv;
  CHECK_THROWS_AS(train(c, cfg), StructureMismatch);
}

TEST_CASE("pipeline with depth 0 has identical stages") {
  Corpus c = toy(Structure::Markov, 30);
  TrainConfig cfg = small_config(Structure::Markov);
  auto p = pretrain_pipeline(c, cfg);
  CHECK(p.stage1.best.train_ll == p.stage2.best.train_ll);
  CHECK(pack_parameters(p.stage1.best.model) == pack_parameters(p.stage2.best.model));
  CHECK_FALSE(p.tagger.has_value());
}

TEST_CASE("near identity flow starts stage 2 where stage 1 ended") {
  Corpus c = toy(Structure::Markov, 30);
  TrainConfig cfg = small_config(Structure::Markov);
  cfg.depth = 4;
  cfg.restarts = 1;
  cfg.flow_init_scale = 1e-6;
  auto p = pretrain_pipeline(c, cfg);
  // weights of order 1e-6 move each latent by O(1e-6 * |x|)
  const double delta = std::abs(p.stage2.restarts[0].init_ll - p.stage1.best.train_ll);
  CHECK(delta < 1e-3);
  CHECK(delta < 1e-6 * c.num_tokens() * 100);
}

TEST_CASE("dmv pipeline runs every stage") {
  Corpus c = toy(Structure::Dmv, 30);
  TrainConfig cfg = small_config(Structure::Dmv);
  cfg.depth = 2;
  cfg.restarts = 1;
  cfg.viterbi_em_iterations = 3;
  auto p = pretrain_pipeline(c, cfg);
  REQUIRE(p.tagger.has_value());
  REQUIRE(p.dmv_init.has_value());
  CHECK(p.dmv_init->viterbi_scores.size() == 3);
  CHECK(p.best().model.flow.depth() == 2);
  CHECK(p.best().model.structure() == Structure::Dmv);
  CHECK(p.stage1.best.model.flow.depth() == 0);
}
