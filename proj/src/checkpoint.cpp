#include <fstream>
#include <sstream>

#include <json.hpp>

#include "synflow/error.hpp"
#include "synflow/optim.hpp"

namespace synflow {
namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd &m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd &v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

const json &field(const json &j, const char *key) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(std::string("checkpoint is missing '") + key + "'");
  }
  return j.at(key);
}

Eigen::MatrixXd matrix_from_json(const json &j, Eigen::Index rows,
                                 Eigen::Index cols, const char *what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw SchemaError(std::string("bad shape for ") + what);
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json &row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw SchemaError(std::string("bad shape for ") + what);
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw SchemaError(std::string("non-numeric ") + what);
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json &j, Eigen::Index size, const char *what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
    throw SchemaError(std::string("bad shape for ") + what);
  }
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    if (!j[i].is_number()) throw SchemaError(std::string("non-numeric ") + what);
    v(i) = j[i].get<double>();
  }
  return v;
}

json config_to_json(const TrainConfig &c) {
  return {{"structure", to_string(c.structure)},
          {"num_states", c.num_states},
          {"depth", c.depth},
          {"epochs", c.epochs},
          {"restarts", c.restarts},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"init_mode", c.init_mode == InitMode::Random ? "random" : "pretrained"},
          {"pretrained_path", c.pretrained_path},
          {"fixed_variance", c.fixed_variance},
          {"mean_noise", c.mean_noise},
          {"flow_init_scale", c.flow_init_scale},
          {"converge_tol", c.converge_tol},
          {"max_len", c.max_len},
          {"strip_punct", c.strip_punct},
          {"threads", c.threads},
          {"pretrain_epochs", c.pretrain_epochs},
          {"dmv_tag_init", c.dmv_tag_init},
          {"viterbi_em_iterations", c.viterbi_em_iterations},
          {"viterbi_em_smoothing", c.viterbi_em_smoothing}};
}

TrainConfig config_from_json(const json &j) {
  TrainConfig c;
  try {
    c.structure = structure_from_string(field(j, "structure").get<std::string>());
    c.num_states = field(j, "num_states").get<int>();
    c.depth = field(j, "depth").get<int>();
    c.epochs = field(j, "epochs").get<int>();
    c.restarts = field(j, "restarts").get<int>();
    c.batch_size = field(j, "batch_size").get<int>();
    c.seed = field(j, "seed").get<std::uint64_t>();
    c.adam.learning_rate = field(j, "learning_rate").get<double>();
    c.adam.beta1 = field(j, "beta1").get<double>();
    c.adam.beta2 = field(j, "beta2").get<double>();
    c.adam.epsilon = field(j, "epsilon").get<double>();
    c.init_mode = field(j, "init_mode").get<std::string>() == "pretrained"
                      ? InitMode::Pretrained
                      : InitMode::Random;
    c.pretrained_path = field(j, "pretrained_path").get<std::string>();
    c.fixed_variance = field(j, "fixed_variance").get<bool>();
    c.mean_noise = field(j, "mean_noise").get<double>();
    c.flow_init_scale = field(j, "flow_init_scale").get<double>();
    c.converge_tol = field(j, "converge_tol").get<double>();
    c.max_len = field(j, "max_len").get<int>();
    c.strip_punct = field(j, "strip_punct").get<bool>();
    c.threads = field(j, "threads").get<int>();
    c.pretrain_epochs = field(j, "pretrain_epochs").get<int>();
    c.dmv_tag_init = field(j, "dmv_tag_init").get<bool>();
    c.viterbi_em_iterations = field(j, "viterbi_em_iterations").get<int>();
    c.viterbi_em_smoothing = field(j, "viterbi_em_smoothing").get<double>();
  } catch (const json::exception &e) {
    throw SchemaError(std::string("bad config in checkpoint: ") + e.what());
  } catch (const SchemaError &) {
    throw;
  } catch (const Error &e) {
    throw SchemaError(e.what());
  }
  return c;
}

json model_to_json(const JointModel &m) {
  json layers = json::array();
  for (const auto &l : m.flow.layers) {
    layers.push_back({{"side", l.side == CouplingSide::LeftFixed ? "left" : "right"},
                      {"w1", matrix_to_json(l.w1)},
                      {"b1", vector_to_json(l.b1)},
                      {"w2", matrix_to_json(l.w2)},
                      {"b2", vector_to_json(l.b2)}});
  }
  json syntax;
  if (const auto *p = std::get_if<MarkovParams>(&m.syntax)) {
    syntax = {{"init_logits", vector_to_json(p->init_logits)},
              {"trans_logits", matrix_to_json(p->trans_logits)}};
  } else {
    const auto &d = std::get<DmvParams>(m.syntax);
    syntax = {{"root_logits", vector_to_json(d.root_logits)},
              {"attach_logits", matrix_to_json(d.attach_logits)},
              {"stop_logits", matrix_to_json(d.stop_logits)}};
  }
  return {{"structure", to_string(m.structure())},
          {"num_states", m.num_states()},
          {"dim", m.dim()},
          {"flow", {{"dim", m.flow.dim}, {"layers", std::move(layers)}}},
          {"emissions",
           {{"means", matrix_to_json(m.emissions.means)},
            {"variances", matrix_to_json(m.emissions.variances)},
            {"trainable_variance", m.emissions.trainable_variance}}},
          {"syntax", std::move(syntax)}};
}

JointModel model_from_json(const json &j) {
  JointModel m;
  Structure structure;
  int k = 0, d = 0;
  try {
    structure = structure_from_string(field(j, "structure").get<std::string>());
    k = field(j, "num_states").get<int>();
    d = field(j, "dim").get<int>();
  } catch (const json::exception &e) {
    throw SchemaError(e.what());
  } catch (const SchemaError &) {
    throw;
  } catch (const Error &e) {
    throw SchemaError(e.what());
  }
  if (k < 1 || d < 1) throw SchemaError("invalid model dimensions");

  const json &flow = field(j, "flow");
  m.flow.dim = field(flow, "dim").get<int>();
  const json &layers = field(flow, "layers");
  if (!layers.is_array()) throw SchemaError("flow layers must be an array");
  const Eigen::Index h = m.flow.dim / 2;
  for (const auto &lj : layers) {
    CouplingLayer l;
    l.side = field(lj, "side").get<std::string>() == "left" ? CouplingSide::LeftFixed
                                                           : CouplingSide::RightFixed;
    l.w1 = matrix_from_json(field(lj, "w1"), h, h, "w1");
    l.b1 = vector_from_json(field(lj, "b1"), h, "b1");
    l.w2 = matrix_from_json(field(lj, "w2"), h, h, "w2");
    l.b2 = vector_from_json(field(lj, "b2"), h, "b2");
    m.flow.layers.push_back(std::move(l));
  }

  const json &em = field(j, "emissions");
  m.emissions.means = matrix_from_json(field(em, "means"), k, d, "means");
  m.emissions.variances = matrix_from_json(field(em, "variances"), k, d, "variances");
  m.emissions.trainable_variance = field(em, "trainable_variance").get<bool>();

  const json &syn = field(j, "syntax");
  if (structure == Structure::Markov) {
    MarkovParams p;
    p.init_logits = vector_from_json(field(syn, "init_logits"), k, "init_logits");
    p.trans_logits = matrix_from_json(field(syn, "trans_logits"), k, k, "trans_logits");
    m.syntax = std::move(p);
  } else {
    DmvParams p;
    p.root_logits = vector_from_json(field(syn, "root_logits"), k, "root_logits");
    p.attach_logits =
        matrix_from_json(field(syn, "attach_logits"), 2 * k, k, "attach_logits");
    p.stop_logits = matrix_from_json(field(syn, "stop_logits"), k, 4, "stop_logits");
    m.syntax = std::move(p);
  }
  try {
    m.validate();
  } catch (const Error &e) {
    throw SchemaError(std::string("invalid model in checkpoint: ") + e.what());
  }
  return m;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint &ckpt) {
  json j = {{"format", "synflow-checkpoint"},
            {"version", kCheckpointVersion},
            {"config", config_to_json(ckpt.config)},
            {"train_ll", ckpt.train_ll},
            {"seed", ckpt.seed},
            {"restart", ckpt.restart},
            {"model", model_to_json(ckpt.model)}};
  return j.dump(1);
}

Checkpoint checkpoint_from_string(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw SchemaError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (field(j, "format") != "synflow-checkpoint") {
      throw SchemaError("not a synflow checkpoint");
    }
    const int version = field(j, "version").get<int>();
    if (version != kCheckpointVersion) {
      throw SchemaError("checkpoint version " + std::to_string(version) +
                        " is not supported (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint c;
    c.config = config_from_json(field(j, "config"));
    c.train_ll = field(j, "train_ll").get<double>();
    c.seed = field(j, "seed").get<std::uint64_t>();
    c.restart = field(j, "restart").get<int>();
    c.model = model_from_json(field(j, "model"));
    return c;
  } catch (const json::exception &e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint &ckpt, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << checkpoint_to_string(ckpt) << '\n';
  if (!out) throw Error("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string &path,
                           std::optional<Structure> expected) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Checkpoint c = checkpoint_from_string(ss.str());
  if (expected && c.model.structure() != *expected) {
    throw StructureMismatch("checkpoint holds a " + to_string(c.model.structure()) +
                            " model, expected " + to_string(*expected));
  }
  return c;
}

}  // namespace synflow
