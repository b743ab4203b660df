#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cli.hpp"
#include "synflow/data_io.hpp"
#include "synflow/dmv.hpp"
#include "synflow/error.hpp"
#include "synflow/eval.hpp"
#include "synflow/flow.hpp"
#include "synflow/joint_model.hpp"
#include "synflow/markov.hpp"
#include "synflow/optim.hpp"

namespace py = pybind11;
using namespace synflow;

namespace {

Sentence as_sentence(const Eigen::MatrixXd &x) {
  Sentence s;
  s.tokens.resize(x.rows());
  s.embeddings = x;
  return s;
}

Corpus as_corpus(const std::vector<Eigen::MatrixXd> &xs) {
  Corpus c;
  for (const auto &x : xs) c.sentences.push_back(as_sentence(x));
  return c;
}

ContingencyTable as_table(const Eigen::MatrixXi &counts) { return ContingencyTable(counts); }

}  // namespace

PYBIND11_MODULE(_synflow, m) {
  m.doc() = "Structured syntax models with invertible neural projections";

  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  py::class_<Flow>(m, "Flow")
      .def_readonly("dim", &Flow::dim)
      .def_property_readonly("depth", &Flow::depth)
      .def("inverse", [](const Flow &f, const Eigen::MatrixXd &x) { return inverse_apply_rows(f, x); },
           py::arg("x"), "Maps observation rows to latent rows.")
      .def("forward", [](const Flow &f, const Eigen::MatrixXd &e) { return forward_apply_rows(f, e); },
           py::arg("latent"), "Maps latent rows to observation rows.");
  m.def("init_flow", &init_flow, py::arg("dim"), py::arg("depth"), py::arg("seed"),
        py::arg("scale") = 1.0);

  m.def(
      "markov_log_marginal",
      [](const Eigen::VectorXd &init, const Eigen::MatrixXd &trans, const Eigen::MatrixXd &scores) {
        return log_marginal(MarkovParams{init, trans}, scores);
      },
      py::arg("init_logits"), py::arg("trans_logits"), py::arg("scores"));
  m.def(
      "markov_viterbi",
      [](const Eigen::VectorXd &init, const Eigen::MatrixXd &trans, const Eigen::MatrixXd &scores) {
        return viterbi(MarkovParams{init, trans}, scores);
      },
      py::arg("init_logits"), py::arg("trans_logits"), py::arg("scores"));
  m.def(
      "dmv_log_marginal",
      [](const Eigen::VectorXd &root, const Eigen::MatrixXd &attach, const Eigen::MatrixXd &stop,
         const Eigen::MatrixXd &scores) {
        return dmv_log_marginal(DmvParams{root, attach, stop}, scores);
      },
      py::arg("root_logits"), py::arg("attach_logits"), py::arg("stop_logits"), py::arg("scores"));
  m.def(
      "dmv_viterbi",
      [](const Eigen::VectorXd &root, const Eigen::MatrixXd &attach, const Eigen::MatrixXd &stop,
         const Eigen::MatrixXd &scores) {
        const DependencyParse p = dmv_viterbi(DmvParams{root, attach, stop}, scores);
        return std::make_tuple(p.heads, p.tags, p.log_score);
      },
      py::arg("root_logits"), py::arg("attach_logits"), py::arg("stop_logits"), py::arg("scores"));
  m.def("viterbi_em", [](const std::vector<std::vector<int>> &tags, int k, int iterations,
                         double smoothing) {
    const ViterbiEmResult r = train_dmv_viterbi_em(tags, k, iterations, smoothing);
    return std::make_tuple(r.viterbi_scores, r.objectives);
  });

  py::class_<JointModel>(m, "Model")
      .def_property_readonly("structure", [](const JointModel &jm) { return to_string(jm.structure()); })
      .def_property_readonly("num_states", &JointModel::num_states)
      .def_property_readonly("dim", [](const JointModel &jm) { return jm.flow.dim; })
      .def_property_readonly("flow", [](const JointModel &jm) { return jm.flow; })
      .def_property_readonly("means", [](const JointModel &jm) { return jm.emissions.means; })
      .def_property_readonly("variances", [](const JointModel &jm) { return jm.emissions.variances; })
      .def(
          "log_likelihood",
          [](const JointModel &jm, const std::vector<Eigen::MatrixXd> &xs) {
            return corpus_log_likelihood(jm, as_corpus(xs));
          },
          py::arg("sentences"))
      .def(
          "tags", [](const JointModel &jm, const std::vector<Eigen::MatrixXd> &xs) {
            return decode_tags(jm, as_corpus(xs));
          },
          py::arg("sentences"))
      .def(
          "parses",
          [](const JointModel &jm, const std::vector<Eigen::MatrixXd> &xs) {
            std::vector<std::vector<int>> heads;
            for (const auto &p : decode_parses(jm, as_corpus(xs))) heads.push_back(p.heads);
            return heads;
          },
          py::arg("sentences"))
      .def(
          "sample",
          [](const JointModel &jm, int n, int min_len, int max_len, std::uint64_t seed) {
            const Corpus c = sample_corpus(jm, n, {min_len, max_len}, seed);
            std::vector<Eigen::MatrixXd> xs;
            std::vector<std::vector<int>> tags;
            for (const auto &s : c.sentences) {
              xs.push_back(s.embeddings);
              std::vector<int> t;
              for (const auto &g : *s.gold_tags) t.push_back(std::stoi(g));
              tags.push_back(t);
            }
            return std::make_tuple(xs, tags);
          },
          py::arg("n"), py::arg("min_len"), py::arg("max_len"), py::arg("seed"));

  m.def(
      "load_model",
      [](const std::string &path) {
        const Checkpoint ck = load_checkpoint(path);
        return std::make_tuple(ck.model, ck.train_ll);
      },
      py::arg("path"), "Reads a checkpoint; returns (model, train_ll).");

  m.def("many_to_one", [](const Eigen::MatrixXi &c) { return many_to_one(as_table(c)); });
  m.def("v_measure", [](const Eigen::MatrixXi &c) {
    const VMeasure v = v_measure(as_table(c));
    return std::make_tuple(v.vm, v.homogeneity, v.completeness);
  });
  m.def("one_to_one", [](const Eigen::MatrixXi &c) {
    const OneToOneMap map = one_to_one_map(as_table(c));
    return std::make_tuple(map.pred_to_gold, map.accuracy);
  });
  m.def("directed_accuracy", &directed_accuracy, py::arg("pred_heads"), py::arg("gold_heads"));

  m.def(
      "run_cli",
      [](const std::vector<std::string> &args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return std::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in process; returns (code, stdout, stderr).");
}
