#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <climits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "synflow/data_io.hpp"
#include "synflow/error.hpp"
#include "synflow/eval.hpp"
#include "synflow/joint_model.hpp"
#include "synflow/optim.hpp"

namespace synflow::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path &path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

struct CorpusOpts {
  std::string embeddings, corpus, tags, heads, unk = "mean";
  int max_len = 0;
  bool strip_punct = false;
};

void add_corpus_options(CLI::App *sub, CorpusOpts &o) {
  sub->add_option("--embeddings", o.embeddings, "Embedding file")->required();
  sub->add_option("--corpus", o.corpus, "Token file, one sentence per line")->required();
  sub->add_option("--tags", o.tags, "Gold tag file");
  sub->add_option("--heads", o.heads, "Gold head file");
  sub->add_option("--unk", o.unk, "Unknown token policy")
      ->check(CLI::IsMember({"mean", "error"}))
      ->capture_default_str();
  sub->add_option("--max-len", o.max_len, "Drop sentences longer than this (0 = keep all)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--strip-punct", o.strip_punct, "Remove punctuation tokens")
      ->capture_default_str();
}

Corpus read_inputs(const CorpusOpts &o) {
  EmbeddingTable table = load_embeddings(o.embeddings);
  table.set_unk_policy(o.unk == "error" ? UnkPolicy::Error : UnkPolicy::MeanVector);
  auto opt = [](const std::string &s) {
    return s.empty() ? std::nullopt : std::optional<std::string>(s);
  };
  Corpus corpus = load_corpus(o.corpus, table, opt(o.tags), opt(o.heads));
  if (o.max_len > 0 || o.strip_punct) {
    corpus = filter_by_length(corpus, o.max_len > 0 ? o.max_len : INT_MAX, o.strip_punct,
                              default_punct_set());
  }
  return corpus;
}

// train

struct TrainOpts {
  CorpusOpts data;
  std::string structure = "markov", pretrain = "auto", out, config;
  int k = 45, depth = 8, epochs = 50, restarts = 10, batch_size = 32, threads = 1;
  int pretrain_epochs = -1, viterbi_em_iterations = 10;
  std::uint64_t seed = 1;
  double lr = 1e-3, mean_noise = 0.1, converge_tol = -1.0, viterbi_em_smoothing = 1.0;
  bool fixed_variance = true, dmv_tag_init = true, quiet = false;
};

void add_train(CLI::App &app, TrainOpts &o) {
  CLI::App *sub = app.add_subcommand("train", "Train a joint model");
  sub->add_option("--config", o.config, "Key = value configuration file; flags take precedence");
  add_corpus_options(sub, o.data);
  sub->add_option("--structure", o.structure, "Syntax model")
      ->check(CLI::IsMember({"markov", "dmv"}))
      ->capture_default_str();
  sub->add_option("--k", o.k, "Number of latent states")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--depth", o.depth, "Coupling layers")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--epochs", o.epochs, "Epochs per run")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--restarts", o.restarts, "Random restarts")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--seed", o.seed, "Seed of the first restart")->capture_default_str();
  sub->add_option("--pretrain", o.pretrain, "none, auto, or a checkpoint path")->capture_default_str();
  sub->add_option("--fixed-variance", o.fixed_variance, "Keep Gaussian variances fixed")->capture_default_str();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--batch-size", o.batch_size, "Sentences per batch")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--threads", o.threads, "Gradient worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--pretrain-epochs", o.pretrain_epochs, "Epochs of the depth-0 stage (-1 = --epochs)")->capture_default_str();
  sub->add_option("--dmv-tag-init", o.dmv_tag_init, "Initialize DMV multinomials by Viterbi EM on induced tags")->capture_default_str();
  sub->add_option("--viterbi-em-iterations", o.viterbi_em_iterations, "Viterbi EM iterations")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--viterbi-em-smoothing", o.viterbi_em_smoothing, "Viterbi EM additive smoothing")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--mean-noise", o.mean_noise, "Std of the noise added to initial means")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--converge-tol", o.converge_tol, "Relative epoch LL change that ends a run (-1 = automatic)")->capture_default_str();
  sub->add_flag("--quiet", o.quiet, "Do not echo the training log to standard output");
}

void write_restarts(std::ostream &out, const std::string &stage, const TrainResult &r) {
  for (const auto &rec : r.restarts) {
    out << stage << '\t' << rec.restart << '\t' << rec.seed << '\t'
        << (rec.failed ? "failed" : "ok") << '\t' << fmt(rec.init_ll) << '\t'
        << (rec.failed ? "nan" : fmt(rec.final_ll)) << '\t' << rec.epoch_ll.size() << '\t'
        << (!rec.failed && rec.restart == r.best.restart ? 1 : 0) << '\n';
  }
}

int cmd_train(const CLI::App &sub, const TrainOpts &o, std::ostream &out) {
  Corpus corpus = read_inputs(o.data);
  TrainConfig cfg;
  cfg.structure = structure_from_string(o.structure);
  cfg.num_states = o.k;
  cfg.depth = o.depth;
  cfg.epochs = o.epochs;
  cfg.restarts = o.restarts;
  cfg.batch_size = o.batch_size;
  cfg.seed = o.seed;
  cfg.adam.learning_rate = o.lr;
  cfg.fixed_variance = o.fixed_variance;
  cfg.mean_noise = o.mean_noise;
  cfg.converge_tol = o.converge_tol;
  cfg.max_len = o.data.max_len;
  cfg.strip_punct = o.data.strip_punct;
  cfg.threads = o.threads;
  cfg.pretrain_epochs = o.pretrain_epochs;
  cfg.dmv_tag_init = o.dmv_tag_init;
  cfg.viterbi_em_iterations = o.viterbi_em_iterations;
  cfg.viterbi_em_smoothing = o.viterbi_em_smoothing;
  if (o.pretrain != "none" && o.pretrain != "auto") {
    cfg.init_mode = InitMode::Pretrained;
    cfg.pretrained_path = o.pretrain;
  }
  cfg.validate();

  const fs::path dir(o.out);
  fs::create_directories(dir);
  {
    // resolved settings, loadable again with --config
    std::ofstream f = open_out(dir / "config.toml");
    std::istringstream in(sub.config_to_str(true, false));
    for (std::string line; std::getline(in, line);)
      if (!line.starts_with("config=")) f << line << '\n';
  }
  std::ofstream log = open_out(dir / "train.log");
  std::ostringstream head;
  head << "# sentences=" << corpus.size() << " tokens=" << corpus.num_tokens()
       << " dim=" << corpus.dim() << '\n';
  log << head.str();
  if (!o.quiet) out << head.str();

  auto logger = [&](const TrainLogRecord &r) {
    std::ostringstream line;
    line << "stage=" << r.stage << " restart=" << r.restart << " epoch=" << r.epoch
         << " batch=" << r.batch << " ll=" << fmt(r.log_likelihood)
         << " grad_norm=" << fmt(r.grad_norm) << '\n';
    log << line.str();
    if (!o.quiet) out << line.str();
  };

  std::ofstream table = open_out(dir / "restarts.tsv");
  table << "stage\trestart\tseed\tstatus\tinit_ll\tfinal_ll\tepochs\tselected\n";
  Checkpoint best;
  if (o.pretrain == "auto") {
    PipelineResult p = pretrain_pipeline(corpus, cfg, logger);
    if (p.tagger) write_restarts(table, "tagger", *p.tagger);
    write_restarts(table, "stage1", p.stage1);
    if (cfg.depth > 0) write_restarts(table, "stage2", p.stage2);
    save_checkpoint(p.stage1.best, (dir / "stage1.json").string());
    best = p.best();
  } else {
    TrainResult r = train(corpus, cfg, std::nullopt, logger, "train");
    write_restarts(table, "train", r);
    best = r.best;
  }
  best.config = cfg;
  save_checkpoint(best, (dir / "model.json").string());
  std::ostringstream summary;
  summary << "best restart=" << best.restart << " seed=" << best.seed
          << " train_ll=" << fmt(best.train_ll) << '\n';
  log << summary.str();
  out << summary.str();
  return kOk;
}

// induce-tags / parse / export-latent

struct DecodeOpts {
  CorpusOpts data;
  std::string checkpoint, out, gold_out;
};

CLI::App *add_decode(CLI::App &app, const std::string &name, const std::string &help,
                     DecodeOpts &o) {
  CLI::App *sub = app.add_subcommand(name, help);
  sub->add_option("--checkpoint", o.checkpoint, "Trained model")->required();
  add_corpus_options(sub, o.data);
  sub->add_option("--out", o.out, "Output file")->required();
  return sub;
}

void require_dim(const Checkpoint &ck, const Corpus &c) {
  if (ck.model.dim() != c.dim()) throw ShapeError("checkpoint dimension does not match embeddings");
}

int cmd_induce(const DecodeOpts &o, std::ostream &out) {
  Checkpoint ck = load_checkpoint(o.checkpoint, Structure::Markov);
  Corpus corpus = read_inputs(o.data);
  require_dim(ck, corpus);
  write_int_lines(o.out, decode_tags(ck.model, corpus));
  out << "sentences=" << corpus.size() << '\n';
  return kOk;
}

int cmd_parse(const DecodeOpts &o, std::ostream &out) {
  Checkpoint ck = load_checkpoint(o.checkpoint, Structure::Dmv);
  Corpus corpus = read_inputs(o.data);
  require_dim(ck, corpus);
  std::vector<std::vector<int>> heads;
  for (const auto &p : decode_parses(ck.model, corpus)) heads.push_back(p.heads);
  write_int_lines(o.out, heads);
  if (!o.gold_out.empty()) {
    std::ofstream g = open_out(o.gold_out);
    write_heads(g, corpus);
  }
  out << "sentences=" << corpus.size() << '\n';
  return kOk;
}

int cmd_export(const DecodeOpts &o, std::ostream &out) {
  Checkpoint ck = load_checkpoint(o.checkpoint);
  Corpus corpus = read_inputs(o.data);
  require_dim(ck, corpus);
  export_latent(corpus, ck.model.flow, o.out);
  out << "sentences=" << corpus.size() << '\n';
  return kOk;
}

// eval

struct EvalOpts {
  std::string task, pred, gold, report, confusion, confusion_tags;
  int short_len = 10;
};

void add_eval(CLI::App &app, EvalOpts &o) {
  CLI::App *sub = app.add_subcommand("eval", "Score predictions against gold annotations");
  sub->add_option("--task", o.task, "pos or parse")->required()->check(CLI::IsMember({"pos", "parse"}));
  sub->add_option("--pred", o.pred, "Predicted cluster ids or heads")->required();
  sub->add_option("--gold", o.gold, "Gold tags or heads")->required();
  sub->add_option("--report", o.report, "JSON report file");
  sub->add_option("--confusion", o.confusion, "Confusion matrix CSV (pos)");
  sub->add_option("--confusion-tags", o.confusion_tags,
                  "Comma-separated gold tags for the confusion matrix (default: all)");
  sub->add_option("--short-len", o.short_len, "Length bound of the short-sentence DDA")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

template <typename A, typename B>
void check_aligned(const std::vector<std::vector<A>> &pred, const std::vector<std::vector<B>> &gold) {
  if (pred.size() != gold.size()) {
    throw ShapeError("prediction has " + std::to_string(pred.size()) + " sentences, gold has " +
                     std::to_string(gold.size()));
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != gold[i].size()) {
      throw ShapeError("length mismatch in sentence " + std::to_string(i + 1));
    }
  }
}

int cmd_eval(const EvalOpts &o, std::ostream &out) {
  json report;
  report["task"] = o.task;
  std::vector<std::pair<std::string, double>> lines;
  if (o.task == "pos") {
    const auto pred = read_int_lines(o.pred);
    const auto gold_raw = read_token_lines(o.gold);
    check_aligned(pred, gold_raw);
    LabelIndex labels(gold_raw);
    const auto gold = labels.encode(gold_raw);
    int num_pred = 0;
    for (const auto &s : pred) {
      for (int z : s) {
        if (z < 0) throw ParseError("negative cluster id");
        num_pred = std::max(num_pred, z + 1);
      }
    }
    auto table = ContingencyTable::from_sequences(pred, gold, num_pred, labels.size());
    const VMeasure vm = v_measure(table);
    const OneToOneMap map = one_to_one_map(table);
    lines = {{"sentences", pred.size()},       {"tokens", table.total()},
             {"m1", many_to_one(table)},        {"vm", vm.vm},
             {"homogeneity", vm.homogeneity},   {"completeness", vm.completeness},
             {"one_to_one", map.accuracy}};
    json mapping = json::object();
    for (int z = 0; z < num_pred; ++z) {
      if (map.pred_to_gold[z] >= 0) mapping[std::to_string(z)] = labels.label(map.pred_to_gold[z]);
    }
    report["mapping"] = mapping;
    if (!o.confusion.empty()) {
      std::vector<int> subset;
      if (o.confusion_tags.empty()) {
        subset.resize(labels.size());
        std::iota(subset.begin(), subset.end(), 0);
      } else {
        std::stringstream ss(o.confusion_tags);
        for (std::string t; std::getline(ss, t, ',');) subset.push_back(labels.id(t));
      }
      const Eigen::MatrixXd cm = confusion_matrix(table, map, subset);
      std::ofstream csv = open_out(o.confusion);
      csv << "gold";
      for (int g : subset) csv << ',' << labels.label(g);
      csv << ",other\n";
      for (std::size_t r = 0; r < subset.size(); ++r) {
        csv << labels.label(subset[r]);
        for (Eigen::Index c = 0; c < cm.cols(); ++c) csv << ',' << fmt(cm(r, c));
        csv << '\n';
      }
    }
  } else {
    const auto pred = read_int_lines(o.pred);
    const auto gold = read_int_lines(o.gold);
    check_aligned(pred, gold);
    const DependencyAccuracy acc = directed_accuracy_by_length(pred, gold, o.short_len);
    lines = {{"sentences", pred.size()},
             {"tokens", acc.tokens},
             {"short_tokens", acc.short_tokens},
             {"dda_all", acc.all},
             {"dda_short", acc.short_sentences}};
    report["short_length"] = o.short_len;
  }
  for (const auto &[k, v] : lines) {
    const bool count = k == "sentences" || k.ends_with("tokens");
    out << k << '=' << (count ? std::to_string(static_cast<long>(v)) : fmt(v)) << '\n';
    if (count)
      report[k] = static_cast<long>(v);
    else
      report[k] = v;
  }
  if (!o.report.empty()) open_out(o.report) << report.dump(2) << '\n';
  return kOk;
}

// generate

struct GenerateOpts {
  std::string spec, checkpoint, out;
  int n = 0, min_len = 1, max_len = 10;
  std::uint64_t seed = 1;
};

void add_generate(CLI::App &app, GenerateOpts &o) {
  CLI::App *sub = app.add_subcommand("generate", "Sample a synthetic corpus");
  auto *spec = sub->add_option("--spec", o.spec, "JSON model specification");
  auto *ck = sub->add_option("--checkpoint", o.checkpoint, "Trained model to sample from");
  spec->excludes(ck);
  sub->add_option("--n", o.n, "Number of sentences")->required()->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();
  sub->add_option("--min-len", o.min_len, "Shortest sentence")->capture_default_str();
  sub->add_option("--max-len", o.max_len, "Longest sentence")->capture_default_str();
  sub->add_option("--out", o.out, "Output directory")->required();
}

Eigen::MatrixXd matrix_from(const json &j, int rows, int cols, const std::string &name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw SchemaError(name + " must have " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols) {
      throw SchemaError(name + " must have " + std::to_string(cols) + " columns");
    }
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from(const json &j, int size, const std::string &name) {
  if (!j.is_array() || static_cast<int>(j.size()) != size) {
    throw SchemaError(name + " must have " + std::to_string(size) + " entries");
  }
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = j[i].get<double>();
  return v;
}

JointModel model_from_spec(const json &s) {
  static const std::set<std::string> keys = {
      "structure", "num_states", "dim", "depth", "seed", "flow_scale", "means", "mean_scale",
      "variance", "variances", "init_logits", "trans_logits", "root_logits", "attach_logits",
      "stop_logits"};
  if (!s.is_object()) throw SchemaError("model spec must be a JSON object");
  for (const auto &[k, v] : s.items()) {
    if (!keys.count(k)) throw SchemaError("unknown spec key '" + k + "'");
  }
  const Structure st = structure_from_string(s.value("structure", "markov"));
  const int k = s.at("num_states").get<int>();
  const int d = s.at("dim").get<int>();
  if (k < 1 || d < 1) throw SchemaError("num_states and dim must be positive");
  const std::uint64_t seed = s.value("seed", std::uint64_t{1});
  std::mt19937_64 rng(seed);
  JointModel m;
  m.flow = init_flow(d, s.value("depth", 0), rng(), s.value("flow_scale", 1.0));
  if (s.contains("means")) {
    m.emissions.means = matrix_from(s["means"], k, d, "means");
  } else {
    std::normal_distribution<double> normal(0.0, s.value("mean_scale", 1.0));
    m.emissions.means.resize(k, d);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < d; ++j) m.emissions.means(i, j) = normal(rng);
  }
  if (s.contains("variances")) {
    m.emissions.variances = matrix_from(s["variances"], k, d, "variances");
  } else {
    m.emissions.variances = Eigen::MatrixXd::Constant(k, d, s.value("variance", 1.0));
  }
  if (st == Structure::Markov) {
    MarkovParams p = init_markov(k, rng);
    if (s.contains("init_logits")) p.init_logits = vector_from(s["init_logits"], k, "init_logits");
    if (s.contains("trans_logits")) p.trans_logits = matrix_from(s["trans_logits"], k, k, "trans_logits");
    m.syntax = p;
  } else {
    DmvParams p = init_dmv(k, rng);
    if (s.contains("root_logits")) p.root_logits = vector_from(s["root_logits"], k, "root_logits");
    if (s.contains("attach_logits")) p.attach_logits = matrix_from(s["attach_logits"], 2 * k, k, "attach_logits");
    if (s.contains("stop_logits")) p.stop_logits = matrix_from(s["stop_logits"], k, 4, "stop_logits");
    m.syntax = p;
  }
  m.validate();
  return m;
}

int cmd_generate(const GenerateOpts &o, std::ostream &out) {
  JointModel model;
  if (!o.checkpoint.empty()) {
    model = load_checkpoint(o.checkpoint).model;
  } else if (!o.spec.empty()) {
    std::ifstream in(o.spec);
    if (!in) throw Error("cannot open " + o.spec);
    json s;
    try {
      s = json::parse(in);
    } catch (const json::exception &e) {
      throw SchemaError(std::string("model spec: ") + e.what());
    }
    try {
      model = model_from_spec(s);
    } catch (const json::exception &e) {
      throw SchemaError(std::string("model spec: ") + e.what());
    }
  } else {
    throw Error("generate needs --spec or --checkpoint");
  }
  const Corpus corpus = sample_corpus(model, o.n, {o.min_len, o.max_len}, o.seed);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::vector<std::string> vocab;
  Eigen::MatrixXd vectors(corpus.num_tokens(), corpus.dim());
  Eigen::Index row = 0;
  for (const auto &s : corpus.sentences) {
    for (int i = 0; i < s.length(); ++i) {
      vocab.push_back(s.tokens[i]);
      vectors.row(row++) = s.embeddings.row(i);
    }
  }
  {
    std::ofstream f = open_out(dir / "embeddings.txt");
    write_embeddings(f, vocab, vectors);
  }
  {
    std::ofstream f = open_out(dir / "tokens.txt");
    write_tokens(f, corpus);
  }
  {
    std::ofstream f = open_out(dir / "tags.txt");
    write_tags(f, corpus);
  }
  if (corpus.has_gold_heads()) {
    std::ofstream f = open_out(dir / "heads.txt");
    write_heads(f, corpus);
  }
  out << "sentences=" << corpus.size() << " tokens=" << corpus.num_tokens() << '\n';
  return kOk;
}

// Splices the settings of `train --config FILE` in front of the command-line
// flags. Options keep their last value, so flags override the file.
std::vector<std::string> expand_config(const std::vector<std::string> &args,
                                       const CLI::App &sub) {
  auto it = std::find(args.begin(), args.end(), sub.get_name());
  if (it == args.end()) return args;
  std::string path;
  for (auto a = it + 1; a != args.end(); ++a) {
    if (*a == "--config" && a + 1 != args.end()) path = *(a + 1);
    if (a->starts_with("--config=")) path = a->substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  std::vector<std::string> settings;
  for (const CLI::ConfigItem &item : CLI::ConfigTOML().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const bool scoped = item.parents.empty() ||
                        (item.parents.size() == 1 && item.parents[0] == sub.get_name());
    const CLI::Option *opt = sub.get_option_no_throw("--" + item.name);
    if (!scoped || opt == nullptr || item.name == "config") {
      throw CLI::ConversionError("unknown configuration key '" + item.fullname() + "' in " + path);
    }
    for (const auto &v : item.inputs)
      if (!v.empty()) settings.push_back("--" + item.name + "=" + v);
  }
  std::vector<std::string> out(args.begin(), it + 1);
  out.insert(out.end(), settings.begin(), settings.end());
  out.insert(out.end(), it + 1, args.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Joint induction of syntax and latent embeddings with invertible projections",
               "synflow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "synflow 0.1.0");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  TrainOpts train_opts;
  add_train(app, train_opts);
  DecodeOpts induce_opts, parse_opts, export_opts;
  CLI::App *induce = add_decode(app, "induce-tags", "Viterbi tags from a Markov model", induce_opts);
  CLI::App *parse = add_decode(app, "parse", "Viterbi dependency parses from a DMV model", parse_opts);
  parse->add_option("--gold-out", parse_opts.gold_out,
                    "Write the gold heads of the (filtered) corpus here");
  CLI::App *exp = add_decode(app, "export-latent", "Write latent vectors per token type", export_opts);
  EvalOpts eval_opts;
  add_eval(app, eval_opts);
  GenerateOpts gen_opts;
  add_generate(app, gen_opts);

  try {
    std::vector<std::string> argv_store{"synflow"};
    const auto expanded = expand_config(args, *app.get_subcommand("train"));
    argv_store.insert(argv_store.end(), expanded.begin(), expanded.end());
    std::vector<const char *> argv;
    for (const auto &a : argv_store) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (app.got_subcommand("train")) return cmd_train(*app.get_subcommand("train"), train_opts, out);
    if (induce->parsed()) return cmd_induce(induce_opts, out);
    if (parse->parsed()) return cmd_parse(parse_opts, out);
    if (exp->parsed()) return cmd_export(export_opts, out);
    if (app.got_subcommand("eval")) return cmd_eval(eval_opts, out);
    if (app.got_subcommand("generate")) return cmd_generate(gen_opts, out);
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace synflow::cli
