#pragma once

// Command-line front end: train, predict, evaluate, inspect, bench.
//
// Exit codes: 0 success, 1 internal error, 2 bad input data or flags,
// 3 I/O failure, 4 unsupported model format version.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ina/ina.hpp"

namespace ina::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kBadInput = 2,
  kIoFailure = 3,
  kBadVersion = 4,
};

class IoFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct CommandConfig {
  std::string input;
  std::string model;
  std::string out;
  std::string format;  // empty: infer from the input extension
  std::optional<double> epsilon;
  double beta = 1.0;
  double smoothing = 0.0;
  std::string emergence = "none";
  std::uint32_t complexity = 1;
  double psi_min = 0.0;
  std::size_t em_iters = 0;
  double margin = 0.1;
  double tolerance = 1e-6;
  std::optional<double> bias;
  std::string bias_file;
  std::string activation = "identity";
  std::size_t top_k = 1;
  std::size_t inspect_top = 10;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::uint64_t> seed;
  std::size_t max_errors = 0;
  // bench
  std::vector<std::size_t> sizes{10000, 20000, 40000, 80000};
  std::size_t bench_features = 500;
  std::size_t bench_classes = 10;
  std::size_t bench_active = 100;
  std::size_t reps = 3;
};

namespace detail {

inline std::string fmt_double(double v) { return nlohmann::json(v).dump(); }

inline std::string fmt_score(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline DatasetFormat resolve_format(const CommandConfig& c) {
  if (!c.format.empty()) {
    auto f = parse_dataset_format(c.format);
    if (!f) throw ValidationError("unknown --format '" + c.format + "'");
    return *f;
  }
  return std::filesystem::path(c.input).extension() == ".csv" ? DatasetFormat::dense_csv
                                                               : DatasetFormat::sparse_jsonl;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open input '" + path + "'");
  return in;
}

inline std::vector<LabeledExample> read_input(const CommandConfig& c, Vocabulary& vocab, bool require_label,
                                              std::optional<double> epsilon, std::ostream& err) {
  auto in = open_input(c.input);
  ReadOptions opt;
  opt.max_errors = c.max_errors;
  opt.require_label = require_label;
  opt.epsilon = epsilon;
  ReadReport rep;
  auto examples = read_dataset(in, resolve_format(c), vocab, opt, &rep);
  if (in.bad()) throw IoFailure("read failed for '" + c.input + "'");
  for (const auto& s : rep.skipped) err << "skipped " << s << "\n";
  return examples;
}

/// Writes `text` to `path` through a temp file and rename, or to `fallback` when path is empty.
inline void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  const std::filesystem::path target(path);
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoFailure("cannot write '" + path + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw IoFailure("cannot rename to '" + path + "': " + ec.message());
}

inline InfoModel open_model(const std::string& path) {
  if (path.empty()) throw ValidationError("--model is required");
  return load_model(path);
}

inline TrainConfig train_config(const CommandConfig& c) {
  TrainConfig cfg;
  auto mode = parse_emergence_mode(c.emergence);
  if (!mode) throw ValidationError("unknown --emergence '" + c.emergence + "'");
  cfg.emergence.mode = *mode;
  cfg.emergence.complexity = c.complexity;
  cfg.emergence.psi_floor = c.psi_min;
  cfg.smoothing = c.smoothing;
  cfg.beta = c.beta;
  cfg.margin = c.margin;
  cfg.max_m_iters = c.em_iters;
  cfg.tolerance = c.tolerance;
  cfg.threads = std::max<std::size_t>(1, c.threads);
  if (c.bias) cfg.bias = {*c.bias};
  if (!parse_activation(c.activation)) throw ValidationError("unknown --activation '" + c.activation + "'");
  cfg.validate();
  return cfg;
}

// "class value" per line; classes not listed keep bias 0.
inline std::vector<double> read_bias_file(const std::string& path, const Vocabulary& vocab) {
  auto in = open_input(path);
  std::vector<double> bias(vocab.classes.size(), 0.0);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    std::istringstream ls(line);
    std::string name;
    double value = 0.0;
    if (!(ls >> name)) continue;
    if (!(ls >> value) || !std::isfinite(value))
      throw ValidationError("bias file line " + std::to_string(lineno) + ": expected '<class> <value>'");
    const ClassId j = vocab.classes.find(name);
    if (j == kNoLabel) throw ValidationError("bias file line " + std::to_string(lineno) + ": unknown class '" + name + "'");
    bias[j] = value;
  }
  return bias;
}

inline int cmd_train(const CommandConfig& c, std::ostream& out, std::ostream& err) {
  TrainConfig cfg = train_config(c);
  if (c.input.empty() || c.model.empty()) throw ValidationError("train needs --input and --model");
  if (c.bias && !c.bias_file.empty()) throw ValidationError("--bias and --bias-file are exclusive");
  const auto t0 = std::chrono::steady_clock::now();

  Dataset data;
  ReadReport rep;
  {
    auto in = open_input(c.input);
    ReadOptions opt;
    opt.max_errors = c.max_errors;
    opt.epsilon = c.epsilon;
    data.examples = read_dataset(in, resolve_format(c), data.vocab, opt, &rep);
    if (in.bad()) throw IoFailure("read failed for '" + c.input + "'");
    for (const auto& s : rep.skipped) err << "skipped " << s << "\n";
  }
  if (data.examples.empty()) throw ValidationError("empty dataset");
  data.vocab.freeze();
  if (!c.bias_file.empty()) cfg.bias = read_bias_file(c.bias_file, data.vocab);

  auto result = fit(data, cfg, [&](const MIteration& it) { err << it.to_log_line() << "\n"; });
  result.model.activation = *parse_activation(c.activation);
  result.model.provenance.epsilon = rep.epsilon;
  result.model.provenance.build_time =
      c.seed ? 0
             : std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
                   .count();
  save_model(result.model, c.model);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::size_t accepted = 0;
  for (const auto& it : result.iterations) accepted += it.accepted ? 1 : 0;
  out << "features\t" << result.model.num_features() << "\n"
      << "classes\t" << result.model.num_classes() << "\n"
      << "examples\t" << data.examples.size() << "\n"
      << "weights\t" << result.model.nonzeros() << "\n"
      << "E_F_micro\t" << fmt_double(result.report.mean_f) << "\n"
      << "accuracy\t" << fmt_double(result.report.accuracy) << "\n"
      << "m_iterations_accepted\t" << accepted << "\n";
  if (result.diagnostics.clamped_psi > 0) out << "psi_clamped\t" << result.diagnostics.clamped_psi << "\n";
  if (result.diagnostics.degenerate_features > 0)
    out << "psi_g_degenerate_features\t" << result.diagnostics.degenerate_features << "\n";
  out << "wall_seconds\t" << fmt_score(wall) << "\n";
  return kOk;
}

inline std::optional<double> model_epsilon(const CommandConfig& c, const InfoModel& m) {
  if (c.epsilon) return c.epsilon;
  if (!std::isnan(m.provenance.epsilon)) return m.provenance.epsilon;
  return std::nullopt;
}

inline int cmd_predict(const CommandConfig& c, std::ostream& out, std::ostream& err) {
  if (c.input.empty()) throw ValidationError("predict needs --input");
  if (c.top_k == 0) throw ValidationError("--top-k must be >= 1");
  const InfoModel model = open_model(c.model);
  Vocabulary vocab = model.vocab;
  vocab.freeze();
  const auto examples = read_input(c, vocab, false, model_epsilon(c, model), err);

  std::vector<Prediction> preds(examples.size());
  ina::detail::parallel_for(examples.size(), c.threads,
                            [&](std::size_t k) { preds[k] = predict(model, examples[k].features, c.top_k); });
  std::string text;
  for (const auto& p : preds) {
    for (std::size_t r = 0; r < p.ranking.size(); ++r) {
      if (r) text += '\t';
      text += model.vocab.classes.name(p.ranking[r].cls);
      text += '\t';
      text += fmt_score(p.ranking[r].score);
    }
    text += '\n';
  }
  emit(c.out, text, out);
  return kOk;
}

inline int cmd_evaluate(const CommandConfig& c, std::ostream& out, std::ostream& err) {
  if (c.input.empty()) throw ValidationError("evaluate needs --input");
  if (!(c.beta > 0.0)) throw ValidationError("--beta must be > 0");
  const InfoModel model = open_model(c.model);
  Vocabulary vocab = model.vocab;
  vocab.freeze();
  const auto examples = read_input(c, vocab, true, model_epsilon(c, model), err);
  const auto report = evaluate(model, examples, c.beta, c.threads);
  emit(c.out, report.to_json(&model.vocab).dump(2) + "\n", out);
  return kOk;
}

inline int cmd_inspect(const CommandConfig& c, std::ostream& out, std::ostream&) {
  const InfoModel model = open_model(c.model);
  std::ostringstream text;
  write_inspect(text, model, c.inspect_top);
  emit(c.out, text.str(), out);
  return kOk;
}

inline int cmd_bench(const CommandConfig& c, std::ostream& out, std::ostream&) {
  if (c.sizes.size() < 2) throw ValidationError("bench needs at least two --sizes");
  SyntheticSpec spec;
  spec.features = c.bench_features;
  spec.classes = c.bench_classes;
  spec.active = c.bench_active;
  spec.seed = c.seed.value_or(1);
  const auto res = run_bench(c.sizes, spec, c.reps, c.threads);
  std::string text = "examples,seconds,nonzeros,total\n";
  for (const auto& p : res.points)
    text += std::to_string(p.examples) + "," + fmt_score(p.seconds) + "," + std::to_string(p.nonzeros) + "," +
            std::to_string(p.total) + "\n";
  text += "# loglog_slope," + fmt_score(res.slope) + "\n";
  emit(c.out, text, out);
  return kOk;
}

} // namespace detail

/// Parses argv and dispatches. Never throws; returns an exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CommandConfig c;
  CLI::App app{"Information-weighted classifier: train, predict, evaluate, inspect, bench"};
  app.require_subcommand(1);

  auto add_io = [&](CLI::App* sub, bool with_input, bool with_format) {
    if (with_input) sub->add_option("--input", c.input, "Dataset path");
    if (with_format) {
      sub->add_option("--format", c.format, "jsonl|csv (default: from extension)")
          ->check(CLI::IsMember({"jsonl", "csv", "sparse_jsonl", "dense_csv"}));
      sub->add_option("--epsilon", c.epsilon, "Dense binarization threshold");
      sub->add_option("--max-errors", c.max_errors, "Malformed lines tolerated");
    }
    sub->add_option("--threads", c.threads, "Worker cap")->check(CLI::PositiveNumber);
  };

  auto* train = app.add_subcommand("train", "Fit a model and write it to --model");
  add_io(train, true, true);
  train->add_option("--model", c.model, "Output model path");
  train->add_option("--beta", c.beta, "F_beta weight in (0,1]");
  train->add_option("--smoothing", c.smoothing, "Laplace alpha (0 = off)");
  train->add_option("--emergence", c.emergence, "none|global|group")
      ->check(CLI::IsMember({"none", "global", "group", "per_group"}));
  train->add_option("--complexity", c.complexity, "Max complexity Z for global emergence");
  train->add_option("--psi-min", c.psi_min, "Floor for per-group psi");
  train->add_option("--em-iters", c.em_iters, "Corrective M-step rounds (0 = E only)");
  train->add_option("--margin", c.margin, "M-step margin in bits");
  train->add_option("--tolerance", c.tolerance, "Minimum mean-F gain to accept a round");
  train->add_option("--bias", c.bias, "Uniform class bias in bits");
  train->add_option("--bias-file", c.bias_file, "Per-class bias file: '<class> <value>' lines");
  train->add_option("--activation", c.activation, "identity|softmax")->check(CLI::IsMember({"identity", "softmax"}));
  train->add_option("--seed", c.seed, "Fixes the build timestamp for reproducible model files");

  auto* predict_cmd = app.add_subcommand("predict", "Classify records");
  add_io(predict_cmd, true, true);
  predict_cmd->add_option("--model", c.model, "Model path");
  predict_cmd->add_option("--out", c.out, "Output path (default stdout)");
  predict_cmd->add_option("--top-k", c.top_k, "Ranked classes per line");
  predict_cmd->add_option("--seed", c.seed, "Accepted for interface symmetry");

  auto* eval_cmd = app.add_subcommand("evaluate", "Report precision, recall and F_beta as JSON");
  add_io(eval_cmd, true, true);
  eval_cmd->add_option("--model", c.model, "Model path");
  eval_cmd->add_option("--out", c.out, "Output path (default stdout)");
  eval_cmd->add_option("--beta", c.beta, "F_beta weight");
  eval_cmd->add_option("--seed", c.seed, "Accepted for interface symmetry");

  auto* inspect_cmd = app.add_subcommand("inspect", "List top weights per class");
  inspect_cmd->add_option("--model", c.model, "Model path");
  inspect_cmd->add_option("--out", c.out, "Output path (default stdout)");
  inspect_cmd->add_option("--top-k", c.inspect_top, "Weights listed per class");

  auto* bench_cmd = app.add_subcommand("bench", "Time Step 0 + E-step on synthetic data");
  bench_cmd->add_option("--seed", c.seed, "Generator seed");
  bench_cmd->add_option("--threads", c.threads, "Worker cap")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--sizes", c.sizes, "Example counts")->delimiter(',');
  bench_cmd->add_option("--features", c.bench_features, "Feature count M");
  bench_cmd->add_option("--classes", c.bench_classes, "Class count W");
  bench_cmd->add_option("--active", c.bench_active, "Feature draws per example");
  bench_cmd->add_option("--reps", c.reps, "Repetitions per size (median reported)");
  bench_cmd->add_option("--out", c.out, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  }

  try {
    if (train->parsed()) return detail::cmd_train(c, out, err);
    if (predict_cmd->parsed()) return detail::cmd_predict(c, out, err);
    if (eval_cmd->parsed()) return detail::cmd_evaluate(c, out, err);
    if (inspect_cmd->parsed()) return detail::cmd_inspect(c, out, err);
    if (bench_cmd->parsed()) return detail::cmd_bench(c, out, err);
    return kInternal;
  } catch (const ModelIoError& e) {
    err << "error: " << e.what() << "\n";
    if (e.code() == ModelIoErrc::version_mismatch) return kBadVersion;
    if (e.code() == ModelIoErrc::io_failure) return kIoFailure;
    return kBadInput;
  } catch (const IoFailure& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

} // namespace ina::cli
