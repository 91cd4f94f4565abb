#pragma once

// Generalized EM training.
//
//   Step 0  ingest()   frequency matrix N_ij with marginals
//   E-step  e_step()   closed-form weights I_ij = psi * log2(N_ij N / (N_i N_j))
//   M-step  m_step()   corrective pass on misclassified training examples,
//                      kept only while the mean per-class F-measure improves

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ina/corpus.hpp"
#include "ina/errors.hpp"
#include "ina/info_math.hpp"
#include "ina/model.hpp"

namespace ina {

struct TrainConfig {
  EmergenceConfig emergence;
  /// Laplace alpha added to every cell before marginals; 0 disables smoothing.
  double smoothing = 0.0;
  /// F_beta weight, in (0, 1].
  double beta = 1.0;
  /// Margin in bits by which a corrected example's true class must beat the old winner.
  double margin = 0.1;
  /// Corrective rounds after the E-step; 0 is E-only training.
  std::size_t max_m_iters = 10;
  /// A round is accepted only if it raises mean F by more than this.
  double tolerance = 1e-6;
  /// Empty: zero bias. One value: uniform. W values: per class.
  std::vector<double> bias;
  std::size_t threads = 1;

  void validate() const {
    if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("beta must lie in (0, 1]");
    if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) throw ValidationError("smoothing must be finite and >= 0");
    if (!(margin > 0.0) || !std::isfinite(margin)) throw ValidationError("margin must be finite and > 0");
    if (!(tolerance >= 0.0)) throw ValidationError("tolerance must be >= 0");
    if (emergence.complexity == 0) throw ValidationError("complexity Z must be >= 1");
    if (!(emergence.psi_floor >= 0.0 && emergence.psi_floor <= 1.0))
      throw ValidationError("psi floor must lie in [0, 1]");
    for (double b : bias)
      if (!std::isfinite(b)) throw ValidationError("bias must be finite");
  }
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t k = n * t / threads; k < n * (t + 1) / threads; ++k) fn(k);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<double> expand_bias(const std::vector<double>& bias, std::size_t num_classes) {
  if (bias.empty()) return std::vector<double>(num_classes, 0.0);
  if (bias.size() == 1) return std::vector<double>(num_classes, bias.front());
  if (bias.size() != num_classes)
    throw ValidationError("bias has " + std::to_string(bias.size()) + " values for " + std::to_string(num_classes) +
                          " classes");
  return bias;
}

} // namespace detail

// ---------------------------------------------------------------------------
// E-step

struct EStepDiagnostics {
  std::size_t clamped_psi = 0;          // psi evaluations pushed back into [0, 1]
  std::size_t degenerate_features = 0;  // per_group features with psi_g = 0
};

/// Emergence coefficient for feature `stats` under per_group mode, before the floor.
///
/// A feature seen in one class has log2(2^1 - 1) = 0 bits of emergent choice,
/// so psi_g = 0 regardless of N_g (which may be 1, where the formula is 0/0).
inline double feature_psi(const FeatureGroupStats& stats, std::uint64_t total) {
  if (stats.classes <= 1) return 0.0;
  return info::psi_group(stats.classes, stats.count, total);
}

/// Builds weights from counts. Zero cells get no entry unless smoothing makes every cell positive.
inline InfoModel e_step(const FrequencyMatrix& freq, const TrainConfig& cfg, EStepDiagnostics* diag = nullptr) {
  cfg.validate();
  const std::size_t M = freq.num_features();
  const std::size_t W = freq.num_classes();
  const std::uint64_t N = freq.total();
  if (N == 0) throw ValidationError("e_step: frequency matrix is empty");

  EStepDiagnostics local;
  EStepDiagnostics& d = diag ? *diag : local;
  d = {};

  std::vector<double> psi(M, 1.0);
  switch (cfg.emergence.mode) {
    case EmergenceMode::none: break;
    case EmergenceMode::global: {
      if (cfg.emergence.complexity > W)
        throw DomainError("e_step: complexity Z=" + std::to_string(cfg.emergence.complexity) + " exceeds W=" +
                          std::to_string(W));
      const double raw = info::psi_global_raw(W, N, cfg.emergence.complexity);
      if (raw < 0.0 || raw > 1.0) d.clamped_psi = 1;
      std::fill(psi.begin(), psi.end(), std::clamp(raw, 0.0, 1.0));
      break;
    }
    case EmergenceMode::per_group: {
      const auto stats = feature_group_stats(freq);
      for (FeatureId i = 0; i < M; ++i) {
        try {
          psi[i] = feature_psi(stats[i], N);
        } catch (const DomainError& e) {
          throw DomainError("e_step: feature " + std::to_string(i) + ": " + e.what());
        }
        if (stats[i].classes >= 1 && psi[i] == 0.0) ++d.degenerate_features;
        psi[i] = std::max(psi[i], cfg.emergence.psi_floor);
      }
      break;
    }
  }

  const double alpha = cfg.smoothing;
  const double n_total = static_cast<double>(N) + alpha * static_cast<double>(M) * static_cast<double>(W);
  std::vector<std::vector<WeightEntry>> rows(M);
  detail::parallel_for(M, cfg.threads, [&](std::size_t i) {
    const auto cells = freq.row(static_cast<FeatureId>(i));
    const double n_i = static_cast<double>(freq.row_marginal(static_cast<FeatureId>(i))) + alpha * static_cast<double>(W);
    auto weigh = [&](ClassId j, double n_ij) {
      const double n_j = static_cast<double>(freq.col_marginal(j)) + alpha * static_cast<double>(M);
      try {
        return info::lutsenko_info(n_ij, n_i, n_j, n_total, psi[i]);
      } catch (const DomainError& e) {
        throw DomainError("e_step: cell (" + std::to_string(i) + "," + std::to_string(j) + "): " + e.what());
      }
    };
    auto& out = rows[i];
    if (alpha > 0.0) {
      out.reserve(W);
      std::size_t k = 0;
      for (ClassId j = 0; j < W; ++j) {
        double n_ij = alpha;
        if (k < cells.size() && cells[k].cls == j) n_ij += static_cast<double>(cells[k++].count);
        out.push_back({j, weigh(j, n_ij)});
      }
    } else {
      out.reserve(cells.size());
      for (const auto& c : cells) out.push_back({c.cls, weigh(c.cls, static_cast<double>(c.count))});
    }
  });

  InfoModel model(M, W);
  for (FeatureId i = 0; i < M; ++i) model.set_row(i, std::move(rows[i]));
  model.set_bias(detail::expand_bias(cfg.bias, W));
  model.emergence = cfg.emergence;
  model.provenance.total_count = N;
  model.provenance.smoothing = alpha;
  return model;
}

// ---------------------------------------------------------------------------
// Metrics

/// Van Rijsbergen F-measure (1 + b^2) P R / (b^2 P + R); 0 when P = R = 0.
inline double f_beta(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double den = b2 * precision + recall;
  if (den == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / den;
}

struct ClassMetrics {
  std::uint64_t support = 0;    // true instances
  std::uint64_t predicted = 0;  // predicted instances
  std::uint64_t true_positive = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct EvalReport {
  std::vector<ClassMetrics> per_class;
  /// (true class, predicted class) -> count, nonzero cells only.
  std::map<std::pair<ClassId, ClassId>, std::uint64_t> confusion;
  std::uint64_t examples = 0;
  std::size_t observed_classes = 0;
  double beta = 1.0;
  double accuracy = 0.0;
  /// Unweighted mean of per-class F over classes with support > 0.
  double mean_f = 0.0;

  nlohmann::ordered_json to_json(const Vocabulary* vocab = nullptr) const {
    nlohmann::ordered_json j;
    j["examples"] = examples;
    j["observed_classes"] = observed_classes;
    j["beta"] = beta;
    j["accuracy"] = accuracy;
    j["E_F_micro"] = mean_f;
    auto& classes = j["classes"] = nlohmann::ordered_json::array();
    for (ClassId c = 0; c < per_class.size(); ++c) {
      const auto& m = per_class[c];
      nlohmann::ordered_json row;
      if (vocab && c < vocab->classes.size())
        row["class"] = vocab->classes.name(c);
      else
        row["class"] = c;
      row["support"] = m.support;
      row["predicted"] = m.predicted;
      row["true_positive"] = m.true_positive;
      row["precision"] = m.precision;
      row["recall"] = m.recall;
      row["f"] = m.f;
      classes.push_back(std::move(row));
    }
    auto& conf = j["confusion"] = nlohmann::ordered_json::array();
    for (const auto& [key, n] : confusion) conf.push_back({key.first, key.second, n});
    return j;
  }
};

/// Predicts every example and aggregates per-class precision, recall and F_beta.
inline EvalReport evaluate(const InfoModel& model, std::span<const LabeledExample> examples, double beta = 1.0,
                           std::size_t threads = 1) {
  if (examples.empty()) throw ValidationError("evaluate: empty dataset");
  if (!(beta > 0.0)) throw ValidationError("evaluate: beta must be > 0");
  const std::size_t W = model.num_classes();
  for (std::size_t k = 0; k < examples.size(); ++k)
    if (examples[k].label >= W)
      throw ValidationError("evaluate: record " + std::to_string(k) + " has a label outside the model vocabulary");

  std::vector<ClassId> predicted(examples.size());
  detail::parallel_for(examples.size(), threads, [&](std::size_t k) {
    predicted[k] = predict(model, examples[k].features).cls;
  });

  EvalReport r;
  r.examples = examples.size();
  r.beta = beta;
  r.per_class.resize(W);
  std::uint64_t correct = 0;
  for (std::size_t k = 0; k < examples.size(); ++k) {
    const ClassId t = examples[k].label;
    const ClassId p = predicted[k];
    ++r.per_class[t].support;
    ++r.per_class[p].predicted;
    ++r.confusion[{t, p}];
    if (t == p) {
      ++r.per_class[t].true_positive;
      ++correct;
    }
  }
  double f_sum = 0.0;
  for (auto& m : r.per_class) {
    m.precision = m.predicted ? static_cast<double>(m.true_positive) / static_cast<double>(m.predicted) : 0.0;
    m.recall = m.support ? static_cast<double>(m.true_positive) / static_cast<double>(m.support) : 0.0;
    m.f = f_beta(m.precision, m.recall, beta);
    if (m.support > 0) {
      ++r.observed_classes;
      f_sum += m.f;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.examples);
  r.mean_f = f_sum / static_cast<double>(r.observed_classes);
  return r;
}

// ---------------------------------------------------------------------------
// M-step

struct MIteration {
  std::size_t iter = 0;
  double ef_before = 0.0;
  double ef_after = 0.0;
  std::size_t corrections = 0;
  std::size_t excluded_conflicts = 0;  // examples skipped as members of conflict groups
  bool accepted = false;

  std::string to_log_line() const {
    nlohmann::ordered_json j;
    j["iter"] = iter;
    j["E_F_before"] = ef_before;
    j["E_F_after"] = ef_after;
    j["corrections"] = corrections;
    j["excluded_conflicts"] = excluded_conflicts;
    j["accepted"] = accepted;
    return j.dump();
  }
};

struct MStepResult {
  InfoModel model;
  EvalReport before;
  EvalReport after;
  std::vector<MIteration> iterations;

  std::size_t accepted() const {
    return static_cast<std::size_t>(
        std::count_if(iterations.begin(), iterations.end(), [](const MIteration& it) { return it.accepted; }));
  }
};

using MStepLogger = std::function<void(const MIteration&)>;

/// One corrective pass over `examples` in order, mutating `model`. Returns the number of corrections.
///
/// For each misclassified example the true class's weight on every active feature is raised by
/// (S_pred - S_true + margin) / |features|, leaving S_true = S_pred + margin.
inline std::size_t correct_misclassified(InfoModel& model, std::span<const LabeledExample> examples,
                                         const std::vector<bool>& excluded, double margin) {
  std::size_t corrections = 0;
  std::vector<FeatureId> active;
  for (std::size_t k = 0; k < examples.size(); ++k) {
    if (excluded[k]) continue;
    const auto& ex = examples[k];
    active.clear();
    for (FeatureId f : ex.features)
      if (f < model.num_features()) active.push_back(f);
    if (active.empty()) continue;
    const auto s = score(model, active);
    const ClassId pred = argmax(s);
    if (pred == ex.label) continue;
    const double delta = (s[pred] - s[ex.label] + margin) / static_cast<double>(active.size());
    for (FeatureId f : active) model.add_weight(f, ex.label, delta);
    ++corrections;
  }
  return corrections;
}

/// Corrective loop: drop conflict groups, correct misclassified examples, and keep the
/// corrected model only if the mean F-measure rises by more than cfg.tolerance.
/// Repeats while rounds are accepted, at most cfg.max_m_iters rounds.
inline MStepResult m_step(const InfoModel& model, std::span<const LabeledExample> examples, const TrainConfig& cfg,
                          const MStepLogger& log = {}) {
  cfg.validate();
  MStepResult res{model, evaluate(model, examples, cfg.beta, cfg.threads), {}, {}};
  res.after = res.before;

  std::vector<bool> excluded(examples.size(), false);
  std::size_t n_excluded = 0;
  for (const auto& g : find_conflicts(examples))
    for (std::size_t k : g.indices) {
      excluded[k] = true;
      ++n_excluded;
    }

  for (std::size_t iter = 1; iter <= cfg.max_m_iters; ++iter) {
    InfoModel candidate = res.model;
    MIteration it;
    it.iter = iter;
    it.ef_before = res.after.mean_f;
    it.excluded_conflicts = n_excluded;
    it.corrections = correct_misclassified(candidate, examples, excluded, cfg.margin);
    if (it.corrections == 0) {
      it.ef_after = it.ef_before;
      res.iterations.push_back(it);
      if (log) log(it);
      break;
    }
    EvalReport trial = evaluate(candidate, examples, cfg.beta, cfg.threads);
    it.ef_after = trial.mean_f;
    it.accepted = trial.mean_f > res.after.mean_f + cfg.tolerance;
    res.iterations.push_back(it);
    if (log) log(it);
    if (!it.accepted) break;
    res.model = std::move(candidate);
    res.after = std::move(trial);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct FitResult {
  InfoModel model;
  EvalReport report;  // final model on the training set
  FrequencyMatrix frequencies;
  EStepDiagnostics diagnostics;
  std::vector<MIteration> iterations;
};

/// Step 0, E-step, then up to cfg.max_m_iters corrective rounds.
inline FitResult fit(const Dataset& data, const TrainConfig& cfg, const MStepLogger& log = {}) {
  cfg.validate();
  if (data.examples.empty()) throw ValidationError("empty dataset");
  const std::size_t M = data.vocab.features.size();
  const std::size_t W = data.vocab.classes.size();
  const std::size_t shards = std::max<std::size_t>(1, cfg.threads);

  FitResult out;
  out.frequencies = ingest(data.examples, M, W, shards, cfg.threads);
  out.model = e_step(out.frequencies, cfg, &out.diagnostics);
  out.model.vocab = data.vocab;
  out.model.vocab.freeze();
  if (cfg.max_m_iters > 0) {
    auto ms = m_step(out.model, data.examples, cfg, log);
    out.model = std::move(ms.model);
    out.report = std::move(ms.after);
    out.iterations = std::move(ms.iterations);
  } else {
    out.report = evaluate(out.model, data.examples, cfg.beta, cfg.threads);
  }
  return out;
}

} // namespace ina
