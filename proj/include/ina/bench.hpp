#pragma once

// Seeded synthetic datasets and the Step 0 + E-step timing harness.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ina/corpus.hpp"
#include "ina/training.hpp"

namespace ina {

struct SyntheticSpec {
  std::size_t examples = 1000;
  std::size_t features = 1000;  // M
  std::size_t classes = 10;     // W
  std::size_t active = 20;      // features drawn per example (before dedup)
  std::size_t prototype = 40;   // class-specific features per class
  double feature_noise = 0.3;   // chance a draw ignores the class prototype
  double label_noise = 0.0;     // chance the label is replaced by a random class
  std::uint64_t seed = 1;
};

namespace detail {

// mt19937_64 output is fully specified; the reductions below avoid the
// implementation-defined std distributions so datasets match across platforms.
class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed) : gen_(seed) {}
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

private:
  std::mt19937_64 gen_;
};

} // namespace detail

inline Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.features == 0 || spec.classes == 0) throw ValidationError("synthetic: need M >= 1 and W >= 1");
  detail::SeededRng rng(spec.seed);
  Dataset d;
  for (std::size_t i = 0; i < spec.features; ++i) d.vocab.features.intern("f" + std::to_string(i));
  for (std::size_t j = 0; j < spec.classes; ++j) d.vocab.classes.intern("c" + std::to_string(j));
  d.vocab.freeze();

  std::vector<std::vector<FeatureId>> prototypes(spec.classes);
  for (auto& p : prototypes)
    for (std::size_t k = 0; k < std::max<std::size_t>(1, spec.prototype); ++k)
      p.push_back(static_cast<FeatureId>(rng.below(spec.features)));

  d.examples.reserve(spec.examples);
  for (std::size_t n = 0; n < spec.examples; ++n) {
    const auto cls = static_cast<ClassId>(rng.below(spec.classes));
    LabeledExample ex;
    for (std::size_t k = 0; k < std::max<std::size_t>(1, spec.active); ++k) {
      if (rng.unit() < spec.feature_noise)
        ex.features.push_back(static_cast<FeatureId>(rng.below(spec.features)));
      else
        ex.features.push_back(prototypes[cls][rng.below(prototypes[cls].size())]);
    }
    ex.label = rng.unit() < spec.label_noise ? static_cast<ClassId>(rng.below(spec.classes)) : cls;
    ex.normalize();
    d.examples.push_back(std::move(ex));
  }
  return d;
}

struct BenchPoint {
  std::size_t examples = 0;
  double seconds = 0.0;  // median over repetitions
  std::size_t nonzeros = 0;
  std::uint64_t total = 0;  // N
};

struct BenchResult {
  std::vector<BenchPoint> points;
  double slope = 0.0;  // least-squares slope of log(seconds) vs log(examples)
};

/// Least-squares slope of log y against log x.
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ValidationError("log_log_slope: need >= 2 paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// Times ingest + e_step (no I/O, no generation) at each size; median of `reps` runs
/// after one untimed warm-up run.
inline BenchResult run_bench(const std::vector<std::size_t>& sizes, SyntheticSpec base, std::size_t reps = 3,
                             std::size_t threads = 1) {
  BenchResult out;
  TrainConfig cfg;
  cfg.threads = threads;
  std::vector<double> xs, ys;
  for (std::size_t n : sizes) {
    SyntheticSpec spec = base;
    spec.examples = n;
    const Dataset data = make_synthetic(spec);
    std::vector<double> times;
    BenchPoint pt;
    pt.examples = n;
    for (std::size_t r = 0; r <= std::max<std::size_t>(1, reps); ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto freq = ingest(data.examples, spec.features, spec.classes, threads, threads);
      const auto model = e_step(freq, cfg);
      const auto t1 = std::chrono::steady_clock::now();
      if (r > 0) times.push_back(std::chrono::duration<double>(t1 - t0).count());
      pt.nonzeros = model.nonzeros();
      pt.total = freq.total();
    }
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
    pt.seconds = times[times.size() / 2];
    xs.push_back(static_cast<double>(n));
    ys.push_back(pt.seconds);
    out.points.push_back(pt);
  }
  out.slope = xs.size() >= 2 ? log_log_slope(xs, ys) : 0.0;
  return out;
}

} // namespace ina
