#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ina/corpus.hpp"
#include "ina/errors.hpp"
#include "ina/info_math.hpp"

namespace ina {

enum class Activation : std::uint8_t { identity = 0, softmax = 1 };

inline std::optional<Activation> parse_activation(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "softmax") return Activation::softmax;
  return std::nullopt;
}

struct WeightEntry {
  ClassId cls;
  InfoBits weight;

  friend bool operator==(const WeightEntry&, const WeightEntry&) = default;
};

/// Training metadata carried with a model.
struct Provenance {
  std::uint64_t total_count = 0;  // N
  double smoothing = 0.0;         // Laplace alpha, 0 when off
  double epsilon = std::numeric_limits<double>::quiet_NaN();  // dense binarization threshold, NaN for sparse input
  std::int64_t build_time = 0;    // unix seconds

  friend bool operator==(const Provenance& a, const Provenance& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.total_count == b.total_count && same(a.smoothing, b.smoothing) && same(a.epsilon, b.epsilon) &&
           a.build_time == b.build_time;
  }
};

/// Trained artifact: sparse information weights I_ij in bits plus a per-class bias I_0.
///
/// Rows are features; each row is sorted by class id. A missing entry is a zero weight.
class InfoModel {
public:
  InfoModel() = default;
  InfoModel(std::size_t num_features, std::size_t num_classes)
      : rows_(num_features), bias_(num_classes, 0.0) {}

  std::size_t num_features() const { return rows_.size(); }
  std::size_t num_classes() const { return bias_.size(); }

  std::span<const WeightEntry> row(FeatureId i) const { return rows_.at(i); }

  std::size_t nonzeros() const {
    std::size_t nnz = 0;
    for (const auto& r : rows_) nnz += r.size();
    return nnz;
  }

  std::optional<InfoBits> weight(FeatureId i, ClassId j) const {
    const auto& r = rows_.at(i);
    auto it = lower(r, j);
    if (it == r.end() || it->cls != j) return std::nullopt;
    return it->weight;
  }

  /// Sets I_ij, creating the entry if absent.
  void set_weight(FeatureId i, ClassId j, InfoBits w) { slot(i, j) = w; }

  /// I_ij += delta, creating the entry (from 0) if absent.
  void add_weight(FeatureId i, ClassId j, InfoBits delta) { slot(i, j) += delta; }

  /// Replaces a whole row; entries must be sorted by class with no duplicates.
  void set_row(FeatureId i, std::vector<WeightEntry> entries) {
    check_class_ids(entries);
    rows_.at(i) = std::move(entries);
  }

  const std::vector<InfoBits>& bias() const { return bias_; }
  void set_bias(std::vector<InfoBits> b) {
    if (b.size() != bias_.size()) throw ValidationError("bias length must equal class count");
    for (double v : b)
      if (!std::isfinite(v)) throw ValidationError("bias must be finite");
    bias_ = std::move(b);
  }

  EmergenceConfig emergence;
  Activation activation = Activation::identity;
  Vocabulary vocab;
  Provenance provenance;

  friend bool operator==(const InfoModel&, const InfoModel&) = default;

private:
  using Row = std::vector<WeightEntry>;

  static Row::const_iterator lower(const Row& r, ClassId j) {
    return std::lower_bound(r.begin(), r.end(), j, [](const WeightEntry& e, ClassId v) { return e.cls < v; });
  }

  InfoBits& slot(FeatureId i, ClassId j) {
    if (j >= bias_.size()) throw ValidationError("class id out of range");
    auto& r = rows_.at(i);
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const WeightEntry& e, ClassId v) { return e.cls < v; });
    if (it == r.end() || it->cls != j) it = r.insert(it, WeightEntry{j, 0.0});
    return it->weight;
  }

  void check_class_ids(const Row& entries) const {
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (entries[k].cls >= bias_.size()) throw ValidationError("class id out of range");
      if (k > 0 && entries[k - 1].cls >= entries[k].cls) throw ValidationError("row entries not strictly sorted");
    }
  }

  std::vector<Row> rows_;
  std::vector<InfoBits> bias_;
};

/// S_j = sum of I_ij over active features i, plus bias_j. Unknown or unweighted features add nothing.
inline std::vector<InfoBits> score(const InfoModel& model, std::span<const FeatureId> features) {
  std::vector<InfoBits> s = model.bias();
  for (FeatureId f : features) {
    if (f >= model.num_features()) continue;
    for (const auto& e : model.row(f)) s[e.cls] += e.weight;
  }
  return s;
}

/// f(S) for the configured activation. Softmax is taken over bits (base 2).
inline std::vector<double> activate(Activation act, std::span<const InfoBits> s) {
  std::vector<double> out(s.begin(), s.end());
  if (act == Activation::identity || out.empty()) return out;
  const double top = *std::max_element(out.begin(), out.end());
  double z = 0.0;
  for (double& v : out) z += (v = std::exp2(v - top));
  for (double& v : out) v /= z;
  return out;
}

struct RankedClass {
  ClassId cls;
  InfoBits score;

  friend bool operator==(const RankedClass&, const RankedClass&) = default;
};

struct Prediction {
  ClassId cls = kNoLabel;
  InfoBits score = 0.0;
  std::vector<RankedClass> ranking;  // top-k, score desc then class id asc
};

/// Classes ordered by (score desc, class id asc), truncated to k.
inline std::vector<RankedClass> rank_scores(std::span<const InfoBits> s, std::size_t k) {
  std::vector<RankedClass> all;
  all.reserve(s.size());
  for (ClassId j = 0; j < s.size(); ++j) all.push_back({j, s[j]});
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const RankedClass& a, const RankedClass& b) {
                      return a.score > b.score || (a.score == b.score && a.cls < b.cls);
                    });
  all.resize(k);
  return all;
}

/// Index of the maximum, lowest index on ties.
inline ClassId argmax(std::span<const double> v) {
  ClassId best = 0;
  for (ClassId j = 1; j < v.size(); ++j)
    if (v[j] > v[best]) best = j;
  return best;
}

/// argmax_j f(S_j). Every supported activation is monotone, so ranking uses S directly.
inline Prediction predict(const InfoModel& model, std::span<const FeatureId> features, std::size_t k = 1) {
  if (k == 0) throw ValidationError("predict: k must be >= 1");
  Prediction p;
  if (model.num_classes() == 0) return p;
  const auto s = score(model, features);
  p.ranking = rank_scores(s, k);
  p.cls = p.ranking.front().cls;
  p.score = p.ranking.front().score;
  return p;
}

/// Feature whose weights were all zeroed by psi_g = 0 (it occurs in a single class).
inline bool is_degenerate_group_feature(const InfoModel& model, FeatureId i) {
  if (model.emergence.mode != EmergenceMode::per_group) return false;
  const auto r = model.row(i);
  return !r.empty() && std::all_of(r.begin(), r.end(), [](const WeightEntry& e) { return e.weight == 0.0; });
}

/// Human-readable audit listing: top-n weights per class, then degenerate-feature warnings.
inline void write_inspect(std::ostream& out, const InfoModel& model, std::size_t top_n) {
  const auto& vf = model.vocab.features;
  const auto& vc = model.vocab.classes;
  auto fname = [&](FeatureId i) { return i < vf.size() ? vf.name(i) : "#" + std::to_string(i); };
  auto cname = [&](ClassId j) { return j < vc.size() ? vc.name(j) : "#" + std::to_string(j); };

  std::vector<std::vector<std::pair<InfoBits, FeatureId>>> per_class(model.num_classes());
  for (FeatureId i = 0; i < model.num_features(); ++i)
    for (const auto& e : model.row(i)) per_class[e.cls].push_back({e.weight, i});

  out << "features\t" << model.num_features() << "\nclasses\t" << model.num_classes() << "\nweights\t"
      << model.nonzeros() << "\nemergence\t" << to_string(model.emergence.mode) << "\n";
  char buf[64];
  for (ClassId j = 0; j < model.num_classes(); ++j) {
    auto& v = per_class[j];
    const std::size_t n = std::min(top_n, v.size());
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n), v.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    std::snprintf(buf, sizeof buf, "%.6f", model.bias()[j]);
    out << "class\t" << cname(j) << "\tbias\t" << buf << "\n";
    for (std::size_t k = 0; k < n; ++k) {
      std::snprintf(buf, sizeof buf, "%.6f", v[k].first);
      out << "  " << fname(v[k].second) << "\t" << buf << "\n";
    }
  }
  std::size_t degenerate = 0;
  for (FeatureId i = 0; i < model.num_features(); ++i) {
    if (!is_degenerate_group_feature(model, i)) continue;
    ++degenerate;
    out << "warning\tpsi_g=0\t" << fname(i) << "\tsingle-class feature carries zero weight\n";
  }
  if (degenerate > 0) out << "warning\tdegenerate_features\t" << degenerate << "\n";
}

} // namespace ina
