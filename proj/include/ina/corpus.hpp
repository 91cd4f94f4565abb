#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ina/errors.hpp"

namespace ina {

using FeatureId = std::uint32_t;
using ClassId = std::uint32_t;

/// Label value for records read without a (known) class.
inline constexpr ClassId kNoLabel = std::numeric_limits<ClassId>::max();

/// Active feature ids plus a class label. Features are kept sorted and unique.
struct LabeledExample {
  std::vector<FeatureId> features;
  ClassId label = kNoLabel;

  LabeledExample() = default;
  LabeledExample(std::vector<FeatureId> f, ClassId l) : features(std::move(f)), label(l) { normalize(); }

  void normalize() {
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());
  }

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

/// Dense id <-> name mapping for one namespace (features or classes).
class NameTable {
public:
  /// Id of `name`, inserting it if the table is not frozen. kNoLabel when frozen and unknown.
  std::uint32_t intern(std::string_view name) {
    if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
    if (frozen_) return kNoLabel;
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
  }

  std::uint32_t find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? kNoLabel : it->second;
  }

  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  static NameTable from_names(std::vector<std::string> names) {
    NameTable t;
    for (auto& n : names) {
      if (t.find(n) != kNoLabel) throw ValidationError("duplicate name in vocabulary: " + n);
      t.intern(n);
    }
    return t;
  }

  friend bool operator==(const NameTable& a, const NameTable& b) { return a.names_ == b.names_; }

private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
  bool frozen_ = false;
};

/// Feature and class names. M = features.size(), W = classes.size().
struct Vocabulary {
  NameTable features;
  NameTable classes;

  void freeze() {
    features.freeze();
    classes.freeze();
  }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

struct Dataset {
  Vocabulary vocab;
  std::vector<LabeledExample> examples;
};

// ---------------------------------------------------------------------------
// Binarization

enum class InputLayout : std::uint8_t { dense_numeric, sparse_tokens };

/// Indices k with raw[k] >= epsilon (boundary inclusive).
inline std::vector<FeatureId> binarize(std::span<const double> raw, double epsilon) {
  if (std::isnan(epsilon)) throw ValidationError("binarize: epsilon is NaN");
  std::vector<FeatureId> active;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (std::isnan(raw[k])) throw ValidationError("binarize: NaN at index " + std::to_string(k));
    if (raw[k] >= epsilon) active.push_back(static_cast<FeatureId>(k));
  }
  return active;
}

struct Binarizer {
  double epsilon = 0.5;
  InputLayout layout = InputLayout::dense_numeric;

  std::vector<FeatureId> operator()(std::span<const double> raw) const { return binarize(raw, epsilon); }
};

/// Default threshold for dense data: 128 for byte-range values (max > 1), else 0.5.
inline double auto_epsilon(double max_value) { return max_value > 1.0 ? 128.0 : 0.5; }

// ---------------------------------------------------------------------------
// Frequency matrix

struct CountCell {
  ClassId cls;
  std::uint64_t count;

  friend bool operator==(const CountCell&, const CountCell&) = default;
};

/// Immutable sparse co-occurrence counts N_ij with marginals N_i, N_j and total N.
///
/// Rows are features; each row holds its nonzero cells sorted by class id.
class FrequencyMatrix {
public:
  FrequencyMatrix() = default;

  FrequencyMatrix(std::size_t num_features, std::size_t num_classes)
      : rows_(num_features), row_sums_(num_features, 0), col_sums_(num_classes, 0) {}

  std::size_t num_features() const { return rows_.size(); }
  std::size_t num_classes() const { return col_sums_.size(); }
  std::uint64_t total() const { return total_; }
  std::uint64_t row_marginal(FeatureId i) const { return row_sums_.at(i); }
  std::uint64_t col_marginal(ClassId j) const { return col_sums_.at(j); }
  const std::vector<std::uint64_t>& row_marginals() const { return row_sums_; }
  const std::vector<std::uint64_t>& col_marginals() const { return col_sums_; }
  std::span<const CountCell> row(FeatureId i) const { return rows_.at(i); }

  std::size_t nonzeros() const {
    std::size_t nnz = 0;
    for (const auto& r : rows_) nnz += r.size();
    return nnz;
  }

  std::uint64_t count(FeatureId i, ClassId j) const {
    const auto& r = rows_.at(i);
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const CountCell& c, ClassId v) { return c.cls < v; });
    return (it != r.end() && it->cls == j) ? it->count : 0;
  }

  /// Builds from (feature, class, count) cells; duplicates are summed, zeros dropped.
  static FrequencyMatrix from_cells(std::size_t num_features, std::size_t num_classes,
                                    std::span<const std::pair<std::pair<FeatureId, ClassId>, std::uint64_t>> cells) {
    FrequencyMatrix m(num_features, num_classes);
    for (const auto& [key, n] : cells) {
      const auto [i, j] = key;
      if (i >= num_features || j >= num_classes) throw ValidationError("frequency cell out of range");
      if (n == 0) continue;
      m.rows_[i].push_back({j, n});
    }
    m.finish();
    return m;
  }

  /// Cell-wise sum of two matrices with equal dims.
  friend FrequencyMatrix merge(const FrequencyMatrix& a, const FrequencyMatrix& b) {
    if (a.num_features() != b.num_features() || a.num_classes() != b.num_classes())
      throw ValidationError("merge: dimension mismatch");
    FrequencyMatrix m(a.num_features(), a.num_classes());
    for (std::size_t i = 0; i < a.rows_.size(); ++i) {
      auto& out = m.rows_[i];
      out = a.rows_[i];
      out.insert(out.end(), b.rows_[i].begin(), b.rows_[i].end());
    }
    m.finish();
    return m;
  }

  friend bool operator==(const FrequencyMatrix&, const FrequencyMatrix&) = default;

private:
  friend class FrequencyCounter;

  // Sorts each row, folds duplicate classes and recomputes marginals.
  void finish() {
    std::fill(row_sums_.begin(), row_sums_.end(), 0);
    std::fill(col_sums_.begin(), col_sums_.end(), 0);
    total_ = 0;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      auto& r = rows_[i];
      std::sort(r.begin(), r.end(), [](const CountCell& x, const CountCell& y) { return x.cls < y.cls; });
      std::size_t w = 0;
      for (std::size_t k = 0; k < r.size(); ++k) {
        if (w > 0 && r[w - 1].cls == r[k].cls)
          r[w - 1].count += r[k].count;
        else
          r[w++] = r[k];
      }
      r.resize(w);
      for (const auto& c : r) {
        row_sums_[i] += c.count;
        col_sums_[c.cls] += c.count;
        total_ += c.count;
      }
    }
  }

  std::vector<std::vector<CountCell>> rows_;
  std::vector<std::uint64_t> row_sums_;
  std::vector<std::uint64_t> col_sums_;
  std::uint64_t total_ = 0;
};

/// Mutable accumulator used while streaming examples into counts.
class FrequencyCounter {
public:
  FrequencyCounter(std::size_t num_features, std::size_t num_classes)
      : num_features_(num_features), num_classes_(num_classes) {}

  /// Pre-sizes the cell table for about `pairs` increments.
  void reserve(std::size_t pairs) {
    const double cells = static_cast<double>(num_features_) * static_cast<double>(num_classes_);
    cells_.reserve(static_cast<std::size_t>(std::min(cells, static_cast<double>(pairs))));
  }

  /// Adds one example; `record` is used only for error messages.
  void add(const LabeledExample& ex, std::size_t record) {
    if (ex.label >= num_classes_)
      throw ValidationError("record " + std::to_string(record) + ": class id out of range");
    for (FeatureId f : ex.features) {
      if (f >= num_features_)
        throw ValidationError("record " + std::to_string(record) + ": feature id " + std::to_string(f) +
                              " out of range");
      ++cells_[key(f, ex.label)];
    }
  }

  FrequencyMatrix finish() const {
    FrequencyMatrix m(num_features_, num_classes_);
    for (const auto& [k, n] : cells_)
      m.rows_[static_cast<FeatureId>(k >> 32)].push_back({static_cast<ClassId>(k & 0xffffffffu), n});
    m.finish();
    return m;
  }

private:
  static std::uint64_t key(FeatureId i, ClassId j) { return (std::uint64_t{i} << 32) | j; }

  std::size_t num_features_;
  std::size_t num_classes_;
  std::unordered_map<std::uint64_t, std::uint64_t> cells_;
};

/// Step 0: one increment per (active feature, example) pair.
///
/// The stream is cut into `shards` contiguous ranges counted independently
/// (on up to `threads` workers) and merged; the result does not depend on
/// either value. Errors name the 0-based record index.
inline FrequencyMatrix ingest(std::span<const LabeledExample> examples, std::size_t num_features,
                              std::size_t num_classes, std::size_t shards = 1, std::size_t threads = 1) {
  shards = std::max<std::size_t>(1, std::min(shards, std::max<std::size_t>(1, examples.size())));
  threads = std::max<std::size_t>(1, std::min(threads, shards));

  std::vector<FrequencyMatrix> partial(shards);
  std::vector<std::exception_ptr> errors(shards);
  auto count_shard = [&](std::size_t s) {
    const std::size_t lo = examples.size() * s / shards;
    const std::size_t hi = examples.size() * (s + 1) / shards;
    try {
      FrequencyCounter counter(num_features, num_classes);
      std::size_t pairs = 0;
      for (std::size_t r = lo; r < hi; ++r) pairs += examples[r].features.size();
      counter.reserve(pairs);
      for (std::size_t r = lo; r < hi; ++r) counter.add(examples[r], r);
      partial[s] = counter.finish();
    } catch (...) {
      errors[s] = std::current_exception();
    }
  };

  if (threads == 1) {
    for (std::size_t s = 0; s < shards; ++s) count_shard(s);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t s = t; s < shards; s += threads) count_shard(s);
      });
    for (auto& th : pool) th.join();
  }
  // First failing shard in stream order wins, so the reported record is deterministic.
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  FrequencyMatrix out(num_features, num_classes);
  for (auto& p : partial) out = merge(out, p);
  return out;
}

// ---------------------------------------------------------------------------
// Conflicts and feature groups

/// Examples sharing one feature set but carrying at least two distinct labels.
struct ConflictGroup {
  std::vector<std::size_t> indices;
  std::vector<ClassId> labels;  // parallel to indices

  friend bool operator==(const ConflictGroup&, const ConflictGroup&) = default;
};

/// Groups by exact feature-set equality. Groups are ordered by their first index.
inline std::vector<ConflictGroup> find_conflicts(std::span<const LabeledExample> examples) {
  std::map<std::vector<FeatureId>, std::vector<std::size_t>> by_set;
  for (std::size_t k = 0; k < examples.size(); ++k) by_set[examples[k].features].push_back(k);

  std::vector<ConflictGroup> groups;
  for (auto& [set, idx] : by_set) {
    if (idx.size() < 2) continue;
    const ClassId first = examples[idx.front()].label;
    const bool mixed = std::any_of(idx.begin(), idx.end(), [&](std::size_t k) { return examples[k].label != first; });
    if (!mixed) continue;
    ConflictGroup g;
    g.indices = idx;
    for (std::size_t k : idx) g.labels.push_back(examples[k].label);
    groups.push_back(std::move(g));
  }
  std::sort(groups.begin(), groups.end(),
            [](const ConflictGroup& a, const ConflictGroup& b) { return a.indices.front() < b.indices.front(); });
  return groups;
}

/// W_g: number of classes a feature occurs in. N_g: the feature's total count N_i.
struct FeatureGroupStats {
  std::uint64_t classes = 0;
  std::uint64_t count = 0;

  friend bool operator==(const FeatureGroupStats&, const FeatureGroupStats&) = default;
};

inline std::vector<FeatureGroupStats> feature_group_stats(const FrequencyMatrix& freq) {
  std::vector<FeatureGroupStats> stats(freq.num_features());
  for (FeatureId i = 0; i < freq.num_features(); ++i)
    stats[i] = {freq.row(i).size(), freq.row_marginal(i)};
  return stats;
}

} // namespace ina
