#pragma once

// Readers for the two on-disk dataset layouts.
//
//   sparse: one JSON object per line, {"features": ["tok", ...], "label": "name"}
//   dense:  CSV with a header; a "label" column plus numeric feature columns,
//           binarized with a single global threshold.
//
// Both readers intern names into a Vocabulary. With a frozen vocabulary,
// unseen feature names are dropped and unseen labels become kNoLabel.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ina/corpus.hpp"
#include "ina/errors.hpp"

namespace ina {

enum class DatasetFormat : std::uint8_t { sparse_jsonl, dense_csv };

inline std::optional<DatasetFormat> parse_dataset_format(std::string_view s) {
  if (s == "jsonl" || s == "sparse_jsonl") return DatasetFormat::sparse_jsonl;
  if (s == "csv" || s == "dense_csv") return DatasetFormat::dense_csv;
  return std::nullopt;
}

struct ReadOptions {
  /// Malformed lines tolerated before the read fails.
  std::size_t max_errors = 0;
  /// Records without a label are malformed when set.
  bool require_label = true;
  /// Dense threshold; nullopt selects auto_epsilon() from the data's maximum.
  std::optional<double> epsilon = std::nullopt;
};

struct ReadReport {
  std::vector<std::string> skipped;  // "line N: reason" per tolerated bad line
  double epsilon = std::numeric_limits<double>::quiet_NaN();  // dense threshold actually used
};

namespace detail {

class LineErrors {
public:
  LineErrors(std::size_t max_errors, ReadReport& report) : max_(max_errors), report_(report) {}

  void fail(std::size_t line, const std::string& why) {
    std::string msg = "line " + std::to_string(line) + ": " + why;
    if (report_.skipped.size() >= max_) throw ValidationError(msg);
    report_.skipped.push_back(std::move(msg));
  }

private:
  std::size_t max_;
  ReadReport& report_;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

} // namespace detail

/// Reads one-JSON-object-per-line records. Blank lines are skipped.
inline std::vector<LabeledExample> read_sparse_jsonl(std::istream& in, Vocabulary& vocab, const ReadOptions& opt,
                                                     ReadReport* report = nullptr) {
  ReadReport local;
  ReadReport& rep = report ? *report : local;
  detail::LineErrors errors(opt.max_errors, rep);
  std::vector<LabeledExample> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (detail::trim(line).empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      errors.fail(lineno, "not a JSON object");
      continue;
    }
    auto feats = rec.find("features");
    if (feats == rec.end() || !feats->is_array()) {
      errors.fail(lineno, "missing \"features\" array");
      continue;
    }
    if (!std::all_of(feats->begin(), feats->end(), [](const nlohmann::json& t) { return t.is_string(); })) {
      errors.fail(lineno, "feature tokens must be strings");
      continue;
    }
    auto lab = rec.find("label");
    if (lab != rec.end() && !lab->is_string()) {
      errors.fail(lineno, "\"label\" must be a string");
      continue;
    }
    if (lab == rec.end() && opt.require_label) {
      errors.fail(lineno, "missing \"label\"");
      continue;
    }
    if (opt.require_label && feats->empty()) {
      errors.fail(lineno, "empty feature list");
      continue;
    }
    LabeledExample ex;
    for (const auto& tok : *feats)
      if (FeatureId id = vocab.features.intern(tok.get_ref<const std::string&>()); id != kNoLabel)
        ex.features.push_back(id);
    ex.label = lab == rec.end() ? kNoLabel : vocab.classes.intern(lab->get_ref<const std::string&>());
    ex.normalize();
    out.push_back(std::move(ex));
  }
  return out;
}

/// Reads a headed CSV; every column except "label" is a numeric feature.
inline std::vector<LabeledExample> read_dense_csv(std::istream& in, Vocabulary& vocab, const ReadOptions& opt,
                                                  ReadReport* report = nullptr) {
  ReadReport local;
  ReadReport& rep = report ? *report : local;
  detail::LineErrors errors(opt.max_errors, rep);

  std::string header;
  if (!std::getline(in, header)) return {};
  const auto columns = detail::split_csv(header);
  std::optional<std::size_t> label_col;
  std::vector<FeatureId> column_feature(columns.size(), kNoLabel);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == "label") {
      if (label_col) throw ValidationError("line 1: duplicate \"label\" column");
      label_col = c;
    } else {
      column_feature[c] = vocab.features.intern(columns[c]);
    }
  }
  if (!label_col && opt.require_label) throw ValidationError("line 1: no \"label\" column");

  struct Row {
    std::vector<double> values;  // indexed by column
    ClassId label;
  };
  std::vector<Row> rows;
  double max_value = -std::numeric_limits<double>::infinity();
  std::string line;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != columns.size()) {
      errors.fail(lineno, "expected " + std::to_string(columns.size()) + " fields, got " +
                              std::to_string(cells.size()));
      continue;
    }
    Row row{std::vector<double>(columns.size(), 0.0), kNoLabel};
    bool ok = true;
    for (std::size_t c = 0; c < cells.size() && ok; ++c) {
      if (label_col && c == *label_col) {
        if (cells[c].empty()) {
          errors.fail(lineno, "empty label");
          ok = false;
        } else {
          row.label = vocab.classes.intern(cells[c]);
        }
        continue;
      }
      auto v = detail::parse_double(cells[c]);
      if (!v || std::isnan(*v)) {
        errors.fail(lineno, "non-numeric value in column \"" + std::string(columns[c]) + "\"");
        ok = false;
        break;
      }
      row.values[c] = *v;
      if (column_feature[c] != kNoLabel) max_value = std::max(max_value, *v);
    }
    if (ok) rows.push_back(std::move(row));
  }

  const double eps = opt.epsilon ? *opt.epsilon : auto_epsilon(max_value);
  rep.epsilon = eps;
  std::vector<LabeledExample> out;
  out.reserve(rows.size());
  for (auto& row : rows) {
    LabeledExample ex;
    for (std::size_t c : binarize(row.values, eps))
      if (column_feature[c] != kNoLabel) ex.features.push_back(column_feature[c]);
    ex.label = row.label;
    ex.normalize();
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<LabeledExample> read_dataset(std::istream& in, DatasetFormat format, Vocabulary& vocab,
                                                const ReadOptions& opt, ReadReport* report = nullptr) {
  return format == DatasetFormat::sparse_jsonl ? read_sparse_jsonl(in, vocab, opt, report)
                                               : read_dense_csv(in, vocab, opt, report);
}

} // namespace ina
