// Copyright 2026 The FusionPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Confusion matrices and accuracy / recall / precision / F1 reports.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fusionpool/error.hpp"
#include "fusionpool/fusion_pool.hpp"
#include "fusionpool/heads.hpp"

namespace fusionpool {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;  // classes × classes

  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t c = 0; c < classes; ++c) t += at(c, c);
    return t;
  }
  std::uint64_t row_sum(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < classes; ++j) s += at(c, j);
    return s;
  }
  std::uint64_t col_sum(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < classes; ++i) s += at(i, c);
    return s;
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const std::uint32_t> truth,
                                 std::span<const std::uint32_t> predicted, std::size_t classes) {
  if (truth.size() != predicted.size()) {
    fail(ErrorCode::kInvalidArgument, "label lists differ in length (" +
                                          std::to_string(truth.size()) + " vs " +
                                          std::to_string(predicted.size()) + ")");
  }
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(classes * classes, 0);
  for (std::size_t n = 0; n < truth.size(); ++n) {
    if (truth[n] >= classes || predicted[n] >= classes) {
      fail(ErrorCode::kInvalidArgument, "label out of range at position " + std::to_string(n));
    }
    ++cm.counts[truth[n] * classes + predicted[n]];
  }
  return cm;
}

// One-vs-rest counts for class c.
struct BinaryCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline BinaryCounts binary_counts(const ConfusionMatrix& cm, std::size_t c) {
  BinaryCounts b;
  b.tp = cm.at(c, c);
  b.fp = cm.col_sum(c) - b.tp;
  b.fn = cm.row_sum(c) - b.tp;
  b.tn = cm.total() - b.tp - b.fp - b.fn;
  return b;
}

// Percentages. A zero denominator yields 0 and sets the matching flag.
struct Scores {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  bool recall_undefined = false;
  bool precision_undefined = false;
  bool f1_undefined = false;
};

inline double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

inline Scores scores_from_counts(const BinaryCounts& b) {
  Scores s;
  const auto rd = b.tp + b.fn, pd = b.tp + b.fp;
  s.recall_undefined = rd == 0;
  s.precision_undefined = pd == 0;
  s.recall = rd ? 100.0 * static_cast<double>(b.tp) / static_cast<double>(rd) : 0.0;
  s.precision = pd ? 100.0 * static_cast<double>(b.tp) / static_cast<double>(pd) : 0.0;
  s.f1_undefined = s.precision + s.recall == 0.0;
  s.f1 = f1_score(s.precision, s.recall);
  return s;
}

enum class Averaging { kBinaryPositive, kMacro };

struct ClassScores {
  std::string name;
  Scores scores;
};

struct MetricsReport {
  Averaging averaging = Averaging::kMacro;
  std::optional<std::uint32_t> positive_class;
  std::uint64_t samples = 0;
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  bool undefined = false;  // some aggregate hit a zero denominator
  std::vector<ClassScores> per_class;
};

// Binary mode when `positive_class` is set, macro averages otherwise.
// Accuracy is trace / total in both modes.
inline MetricsReport metrics(const ConfusionMatrix& cm, std::optional<std::uint32_t> positive_class,
                             std::span<const std::string> class_names = {}) {
  const auto total = cm.total();
  if (total == 0) fail(ErrorCode::kInvalidArgument, "confusion matrix is empty");
  if (positive_class && *positive_class >= cm.classes) {
    fail(ErrorCode::kInvalidArgument, "positive class out of range");
  }
  MetricsReport r;
  r.samples = total;
  r.accuracy = 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
  for (std::size_t c = 0; c < cm.classes; ++c) {
    ClassScores cs;
    cs.name = c < class_names.size() ? class_names[c] : std::to_string(c);
    cs.scores = scores_from_counts(binary_counts(cm, c));
    r.per_class.push_back(std::move(cs));
  }
  if (positive_class) {
    r.averaging = Averaging::kBinaryPositive;
    r.positive_class = positive_class;
    const auto& s = r.per_class[*positive_class].scores;
    r.recall = s.recall;
    r.precision = s.precision;
    r.f1 = s.f1;
    r.undefined = s.recall_undefined || s.precision_undefined || s.f1_undefined;
  } else {
    r.averaging = Averaging::kMacro;
    for (const auto& cs : r.per_class) {
      r.recall += cs.scores.recall;
      r.precision += cs.scores.precision;
      r.f1 += cs.scores.f1;
      r.undefined = r.undefined || cs.scores.recall_undefined || cs.scores.precision_undefined ||
                    cs.scores.f1_undefined;
    }
    const double C = static_cast<double>(cm.classes);
    r.recall /= C;
    r.precision /= C;
    r.f1 /= C;
  }
  return r;
}

struct Evaluation {
  ConfusionMatrix confusion;
  MetricsReport report;
};

// Test labels are matched to the head's classes by name (case-insensitive).
inline Evaluation evaluate(const TrainedHead& head, const FeaturePool& test,
                           std::optional<std::uint32_t> positive_class = std::nullopt, int jobs = 1) {
  LabelSpace space{head.class_names};
  std::vector<std::uint32_t> remap(test.labels.size());
  for (std::size_t c = 0; c < test.labels.size(); ++c) {
    const auto hit = space.find(test.labels.classes[c]);
    if (!hit) {
      fail(ErrorCode::kUnknownLabel,
           "test class '" + test.labels.classes[c] + "' is unknown to the head");
    }
    remap[c] = *hit;
  }
  if (test.dim() != head.dim) {
    fail(ErrorCode::kDimensionMismatch, "test pool dimension " + std::to_string(test.dim()) +
                                            " does not match head dimension " +
                                            std::to_string(head.dim));
  }
  std::vector<std::uint32_t> truth(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) truth[i] = remap[test.records[i].global_class];
  const auto pred = predict(head, test, jobs);
  Evaluation e;
  e.confusion = confusion(truth, pred, head.class_count());
  e.report = metrics(e.confusion, positive_class, head.class_names);
  return e;
}

// ---- output formats ----

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

// `metric,scope,value` records; scope is "overall" or a class name.
inline std::string report_csv(const MetricsReport& r) {
  std::ostringstream o;
  o << "metric,scope,value\n";
  o << "samples,overall," << r.samples << "\n";
  o << "accuracy,overall," << detail::full(r.accuracy) << "\n";
  o << "recall,overall," << detail::full(r.recall) << "\n";
  o << "precision,overall," << detail::full(r.precision) << "\n";
  o << "f1,overall," << detail::full(r.f1) << "\n";
  o << "undefined,overall," << (r.undefined ? 1 : 0) << "\n";
  for (const auto& c : r.per_class) {
    const auto name = detail::csv_field(c.name);
    o << "recall," << name << "," << detail::full(c.scores.recall) << "\n";
    o << "precision," << name << "," << detail::full(c.scores.precision) << "\n";
    o << "f1," << name << "," << detail::full(c.scores.f1) << "\n";
  }
  return o.str();
}

inline std::string confusion_csv(const ConfusionMatrix& cm, std::span<const std::string> names) {
  std::ostringstream o;
  o << "true\\pred";
  for (std::size_t c = 0; c < cm.classes; ++c) {
    o << "," << detail::csv_field(c < names.size() ? names[c] : std::to_string(c));
  }
  o << "\n";
  for (std::size_t i = 0; i < cm.classes; ++i) {
    o << detail::csv_field(i < names.size() ? names[i] : std::to_string(i));
    for (std::size_t j = 0; j < cm.classes; ++j) o << "," << cm.at(i, j);
    o << "\n";
  }
  return o.str();
}

inline std::string report_text(const MetricsReport& r) {
  std::ostringstream o;
  const char* mode = r.averaging == Averaging::kMacro ? "macro" : "binary";
  o << "samples   " << r.samples << "\n";
  o << "averaging " << mode;
  if (r.positive_class) o << " (positive: " << r.per_class[*r.positive_class].name << ")";
  o << "\n\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %9s %9s %9s\n", "class", "recall", "precision", "f1");
  o << line;
  for (const auto& c : r.per_class) {
    std::snprintf(line, sizeof line, "%-20s %9.2f %9.2f %9.2f%s\n", c.name.c_str(), c.scores.recall,
                  c.scores.precision, c.scores.f1,
                  (c.scores.recall_undefined || c.scores.precision_undefined) ? "  (undefined)" : "");
    o << line;
  }
  o << "\n";
  std::snprintf(line, sizeof line, "accuracy  %.2f\nrecall    %.2f\nprecision %.2f\nf1        %.2f\n",
                r.accuracy, r.recall, r.precision, r.f1);
  o << line;
  if (r.undefined) o << "note: some scores had a zero denominator and were set to 0\n";
  return o.str();
}

}  // namespace fusionpool
