#pragma once

// Evaluation statistics: Pearson correlation for pointwise benchmarks,
// positive-class F1 for binary/pairwise benchmarks, nominal Krippendorff's
// alpha for annotation studies, and corpus length statistics.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glider/core.hpp"
#include "glider/json_io.hpp"
#include "glider/prompting.hpp"

namespace glider {

struct DegenerateInput {
  std::string detail;
};

class PairedScores {
 public:
  PairedScores(std::vector<double> predicted, std::vector<double> gold)
      : predicted_(std::move(predicted)), gold_(std::move(gold)) {
    if (predicted_.empty() || predicted_.size() != gold_.size()) {
      throw ValidationError("paired_lengths", "predicted and gold must have the same non-zero length");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(predicted_.begin(), predicted_.end(), finite) ||
        !std::all_of(gold_.begin(), gold_.end(), finite)) {
      throw ValidationError("paired_finite", "scores must be finite");
    }
  }

  const std::vector<double>& predicted() const noexcept { return predicted_; }
  const std::vector<double>& gold() const noexcept { return gold_; }
  std::size_t size() const noexcept { return gold_.size(); }

 private:
  std::vector<double> predicted_;
  std::vector<double> gold_;
};

/// Sample Pearson r from centred sums; the normalisation constant cancels.
inline Result<double, DegenerateInput> pearson(const PairedScores& s) {
  const auto n = static_cast<double>(s.size());
  double mean_x = 0, mean_y = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    mean_x += s.predicted()[i];
    mean_y += s.gold()[i];
  }
  mean_x /= n;
  mean_y /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double dx = s.predicted()[i] - mean_x;
    const double dy = s.gold()[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return DegenerateInput{"zero variance in predicted or gold scores"};
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// F1 of the positive class (label 1): 2TP / (2TP + FP + FN).
inline Result<double, DegenerateInput> f1_binary(std::span<const int> predicted, std::span<const int> gold) {
  if (predicted.empty() || predicted.size() != gold.size()) {
    throw ValidationError("paired_lengths", "predicted and gold must have the same non-zero length");
  }
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if ((predicted[i] != 0 && predicted[i] != 1) || (gold[i] != 0 && gold[i] != 1)) {
      throw ValidationError("binary_labels", "labels must be 0 or 1");
    }
    if (predicted[i] == 1 && gold[i] == 1) ++tp;
    if (predicted[i] == 1 && gold[i] == 0) ++fp;
    if (predicted[i] == 0 && gold[i] == 1) ++fn;
  }
  const long denom = 2 * tp + fp + fn;
  if (denom == 0) return DegenerateInput{"F1 undefined without positive labels or predictions"};
  return static_cast<double>(2 * tp) / static_cast<double>(denom);
}

/// Items x annotators grid of optional nominal labels.
class AnnotationMatrix {
 public:
  using Label = std::optional<std::string>;

  explicit AnnotationMatrix(std::vector<std::vector<Label>> rows) : rows_(std::move(rows)) {
    if (rows_.size() < 2) throw ValidationError("annotation_items", "need at least 2 items");
    const auto width = rows_.front().size();
    if (width < 2) throw ValidationError("annotation_annotators", "need at least 2 annotators");
    bool pairable = false;
    for (const auto& row : rows_) {
      if (row.size() != width) throw ValidationError("annotation_shape", "rows differ in annotator count");
      pairable |= std::count_if(row.begin(), row.end(), [](const Label& l) { return l.has_value(); }) >= 2;
    }
    if (!pairable) throw ValidationError("annotation_pairable", "no item carries two or more labels");
  }

  static AnnotationMatrix from_ints(const std::vector<std::vector<std::optional<int>>>& rows) {
    std::vector<std::vector<Label>> out;
    for (const auto& row : rows) {
      auto& r = out.emplace_back();
      for (const auto& v : row) r.push_back(v ? Label(std::to_string(*v)) : std::nullopt);
    }
    return AnnotationMatrix(std::move(out));
  }

  const std::vector<std::vector<Label>>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::vector<Label>> rows_;
};

/// alpha = 1 - D_o / D_e from the coincidence matrix; items with fewer than
/// two labels are not pairable and are skipped.
inline Result<double, DegenerateInput> krippendorff_alpha_nominal(const AnnotationMatrix& m) {
  std::map<std::string, double> n_c;  // coincidence marginals
  double disagree = 0;                // sum of off-diagonal coincidences
  for (const auto& row : m.rows()) {
    std::map<std::string, double> counts;
    double m_u = 0;
    for (const auto& label : row) {
      if (!label) continue;
      counts[*label] += 1;
      m_u += 1;
    }
    if (m_u < 2) continue;
    double same = 0;
    for (const auto& [label, c] : counts) {
      n_c[label] += c;
      same += c * c;
    }
    disagree += (m_u * m_u - same) / (m_u - 1);
  }
  double n = 0, sum_sq = 0;
  for (const auto& [label, c] : n_c) {
    n += c;
    sum_sq += c * c;
  }
  const double expected = (n * n - sum_sq) / (n * (n - 1));
  if (expected == 0.0) return DegenerateInput{"expected disagreement is zero (a single category)"};
  const double observed = disagree / n;
  return 1.0 - observed / expected;
}

enum class WordBasis { DataOnly, FullPrompt };

inline std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = detail::is_space(c);
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

/// Associative aggregate; merge() lets partial results combine in any order.
struct CorpusStats {
  std::size_t count = 0;
  std::size_t min_words = 0;
  std::size_t max_words = 0;
  std::size_t total_words = 0;
  std::map<std::string, std::size_t> scales;
  std::map<std::string, std::size_t> domains;

  void add(std::size_t words, const std::string& scale, const std::string& domain) {
    min_words = count == 0 ? words : std::min(min_words, words);
    max_words = count == 0 ? words : std::max(max_words, words);
    total_words += words;
    ++count;
    ++scales[scale];
    ++domains[domain];
  }

  void merge(const CorpusStats& other) {
    if (other.count == 0) return;
    min_words = count == 0 ? other.min_words : std::min(min_words, other.min_words);
    max_words = count == 0 ? other.max_words : std::max(max_words, other.max_words);
    total_words += other.total_words;
    count += other.count;
    for (const auto& [k, v] : other.scales) scales[k] += v;
    for (const auto& [k, v] : other.domains) domains[k] += v;
  }

  double mean_words() const {
    if (count == 0) return 0.0;
    return std::round(static_cast<double>(total_words) / static_cast<double>(count) * 1000.0) / 1000.0;
  }

  json to_json() const {
    return json{{"min_words", min_words}, {"max_words", max_words}, {"mean_words", mean_words()},
                {"count", count},         {"scales", scales},       {"domains", domains}};
  }
};

inline std::size_t record_words(const EvaluationRecord& record, WordBasis basis) {
  if (basis == WordBasis::FullPrompt) return count_words(build_judge_prompt(record));
  std::size_t words = 0;
  for (const auto& f : record.data_fields()) words += count_words(f.body);
  return words;
}

inline Result<CorpusStats, DegenerateInput> corpus_stats(const std::vector<EvaluationRecord>& records,
                                                         WordBasis basis = WordBasis::FullPrompt) {
  if (records.empty()) return DegenerateInput{"corpus_stats needs at least one record"};
  CorpusStats stats;
  for (const auto& r : records) {
    stats.add(record_words(r, basis), std::string(scale_name(r.rubric().scale())),
              r.metadata_value("domain", "unknown"));
  }
  return stats;
}

}  // namespace glider
