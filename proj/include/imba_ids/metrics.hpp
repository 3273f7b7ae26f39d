#pragma once

// Confusion matrices, per-class precision/recall, class-balanced accuracy
// (CBA) and the class imbalance measure.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imba_ids/errors.hpp"
#include "imba_ids/model.hpp"

namespace imba_ids {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes = 0)
      : c_(num_classes), counts_(num_classes * num_classes, 0) {}

  std::size_t num_classes() const noexcept { return c_; }

  // Entry (truth, predicted).
  std::uint64_t operator()(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * c_ + predicted];
  }

  void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1) {
    if (truth >= c_ || predicted >= c_) {
      throw std::out_of_range("ConfusionMatrix: class index out of range [0, " +
                              std::to_string(c_) + ")");
    }
    counts_[truth * c_ + predicted] += n;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.c_ != c_) throw ShapeError("ConfusionMatrix: class counts differ");
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
    return *this;
  }

  std::uint64_t row_sum(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < c_; ++j) s += (*this)(truth, j);
    return s;
  }

  std::uint64_t col_sum(std::size_t predicted) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < c_; ++i) s += (*this)(i, predicted);
    return s;
  }

  std::uint64_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t c_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const Label> preds, std::span<const Label> labels,
                                 std::size_t num_classes) {
  if (preds.size() != labels.size()) {
    throw ShapeError("confusion: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(labels[i], preds[i]);
  return cm;
}

struct PrecisionRecall {
  std::vector<double> precision;  // percent
  std::vector<double> recall;     // percent
};

// 0/0 is reported as 0 for both precision and recall.
inline PrecisionRecall precision_recall(const ConfusionMatrix& cm) {
  PrecisionRecall pr;
  const std::size_t c = cm.num_classes();
  pr.precision.resize(c);
  pr.recall.resize(c);
  for (std::size_t j = 0; j < c; ++j) {
    const auto tp = static_cast<double>(cm(j, j));
    const auto predicted = cm.col_sum(j);
    const auto actual = cm.row_sum(j);
    pr.precision[j] = predicted == 0 ? 0.0 : 100.0 * tp / static_cast<double>(predicted);
    pr.recall[j] = actual == 0 ? 0.0 : 100.0 * tp / static_cast<double>(actual);
  }
  return pr;
}

// Class-balanced accuracy: the arithmetic mean of the given recalls.
inline double cba(std::span<const double> recalls) {
  if (recalls.empty()) throw std::invalid_argument("cba: no classes");
  return std::accumulate(recalls.begin(), recalls.end(), 0.0) / static_cast<double>(recalls.size());
}

// Omega_imb = sum_i (n_max - n_i) / n.
inline double imbalance_measure(std::span<const std::size_t> counts) {
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (n == 0) throw std::invalid_argument("imbalance_measure: no instances");
  const std::size_t n_max = *std::max_element(counts.begin(), counts.end());
  std::size_t deficit = 0;
  for (std::size_t c : counts) deficit += n_max - c;
  return static_cast<double>(deficit) / static_cast<double>(n);
}

struct ClassReport {
  std::vector<std::string> class_names;
  std::vector<double> precision;  // percent
  std::vector<double> recall;     // percent
  std::vector<std::size_t> support;
  double cba = 0.0;               // percent, mean recall over classes with support > 0
  double imbalance = 0.0;         // Omega_imb of the evaluated set
  ConfusionMatrix confusion;

  friend bool operator==(const ClassReport&, const ClassReport&) = default;
};

inline ClassReport make_report(const ConfusionMatrix& cm, std::vector<std::string> class_names) {
  if (class_names.size() != cm.num_classes()) {
    throw ShapeError("make_report: " + std::to_string(class_names.size()) + " names for " +
                     std::to_string(cm.num_classes()) + " classes");
  }
  ClassReport report;
  report.class_names = std::move(class_names);
  auto pr = precision_recall(cm);
  report.precision = std::move(pr.precision);
  report.recall = std::move(pr.recall);
  report.confusion = cm;
  std::vector<double> present_recalls;
  for (std::size_t j = 0; j < cm.num_classes(); ++j) {
    report.support.push_back(cm.row_sum(j));
    if (report.support.back() > 0) present_recalls.push_back(report.recall[j]);
  }
  report.cba = present_recalls.empty() ? 0.0 : cba(present_recalls);
  report.imbalance = cm.total() == 0 ? 0.0 : imbalance_measure(report.support);
  return report;
}

// Machine-readable record. Field order is fixed.
inline nlohmann::ordered_json report_to_json(const ClassReport& r) {
  nlohmann::ordered_json j;
  j["classes"] = r.class_names;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["support"] = r.support;
  j["cba"] = r.cba;
  j["imbalance"] = r.imbalance;
  std::vector<std::vector<std::uint64_t>> rows(r.confusion.num_classes());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows.size(); ++k) rows[i].push_back(r.confusion(i, k));
  j["confusion"] = rows;
  return j;
}

}  // namespace imba_ids
