#include "trimodal/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "trimodal/errors.hpp"

namespace trimodal::metrics {

namespace {

void validate_pairs(std::span<const double> scores,
                    std::span<const int> labels, bool require_both_classes) {
  if (scores.size() != labels.size())
    throw DataError("scores length " + std::to_string(scores.size()) +
                    " != labels length " + std::to_string(labels.size()));
  if (scores.empty()) throw DataError("empty score set");
  bool has0 = false, has1 = false;
  for (int y : labels) {
    if (y == 0) has0 = true;
    else if (y == 1) has1 = true;
    else throw DataError("label must be 0 or 1, got " + std::to_string(y));
  }
  if (require_both_classes && (!has0 || !has1))
    throw DataError("both classes must be present");
}

}  // namespace

ConfusionMatrix confusion_at_threshold(std::span<const double> scores,
                                       std::span<const int> labels,
                                       double threshold) {
  validate_pairs(scores, labels, false);
  ConfusionMatrix cm;
  cm.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1) {
      pred ? ++cm.tp : ++cm.fn;
    } else {
      pred ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("empty confusion matrix");
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / cm.total();
  if (cm.tp + cm.fp == 0) {
    m.precision_degenerate = true;
  } else {
    m.precision = static_cast<double>(cm.tp) / (cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn == 0) {
    m.recall_degenerate = true;
  } else {
    m.recall = static_cast<double>(cm.tp) / (cm.tp + cm.fn);
  }
  if (m.precision + m.recall == 0.0) {
    m.f1_degenerate = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

std::vector<RocPoint> roc_points(std::span<const double> scores,
                                 std::span<const int> labels) {
  validate_pairs(scores, labels, true);
  std::size_t n_pos = 0, n_neg = 0;
  for (int y : labels) (y == 1 ? n_pos : n_neg)++;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  std::vector<RocPoint> points;
  points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    // tied scores form a single diagonal step
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp)++;
      ++i;
    }
    points.push_back({static_cast<double>(fp) / n_neg,
                      static_cast<double>(tp) / n_pos});
  }
  return points;
}

double auc_score(std::span<const double> scores, std::span<const int> labels) {
  const auto points = roc_points(scores, labels);
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) *
            (points[i].tpr + points[i - 1].tpr) * 0.5;
  }
  return area;
}

MetricsReport build_report(const std::vector<ScoredSet>& sets,
                           double threshold, std::string dataset_id,
                           std::uint64_t seed) {
  MetricsReport report;
  report.dataset_id = std::move(dataset_id);
  report.seed = seed;
  for (const auto& set : sets) {
    const auto cm = confusion_at_threshold(set.scores, set.labels, threshold);
    const auto m = classification_metrics(cm);
    ReportRow row;
    row.model = set.name;
    row.accuracy = m.accuracy;
    row.precision = m.precision;
    row.recall = m.recall;
    row.f1 = m.f1;
    row.auc = auc_score(set.scores, set.labels);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string format_report_table(const MetricsReport& report) {
  std::ostringstream os;
  std::size_t name_w = 5;
  for (const auto& r : report.rows) name_w = std::max(name_w, r.model.size());
  os << std::left << std::setw(static_cast<int>(name_w) + 2) << "Model"
     << std::right << std::setw(10) << "Accuracy" << std::setw(11)
     << "Precision" << std::setw(8) << "Recall" << std::setw(8) << "F1"
     << std::setw(9) << "AUC-ROC" << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& r : report.rows) {
    os << std::left << std::setw(static_cast<int>(name_w) + 2) << r.model
       << std::right << std::setw(10) << r.accuracy << std::setw(11)
       << r.precision << std::setw(8) << r.recall << std::setw(8) << r.f1
       << std::setw(9) << r.auc << '\n';
  }
  return os.str();
}

}  // namespace trimodal::metrics
