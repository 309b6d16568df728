#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace trimodal::metrics {

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double threshold = 0.5;
  std::size_t total() const { return tp + fp + fn + tn; }
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // set when the corresponding denominator was zero
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct ReportRow {
  std::string model;
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0, auc = 0.0;
};

struct MetricsReport {
  std::vector<ReportRow> rows;
  std::string dataset_id;
  std::uint64_t seed = 0;
};

struct ScoredSet {
  std::string name;
  std::vector<double> scores;  // positive-class probabilities
  std::vector<int> labels;
};

// Predict positive iff score >= threshold.
ConfusionMatrix confusion_at_threshold(std::span<const double> scores,
                                       std::span<const int> labels,
                                       double threshold);

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

// Threshold sweep over unique scores descending; tied scores collapse
// into one step so the trapezoidal area matches Mann-Whitney exactly.
std::vector<RocPoint> roc_points(std::span<const double> scores,
                                 std::span<const int> labels);

double auc_score(std::span<const double> scores, std::span<const int> labels);

MetricsReport build_report(const std::vector<ScoredSet>& sets,
                           double threshold, std::string dataset_id,
                           std::uint64_t seed);

std::string format_report_table(const MetricsReport& report);

}  // namespace trimodal::metrics
