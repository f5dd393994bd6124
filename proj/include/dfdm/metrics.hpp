#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfdm/label.hpp"

namespace dfdm {

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;
    Label positive = Label::deepfake;

    std::uint64_t total() const { return tp + fp + fn + tn; }
};

ConfusionMatrix confusion(const std::vector<Label>& predicted, const std::vector<Label>& actual,
                          Label positive);

/// The six success metrics derived from exact integer counts. A metric whose
/// denominator is zero is reported as absent, never silently as 0. The auc
/// here is the hard-label single-operating-point value (TPR+TNR)/2; for
/// continuous scores use auc_from_scores.
struct MetricsReport {
    std::optional<double> accuracy, precision, recall, f1, auc;
    ConfusionMatrix confusion;
};

MetricsReport report_from_confusion(const ConfusionMatrix& cm);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

/// ROC sweep over all distinct score thresholds, ties grouped; higher scores
/// mean "more positive". Trapezoid area equals the Mann-Whitney statistic
/// with ties counted 1/2, computed in exact integer arithmetic before one
/// final division.
double auc_from_scores(const std::vector<double>& scores, const std::vector<Label>& actual,
                       Label positive);
std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<Label>& actual, Label positive);

/// 2-decimal percentage with round-half-up, e.g. 0.883342 -> "88.33".
std::string percent_2dp(double fraction);

std::string metric_text(const std::optional<double>& v);

nlohmann::ordered_json metrics_json(const MetricsReport& report);
nlohmann::ordered_json confusion_json(const ConfusionMatrix& cm);
nlohmann::ordered_json roc_json(const std::vector<RocPoint>& points);

void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j);
void write_roc_csv(const std::filesystem::path& path, const std::vector<RocPoint>& points);

}  // namespace dfdm
