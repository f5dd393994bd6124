#include "dfdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dfdm/errors.hpp"

namespace dfdm {

ConfusionMatrix confusion(const std::vector<Label>& predicted, const std::vector<Label>& actual,
                          Label positive) {
    if (predicted.size() != actual.size()) {
        throw ShapeError("confusion: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(actual.size()) + " actuals");
    }
    if (predicted.empty()) throw ShapeError("confusion: empty input");
    ConfusionMatrix cm;
    cm.positive = positive;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool pred_pos = predicted[i] == positive;
        const bool act_pos = actual[i] == positive;
        if (pred_pos && act_pos) ++cm.tp;
        else if (pred_pos && !act_pos) ++cm.fp;
        else if (!pred_pos && act_pos) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

MetricsReport report_from_confusion(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ConfigError("confusion matrix is empty");
    MetricsReport r;
    r.confusion = cm;
    const std::uint64_t pos = cm.tp + cm.fn;
    const std::uint64_t neg = cm.tn + cm.fp;

    r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    if (cm.tp + cm.fp > 0)
        r.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    if (pos > 0) r.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    if (r.precision && r.recall && *r.precision + *r.recall > 0.0) {
        r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
    }
    // (TPR+TNR)/2 as a single division of exact integer numerator and
    // denominator; for balanced classes this is bit-identical to accuracy.
    if (pos > 0 && neg > 0) {
        r.auc = static_cast<double>(cm.tp * neg + cm.tn * pos) /
                static_cast<double>(2 * pos * neg);
    }
    return r;
}

namespace {

struct ScoredItem {
    double score;
    bool positive;
};

void check_scored_input(const std::vector<double>& scores, const std::vector<Label>& actual) {
    if (scores.size() != actual.size()) {
        throw ShapeError("auc: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(actual.size()) + " labels");
    }
    if (scores.empty()) throw ShapeError("auc: empty input");
}

std::vector<ScoredItem> sorted_desc(const std::vector<double>& scores,
                                    const std::vector<Label>& actual, Label positive) {
    std::vector<ScoredItem> items(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        items[i] = {scores[i], actual[i] == positive};
    std::stable_sort(items.begin(), items.end(),
                     [](const ScoredItem& a, const ScoredItem& b) { return a.score > b.score; });
    return items;
}

}  // namespace

double auc_from_scores(const std::vector<double>& scores, const std::vector<Label>& actual,
                       Label positive) {
    check_scored_input(scores, actual);
    const std::vector<ScoredItem> items = sorted_desc(scores, actual, positive);
    std::uint64_t pos = 0, neg = 0;
    for (const ScoredItem& it : items) (it.positive ? pos : neg) += 1;
    if (pos == 0 || neg == 0) {
        throw ShapeError("auc: undefined for single-class input (" + std::to_string(pos) +
                         " positives, " + std::to_string(neg) + " negatives)");
    }
    // Trapezoid sum accumulated as an exact integer: each tie group of
    // (dtp, dfp) contributes dfp * (tp_before + tp_after).
    std::uint64_t numerator = 0;
    std::uint64_t cum_tp = 0;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        std::uint64_t dtp = 0, dfp = 0;
        while (j < items.size() && items[j].score == items[i].score) {
            (items[j].positive ? dtp : dfp) += 1;
            ++j;
        }
        numerator += dfp * (2 * cum_tp + dtp);
        cum_tp += dtp;
        i = j;
    }
    return static_cast<double>(numerator) / static_cast<double>(2 * pos * neg);
}

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<Label>& actual, Label positive) {
    check_scored_input(scores, actual);
    const std::vector<ScoredItem> items = sorted_desc(scores, actual, positive);
    std::uint64_t pos = 0, neg = 0;
    for (const ScoredItem& it : items) (it.positive ? pos : neg) += 1;
    std::vector<RocPoint> points;
    points.push_back({0.0, 0.0});
    std::uint64_t cum_tp = 0, cum_fp = 0;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].score == items[i].score) {
            (items[j].positive ? cum_tp : cum_fp) += 1;
            ++j;
        }
        points.push_back({neg ? static_cast<double>(cum_fp) / static_cast<double>(neg) : 0.0,
                          pos ? static_cast<double>(cum_tp) / static_cast<double>(pos) : 0.0});
        i = j;
    }
    return points;
}

std::string percent_2dp(double fraction) {
    const double scaled = fraction * 10000.0;
    const long long units = static_cast<long long>(std::floor(scaled + 0.5));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld.%02lld", units / 100, units % 100);
    return buf;
}

std::string metric_text(const std::optional<double>& v) {
    return v ? percent_2dp(*v) : "undefined";
}

nlohmann::ordered_json metrics_json(const MetricsReport& report) {
    auto one = [](const std::optional<double>& v) {
        nlohmann::ordered_json j;
        j["fraction"] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
        j["percent"] = v ? nlohmann::ordered_json(percent_2dp(*v)) : nlohmann::ordered_json(nullptr);
        return j;
    };
    nlohmann::ordered_json j;
    j["accuracy"] = one(report.accuracy);
    j["precision"] = one(report.precision);
    j["recall"] = one(report.recall);
    j["f1"] = one(report.f1);
    j["auc"] = one(report.auc);
    return j;
}

nlohmann::ordered_json confusion_json(const ConfusionMatrix& cm) {
    nlohmann::ordered_json j;
    j["tp"] = cm.tp;
    j["fp"] = cm.fp;
    j["fn"] = cm.fn;
    j["tn"] = cm.tn;
    return j;
}

nlohmann::ordered_json roc_json(const std::vector<RocPoint>& points) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const RocPoint& p : points) j.push_back({p.fpr, p.tpr});
    return j;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write report: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("short write: " + path.string());
}

void write_roc_csv(const std::filesystem::path& path, const std::vector<RocPoint>& points) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write ROC csv: " + path.string());
    out << "fpr,tpr\n";
    for (const RocPoint& p : points) out << p.fpr << ',' << p.tpr << '\n';
}

}  // namespace dfdm
