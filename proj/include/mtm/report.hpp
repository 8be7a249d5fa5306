#pragma once

// Per-run metric reports and prediction files. A report is a pure function
// of (predictions, labels).

#include "mtm/metrics.hpp"
#include "mtm/model.hpp"
#include "mtm/tasks.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mtm {

struct MetricReport {
    std::string task;
    std::string mode;
    std::uint64_t seed = 0;
    HeadSpec head;
    std::size_t train_samples = 0;
    std::size_t eval_samples = 0;
    std::size_t optimizer_steps = 0;
    int epochs_trained = 0;
    int best_epoch = 0;
    std::optional<ClassificationMetrics> classification;
    std::optional<RegressionMetrics> regression;

    /// "key: value" lines in a fixed order.
    std::string to_text() const;
    static MetricReport parse(std::string_view text);

    /// Weighted F for classification, MAE for regression.
    double headline() const;
};

/// Fills head, eval_samples and the metric block. Classification outputs are
/// per-class scores (argmax taken) or a single predicted class id;
/// regression outputs are label-unit values.
MetricReport evaluate_predictions(const LabelTable& labels, std::span<const std::vector<double>> outputs);

/// CSV: sample_id,pred for classification (argmax class),
/// sample_id,pred_0..pred_{D-1} for regression.
void write_predictions(const LabelTable& labels, std::span<const std::vector<double>> outputs,
                       const std::string& path);
/// Returns (ids, rows) as written.
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_predictions(const std::string& path);

}  // namespace mtm
