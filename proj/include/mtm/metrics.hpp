#pragma once

// Evaluation metrics and the per-run metric report.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mtm {

/// exp(mean masked cross-entropy).
double perplexity(double mean_ce);

struct ClassificationMetrics {
    std::size_t n = 0;
    double accuracy = 0.0;
    // Support-weighted one-vs-rest averages.
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// DomainError on empty or mismatched input or negative labels. Classes
/// with a zero denominator contribute 0 to that metric.
ClassificationMetrics classification_metrics(std::span<const int> preds, std::span<const int> labels);

struct RegressionMetrics {
    std::size_t n = 0;
    double mae = 0.0;
    double rmse = 0.0;
    double mape = 0.0;
    /// Targets with |y| < 1e-9 are left out of MAPE.
    std::size_t mape_excluded = 0;
    /// Mean over output dimensions of 1 - SSres/SStot. When any dimension has
    /// zero target variance, r2 is 0 and r2_defined is false.
    double r2 = 0.0;
    bool r2_defined = true;
};

/// preds/targets are n x dim row-major; MAE, RMSE and MAPE pool all n x dim
/// errors. DomainError for n < 2 or mismatched sizes.
RegressionMetrics regression_metrics(std::span<const double> preds, std::span<const double> targets,
                                     std::size_t dim = 1);

/// argmax per row of an n x k score matrix (first maximum wins).
std::vector<int> argmax_rows(std::span<const double> scores, std::size_t k);

}  // namespace mtm
