#include "mtm/errors.hpp"
#include "mtm/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace mtm;

namespace {

// Expand a confusion matrix (rows = truth, cols = prediction) into label lists.
void expand(const std::vector<std::vector<int>>& cm, std::vector<int>& preds, std::vector<int>& labels) {
    for (std::size_t t = 0; t < cm.size(); ++t) {
        for (std::size_t p = 0; p < cm[t].size(); ++p) {
            for (int k = 0; k < cm[t][p]; ++k) {
                labels.push_back(static_cast<int>(t));
                preds.push_back(static_cast<int>(p));
            }
        }
    }
}

}  // namespace

TEST_CASE("classification metrics match a hand-computed confusion matrix") {
    std::vector<int> preds, labels;
    expand({{5, 1, 0}, {2, 3, 1}, {0, 0, 8}}, preds, labels);
    const ClassificationMetrics m = classification_metrics(preds, labels);
    // Supports 6, 6, 8; predicted totals 7, 4, 9; true positives 5, 3, 8.
    CHECK(m.n == 20);
    CHECK(std::fabs(m.accuracy - 16.0 / 20.0) <= 1e-12);
    CHECK(std::fabs(m.precision - (6 * (5.0 / 7) + 6 * (3.0 / 4) + 8 * (8.0 / 9)) / 20) <= 1e-12);
    CHECK(std::fabs(m.recall - (6 * (5.0 / 6) + 6 * (3.0 / 6) + 8 * 1.0) / 20) <= 1e-12);
    CHECK(std::fabs(m.f1 - (6 * (10.0 / 13) + 6 * (6.0 / 10) + 8 * (16.0 / 17)) / 20) <= 1e-12);
}

TEST_CASE("classes never predicted contribute zero precision") {
    const std::vector<int> labels = {0, 0, 1, 1};
    const std::vector<int> preds = {0, 0, 0, 0};
    const ClassificationMetrics m = classification_metrics(preds, labels);
    CHECK(m.accuracy == 0.5);
    CHECK(std::fabs(m.precision - 0.5 * 0.5) <= 1e-12);
    CHECK(std::fabs(m.f1 - 0.5 * (2.0 / 3.0)) <= 1e-12);
    CHECK_THROWS_AS(classification_metrics(std::vector<int>{}, std::vector<int>{}), DomainError);
    CHECK_THROWS_AS(classification_metrics(std::vector<int>{0}, std::vector<int>{0, 1}), DomainError);
    CHECK_THROWS_AS(classification_metrics(std::vector<int>{0}, std::vector<int>{-1}), DomainError);
}

TEST_CASE("regression metrics match hand-computed values") {
    const std::vector<double> preds = {1.0, 2.0, 4.0};
    const std::vector<double> targets = {1.0, 3.0, 2.0};
    const RegressionMetrics m = regression_metrics(preds, targets);
    CHECK(m.n == 3);
    CHECK(std::fabs(m.mae - 1.0) <= 1e-12);
    CHECK(std::fabs(m.rmse - std::sqrt(5.0 / 3.0)) <= 1e-12);
    CHECK(std::fabs(m.mape - (0.0 + 1.0 / 3.0 + 1.0) / 3.0) <= 1e-12);
    CHECK(std::fabs(m.r2 - (1.0 - 5.0 / 2.0)) <= 1e-12);
    CHECK(m.r2_defined);
}

TEST_CASE("two-dimensional regression pools errors and averages R2") {
    // Rows (lat, lon).
    const std::vector<double> preds = {0.0, 1.0, 1.0, 1.0, 2.0, 4.0};
    const std::vector<double> targets = {0.0, 2.0, 1.0, 0.0, 2.0, 4.0};
    const RegressionMetrics m = regression_metrics(preds, targets, 2);
    CHECK(m.n == 3);
    CHECK(std::fabs(m.mae - 2.0 / 6.0) <= 1e-12);
    CHECK(std::fabs(m.rmse - std::sqrt(2.0 / 6.0)) <= 1e-12);
    // The two zero targets are left out of MAPE.
    CHECK(m.mape_excluded == 2);
    CHECK(std::fabs(m.mape - 0.5 / 4.0) <= 1e-12);
    // Dimension 0 is perfect; dimension 1: mean 2, SStot 8, SSres 2.
    CHECK(std::fabs(m.r2 - (1.0 + (1.0 - 2.0 / 8.0)) / 2.0) <= 1e-12);
}

TEST_CASE("constant targets leave R2 undefined") {
    const std::vector<double> preds = {1.0, 2.0};
    const std::vector<double> targets = {3.0, 3.0};
    const RegressionMetrics m = regression_metrics(preds, targets);
    CHECK_FALSE(m.r2_defined);
    CHECK(m.r2 == 0.0);
    CHECK_THROWS_AS(regression_metrics(std::vector<double>{1.0}, std::vector<double>{1.0}), DomainError);
}

TEST_CASE("perplexity and argmax") {
    CHECK(perplexity(0.0) == 1.0);
    CHECK(perplexity(std::log(2048.0)) == doctest::Approx(2048.0).epsilon(1e-14));
    const std::vector<double> s = {0.1, 0.5, 0.5, 3.0, -1.0, 2.0};
    CHECK(argmax_rows(s, 3) == std::vector<int>{1, 0});
}
