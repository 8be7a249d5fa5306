#include "mtm/metrics.hpp"

#include "mtm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mtm {

double perplexity(double mean_ce) { return std::exp(mean_ce); }

ClassificationMetrics classification_metrics(std::span<const int> preds, std::span<const int> labels) {
    if (preds.empty() || preds.size() != labels.size()) {
        throw DomainError("classification metrics need equal, nonempty prediction and label lists");
    }
    struct Counts {
        std::size_t tp = 0, pred = 0, support = 0;
    };
    std::map<int, Counts> per_class;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || labels[i] < 0) {
            throw DomainError("class ids must be nonnegative");
        }
        ++per_class[labels[i]].support;
        ++per_class[preds[i]].pred;
        if (preds[i] == labels[i]) {
            ++per_class[labels[i]].tp;
            ++correct;
        }
    }
    const double n = static_cast<double>(preds.size());
    ClassificationMetrics m;
    m.n = preds.size();
    m.accuracy = static_cast<double>(correct) / n;
    for (const auto& [cls, c] : per_class) {
        if (c.support == 0) {
            continue;
        }
        const double p = c.pred ? static_cast<double>(c.tp) / static_cast<double>(c.pred) : 0.0;
        const double r = static_cast<double>(c.tp) / static_cast<double>(c.support);
        const double f = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        const double w = static_cast<double>(c.support) / n;
        m.precision += w * p;
        m.recall += w * r;
        m.f1 += w * f;
    }
    return m;
}

RegressionMetrics regression_metrics(std::span<const double> preds, std::span<const double> targets,
                                     std::size_t dim) {
    if (dim == 0 || preds.size() != targets.size() || preds.size() % dim != 0) {
        throw DomainError("regression metrics need equal n x dim prediction and target arrays");
    }
    const std::size_t n = preds.size() / dim;
    if (n < 2) {
        throw DomainError("regression metrics need at least 2 samples");
    }
    RegressionMetrics m;
    m.n = n;
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double ape_sum = 0.0;
    std::size_t ape_n = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double e = preds[i] - targets[i];
        abs_sum += std::fabs(e);
        sq_sum += e * e;
        if (std::fabs(targets[i]) >= 1e-9) {
            ape_sum += std::fabs(e / targets[i]);
            ++ape_n;
        } else {
            ++m.mape_excluded;
        }
    }
    const double total = static_cast<double>(preds.size());
    m.mae = abs_sum / total;
    m.rmse = std::sqrt(sq_sum / total);
    m.mape = ape_n ? ape_sum / static_cast<double>(ape_n) : 0.0;
    double r2_sum = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean += targets[i * dim + j];
        }
        mean /= static_cast<double>(n);
        double ss_tot = 0.0;
        double ss_res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = targets[i * dim + j];
            ss_tot += (y - mean) * (y - mean);
            ss_res += (preds[i * dim + j] - y) * (preds[i * dim + j] - y);
        }
        if (ss_tot == 0.0) {
            m.r2_defined = false;
            break;
        }
        r2_sum += 1.0 - ss_res / ss_tot;
    }
    m.r2 = m.r2_defined ? r2_sum / static_cast<double>(dim) : 0.0;
    return m;
}

std::vector<int> argmax_rows(std::span<const double> scores, std::size_t k) {
    if (k == 0 || scores.size() % k != 0) {
        throw DomainError("score matrix is not n x k");
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < scores.size(); i += k) {
        out.push_back(static_cast<int>(std::max_element(scores.begin() + static_cast<std::ptrdiff_t>(i),
                                                        scores.begin() + static_cast<std::ptrdiff_t>(i + k)) -
                                       (scores.begin() + static_cast<std::ptrdiff_t>(i))));
    }
    return out;
}

}  // namespace mtm
