#include "mtm/report.hpp"

#include "mtm/csv.hpp"
#include "mtm/errors.hpp"

#include <cstdio>
#include <fstream>
#include <map>

namespace mtm {

namespace {

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

}  // namespace

std::string MetricReport::to_text() const {
    std::string s;
    const auto line = [&s](std::string_view k, const std::string& v) {
        s += k;
        s += ": ";
        s += v;
        s += '\n';
    };
    line("task", task);
    line("mode", mode);
    line("seed", std::to_string(seed));
    line("head", to_string(head.kind) + " " + std::to_string(head.dim));
    line("train_samples", std::to_string(train_samples));
    line("eval_samples", std::to_string(eval_samples));
    line("epochs_trained", std::to_string(epochs_trained));
    line("best_epoch", std::to_string(best_epoch));
    line("optimizer_steps", std::to_string(optimizer_steps));
    if (classification) {
        line("accuracy", num(classification->accuracy));
        line("precision_weighted", num(classification->precision));
        line("recall_weighted", num(classification->recall));
        line("f1_weighted", num(classification->f1));
        line("note", "accuracy is plain accuracy, which equals support-weighted recall");
    }
    if (regression) {
        line("mae", num(regression->mae));
        line("rmse", num(regression->rmse));
        line("mape", num(regression->mape));
        line("mape_excluded", std::to_string(regression->mape_excluded));
        line("r2", num(regression->r2));
        line("r2_defined", regression->r2_defined ? "true" : "false");
    }
    return s;
}

MetricReport MetricReport::parse(std::string_view text) {
    std::map<std::string, std::string> kv;
    for (std::string_view line : split(text, '\n')) {
        if (line.empty()) {
            continue;
        }
        const std::size_t colon = line.find(": ");
        if (colon == std::string_view::npos) {
            throw ParseError("malformed report line '" + std::string(line) + "'");
        }
        kv[std::string(line.substr(0, colon))] = std::string(line.substr(colon + 2));
    }
    const auto get = [&kv](const std::string& k) -> const std::string& {
        const auto it = kv.find(k);
        if (it == kv.end()) {
            throw ParseError("report lacks '" + k + "'");
        }
        return it->second;
    };
    MetricReport r;
    r.task = get("task");
    r.mode = get("mode");
    r.seed = parse_uint64(get("seed"));
    const auto head = split(get("head"), ' ');
    if (head.size() != 2) {
        throw ParseError("malformed report head");
    }
    r.head = {head_kind_from_string(head[0]), parse_int(head[1])};
    r.train_samples = parse_uint64(get("train_samples"));
    r.eval_samples = parse_uint64(get("eval_samples"));
    r.epochs_trained = parse_int(get("epochs_trained"));
    r.best_epoch = parse_int(get("best_epoch"));
    r.optimizer_steps = parse_uint64(get("optimizer_steps"));
    if (kv.contains("f1_weighted")) {
        ClassificationMetrics c;
        c.n = r.eval_samples;
        c.accuracy = parse_double(get("accuracy"));
        c.precision = parse_double(get("precision_weighted"));
        c.recall = parse_double(get("recall_weighted"));
        c.f1 = parse_double(get("f1_weighted"));
        r.classification = c;
    }
    if (kv.contains("mae")) {
        RegressionMetrics m;
        m.n = r.eval_samples;
        m.mae = parse_double(get("mae"));
        m.rmse = parse_double(get("rmse"));
        m.mape = parse_double(get("mape"));
        m.mape_excluded = parse_uint64(get("mape_excluded"));
        m.r2 = parse_double(get("r2"));
        m.r2_defined = get("r2_defined") == "true";
        r.regression = m;
    }
    return r;
}

double MetricReport::headline() const {
    if (classification) {
        return classification->f1;
    }
    if (regression) {
        return regression->mae;
    }
    throw ContractViolation("report has no metrics");
}

MetricReport evaluate_predictions(const LabelTable& labels, std::span<const std::vector<double>> outputs) {
    if (outputs.size() != labels.size()) {
        throw ContractViolation("one prediction per labeled sample required");
    }
    MetricReport r;
    r.task = labels.task.name;
    r.head = labels.task.output;
    r.eval_samples = labels.size();
    const auto dim = static_cast<std::size_t>(r.head.dim);
    if (r.head.kind == HeadKind::classification) {
        std::vector<int> preds;
        preds.reserve(outputs.size());
        for (const auto& o : outputs) {
            if (o.size() == 1) {
                preds.push_back(static_cast<int>(o[0]));
            } else if (o.size() == dim) {
                preds.push_back(argmax_rows(o, dim).front());
            } else {
                throw ContractViolation("classification output has the wrong width");
            }
        }
        r.classification = classification_metrics(preds, labels.classes);
    } else {
        std::vector<double> flat;
        flat.reserve(outputs.size() * dim);
        for (const auto& o : outputs) {
            if (o.size() != dim) {
                throw ContractViolation("regression output has the wrong width");
            }
            flat.insert(flat.end(), o.begin(), o.end());
        }
        r.regression = regression_metrics(flat, labels.values, dim);
    }
    return r;
}

void write_predictions(const LabelTable& labels, std::span<const std::vector<double>> outputs,
                       const std::string& path) {
    if (outputs.size() != labels.size()) {
        throw ContractViolation("one prediction per labeled sample required");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write predictions " + path);
    }
    const HeadSpec& head = labels.task.output;
    const bool cls = head.kind == HeadKind::classification;
    out << "sample_id";
    if (cls || head.dim == 1) {
        out << ",pred";
    } else {
        for (int j = 0; j < head.dim; ++j) {
            out << ",pred_" << j;
        }
    }
    out << '\n';
    char buf[40];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << labels.ids[i];
        if (cls) {
            out << ',' << argmax_rows(outputs[i], outputs[i].size()).front();
        } else {
            for (double v : outputs[i]) {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                out << ',' << buf;
            }
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing predictions " + path);
    }
}

std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_predictions(const std::string& path) {
    CsvReader reader(path);
    std::vector<std::string_view> f;
    if (!reader.next(f) || f.empty() || f[0] != "sample_id") {
        throw ParseError(path + ": missing predictions header");
    }
    const std::size_t width = f.size();
    std::pair<std::vector<std::string>, std::vector<std::vector<double>>> out;
    while (reader.next(f)) {
        if (f.size() != width) {
            throw ParseError(reader.where() + ": wrong number of columns");
        }
        out.first.emplace_back(f[0]);
        std::vector<double> row;
        for (std::size_t j = 1; j < f.size(); ++j) {
            row.push_back(parse_double(f[j], reader.where()));
        }
        out.second.push_back(std::move(row));
    }
    return out;
}

}  // namespace mtm
