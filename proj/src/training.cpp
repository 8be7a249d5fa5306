#include "mtm/training.hpp"

#include "mtm/errors.hpp"
#include "mtm/optim.hpp"
#include "mtm/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace mtm {

namespace {

constexpr std::size_t kEvalChunk = 64;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Encoding> gather(std::span<const Encoding> data, std::span<const std::size_t> idx) {
    std::vector<Encoding> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
        out.push_back(data[i]);
    }
    return out;
}

std::vector<std::size_t> iota_n(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

LabelTable subset(const LabelTable& t, std::size_t begin, std::size_t end) {
    LabelTable out{t.task, {}, {}, {}};
    const auto dim = static_cast<std::size_t>(t.task.output.dim);
    out.ids.assign(t.ids.begin() + static_cast<std::ptrdiff_t>(begin), t.ids.begin() + static_cast<std::ptrdiff_t>(end));
    if (!t.classes.empty()) {
        out.classes.assign(t.classes.begin() + static_cast<std::ptrdiff_t>(begin),
                           t.classes.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (!t.values.empty()) {
        out.values.assign(t.values.begin() + static_cast<std::ptrdiff_t>(begin * dim),
                          t.values.begin() + static_cast<std::ptrdiff_t>(end * dim));
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Run logs

std::string RunLog::to_csv() const {
    std::string s = "epoch,train_loss,val_metric\n";
    char buf[96];
    for (const EpochRecord& r : epochs) {
        if (std::isnan(r.train_loss)) {
            std::snprintf(buf, sizeof(buf), "%d,nan,%.10g\n", r.epoch, r.val_metric);
        } else {
            std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", r.epoch, r.train_loss, r.val_metric);
        }
        s += buf;
    }
    return s;
}

const EpochRecord& RunLog::best() const {
    for (const EpochRecord& r : epochs) {
        if (r.epoch == best_epoch) {
            return r;
        }
    }
    throw ContractViolation("run log has no record for its best epoch");
}

// ---------------------------------------------------------------------------
// Pre-training

void PretrainConfig::validate() const {
    if (epochs < 0 || batch < 1 || !(lr > 0.0) || weight_decay < 0.0) {
        throw ConfigError("pretrain epochs must be >= 0, batch >= 1, lr > 0 and weight_decay >= 0");
    }
}

double validation_perplexity(const ParamSet<float>& params, std::span<const Encoding> data) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < data.size(); i += kEvalChunk) {
        const auto [s, n] = mlm_loss_sum(params, data.subspan(i, std::min(kEvalChunk, data.size() - i)));
        sum += s;
        count += n;
    }
    if (count == 0) {
        throw ContractViolation("validation data has no masked positions");
    }
    return perplexity(sum / static_cast<double>(count));
}

PretrainResult pretrain(const ModelConfig& config, std::span<const Encoding> train, std::span<const Encoding> val,
                        const PretrainConfig& cfg, std::uint64_t vocab_hash, const EpochCallback& on_epoch) {
    cfg.validate();
    config.validate();
    if (train.empty() || val.empty()) {
        throw ConfigError("pre-training needs nonempty train and validation splits");
    }
    const auto t0 = std::chrono::steady_clock::now();
    ParamSet<float> params = init_params<float>(config, {}, cfg.seed);
    AdamState state(params.data.size());
    const std::vector<std::uint8_t> decay = params.layout.decay_mask();
    const AdamWOptions opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};

    PretrainResult result;
    RunLog& log = result.log;
    log.task = "pretrain";
    log.mode = "pretrain";
    log.seed = cfg.seed;
    log.metric = "perplexity";
    log.higher_is_better = false;
    log.train_samples = train.size();

    const auto record = [&](const EpochRecord& r) {
        log.epochs.push_back(r);
        if (on_epoch) {
            on_epoch(r);
        }
    };
    double best_ppl = validation_perplexity(params, val);
    record({0, std::numeric_limits<double>::quiet_NaN(), best_ppl});
    result.best.params = params;
    result.best.optimizer = state;

    std::vector<float> grads(params.data.size());
    const std::uint64_t dropout_seed = derive_seed(cfg.seed, "pretrain-dropout");
    std::vector<std::size_t> order = iota_n(train.size());
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::sort(order.begin(), order.end());
        Rng(derive_seed(cfg.seed, "pretrain-epoch-" + std::to_string(epoch))).shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            const std::vector<Encoding> batch =
                gather(train, std::span<const std::size_t>(order.data() + start, end - start));
            std::fill(grads.begin(), grads.end(), 0.0f);
            const double loss = loss_and_grad<float>(params, batch, Objective::mlm, {}, grads,
                                                     {true, derive_seed(dropout_seed, log.optimizer_steps)});
            if (!std::isfinite(loss)) {
                throw TrainingError("pre-training diverged: loss " + std::to_string(loss) + " at epoch " +
                                    std::to_string(epoch) + ", step " + std::to_string(log.optimizer_steps));
            }
            adamw_step(params.data, grads, state, opt, decay);
            ++log.optimizer_steps;
            loss_sum += loss;
            ++batches;
        }
        const double ppl = validation_perplexity(params, val);
        if (!std::isfinite(ppl)) {
            throw TrainingError("validation perplexity is not finite at epoch " + std::to_string(epoch));
        }
        record({epoch, loss_sum / static_cast<double>(batches), ppl});
        if (ppl < best_ppl) {
            best_ppl = ppl;
            log.best_epoch = epoch;
            result.best.params = params;
            result.best.optimizer = state;
        }
    }
    result.best.meta.seed = cfg.seed;
    result.best.meta.epoch = log.best_epoch;
    result.best.meta.vocab_hash = vocab_hash;
    result.best.meta.extra["kind"] = "pretrain";
    log.wall_seconds = seconds_since(t0);
    return result;
}

// ---------------------------------------------------------------------------
// Adaptation

std::string to_string(AdaptMode mode) {
    switch (mode) {
        case AdaptMode::finetune:
            return "finetune";
        case AdaptMode::fewshot:
            return "fewshot";
        case AdaptMode::zeroshot:
            return "zeroshot";
        case AdaptMode::random_init:
            return "random-init";
        case AdaptMode::baseline_small:
            return "baseline-small";
        case AdaptMode::baseline_medium:
            return "baseline-medium";
        case AdaptMode::baseline_large:
            break;
    }
    return "baseline-large";
}

AdaptMode adapt_mode_from_string(std::string_view s) {
    for (AdaptMode m : {AdaptMode::finetune, AdaptMode::fewshot, AdaptMode::zeroshot, AdaptMode::random_init,
                        AdaptMode::baseline_small, AdaptMode::baseline_medium, AdaptMode::baseline_large}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    throw ConfigError("unknown adaptation mode '" + std::string(s) + "'");
}

bool uses_pretrained(AdaptMode mode) {
    return mode == AdaptMode::finetune || mode == AdaptMode::fewshot || mode == AdaptMode::zeroshot;
}

void AdaptConfig::validate() const {
    if (epochs < 0 || batch_region < 1 || batch_trajectory < 1 || fewshot_n < 1 || !(lr > 0.0) ||
        weight_decay < 0.0) {
        throw ConfigError("adapt epochs must be >= 0, batches and fewshot_n >= 1, lr > 0, weight_decay >= 0");
    }
    if (dataset_n_region < 0 || dataset_n_trajectory < 0) {
        throw ConfigError("dataset sizes must be >= 0");
    }
    if (!(train_frac > 0.0 && train_frac < 1.0)) {
        throw ConfigError("train_frac must be in (0, 1)");
    }
    if (max_len < 3 || max_len > static_cast<int>(kMaxSeqLen)) {
        throw ConfigError("max_len must be in [3, 512]");
    }
}

int AdaptConfig::batch_for(TaskInput input) const {
    return input == TaskInput::region ? batch_region : batch_trajectory;
}

AdaptationSet build_adaptation_set(const TaskSpec& task, const SyntheticWorld& world,
                                   std::span<const Trajectory> test_split, const Vocab& vocab,
                                   const HolidayCalendar& calendar, const AdaptConfig& cfg) {
    cfg.validate();
    const bool region = task.input == TaskInput::region;
    const std::size_t available = region ? world.size() : test_split.size();
    const int requested = region ? cfg.dataset_n_region : cfg.dataset_n_trajectory;
    // Requests beyond the labelled population are capped at everything available.
    const std::size_t n = requested == 0 ? available : std::min(available, static_cast<std::size_t>(requested));
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_frac * static_cast<double>(n)));
    if (n_train < 1 || n_train >= n) {
        throw ConfigError("task " + task.name + " has too few samples (" + std::to_string(n) +
                          ") for a train/eval split");
    }
    Rng rng(derive_seed(cfg.seed, "adapt-sample:" + task.name));
    const std::vector<std::size_t> draw = rng.sample_without_replacement(available, n);

    LabelTable all;
    std::vector<Encoding> encodings;
    encodings.reserve(n);
    if (region) {
        std::vector<CellId> cells;
        cells.reserve(n);
        for (std::size_t i : draw) {
            cells.push_back(world.cells()[i]);
            encodings.push_back(encode_region(cells.back(), vocab));
        }
        all = region_labels(task, cells, world);
    } else {
        std::vector<Trajectory> trajs;
        trajs.reserve(n);
        for (std::size_t i : draw) {
            trajs.push_back(test_split[i]);
            encodings.push_back(encode_trajectory(trajs.back(), vocab, static_cast<std::size_t>(cfg.max_len)));
        }
        all = trajectory_labels(task, trajs, world, calendar);
    }
    AdaptationSet set;
    set.task = task;
    set.train = subset(all, 0, n_train);
    set.eval = subset(all, n_train, n);
    set.train_x.assign(std::make_move_iterator(encodings.begin()),
                       std::make_move_iterator(encodings.begin() + static_cast<std::ptrdiff_t>(n_train)));
    set.eval_x.assign(std::make_move_iterator(encodings.begin() + static_cast<std::ptrdiff_t>(n_train)),
                      std::make_move_iterator(encodings.end()));
    return set;
}

namespace {

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const LabelTable& t, std::span<const std::size_t> idx) {
        const auto dim = static_cast<std::size_t>(t.task.output.dim);
        Standardizer s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
        if (idx.empty()) {
            return s;
        }
        for (std::size_t j = 0; j < dim; ++j) {
            double m = 0.0;
            for (std::size_t i : idx) {
                m += t.values[i * dim + j];
            }
            m /= static_cast<double>(idx.size());
            double v = 0.0;
            for (std::size_t i : idx) {
                v += (t.values[i * dim + j] - m) * (t.values[i * dim + j] - m);
            }
            v /= static_cast<double>(idx.size());
            s.mean[j] = m;
            s.scale[j] = v > 0.0 ? std::sqrt(v) : 1.0;
        }
        return s;
    }
};

ModelConfig baseline_config(AdaptMode mode, const ModelConfig& base) {
    const char* preset = mode == AdaptMode::baseline_small    ? "desk-small"
                         : mode == AdaptMode::baseline_medium ? "desk-medium"
                                                              : "desk-large";
    ModelConfig c = ModelConfig::preset(preset, base.vocab_size);
    c.max_len = base.max_len;
    c.dropout = base.dropout;
    c.tie_output = base.tie_output;
    return c;
}

}  // namespace

AdaptResult adapt(const std::optional<Checkpoint>& pretrained, const AdaptationSet& set, const AdaptConfig& cfg,
                  const ModelConfig& base, const EpochCallback& on_epoch) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const TaskSpec& task = set.task;
    const HeadSpec head = task.output;
    const bool cls = head.kind == HeadKind::classification;
    const auto dim = static_cast<std::size_t>(head.dim);

    ParamSet<float> params;
    if (uses_pretrained(cfg.mode)) {
        if (!pretrained) {
            throw ConfigError("mode " + to_string(cfg.mode) + " needs a pre-trained checkpoint");
        }
        params = with_head(pretrained->params, head, derive_seed(cfg.seed, "head:" + task.name));
    } else if (cfg.mode == AdaptMode::random_init) {
        params = init_params<float>(base, head, derive_seed(cfg.seed, "random-init:" + task.name));
    } else {
        params = init_params<float>(baseline_config(cfg.mode, base), head,
                                    derive_seed(cfg.seed, "baseline:" + task.name));
    }

    std::vector<std::size_t> train_idx;
    if (cfg.mode == AdaptMode::fewshot) {
        if (static_cast<std::size_t>(cfg.fewshot_n) > set.train.size()) {
            throw ConfigError("fewshot_n " + std::to_string(cfg.fewshot_n) + " exceeds the train split of " +
                              std::to_string(set.train.size()));
        }
        train_idx = Rng(derive_seed(cfg.seed, "fewshot:" + task.name))
                        .sample_without_replacement(set.train.size(), static_cast<std::size_t>(cfg.fewshot_n));
    } else if (cfg.mode != AdaptMode::zeroshot) {
        train_idx = iota_n(set.train.size());
    }
    const Standardizer stdz = cls ? Standardizer{} : Standardizer::fit(set.train, train_idx);

    AdaptResult result;
    RunLog& log = result.log;
    log.task = task.name;
    log.mode = to_string(cfg.mode);
    log.seed = cfg.seed;
    log.metric = cls ? "f1_weighted" : "mse";
    log.higher_is_better = cls;
    log.train_samples = train_idx.size();

    const auto predict = [&]() {
        std::vector<std::vector<double>> out;
        out.reserve(set.eval_x.size());
        for (std::size_t i = 0; i < set.eval_x.size(); i += kEvalChunk) {
            const auto chunk = predict_head(
                params, std::span<const Encoding>(set.eval_x).subspan(i, std::min(kEvalChunk, set.eval_x.size() - i)));
            out.insert(out.end(), chunk.begin(), chunk.end());
        }
        if (!cls) {
            for (auto& row : out) {
                for (std::size_t j = 0; j < dim; ++j) {
                    row[j] = row[j] * stdz.scale[j] + stdz.mean[j];
                }
            }
        }
        return out;
    };
    const auto score = [&](const std::vector<std::vector<double>>& preds) {
        const MetricReport r = evaluate_predictions(set.eval, preds);
        if (cls) {
            return r.classification->f1;
        }
        return r.regression->rmse * r.regression->rmse;
    };

    double best_metric = 0.0;
    const auto record = [&](const EpochRecord& r, std::vector<std::vector<double>>&& preds) {
        log.epochs.push_back(r);
        const bool better = log.epochs.size() == 1 ||
                            (log.higher_is_better ? r.val_metric > best_metric : r.val_metric < best_metric);
        if (better) {
            best_metric = r.val_metric;
            log.best_epoch = r.epoch;
            result.predictions = std::move(preds);
        }
        if (on_epoch) {
            on_epoch(r);
        }
    };
    {
        auto preds = predict();
        const double m = score(preds);
        record({0, std::numeric_limits<double>::quiet_NaN(), m}, std::move(preds));
    }

    int epochs_trained = 0;
    if (!train_idx.empty()) {
        AdamState state(params.data.size());
        const std::vector<std::uint8_t> decay = params.layout.decay_mask();
        const AdamWOptions opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
        const std::size_t head_offset = params.layout.at("head.weight").offset;
        std::vector<float> grads(params.data.size());
        const auto batch_size = static_cast<std::size_t>(cfg.batch_for(task.input));
        const std::uint64_t dropout_seed = derive_seed(cfg.seed, "adapt-dropout:" + task.name);
        std::vector<std::size_t> order = train_idx;
        for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
            order = train_idx;
            Rng(derive_seed(cfg.seed, "adapt-epoch:" + task.name + ":" + std::to_string(epoch))).shuffle(order);
            double loss_sum = 0.0;
            std::size_t batches = 0;
            for (std::size_t start = 0; start < order.size(); start += batch_size) {
                const std::size_t end = std::min(order.size(), start + batch_size);
                const std::span<const std::size_t> idx(order.data() + start, end - start);
                const std::vector<Encoding> batch = gather(set.train_x, idx);
                HeadTargets targets;
                for (std::size_t i : idx) {
                    if (cls) {
                        targets.classes.push_back(set.train.classes[i]);
                    } else {
                        for (std::size_t j = 0; j < dim; ++j) {
                            targets.values.push_back((set.train.values[i * dim + j] - stdz.mean[j]) / stdz.scale[j]);
                        }
                    }
                }
                std::fill(grads.begin(), grads.end(), 0.0f);
                const double loss = loss_and_grad<float>(params, batch, Objective::head, targets, grads,
                                                         {true, derive_seed(dropout_seed, log.optimizer_steps)});
                if (!std::isfinite(loss)) {
                    throw TrainingError("adaptation diverged on task " + task.name + " at epoch " +
                                        std::to_string(epoch));
                }
                if (cfg.head_only) {
                    std::span<float> p(params.data);
                    adamw_step(p.subspan(head_offset), std::span<const float>(grads).subspan(head_offset), state, opt,
                               std::span<const std::uint8_t>(decay).subspan(head_offset));
                } else {
                    adamw_step(params.data, grads, state, opt, decay);
                }
                ++log.optimizer_steps;
                loss_sum += loss;
                ++batches;
            }
            ++epochs_trained;
            auto preds = predict();
            const double m = score(preds);
            record({epoch, loss_sum / static_cast<double>(batches), m}, std::move(preds));
        }
        for (std::size_t i : train_idx) {
            result.trained_ids.push_back(set.train.ids[i]);
        }
    }

    result.report = evaluate_predictions(set.eval, result.predictions);
    result.report.mode = log.mode;
    result.report.seed = cfg.seed;
    result.report.train_samples = train_idx.size();
    result.report.optimizer_steps = log.optimizer_steps;
    result.report.epochs_trained = epochs_trained;
    result.report.best_epoch = log.best_epoch;
    log.wall_seconds = seconds_since(t0);
    return result;
}

AdaptResult train_baseline(std::string_view preset, const AdaptationSet& set, AdaptConfig cfg,
                           const ModelConfig& base, const EpochCallback& on_epoch) {
    if (preset == "small") {
        cfg.mode = AdaptMode::baseline_small;
    } else if (preset == "medium") {
        cfg.mode = AdaptMode::baseline_medium;
    } else if (preset == "large") {
        cfg.mode = AdaptMode::baseline_large;
    } else {
        throw ConfigError("unknown baseline preset '" + std::string(preset) + "'");
    }
    return adapt(std::nullopt, set, cfg, base, on_epoch);
}

}  // namespace mtm
