#pragma once

// Masked-trajectory pre-training and the adaptation harness (fine-tune,
// few-shot, zero-shot, randomly initialized and supervised baselines).

#include "mtm/checkpoint.hpp"
#include "mtm/model.hpp"
#include "mtm/report.hpp"
#include "mtm/tasks.hpp"
#include "mtm/tokenizer.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mtm {

struct PretrainConfig {
    int epochs = 10;
    double lr = 5e-5;
    double weight_decay = 0.1;
    int batch = 64;
    std::uint64_t seed = 123;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;  // NaN for the untrained epoch-0 row
    double val_metric = 0.0;
};

struct RunLog {
    std::string task;
    std::string mode;
    std::uint64_t seed = 0;
    std::string metric;
    bool higher_is_better = false;
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    std::size_t optimizer_steps = 0;
    std::size_t train_samples = 0;
    /// Kept in memory only, so written artifacts stay reproducible.
    double wall_seconds = 0.0;

    /// "epoch,train_loss,val_metric" rows.
    std::string to_csv() const;
    const EpochRecord& best() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct PretrainResult {
    /// Parameters of the epoch with the lowest validation perplexity.
    Checkpoint best;
    RunLog log;
};

/// Mean masked cross-entropy over the encodings, exponentiated.
double validation_perplexity(const ParamSet<float>& params, std::span<const Encoding> data);

/// Epoch 0 records the untrained validation perplexity; each later epoch one
/// pass over shuffled batches. TrainingError on a non-finite loss.
PretrainResult pretrain(const ModelConfig& config, std::span<const Encoding> train, std::span<const Encoding> val,
                        const PretrainConfig& cfg, std::uint64_t vocab_hash, const EpochCallback& on_epoch = {});

enum class AdaptMode { finetune, fewshot, zeroshot, random_init, baseline_small, baseline_medium, baseline_large };

std::string to_string(AdaptMode mode);
/// "finetune", "fewshot", "zeroshot", "random-init", "baseline-small",
/// "baseline-medium", "baseline-large". ConfigError otherwise.
AdaptMode adapt_mode_from_string(std::string_view s);
/// Whether the mode starts from a pre-trained encoder.
bool uses_pretrained(AdaptMode mode);

struct AdaptConfig {
    AdaptMode mode = AdaptMode::finetune;
    int epochs = 20;
    double lr = 2e-5;
    double weight_decay = 0.1;
    int batch_region = 1024;
    int batch_trajectory = 32;
    int fewshot_n = 64;
    /// Samples per task; 0 takes everything available.
    int dataset_n_region = 5000;
    int dataset_n_trajectory = 0;
    double train_frac = 0.8;
    std::uint64_t seed = 123;
    /// Few-shot variant that trains the head only.
    bool head_only = false;
    int max_len = static_cast<int>(kMaxSeqLen);

    void validate() const;
    int batch_for(TaskInput input) const;
};

struct AdaptationSet {
    TaskSpec task;
    LabelTable train;
    LabelTable eval;
    std::vector<Encoding> train_x;
    std::vector<Encoding> eval_x;
};

/// Region tasks draw cells uniformly without replacement from the world;
/// trajectory tasks draw from `test_split` only. The draw is cut into
/// train/eval at round(train_frac * n). ConfigError when too few samples.
AdaptationSet build_adaptation_set(const TaskSpec& task, const SyntheticWorld& world,
                                   std::span<const Trajectory> test_split, const Vocab& vocab,
                                   const HolidayCalendar& calendar, const AdaptConfig& cfg);

struct AdaptResult {
    RunLog log;
    MetricReport report;
    /// Head outputs on the eval set at the best epoch (class scores or
    /// regression values in label units).
    std::vector<std::vector<double>> predictions;
    /// Ids of every sample that took part in a gradient step.
    std::vector<std::string> trained_ids;
};

/// `pretrained` is required for finetune/fewshot/zeroshot and ignored
/// otherwise; `base` supplies vocabulary size, max_len and dropout for the
/// randomly initialized modes. Regression targets are standardized with
/// train-split statistics during training.
AdaptResult adapt(const std::optional<Checkpoint>& pretrained, const AdaptationSet& set, const AdaptConfig& cfg,
                  const ModelConfig& base, const EpochCallback& on_epoch = {});

/// Supervised-from-scratch baseline on the same sets; `preset` is one of
/// small/medium/large.
AdaptResult train_baseline(std::string_view preset, const AdaptationSet& set, AdaptConfig cfg,
                           const ModelConfig& base, const EpochCallback& on_epoch = {});

}  // namespace mtm
