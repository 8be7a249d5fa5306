#pragma once

// BERT-style bidirectional encoder with a masked-token output projection and
// an optional classification/regression head. Parameters live in one flat
// buffer described by a ParamLayout; the same code runs in float (training)
// and double (gradient checks).

#include "mtm/tokenizer.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mtm {

struct ModelConfig {
    int n_layers = 4;
    int n_heads = 4;
    int d_model = 128;
    int d_ff = 512;
    int vocab_size = 0;
    int max_len = static_cast<int>(kMaxSeqLen);
    double dropout = 0.1;
    /// Reuse the token embedding matrix as the output projection.
    bool tie_output = false;

    /// "desk" (4,4,128,512), "small"/"medium"/"large" (3/6/9 layers,
    /// 12 heads, 768, 3072) and their desk-scaled counterparts
    /// "desk-small"/"desk-medium"/"desk-large" (3/6/9 layers, 4, 128, 512).
    static ModelConfig preset(std::string_view name, int vocab_size);

    void validate() const;
    int head_dim() const { return d_model / n_heads; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class HeadKind { none, classification, regression };

struct HeadSpec {
    HeadKind kind = HeadKind::none;
    /// K classes or D regression targets.
    int dim = 0;

    static HeadSpec classification(int k) { return {HeadKind::classification, k}; }
    static HeadSpec regression(int d) { return {HeadKind::regression, d}; }
    void validate() const;

    friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(std::string_view s);

struct TensorInfo {
    std::string name;
    std::size_t offset = 0;
    std::vector<int> shape;
    /// Participates in weight decay (matrices; not biases or layernorm).
    bool decay = true;

    std::size_t size() const;
};

class ParamLayout {
public:
    ParamLayout() = default;
    ParamLayout(const ModelConfig& config, const HeadSpec& head);

    const std::vector<TensorInfo>& tensors() const { return tensors_; }
    /// Throws DomainError for an unknown name.
    const TensorInfo& at(std::string_view name) const;
    const TensorInfo* find(std::string_view name) const;
    std::size_t total() const { return total_; }

    /// 1 for tensors that take weight decay, 0 otherwise, per element.
    std::vector<std::uint8_t> decay_mask() const;

private:
    void add(std::string name, std::vector<int> shape, bool decay);

    std::vector<TensorInfo> tensors_;
    std::size_t total_ = 0;
};

template <typename T>
struct ParamSet {
    ModelConfig config;
    HeadSpec head;
    ParamLayout layout;
    std::vector<T> data;

    std::span<T> tensor(std::string_view name) {
        const TensorInfo& t = layout.at(name);
        return {data.data() + t.offset, t.size()};
    }
    std::span<const T> tensor(std::string_view name) const {
        const TensorInfo& t = layout.at(name);
        return {data.data() + t.offset, t.size()};
    }
};

/// Weights ~ Normal(0, 0.02) drawn tensor by tensor in layout order, biases 0,
/// layernorm gamma 1 and beta 0.
template <typename T>
ParamSet<T> init_params(const ModelConfig& config, const HeadSpec& head, std::uint64_t seed);

/// Replaces the head (freshly initialized from `seed`), keeping every encoder
/// and output-projection tensor.
template <typename T>
ParamSet<T> with_head(const ParamSet<T>& params, const HeadSpec& head, std::uint64_t seed);

template <typename To, typename From>
ParamSet<To> cast_params(const ParamSet<From>& params);

/// Batch of equal-length encodings; pads carry attention 0.
struct ForwardOutput {
    std::size_t batch = 0;
    std::size_t seq_len = 0;
    std::vector<double> mlm_logits;  // batch x seq_len x vocab
    std::vector<double> pooled;      // batch x d_model
    std::vector<double> head;        // batch x head.dim (empty without head)
    /// Attention probabilities for layer 0, head 0 (batch x seq_len x seq_len),
    /// kept for inspection.
    std::vector<double> attention0;
};

/// Eval-mode forward pass (dropout off). DomainError when a token id is out
/// of range; ContractViolation when the encodings differ in length.
template <typename T>
ForwardOutput forward(const ParamSet<T>& params, std::span<const Encoding> batch);

/// Mean cross-entropy over positions whose label is not kIgnoreLabel.
/// `logits` is batch x seq_len x vocab. ContractViolation if none are masked.
double mlm_loss(std::span<const double> logits, std::span<const int> labels, std::size_t vocab);

struct HeadTargets {
    std::vector<int> classes;     // classification: one per example
    std::vector<double> values;   // regression: batch x dim, row-major
};

/// Classification: mean softmax cross-entropy. Regression: mean squared error
/// over all batch x dim outputs. ContractViolation on a kind mismatch.
double head_loss(std::span<const double> outputs, const HeadSpec& head, const HeadTargets& targets);

enum class Objective { mlm, head };

struct StepOptions {
    bool training = true;       // dropout on
    std::uint64_t dropout_seed = 0;
};

/// Loss of `objective` on the batch and its exact gradient with respect to
/// every parameter, accumulated (added) into `grads`, which must have the
/// layout's size. Encodings may differ in length; trailing pads are ignored.
template <typename T>
double loss_and_grad(const ParamSet<T>& params, std::span<const Encoding> batch, Objective objective,
                     const HeadTargets& targets, std::span<T> grads, const StepOptions& opts);

/// Loss only (no gradient), same semantics as loss_and_grad.
template <typename T>
double compute_loss(const ParamSet<T>& params, std::span<const Encoding> batch, Objective objective,
                    const HeadTargets& targets, const StepOptions& opts);

/// Sum of masked-position cross-entropies and their count, eval mode.
template <typename T>
std::pair<double, std::size_t> mlm_loss_sum(const ParamSet<T>& params, std::span<const Encoding> batch);

/// Head outputs (class logits or regression values) per example, eval mode.
template <typename T>
std::vector<std::vector<double>> predict_head(const ParamSet<T>& params, std::span<const Encoding> batch);

}  // namespace mtm
