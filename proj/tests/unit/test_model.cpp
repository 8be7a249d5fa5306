#include "mtm/errors.hpp"
#include "mtm/metrics.hpp"
#include "mtm/model.hpp"
#include "mtm/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace mtm;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.n_layers = 1;
    c.n_heads = 2;
    c.d_model = 8;
    c.d_ff = 16;
    c.vocab_size = 11;
    c.max_len = 6;
    c.dropout = 0.0;
    return c;
}

Encoding make_encoding(std::vector<int> ids, std::vector<int> labels) {
    Encoding e;
    e.attention_mask.assign(ids.size(), 1);
    e.ids = std::move(ids);
    e.labels = std::move(labels);
    return e;
}

std::vector<Encoding> tiny_batch() {
    const int I = kIgnoreLabel;
    std::vector<Encoding> b;
    b.push_back(make_encoding({2, 5, 4, 9, 6, 3}, {I, 5, 7, I, I, I}));
    b.push_back(make_encoding({2, 5, 7, 4, 0, 0}, {I, I, I, 8, I, I}));
    b[1].attention_mask[4] = 0;
    b[1].attention_mask[5] = 0;
    return b;
}

double max_relative_error(ParamSet<double>& p, const std::vector<Encoding>& batch, Objective obj,
                          const HeadTargets& targets) {
    std::vector<double> g(p.data.size(), 0.0);
    loss_and_grad<double>(p, batch, obj, targets, g, {false, 0});
    Rng pick(1);
    double worst = 0.0;
    const double h = 1e-4;
    for (int s = 0; s < 200; ++s) {
        const std::size_t i = pick.index(p.data.size());
        const double x = p.data[i];
        p.data[i] = x + h;
        const double lp = compute_loss<double>(p, batch, obj, targets, {false, 0});
        p.data[i] = x - h;
        const double lm = compute_loss<double>(p, batch, obj, targets, {false, 0});
        p.data[i] = x;
        const double fd = (lp - lm) / (2 * h);
        const double diff = std::fabs(fd - g[i]);
        const double scale = std::max({std::fabs(fd), std::fabs(g[i]), 1e-6});
        worst = std::max(worst, diff < 1e-11 ? 0.0 : diff / scale);
    }
    return worst;
}

ParamSet<double> perturbed(const ModelConfig& c, const HeadSpec& h) {
    ParamSet<double> p = init_params<double>(c, h, 7);
    Rng r(3);
    for (double& x : p.data) {
        x += r.normal(0.0, 0.3);
    }
    return p;
}

}  // namespace

TEST_CASE("analytic gradients match central differences (MLM)") {
    ParamSet<double> p = perturbed(tiny_config(), {});
    CHECK(max_relative_error(p, tiny_batch(), Objective::mlm, {}) <= 1e-4);
}

TEST_CASE("analytic gradients match central differences (classification head)") {
    ParamSet<double> p = perturbed(tiny_config(), HeadSpec::classification(3));
    HeadTargets t;
    t.classes = {0, 2};
    CHECK(max_relative_error(p, tiny_batch(), Objective::head, t) <= 1e-4);
}

TEST_CASE("analytic gradients match central differences (regression head, tied output)") {
    ModelConfig c = tiny_config();
    c.tie_output = true;
    ParamSet<double> p = perturbed(c, HeadSpec::regression(2));
    HeadTargets t;
    t.values = {0.3, -0.2, 1.0, 0.5};
    CHECK(max_relative_error(p, tiny_batch(), Objective::head, t) <= 1e-4);
    ParamSet<double> q = perturbed(c, {});
    CHECK(max_relative_error(q, tiny_batch(), Objective::mlm, {}) <= 1e-4);
}

TEST_CASE("layout names, sizes and decay flags") {
    const ModelConfig c = tiny_config();
    const ParamLayout l(c, HeadSpec::classification(3));
    CHECK(l.at("embeddings.token").size() == 11 * 8);
    CHECK(l.at("embeddings.position").size() == 6 * 8);
    CHECK(l.at("layer.0.attention.query").size() == 64);
    CHECK(l.at("layer.0.ffn.w1").size() == 8 * 16);
    CHECK(l.at("head.weight").size() == 8 * 3);
    CHECK_FALSE(l.at("layer.0.ffn.b1").decay);
    CHECK_FALSE(l.at("layer.0.attention.ln.gamma").decay);
    CHECK(l.at("mlm.weight").decay);
    CHECK(l.find("layer.1.ffn.w1") == nullptr);
    CHECK_THROWS_AS(l.at("nope"), DomainError);
    std::size_t total = 0;
    for (const auto& t : l.tensors()) {
        CHECK(t.offset == total);
        total += t.size();
    }
    CHECK(total == l.total());
    ModelConfig tied = c;
    tied.tie_output = true;
    CHECK(ParamLayout(tied, {}).find("mlm.weight") == nullptr);
}

TEST_CASE("initialization statistics and determinism") {
    ModelConfig c = ModelConfig::preset("desk", 300);
    const auto p = init_params<float>(c, {}, 123);
    const auto q = init_params<float>(c, {}, 123);
    CHECK(p.data == q.data);
    const auto tok = p.tensor("embeddings.token");
    double s = 0, ss = 0;
    for (float x : tok) {
        s += x;
        ss += static_cast<double>(x) * x;
    }
    const double n = static_cast<double>(tok.size());
    CHECK(std::fabs(s / n) < 0.002);
    CHECK(std::sqrt(ss / n) == doctest::Approx(0.02).epsilon(0.05));
    for (float x : p.tensor("layer.0.attention.ln.gamma")) {
        CHECK(x == 1.0f);
    }
    for (float x : p.tensor("layer.0.ffn.b2")) {
        CHECK(x == 0.0f);
    }
    const auto h = with_head(p, HeadSpec::regression(2), 9);
    CHECK(std::equal(p.data.begin(), p.data.end(), h.data.begin()));
    CHECK(h.data.size() == p.data.size() + 128 * 2 + 2);
}

TEST_CASE("presets") {
    CHECK(ModelConfig::preset("desk", 100).n_layers == 4);
    CHECK(ModelConfig::preset("base", 100).d_model == 768);
    CHECK(ModelConfig::preset("large", 100).n_layers == 9);
    CHECK(ModelConfig::preset("desk-medium", 100).n_layers == 6);
    CHECK(ModelConfig::preset("desk-medium", 100).d_model == 128);
    CHECK_THROWS_AS(ModelConfig::preset("huge", 100), ConfigError);
    ModelConfig bad = tiny_config();
    bad.n_heads = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("padding does not change outputs at real positions") {
    const ModelConfig c = tiny_config();
    const auto p = perturbed(c, HeadSpec::classification(3));
    const auto b = tiny_batch();
    const std::vector<Encoding> single = {b[1]};
    Encoding trimmed = b[1];
    trimmed.ids.resize(4);
    trimmed.attention_mask.resize(4);
    trimmed.labels.resize(4);
    const std::vector<Encoding> short_batch = {trimmed};
    const auto full = forward(p, std::span<const Encoding>(single));
    const auto cut = forward(p, std::span<const Encoding>(short_batch));
    for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t k = 0; k < 11; ++k) {
            CHECK(full.mlm_logits[t * 11 + k] == doctest::Approx(cut.mlm_logits[t * 11 + k]).epsilon(1e-12));
        }
    }
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(full.head[k] == doctest::Approx(cut.head[k]).epsilon(1e-12));
    }
    // Attention rows put no weight on padded keys.
    for (std::size_t q = 0; q < 6; ++q) {
        CHECK(full.attention0[q * 6 + 4] == 0.0);
        CHECK(full.attention0[q * 6 + 5] == 0.0);
    }
}

TEST_CASE("float and double paths agree") {
    const ModelConfig c = tiny_config();
    const auto pd = perturbed(c, {});
    const auto pf = cast_params<float>(pd);
    const auto b = tiny_batch();
    const auto a = mlm_loss_sum(pd, std::span<const Encoding>(b));
    const auto f = mlm_loss_sum(pf, std::span<const Encoding>(b));
    CHECK(a.second == 3);
    CHECK(f.first == doctest::Approx(a.first).epsilon(1e-5));
}

TEST_CASE("uniform logits give perplexity V") {
    for (std::size_t v : {11u, 2048u, 8192u}) {
        std::vector<double> logits(3 * v, 0.25);
        const std::vector<int> labels = {kIgnoreLabel, 1, static_cast<int>(v) - 1};
        CHECK(perplexity(mlm_loss(logits, labels, v)) == doctest::Approx(static_cast<double>(v)).epsilon(1e-12));
    }
    std::vector<double> logits(2 * 5, 0.0);
    const std::vector<int> none = {kIgnoreLabel, kIgnoreLabel};
    CHECK_THROWS_AS(mlm_loss(logits, none, 5), ContractViolation);
}

TEST_CASE("untrained desk model starts near uniform") {
    ModelConfig c = ModelConfig::preset("desk", 2048);
    c.max_len = 32;
    const auto p = init_params<float>(c, {}, 123);
    Encoding e = make_encoding({2, 40, 41, 4, 4, 3}, {kIgnoreLabel, kIgnoreLabel, kIgnoreLabel, 50, 60, kIgnoreLabel});
    const std::vector<Encoding> b = {e};
    const auto [sum, n] = mlm_loss_sum(p, std::span<const Encoding>(b));
    const double ppl = perplexity(sum / static_cast<double>(n));
    CHECK(ppl >= 1024.0);
    CHECK(ppl <= 4096.0);
}

TEST_CASE("dropout is seeded and off at evaluation") {
    ModelConfig c = tiny_config();
    c.dropout = 0.3;
    const auto p = perturbed(c, {});
    const auto b = tiny_batch();
    const double eval_loss = compute_loss<double>(p, b, Objective::mlm, {}, {false, 0});
    const double a = compute_loss<double>(p, b, Objective::mlm, {}, {true, 17});
    const double a2 = compute_loss<double>(p, b, Objective::mlm, {}, {true, 17});
    const double other = compute_loss<double>(p, b, Objective::mlm, {}, {true, 18});
    CHECK(a == a2);
    CHECK(a != eval_loss);
    CHECK(a != other);
    // With dropout on, the gradient is still the exact gradient of the sampled loss.
    std::vector<double> g(p.data.size(), 0.0);
    CHECK(loss_and_grad<double>(p, b, Objective::mlm, {}, g, {true, 17}) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("forward rejects bad input") {
    const auto p = perturbed(tiny_config(), {});
    std::vector<Encoding> b = tiny_batch();
    b[0].ids[1] = 11;
    CHECK_THROWS_AS(forward(p, std::span<const Encoding>(b)), DomainError);
    b = tiny_batch();
    b[1].ids.pop_back();
    b[1].attention_mask.pop_back();
    b[1].labels.pop_back();
    CHECK_THROWS_AS(forward(p, std::span<const Encoding>(b)), ContractViolation);
}

TEST_CASE("head loss") {
    const std::vector<double> logits = {0.0, 0.0, std::log(2.0), 0.0};
    HeadTargets t;
    t.classes = {0, 0};
    // Row 0: log 2; row 1: -log(2/3).
    CHECK(head_loss(logits, HeadSpec::classification(2), t) ==
          doctest::Approx((std::log(2.0) + std::log(1.5)) / 2.0).epsilon(1e-12));
    HeadTargets r;
    r.values = {1.0, 2.0, 3.0, 5.0};
    const std::vector<double> out = {1.0, 1.0, 1.0, 1.0};
    CHECK(head_loss(out, HeadSpec::regression(2), r) == doctest::Approx((0 + 1 + 4 + 16) / 4.0));
    CHECK_THROWS_AS(head_loss(out, HeadSpec::regression(2), t), ContractViolation);
}
