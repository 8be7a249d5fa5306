#include "fixtures.hpp"

#include "mtm/errors.hpp"
#include "mtm/tokenizer.hpp"
#include "mtm/training.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace mtm;
using mtm::test::small_corpus;
using mtm::test::small_spec;
using mtm::test::small_world;

namespace {

struct Fixture {
    Vocab vocab;
    std::vector<Trajectory> pre, val, test;
    std::vector<Encoding> pre_x, val_x;
    ModelConfig model;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture x;
        const SplitSet s = split_corpus(small_corpus(), 123);
        x.pre = select(small_corpus(), s.pretrain);
        x.val = select(small_corpus(), s.validation);
        x.test = select(small_corpus(), s.test);
        std::vector<std::string> hashes;
        for (const auto& t : x.pre) {
            hashes.insert(hashes.end(), t.hashes.begin(), t.hashes.end());
        }
        x.vocab = train_vocab(hashes, 200);
        for (auto& r : mask_corpus(x.pre, x.vocab, 1, 48)) {
            x.pre_x.push_back(r.encoding);
        }
        for (auto& r : mask_corpus(x.val, x.vocab, 1, 48)) {
            x.val_x.push_back(r.encoding);
        }
        x.model = ModelConfig::preset("desk", static_cast<int>(x.vocab.size()));
        x.model.n_layers = 1;
        x.model.d_model = 32;
        x.model.d_ff = 64;
        x.model.max_len = 48;
        return x;
    }();
    return f;
}

PretrainResult short_pretrain() {
    PretrainConfig pc;
    pc.epochs = 2;
    pc.lr = 1e-3;
    pc.batch = 16;
    return pretrain(fixture().model, fixture().pre_x, fixture().val_x, pc, fixture().vocab.content_hash());
}

AdaptConfig small_adapt(AdaptMode mode) {
    AdaptConfig ac;
    ac.mode = mode;
    ac.epochs = 2;
    ac.lr = 1e-3;
    ac.batch_region = 64;
    ac.batch_trajectory = 8;
    ac.dataset_n_region = 200;
    ac.fewshot_n = 16;
    ac.max_len = 48;
    return ac;
}

}  // namespace

TEST_CASE("pre-training logs epoch 0, lowers perplexity and keeps the best epoch") {
    const PretrainResult r = short_pretrain();
    REQUIRE(r.log.epochs.size() == 3);
    CHECK(std::isnan(r.log.epochs[0].train_loss));
    const double v = static_cast<double>(fixture().vocab.size());
    CHECK(r.log.epochs[0].val_metric >= v / 2);
    CHECK(r.log.epochs[0].val_metric <= 2 * v);
    CHECK(r.log.epochs[2].val_metric < r.log.epochs[0].val_metric);
    CHECK(r.log.best().val_metric <= r.log.epochs[1].val_metric);
    CHECK(r.best.meta.epoch == r.log.best_epoch);
    CHECK(r.best.meta.vocab_hash == fixture().vocab.content_hash());
    CHECK(r.log.optimizer_steps == 2 * ((fixture().pre_x.size() + 15) / 16));
    CHECK(validation_perplexity(r.best.params, fixture().val_x) ==
          doctest::Approx(r.log.best().val_metric).epsilon(1e-9));
    const PretrainResult again = short_pretrain();
    CHECK(again.best.params.data == r.best.params.data);
    CHECK(again.log.to_csv() == r.log.to_csv());
}

TEST_CASE("adaptation sets are seeded, disjoint and sized") {
    const TaskSpec task = task_spec("prefecture", small_world());
    const AdaptConfig ac = small_adapt(AdaptMode::finetune);
    const AdaptationSet a = build_adaptation_set(task, small_world(), {}, fixture().vocab, small_spec().holidays, ac);
    CHECK(a.train.size() == 160);
    CHECK(a.eval.size() == 40);
    CHECK(a.train_x.size() == 160);
    std::set<std::string> ids(a.train.ids.begin(), a.train.ids.end());
    for (const auto& id : a.eval.ids) {
        CHECK_FALSE(ids.contains(id));
    }
    const AdaptationSet b = build_adaptation_set(task, small_world(), {}, fixture().vocab, small_spec().holidays, ac);
    CHECK(a.eval.ids == b.eval.ids);

    const TaskSpec traj = task_spec("geo_diversity", small_world());
    const AdaptationSet t = build_adaptation_set(traj, small_world(), fixture().test, fixture().vocab,
                                                 small_spec().holidays, ac);
    std::set<std::string> test_ids;
    for (const auto& tr : fixture().test) {
        test_ids.insert(tr.traj_id);
    }
    for (const auto& id : t.train.ids) {
        CHECK(test_ids.contains(id));
    }
    CHECK(t.train.size() + t.eval.size() == fixture().test.size());
    // Evaluation trajectories never appear in pre-training.
    for (const auto& tr : fixture().pre) {
        CHECK_FALSE(test_ids.contains(tr.traj_id));
    }
}

TEST_CASE("zero-shot trains nothing; few-shot trains on at most n samples") {
    const PretrainResult pre = short_pretrain();
    const TaskSpec task = task_spec("prefecture", small_world());
    const AdaptationSet set = build_adaptation_set(task, small_world(), {}, fixture().vocab, small_spec().holidays,
                                                   small_adapt(AdaptMode::finetune));
    const AdaptResult z = adapt(pre.best, set, small_adapt(AdaptMode::zeroshot), fixture().model);
    CHECK(z.log.optimizer_steps == 0);
    CHECK(z.report.epochs_trained == 0);
    CHECK(z.log.epochs.size() == 1);
    CHECK(z.trained_ids.empty());
    CHECK(z.predictions.size() == set.eval.size());

    const AdaptResult f = adapt(pre.best, set, small_adapt(AdaptMode::fewshot), fixture().model);
    CHECK(f.trained_ids.size() == 16);
    std::set<std::string> train(set.train.ids.begin(), set.train.ids.end());
    for (const auto& id : f.trained_ids) {
        CHECK(train.contains(id));
    }
    CHECK(f.report.train_samples == 16);

    const AdaptResult ft = adapt(pre.best, set, small_adapt(AdaptMode::finetune), fixture().model);
    CHECK(ft.trained_ids.size() == 160);
    CHECK(ft.log.epochs.size() == 3);
    CHECK(ft.report.best_epoch == ft.log.best_epoch);
    const AdaptResult ft2 = adapt(pre.best, set, small_adapt(AdaptMode::finetune), fixture().model);
    CHECK(ft2.predictions == ft.predictions);
    CHECK_THROWS_AS(adapt(std::nullopt, set, small_adapt(AdaptMode::finetune), fixture().model), ConfigError);
}

TEST_CASE("regression adaptation reports label-unit metrics") {
    const TaskSpec task = task_spec("tree", small_world());
    const AdaptationSet set = build_adaptation_set(task, small_world(), {}, fixture().vocab, small_spec().holidays,
                                                   small_adapt(AdaptMode::random_init));
    const AdaptResult r = adapt(std::nullopt, set, small_adapt(AdaptMode::random_init), fixture().model);
    REQUIRE(r.report.regression.has_value());
    CHECK(r.report.regression->n == set.eval.size());
    // A reasonable model cannot be off by more than the label range.
    CHECK(r.report.regression->mae < 1.0);
    CHECK(r.log.metric == "mse");
    const AdaptResult b = train_baseline("small", set, small_adapt(AdaptMode::baseline_small), fixture().model);
    CHECK(b.report.mode == "baseline-small");
}

TEST_CASE("mode names and config validation") {
    for (AdaptMode m : {AdaptMode::finetune, AdaptMode::fewshot, AdaptMode::zeroshot, AdaptMode::random_init,
                        AdaptMode::baseline_small, AdaptMode::baseline_medium, AdaptMode::baseline_large}) {
        CHECK(adapt_mode_from_string(to_string(m)) == m);
    }
    CHECK_THROWS_AS(adapt_mode_from_string("transfer"), ConfigError);
    AdaptConfig ac;
    ac.train_frac = 1.5;
    CHECK_THROWS_AS(ac.validate(), ConfigError);
    PretrainConfig pc;
    pc.batch = 0;
    CHECK_THROWS_AS(pc.validate(), ConfigError);
}
