#include "fixtures.hpp"

#include "mtm/checkpoint.hpp"
#include "mtm/errors.hpp"

#include <doctest.h>

using namespace mtm;

namespace {

Checkpoint sample_checkpoint() {
    ModelConfig c = ModelConfig::preset("desk", 64);
    c.n_layers = 2;
    c.max_len = 32;
    Checkpoint ck{init_params<float>(c, HeadSpec::classification(5), 3), {}, std::nullopt};
    ck.meta.seed = 123;
    ck.meta.epoch = 4;
    ck.meta.vocab_hash = 0xfeedbeefULL;
    ck.meta.extra["task"] = "prefecture";
    ck.meta.extra["note"] = "a b=c";
    return ck;
}

}  // namespace

TEST_CASE("checkpoint round-trips byte for byte") {
    Checkpoint ck = sample_checkpoint();
    const std::string bytes = serialize_checkpoint(ck);
    const Checkpoint back = parse_checkpoint(bytes);
    CHECK(back.params.config == ck.params.config);
    CHECK(back.params.head == ck.params.head);
    CHECK(back.params.data == ck.params.data);
    CHECK(back.meta == ck.meta);
    CHECK_FALSE(back.optimizer.has_value());
    CHECK(serialize_checkpoint(back) == bytes);

    ck.optimizer = AdamState(ck.params.data.size());
    ck.optimizer->step = 7;
    ck.optimizer->m[3] = 0.5f;
    const Checkpoint with_opt = parse_checkpoint(serialize_checkpoint(ck));
    REQUIRE(with_opt.optimizer.has_value());
    CHECK(*with_opt.optimizer == *ck.optimizer);

    const std::string dir = mtm::test::temp_dir("ckpt");
    save_checkpoint(ck, dir + "/a.ckpt");
    CHECK(serialize_checkpoint(load_checkpoint(dir + "/a.ckpt")) == serialize_checkpoint(ck));
}

TEST_CASE("checkpoint expectations are enforced") {
    const std::string bytes = serialize_checkpoint(sample_checkpoint());
    CHECK_NOTHROW(parse_checkpoint(bytes, {0xfeedbeefULL, std::nullopt}));
    CHECK_THROWS_AS(parse_checkpoint(bytes, {0x1234ULL, std::nullopt}), ConfigError);
    ModelConfig other = sample_checkpoint().params.config;
    other.d_ff = 256;
    CHECK_THROWS_AS(parse_checkpoint(bytes, {std::nullopt, other}), ConfigError);
}

TEST_CASE("corrupt checkpoints are parse errors") {
    const std::string bytes = serialize_checkpoint(sample_checkpoint());
    CHECK_THROWS_AS(parse_checkpoint("NOTACKPT"), ParseError);
    CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() / 2)), ParseError);
    std::string bad = bytes;
    bad[3] = 'X';
    CHECK_THROWS_AS(parse_checkpoint(bad), ParseError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), IoError);
}
