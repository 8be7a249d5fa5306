#include "fixtures.hpp"

#include "mtm/choropleth.hpp"
#include "mtm/csv.hpp"
#include "mtm/errors.hpp"
#include "mtm/report.hpp"
#include "mtm/rng.hpp"
#include "mtm/workflow.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>

using namespace mtm;
namespace fs = std::filesystem;

namespace {

Config tiny_config() {
    return Config::parse(R"(config_version = 1
world.width_km = 12
world.height_km = 12
world.n_agents = 60
world.n_prefectures = 4
world.n_municipalities = 8
world.n_regions = 2
world.n_city_seeds = 2
tokenizer.vocab_size = 120
tokenizer.max_len = 32
model.n_layers = 1
model.d_model = 32
model.d_ff = 64
pretrain.epochs = 1
pretrain.lr = 1e-3
pretrain.batch = 16
adapt.epochs = 1
adapt.lr = 1e-3
adapt.batch_region = 32
adapt.batch_trajectory = 4
adapt.fewshot_n = 8
adapt.dataset_n_region = 80
tasks = prefecture tree trip_length
)");
}

void run_all(const std::string& dir) {
    RunSettings s;
    s.config = tiny_config();
    s.out_dir = dir;
    for (const char* c : {"world-gen", "simulate", "ingest", "tokenize", "pretrain"}) {
        run_command(c, s);
    }
    s.task = "all";
    run_command("adapt", s);
    s.mode = "zeroshot";
    s.task = "prefecture";
    run_command("adapt", s);
    run_command("evaluate", s);
    s.mode.clear();
    s.task = "tree";
    run_command("export-map", s);
    s.mode = "finetune";
    run_command("export-map", s);
    run_command("report", s);
}

const std::string& shared_run() {
    static const std::string dir = [] {
        const std::string d = mtm::test::temp_dir("wf_a");
        run_all(d);
        return d;
    }();
    return dir;
}

}  // namespace

TEST_CASE("end-to-end runs are byte-identical and manifests are complete") {
    const std::string& a = shared_run();
    const std::string b = mtm::test::temp_dir("wf_b");
    run_all(b);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        const std::string name = e.path().filename().string();
        REQUIRE(fs::exists(fs::path(b) / name));
        CHECK_MESSAGE(read_file(e.path().string()) == read_file((fs::path(b) / name).string()), name);
        ++files;
    }
    CHECK(files > 30);
    for (const char* name : {"pretrain.ckpt", "report_prefecture_finetune_seed123.txt",
                             "map_tree_finetune_seed123.geojson", "map_tree_truth.geojson", "summary.csv",
                             "manifest_adapt_prefecture_zeroshot.json"}) {
        CHECK_MESSAGE(fs::exists(fs::path(a) / name), name);
    }
    const auto manifest = nlohmann::json::parse(read_file(a + "/manifest_pretrain.json"));
    CHECK(manifest["seed"] == 123);
    CHECK(manifest["inputs"].size() == 3);
    for (const auto& out : manifest["outputs"]) {
        const std::string path = out["path"];
        char hex[17];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(read_file(a + "/" + path))));
        CHECK(out["fnv1a64"] == std::string(hex));
    }
}

TEST_CASE("zero-shot report logs no training epochs") {
    const std::string& dir = shared_run();
    const MetricReport r = MetricReport::parse(read_file(dir + "/report_prefecture_zeroshot_seed123.txt"));
    CHECK(r.epochs_trained == 0);
    CHECK(r.optimizer_steps == 0);
    CHECK(r.train_samples == 0);
}

TEST_CASE("a different seed changes the artifacts") {
    const std::string dir = mtm::test::temp_dir("wf_seed");
    RunSettings s;
    s.config = tiny_config();
    s.out_dir = dir;
    s.seed = 7;
    run_command("world-gen", s);
    s.seed = 123;
    const std::string other = mtm::test::temp_dir("wf_seed2");
    s.out_dir = other;
    run_command("world-gen", s);
    CHECK(read_file(dir + "/world.csv") != read_file(other + "/world.csv"));
}

TEST_CASE("choropleth export round-trips") {
    const std::string& dir = shared_run();
    const auto values = import_choropleth(dir + "/map_tree_truth.geojson");
    CHECK(values.size() > 50);
    const auto doc = nlohmann::json::parse(read_file(dir + "/map_tree_truth.geojson"));
    CHECK(doc["type"] == "FeatureCollection");
    const auto& ring = doc["features"][0]["geometry"]["coordinates"][0];
    CHECK(ring.size() == 7);
    CHECK(ring[0] == ring[6]);
}

TEST_CASE("workflow errors") {
    RunSettings s;
    s.config = tiny_config();
    s.out_dir = mtm::test::temp_dir("wf_err");
    CHECK_THROWS_AS(run_command("fly", s), ConfigError);
    CHECK_THROWS_AS(run_command("pretrain", s), IoError);
    s.config.set("model.colour", "blue");
    CHECK_THROWS_AS(run_command("world-gen", s), ConfigError);
    s.config = tiny_config();
    s.task = "prefecture";
    s.mode = "baseline";
    CHECK_THROWS_AS(run_command("adapt", s), ConfigError);
    CHECK(Config::parse(default_config_text()).get("model.preset", "") == "desk");
}
