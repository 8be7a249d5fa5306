#include "mtm/workflow.hpp"

#include "mtm/checkpoint.hpp"
#include "mtm/choropleth.hpp"
#include "mtm/csv.hpp"
#include "mtm/errors.hpp"
#include "mtm/pipeline.hpp"
#include "mtm/report.hpp"
#include "mtm/rng.hpp"
#include "mtm/tasks.hpp"
#include "mtm/tokenizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;

namespace mtm {

namespace {

struct KeyDefault {
    const char* key;
    const char* value;
};

// Defaults keep the full-scale hyper-parameters unless the desk setting
// forces a change.
constexpr KeyDefault kDefaults[] = {
    {"seed", "123"},
    {"world.center_lat", "35.68"},
    {"world.center_lon", "139.69"},
    {"world.width_km", "60"},
    {"world.height_km", "60"},
    {"world.n_regions", "4"},
    {"world.n_prefectures", "10"},
    {"world.n_municipalities", "40"},
    {"world.n_city_seeds", "6"},
    {"world.n_water_blobs", "3"},
    {"world.n_agents", "2000"},
    {"world.n_days", "28"},
    {"world.start_date", "2023-02-01"},
    {"world.gravity_beta", "2.0"},
    {"world.p_travel", "0.15"},
    {"world.holidays", "2023-02-11 2023-02-23"},
    {"tokenizer.vocab_size", "8192"},
    {"tokenizer.max_len", "512"},
    {"tokenizer.mask_ratio", "0.2"},
    {"tokenizer.bert_corruption", "false"},
    {"model.preset", "desk"},
    {"model.n_layers", ""},
    {"model.n_heads", ""},
    {"model.d_model", ""},
    {"model.d_ff", ""},
    {"model.dropout", "0.1"},
    {"model.tie_output", "false"},
    {"pretrain.epochs", "10"},
    {"pretrain.lr", "5e-5"},
    {"pretrain.weight_decay", "0.1"},
    {"pretrain.batch", "64"},
    {"adapt.epochs", "20"},
    {"adapt.lr", "2e-5"},
    {"adapt.weight_decay", "0.1"},
    {"adapt.batch_region", "1024"},
    {"adapt.batch_trajectory", "32"},
    {"adapt.fewshot_n", "64"},
    {"adapt.dataset_n_region", "5000"},
    {"adapt.dataset_n_trajectory", "0"},
    {"adapt.train_frac", "0.8"},
    {"adapt.head_only", "false"},
    {"tasks", "centroid population region prefecture municipality built tree geo_diversity trip_length "
              "travel_prefecture travel_region greenery"},
};

std::string def(const std::string& key) {
    for (const KeyDefault& kd : kDefaults) {
        if (key == kd.key) {
            return kd.value;
        }
    }
    throw ContractViolation("no default for config key " + key);
}

std::string str(const Config& c, const std::string& key) { return c.get(key, def(key)); }
int int_of(const Config& c, const std::string& key) { return parse_int(str(c, key), "config key " + key); }
double dbl(const Config& c, const std::string& key) { return parse_double(str(c, key), "config key " + key); }
bool flag(const Config& c, const std::string& key) {
    Config tmp;
    tmp.set(key, str(c, key));
    return tmp.get_bool(key, false);
}

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string w; in >> w;) {
        out.push_back(w);
    }
    return out;
}

std::string hex64(std::uint64_t x) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, x);
    return buf;
}

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

class Stage {
public:
    Stage(const RunSettings& s, std::string command, std::string suffix = {})
        : s_(s), command_(std::move(command)), suffix_(std::move(suffix)), seed_(s.effective_seed()) {
        fs::create_directories(s_.out_dir);
    }

    std::uint64_t seed() const { return seed_; }
    const Config& config() const { return s_.config; }

    /// Path of an artifact that must already exist; recorded as an input.
    std::string input(const std::string& name) {
        const std::string p = path(name);
        if (!fs::exists(p)) {
            throw IoError("missing input artifact " + p + " (run the earlier pipeline commands first)");
        }
        inputs_.push_back(name);
        return p;
    }
    /// Path of an artifact this stage writes; recorded as an output.
    std::string output(const std::string& name) {
        outputs_.push_back(name);
        return path(name);
    }
    std::string path(const std::string& name) const { return (fs::path(s_.out_dir) / name).string(); }

    void log(const std::string& line) const {
        if (s_.log) {
            s_.log(line);
        }
    }

    void write_manifest() {
        nlohmann::ordered_json m;
        m["command"] = command_;
        m["config_version"] = kConfigVersion;
        m["config_hash"] = hex64(fnv1a64(s_.config.to_text()));
        m["seed"] = seed_;
        m["task"] = s_.task;
        m["mode"] = s_.mode;
        m["preset"] = s_.preset;
        const auto files = [this](const std::vector<std::string>& names) {
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (const auto& n : names) {
                arr.push_back({{"path", n}, {"fnv1a64", hex64(fnv1a64(read_file(path(n))))}});
            }
            return arr;
        };
        m["inputs"] = files(inputs_);
        m["outputs"] = files(outputs_);
        const std::string name = "manifest_" + command_ + (suffix_.empty() ? "" : "_" + suffix_) + ".json";
        write_file(path(name), m.dump(2) + "\n");
    }

private:
    const RunSettings& s_;
    std::string command_;
    std::string suffix_;
    std::uint64_t seed_;
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
};

SyntheticWorld load_world(Stage& st, const WorldSpec& spec) {
    return read_ground_truth(st.input("world.csv"), spec.bbox);
}

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

// ---------------------------------------------------------------------------
// Commands

void cmd_world_gen(const RunSettings& s) {
    Stage st(s, "world-gen");
    const WorldSpec spec = world_spec_from(s.config, st.seed());
    const SyntheticWorld world = build_world(spec);
    write_ground_truth(world, st.output("world.csv"));
    write_holidays(spec.holidays, st.output("holidays.txt"));
    st.log("world: " + std::to_string(world.size()) + " cells");
    st.write_manifest();
}

void cmd_simulate(const RunSettings& s) {
    Stage st(s, "simulate");
    WorldSpec spec = world_spec_from(s.config, st.seed());
    spec.holidays = read_holidays(st.input("holidays.txt"));
    const SyntheticWorld world = load_world(st, spec);
    TraceWriter writer(st.output("traces.csv"));
    std::size_t points = 0;
    simulate_traces(world, spec, [&](const AgentTrace& t) {
        writer.write(t);
        points += t.points.size();
    });
    st.log("traces: " + std::to_string(spec.n_agents) + " agents, " + std::to_string(points) + " points");
    st.write_manifest();
}

void cmd_ingest(const RunSettings& s) {
    Stage st(s, "ingest");
    const WorldSpec spec = world_spec_from(s.config, st.seed());
    const GridSpec grid(spec.bbox);
    std::vector<Trajectory> trajs;
    {
        const std::vector<GpsPoint> points = points_from_traces(read_traces(st.input("traces.csv")));
        const std::vector<CheckIn> checkins = points_to_checkins(points, grid);
        trajs = checkins_to_trajectories(checkins, derive_seed(st.seed(), "traj-salt"));
        st.log("check-ins: " + std::to_string(checkins.size()) + ", trajectories: " + std::to_string(trajs.size()));
    }
    trajs = filter_trajectories(std::move(trajs));
    write_corpus(trajs, st.output("corpus.tsv"));
    const SplitSet split = split_corpus(trajs, st.seed());
    write_split(split, st.output("split.tsv"));
    st.log("corpus: " + std::to_string(trajs.size()) + " trajectories; split " + std::to_string(split.pretrain.size()) +
           "/" + std::to_string(split.validation.size()) + "/" + std::to_string(split.test.size()));
    st.write_manifest();
}

struct CorpusSplits {
    std::vector<Trajectory> pretrain;
    std::vector<Trajectory> validation;
    std::vector<Trajectory> test;
};

CorpusSplits load_splits(Stage& st) {
    const std::vector<Trajectory> corpus = read_corpus(st.input("corpus.tsv"));
    const SplitSet split = read_split(st.input("split.tsv"));
    return {select(corpus, split.pretrain), select(corpus, split.validation), select(corpus, split.test)};
}

std::size_t max_len_of(const Config& c) { return static_cast<std::size_t>(int_of(c, "tokenizer.max_len")); }

void cmd_tokenize(const RunSettings& s) {
    Stage st(s, "tokenize");
    const CorpusSplits splits = load_splits(st);
    std::map<std::string, std::uint64_t> counts;
    for (const Trajectory& t : splits.pretrain) {
        for (const auto& h : t.hashes) {
            ++counts[h];
        }
    }
    const Vocab vocab = train_vocab(counts, static_cast<std::size_t>(int_of(s.config, "tokenizer.vocab_size")));
    vocab.save(st.output("vocab.txt"));
    MaskingOptions opts;
    opts.ratio = dbl(s.config, "tokenizer.mask_ratio");
    opts.bert_corruption = flag(s.config, "tokenizer.bert_corruption");
    const std::uint64_t mask_seed = derive_seed(st.seed(), "mask");
    const std::size_t max_len = max_len_of(s.config);
    write_masked_corpus(splits.pretrain, mask_corpus(splits.pretrain, vocab, mask_seed, max_len, opts),
                        st.output("masked_pretrain.tsv"));
    write_masked_corpus(splits.validation, mask_corpus(splits.validation, vocab, mask_seed, max_len, opts),
                        st.output("masked_validation.tsv"));
    st.log("vocab: " + std::to_string(vocab.size()) + " tokens");
    st.write_manifest();
}

std::vector<Encoding> encodings_of(std::vector<MaskedRecord> records) {
    std::vector<Encoding> out;
    out.reserve(records.size());
    for (auto& r : records) {
        out.push_back(std::move(r.encoding));
    }
    return out;
}

void cmd_pretrain(const RunSettings& s) {
    Stage st(s, "pretrain");
    const Vocab vocab = Vocab::load(st.input("vocab.txt"));
    const std::size_t max_len = max_len_of(s.config);
    const auto train = encodings_of(read_masked_corpus(st.input("masked_pretrain.tsv"), vocab, max_len));
    const auto val = encodings_of(read_masked_corpus(st.input("masked_validation.tsv"), vocab, max_len));
    const ModelConfig mc = model_config_from(s.config, static_cast<int>(vocab.size()));
    const PretrainConfig pc = pretrain_config_from(s.config, st.seed());
    const PretrainResult res = pretrain(mc, train, val, pc, vocab.content_hash(), [&st](const EpochRecord& r) {
        st.log("pretrain epoch " + std::to_string(r.epoch) + ": train_loss " + num(r.train_loss) +
               " val_perplexity " + num(r.val_metric));
    });
    save_checkpoint(res.best, st.output("pretrain.ckpt"));
    const std::string tag = seed_tag(st.seed());
    write_file(st.output("runlog_pretrain_" + tag + ".csv"), res.log.to_csv());
    std::string rep;
    rep += "task: pretrain\n";
    rep += "seed: " + std::to_string(st.seed()) + "\n";
    rep += "vocab_size: " + std::to_string(vocab.size()) + "\n";
    rep += "train_samples: " + std::to_string(train.size()) + "\n";
    rep += "validation_samples: " + std::to_string(val.size()) + "\n";
    rep += "epochs_trained: " + std::to_string(pc.epochs) + "\n";
    rep += "optimizer_steps: " + std::to_string(res.log.optimizer_steps) + "\n";
    rep += "initial_perplexity: " + num(res.log.epochs.front().val_metric) + "\n";
    rep += "final_perplexity: " + num(res.log.epochs.back().val_metric) + "\n";
    rep += "best_epoch: " + std::to_string(res.log.best_epoch) + "\n";
    rep += "best_perplexity: " + num(res.log.best().val_metric) + "\n";
    write_file(st.output("report_pretrain_" + tag + ".txt"), rep);
    st.write_manifest();
}

std::string resolve_mode(const RunSettings& s) {
    std::string mode = s.mode.empty() ? "finetune" : s.mode;
    if (mode == "baseline") {
        if (s.preset.empty()) {
            throw ConfigError("--mode baseline needs --preset small|medium|large");
        }
        mode += "-" + s.preset;
    }
    adapt_mode_from_string(mode);
    return mode;
}

std::vector<std::string> resolve_tasks(const RunSettings& s) {
    if (s.task.empty()) {
        throw ConfigError("this command needs --task NAME (or --task all)");
    }
    if (s.task == "all") {
        return s.config.get_list("tasks").empty() ? split_words(def("tasks")) : s.config.get_list("tasks");
    }
    return {s.task};
}

void adapt_one(const RunSettings& s, const std::string& task_name, const std::string& mode_name) {
    Stage st(s, "adapt", task_name + "_" + mode_name);
    AdaptConfig ac = adapt_config_from(s.config, st.seed());
    ac.mode = adapt_mode_from_string(mode_name);
    WorldSpec spec = world_spec_from(s.config, st.seed());
    const SyntheticWorld world = load_world(st, spec);
    const HolidayCalendar calendar = read_holidays(st.input("holidays.txt"));
    const Vocab vocab = Vocab::load(st.input("vocab.txt"));
    const TaskSpec task = task_spec(task_name, world);
    std::vector<Trajectory> test;
    if (task.input == TaskInput::trajectory) {
        test = load_splits(st).test;
    }
    const AdaptationSet set = build_adaptation_set(task, world, test, vocab, calendar, ac);
    std::optional<Checkpoint> ckpt;
    if (uses_pretrained(ac.mode)) {
        ckpt = load_checkpoint(st.input("pretrain.ckpt"), {vocab.content_hash(), std::nullopt});
    }
    const ModelConfig base = ckpt ? ckpt->params.config : model_config_from(s.config, static_cast<int>(vocab.size()));
    const AdaptResult res = adapt(ckpt, set, ac, base, [&](const EpochRecord& r) {
        st.log(task_name + " " + mode_name + " epoch " + std::to_string(r.epoch) + ": train_loss " +
               num(r.train_loss) + " " + (task.output.kind == HeadKind::classification ? "f1 " : "mse ") +
               num(r.val_metric));
    });
    const std::string tag = seed_tag(st.seed());
    const std::string run = task_name + "_" + mode_name + "_" + tag;
    write_label_table(set.eval, st.output("labels_" + task_name + "_" + tag + ".csv"));
    write_predictions(set.eval, res.predictions, st.output("predictions_" + run + ".csv"));
    write_file(st.output("runlog_" + run + ".csv"), res.log.to_csv());
    write_file(st.output("report_" + run + ".txt"), res.report.to_text());
    st.log(task_name + " " + mode_name + ": headline " + num(res.report.headline()));
    st.write_manifest();
}

void cmd_adapt(const RunSettings& s) {
    const std::string mode = resolve_mode(s);
    for (const auto& t : resolve_tasks(s)) {
        adapt_one(s, t, mode);
    }
}

void cmd_evaluate(const RunSettings& s) {
    const std::string mode = resolve_mode(s);
    for (const auto& task_name : resolve_tasks(s)) {
        Stage st(s, "evaluate", task_name + "_" + mode);
        const WorldSpec spec = world_spec_from(s.config, st.seed());
        const SyntheticWorld world = load_world(st, spec);
        const TaskSpec task = task_spec(task_name, world);
        const std::string tag = seed_tag(st.seed());
        const std::string run = task_name + "_" + mode + "_" + tag;
        const LabelTable labels = read_label_table(task, st.input("labels_" + task_name + "_" + tag + ".csv"));
        const auto [ids, rows] = read_predictions(st.input("predictions_" + run + ".csv"));
        if (ids != labels.ids) {
            throw ParseError("predictions and labels list different samples for " + run);
        }
        MetricReport r = evaluate_predictions(labels, rows);
        const MetricReport trained = MetricReport::parse(read_file(st.input("report_" + run + ".txt")));
        r.mode = trained.mode;
        r.seed = trained.seed;
        r.train_samples = trained.train_samples;
        r.optimizer_steps = trained.optimizer_steps;
        r.epochs_trained = trained.epochs_trained;
        r.best_epoch = trained.best_epoch;
        write_file(st.output("evaluation_" + run + ".txt"), r.to_text());
        st.write_manifest();
    }
}

void cmd_export_map(const RunSettings& s) {
    for (const auto& task_name : resolve_tasks(s)) {
        Stage st(s, "export-map", task_name + (s.mode.empty() ? "_truth" : "_" + resolve_mode(s)));
        const WorldSpec spec = world_spec_from(s.config, st.seed());
        const SyntheticWorld world = load_world(st, spec);
        const TaskSpec task = task_spec(task_name, world);
        if (task.input != TaskInput::region) {
            st.log("skipping map for trajectory task " + task_name);
            continue;
        }
        const bool cls = task.output.kind == HeadKind::classification;
        const auto dim = static_cast<std::size_t>(task.output.dim);
        std::map<CellId, double> values;
        ChoroplethStyle style;
        style.task = task_name;
        std::string name;
        if (s.mode.empty()) {
            const LabelTable truth = region_labels(task, world.cells(), world);
            for (std::size_t i = 0; i < truth.size(); ++i) {
                values[world.cells()[i]] = cls ? truth.classes[i] : truth.values[i * dim];
            }
            style.layer = "truth";
            name = "map_" + task_name + "_truth.geojson";
        } else {
            const std::string mode = resolve_mode(s);
            const std::string run = task_name + "_" + mode + "_" + seed_tag(st.seed());
            const auto [ids, rows] = read_predictions(st.input("predictions_" + run + ".csv"));
            for (std::size_t i = 0; i < ids.size(); ++i) {
                values[CellId::from_hash(ids[i])] = rows[i].at(0);
            }
            style.layer = "prediction";
            name = "map_" + run + ".geojson";
        }
        export_choropleth(values, world.grid(), st.output(name), style);
        st.write_manifest();
    }
}

void cmd_report(const RunSettings& s) {
    Stage st(s, "report");
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(s.out_dir)) {
        const std::string n = entry.path().filename().string();
        if (n.starts_with("report_") && n.ends_with(".txt")) {
            names.push_back(n);
        }
    }
    std::sort(names.begin(), names.end());
    std::string csv = "task,mode,seed,train_samples,eval_samples,best_epoch,accuracy,precision_weighted,"
                      "recall_weighted,f1_weighted,mae,rmse,mape,r2\n";
    std::string txt;
    for (const auto& n : names) {
        const std::string text = read_file(st.input(n));
        if (n.starts_with("report_pretrain_")) {
            txt += "== " + n + "\n" + text + "\n";
            continue;
        }
        const MetricReport r = MetricReport::parse(text);
        csv += r.task + "," + r.mode + "," + std::to_string(r.seed) + "," + std::to_string(r.train_samples) + "," +
               std::to_string(r.eval_samples) + "," + std::to_string(r.best_epoch) + ",";
        if (r.classification) {
            csv += num(r.classification->accuracy) + "," + num(r.classification->precision) + "," +
                   num(r.classification->recall) + "," + num(r.classification->f1) + ",,,,\n";
        } else {
            csv += ",,,," + num(r.regression->mae) + "," + num(r.regression->rmse) + "," + num(r.regression->mape) +
                   "," + (r.regression->r2_defined ? num(r.regression->r2) : "undefined") + "\n";
        }
        txt += "== " + n + "\n" + text + "\n";
    }
    write_file(st.output("summary.csv"), csv);
    write_file(st.output("summary.txt"), txt);
    st.log("summarized " + std::to_string(names.size()) + " reports");
    st.write_manifest();
}

}  // namespace

std::uint64_t RunSettings::effective_seed() const {
    return seed ? *seed : parse_uint64(config.get("seed", def("seed")), "config key seed");
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"world-gen", "simulate", "ingest",     "tokenize", "pretrain",
                                                   "adapt",     "evaluate", "export-map", "report"};
    return names;
}

const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = [] {
        std::set<std::string> k{"config_version"};
        for (const KeyDefault& kd : kDefaults) {
            k.insert(kd.key);
        }
        return k;
    }();
    return keys;
}

WorldSpec world_spec_from(const Config& c, std::uint64_t seed) {
    WorldSpec w;
    w.seed = seed;
    w.bbox = StudyArea::around({dbl(c, "world.center_lat"), dbl(c, "world.center_lon")}, dbl(c, "world.width_km"),
                               dbl(c, "world.height_km"));
    w.n_regions = int_of(c, "world.n_regions");
    w.n_prefectures = int_of(c, "world.n_prefectures");
    w.n_municipalities = int_of(c, "world.n_municipalities");
    w.n_city_seeds = int_of(c, "world.n_city_seeds");
    w.n_water_blobs = int_of(c, "world.n_water_blobs");
    w.n_agents = int_of(c, "world.n_agents");
    w.n_days = int_of(c, "world.n_days");
    w.start_date = parse_date(str(c, "world.start_date"));
    w.gravity_beta = dbl(c, "world.gravity_beta");
    w.p_travel = dbl(c, "world.p_travel");
    for (const auto& d : split_words(str(c, "world.holidays"))) {
        w.holidays.add(parse_date(d));
    }
    w.validate();
    return w;
}

ModelConfig model_config_from(const Config& c, int vocab_size) {
    ModelConfig m = ModelConfig::preset(str(c, "model.preset"), vocab_size);
    const auto override_int = [&c](const char* key, int& field) {
        const std::string v = str(c, key);
        if (!v.empty()) {
            field = parse_int(v, std::string("config key ") + key);
        }
    };
    override_int("model.n_layers", m.n_layers);
    override_int("model.n_heads", m.n_heads);
    override_int("model.d_model", m.d_model);
    override_int("model.d_ff", m.d_ff);
    m.max_len = int_of(c, "tokenizer.max_len");
    m.dropout = dbl(c, "model.dropout");
    m.tie_output = flag(c, "model.tie_output");
    m.validate();
    return m;
}

PretrainConfig pretrain_config_from(const Config& c, std::uint64_t seed) {
    PretrainConfig p;
    p.epochs = int_of(c, "pretrain.epochs");
    p.lr = dbl(c, "pretrain.lr");
    p.weight_decay = dbl(c, "pretrain.weight_decay");
    p.batch = int_of(c, "pretrain.batch");
    p.seed = seed;
    p.validate();
    return p;
}

AdaptConfig adapt_config_from(const Config& c, std::uint64_t seed) {
    AdaptConfig a;
    a.epochs = int_of(c, "adapt.epochs");
    a.lr = dbl(c, "adapt.lr");
    a.weight_decay = dbl(c, "adapt.weight_decay");
    a.batch_region = int_of(c, "adapt.batch_region");
    a.batch_trajectory = int_of(c, "adapt.batch_trajectory");
    a.fewshot_n = int_of(c, "adapt.fewshot_n");
    a.dataset_n_region = int_of(c, "adapt.dataset_n_region");
    a.dataset_n_trajectory = int_of(c, "adapt.dataset_n_trajectory");
    a.train_frac = dbl(c, "adapt.train_frac");
    a.head_only = flag(c, "adapt.head_only");
    a.max_len = int_of(c, "tokenizer.max_len");
    a.seed = seed;
    a.validate();
    return a;
}

void run_command(const std::string& command, const RunSettings& settings) {
    settings.config.require_known(known_config_keys());
    if (command == "world-gen") {
        cmd_world_gen(settings);
    } else if (command == "simulate") {
        cmd_simulate(settings);
    } else if (command == "ingest") {
        cmd_ingest(settings);
    } else if (command == "tokenize") {
        cmd_tokenize(settings);
    } else if (command == "pretrain") {
        cmd_pretrain(settings);
    } else if (command == "adapt") {
        cmd_adapt(settings);
    } else if (command == "evaluate") {
        cmd_evaluate(settings);
    } else if (command == "export-map") {
        cmd_export_map(settings);
    } else if (command == "report") {
        cmd_report(settings);
    } else {
        throw ConfigError("unknown command '" + command + "'");
    }
}

std::string default_config_text() {
    std::string out = "config_version = " + std::to_string(kConfigVersion) + "\n";
    for (const KeyDefault& kd : kDefaults) {
        if (*kd.value == '\0') {
            out += "# " + std::string(kd.key) + " =\n";
        } else {
            out += std::string(kd.key) + " = " + kd.value + "\n";
        }
    }
    return out;
}

}  // namespace mtm
