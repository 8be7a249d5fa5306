#pragma once

// File-based pipeline behind the command-line tool. Every command reads the
// versioned config, consumes artifacts from the output directory, writes its
// own artifacts there and records a manifest (inputs, outputs, seeds and
// content hashes; no timestamps).
//
// Artifacts, relative to the output directory:
//   world-gen  world.csv holidays.txt
//   simulate   traces.csv
//   ingest     corpus.tsv split.tsv
//   tokenize   vocab.txt masked_pretrain.tsv masked_validation.tsv
//   pretrain   pretrain.ckpt runlog_pretrain_seed<N>.csv report_pretrain_seed<N>.txt
//   adapt      labels_<task>_seed<N>.csv predictions_<task>_<mode>_seed<N>.csv
//              runlog_<task>_<mode>_seed<N>.csv report_<task>_<mode>_seed<N>.txt
//   evaluate   evaluation_<task>_<mode>_seed<N>.txt
//   export-map map_<task>_truth.geojson, map_<task>_<mode>_seed<N>.geojson
//   report     summary.csv summary.txt

#include "mtm/config.hpp"
#include "mtm/model.hpp"
#include "mtm/training.hpp"
#include "mtm/worldgen.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mtm {

struct RunSettings {
    Config config;
    /// Overrides the config's seed when set.
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::string task;
    std::string mode;
    std::string preset;
    /// Progress lines (epochs, counts); may be empty.
    std::function<void(const std::string&)> log;

    std::uint64_t effective_seed() const;
};

const std::vector<std::string>& command_names();
const std::set<std::string>& known_config_keys();

WorldSpec world_spec_from(const Config& cfg, std::uint64_t seed);
ModelConfig model_config_from(const Config& cfg, int vocab_size);
PretrainConfig pretrain_config_from(const Config& cfg, std::uint64_t seed);
AdaptConfig adapt_config_from(const Config& cfg, std::uint64_t seed);

/// Runs one command. ConfigError for an unknown command; other Error
/// subclasses propagate from the stages.
void run_command(const std::string& command, const RunSettings& settings);

/// Text of a config with every key at its default value.
std::string default_config_text();

}  // namespace mtm
