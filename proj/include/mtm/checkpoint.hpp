#pragma once

// Binary checkpoint:
//   "MTMCKPT1"
//   u32 metadata length, metadata text (sorted "key=value" lines)
//   u32 tensor count, then per tensor in layout order:
//     u32 name length, name, u32 rank, u32 dims[rank], f32 values
//   u8 optimizer flag; when 1: i64 step, u64 n, f32 m[n], f32 v[n]
// Integers and floats are little-endian.

#include "mtm/model.hpp"
#include "mtm/optim.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace mtm {

struct CheckpointMeta {
    std::uint64_t seed = 0;
    int epoch = 0;
    std::uint64_t vocab_hash = 0;
    /// Free-form run annotations (task, mode, target scaling, ...).
    std::map<std::string, std::string> extra;

    friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
    ParamSet<float> params;
    CheckpointMeta meta;
    std::optional<AdamState> optimizer;
};

struct LoadExpectations {
    std::optional<std::uint64_t> vocab_hash;
    std::optional<ModelConfig> config;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// ParseError on bad magic, truncation or inconsistent tensors;
/// ConfigError when an expectation does not hold.
Checkpoint parse_checkpoint(std::string_view bytes, const LoadExpectations& expect = {});

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path, const LoadExpectations& expect = {});

}  // namespace mtm
