#include "mtm/checkpoint.hpp"

#include "mtm/csv.hpp"
#include "mtm/errors.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>

namespace mtm {

namespace {

constexpr std::string_view kMagic = "MTMCKPT1";

class Writer {
public:
    void bytes(std::string_view s) { out_.append(s); }
    template <typename U>
    void uint(U x) {
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            out_.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
        }
    }
    void f32(float x) { uint(std::bit_cast<std::uint32_t>(x)); }
    void str(std::string_view s) {
        uint(static_cast<std::uint32_t>(s.size()));
        bytes(s);
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}
    std::string_view bytes(std::size_t n) {
        if (in_.size() - pos_ < n) {
            throw ParseError("checkpoint truncated");
        }
        const std::string_view s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    template <typename U>
    U uint() {
        const std::string_view b = bytes(sizeof(U));
        U x = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            x |= static_cast<U>(static_cast<unsigned char>(b[i])) << (8 * i);
        }
        return x;
    }
    float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
    std::string str() { return std::string(bytes(uint<std::uint32_t>())); }
    bool done() const { return pos_ == in_.size(); }

private:
    std::string_view in_;
    std::size_t pos_ = 0;
};

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string fmt_hex(std::uint64_t x) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, x);
    return buf;
}

std::map<std::string, std::string> metadata(const Checkpoint& c) {
    const ModelConfig& m = c.params.config;
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : c.meta.extra) {
        kv["extra." + k] = v;
    }
    kv["model.n_layers"] = std::to_string(m.n_layers);
    kv["model.n_heads"] = std::to_string(m.n_heads);
    kv["model.d_model"] = std::to_string(m.d_model);
    kv["model.d_ff"] = std::to_string(m.d_ff);
    kv["model.vocab_size"] = std::to_string(m.vocab_size);
    kv["model.max_len"] = std::to_string(m.max_len);
    kv["model.dropout"] = fmt_double(m.dropout);
    kv["model.tie_output"] = m.tie_output ? "1" : "0";
    kv["head.kind"] = to_string(c.params.head.kind);
    kv["head.dim"] = std::to_string(c.params.head.dim);
    kv["seed"] = std::to_string(c.meta.seed);
    kv["epoch"] = std::to_string(c.meta.epoch);
    kv["vocab_hash"] = fmt_hex(c.meta.vocab_hash);
    return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        throw ParseError("checkpoint metadata lacks '" + key + "'");
    }
    return it->second;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
    if (c.params.data.size() != c.params.layout.total()) {
        throw ContractViolation("parameter buffer does not match its layout");
    }
    Writer w;
    w.bytes(kMagic);
    std::string meta;
    for (const auto& [k, v] : metadata(c)) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
            throw ContractViolation("checkpoint metadata entry '" + k + "' is not representable");
        }
        meta += k + "=" + v + "\n";
    }
    w.str(meta);
    w.uint(static_cast<std::uint32_t>(c.params.layout.tensors().size()));
    for (const TensorInfo& t : c.params.layout.tensors()) {
        w.str(t.name);
        w.uint(static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) {
            w.uint(static_cast<std::uint32_t>(d));
        }
        for (std::size_t i = 0; i < t.size(); ++i) {
            w.f32(c.params.data[t.offset + i]);
        }
    }
    w.uint(static_cast<std::uint8_t>(c.optimizer ? 1 : 0));
    if (c.optimizer) {
        const AdamState& s = *c.optimizer;
        if (s.m.size() != c.params.data.size() || s.v.size() != c.params.data.size()) {
            throw ContractViolation("optimizer state does not match the parameters");
        }
        w.uint(static_cast<std::uint64_t>(s.step));
        w.uint(static_cast<std::uint64_t>(s.m.size()));
        for (float x : s.m) {
            w.f32(x);
        }
        for (float x : s.v) {
            w.f32(x);
        }
    }
    return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes, const LoadExpectations& expect) {
    Reader r(bytes);
    if (bytes.size() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
        throw ParseError("not a checkpoint (bad magic)");
    }
    std::map<std::string, std::string> kv;
    const std::string meta_text(r.str());
    for (std::string_view line : split(meta_text, '\n')) {
        if (line.empty()) {
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("malformed checkpoint metadata line");
        }
        kv.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    }
    ModelConfig m;
    m.n_layers = parse_int(need(kv, "model.n_layers"));
    m.n_heads = parse_int(need(kv, "model.n_heads"));
    m.d_model = parse_int(need(kv, "model.d_model"));
    m.d_ff = parse_int(need(kv, "model.d_ff"));
    m.vocab_size = parse_int(need(kv, "model.vocab_size"));
    m.max_len = parse_int(need(kv, "model.max_len"));
    m.dropout = parse_double(need(kv, "model.dropout"));
    m.tie_output = need(kv, "model.tie_output") == "1";
    const HeadSpec head{head_kind_from_string(need(kv, "head.kind")), parse_int(need(kv, "head.dim"))};

    Checkpoint c;
    c.meta.seed = parse_uint64(need(kv, "seed"));
    c.meta.epoch = parse_int(need(kv, "epoch"));
    const std::string& vh = need(kv, "vocab_hash");
    c.meta.vocab_hash = std::strtoull(vh.c_str(), nullptr, 16);
    for (const auto& [k, v] : kv) {
        if (k.starts_with("extra.")) {
            c.meta.extra.emplace(k.substr(6), v);
        }
    }
    if (expect.vocab_hash && *expect.vocab_hash != c.meta.vocab_hash) {
        throw ConfigError("checkpoint was trained with a different vocabulary (hash " + vh + ", expected " +
                          fmt_hex(*expect.vocab_hash) + ")");
    }
    if (expect.config && !(*expect.config == m)) {
        throw ConfigError("checkpoint model configuration does not match the requested one");
    }

    c.params = ParamSet<float>{m, head, ParamLayout(m, head), {}};
    c.params.data.assign(c.params.layout.total(), 0.0f);
    const std::uint32_t count = r.uint<std::uint32_t>();
    if (count != c.params.layout.tensors().size()) {
        throw ParseError("checkpoint tensor count does not match its configuration");
    }
    for (const TensorInfo& t : c.params.layout.tensors()) {
        if (r.str() != t.name) {
            throw ParseError("checkpoint tensor order differs from the layout at '" + t.name + "'");
        }
        const std::uint32_t rank = r.uint<std::uint32_t>();
        if (rank != t.shape.size()) {
            throw ParseError("checkpoint tensor '" + t.name + "' has the wrong rank");
        }
        for (int d : t.shape) {
            if (r.uint<std::uint32_t>() != static_cast<std::uint32_t>(d)) {
                throw ParseError("checkpoint tensor '" + t.name + "' has the wrong shape");
            }
        }
        for (std::size_t i = 0; i < t.size(); ++i) {
            c.params.data[t.offset + i] = r.f32();
        }
    }
    if (r.uint<std::uint8_t>() != 0) {
        AdamState s;
        s.step = static_cast<std::int64_t>(r.uint<std::uint64_t>());
        const auto n = r.uint<std::uint64_t>();
        if (n != c.params.data.size()) {
            throw ParseError("checkpoint optimizer state has the wrong size");
        }
        s.m.resize(n);
        s.v.resize(n);
        for (float& x : s.m) {
            x = r.f32();
        }
        for (float& x : s.v) {
            x = r.f32();
        }
        c.optimizer = std::move(s);
    }
    if (!r.done()) {
        throw ParseError("trailing bytes after checkpoint");
    }
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) { write_file(path, serialize_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path, const LoadExpectations& expect) {
    return parse_checkpoint(read_file(path), expect);
}

}  // namespace mtm
