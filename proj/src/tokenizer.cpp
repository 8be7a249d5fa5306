#include "mtm/tokenizer.hpp"

#include "mtm/csv.hpp"
#include "mtm/errors.hpp"
#include "mtm/pipeline.hpp"
#include "mtm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace mtm {

namespace {

constexpr const char* kSpecials[kNumSpecials] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
constexpr std::string_view kHexDigits = "0123456789abcdef";

std::string_view strip_continuation(std::string_view token) {
    return token.starts_with("##") ? token.substr(2) : token;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() {
    for (const char* s : kSpecials) {
        add(s);
    }
    for (char c : kHexDigits) {
        add(std::string(1, c));
    }
    for (char c : kHexDigits) {
        add("##" + std::string(1, c));
    }
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < kNumSpecials) {
        throw ParseError("vocabulary is missing the special tokens");
    }
    for (int i = 0; i < kNumSpecials; ++i) {
        if (tokens[static_cast<std::size_t>(i)] != kSpecials[i]) {
            throw ParseError("vocabulary id " + std::to_string(i) + " must be " + kSpecials[i]);
        }
    }
    Vocab v;
    v.tokens_.clear();
    v.ids_.clear();
    for (auto& t : tokens) {
        if (t.empty() || v.ids_.contains(t)) {
            throw ParseError("vocabulary token empty or duplicated: '" + t + "'");
        }
        v.ids_.emplace(t, static_cast<int>(v.tokens_.size()));
        v.tokens_.push_back(std::move(t));
    }
    return v;
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open vocabulary " + path);
    }
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
}

std::string Vocab::to_text() const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t;
        out += '\n';
    }
    return out;
}

void Vocab::save(const std::string& path) const { write_file(path, to_text()); }

int Vocab::id(std::string_view token) const {
    const auto it = ids_.find(std::string(token));
    return it == ids_.end() ? -1 : it->second;
}

int Vocab::add(const std::string& token) {
    const auto it = ids_.find(token);
    if (it != ids_.end()) {
        return it->second;
    }
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
}

std::uint64_t Vocab::content_hash() const { return fnv1a64(to_text()); }

// ---------------------------------------------------------------------------
// Training

namespace {

std::uint64_t pair_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

struct TrainWord {
    std::vector<int> pieces;
    std::uint64_t count = 0;
};

class MergeState {
public:
    MergeState(std::vector<TrainWord> words, std::size_t n_tokens) : words_(std::move(words)) {
        token_freq_.assign(n_tokens, 0);
        for (std::uint32_t w = 0; w < words_.size(); ++w) {
            account(w, +1);
        }
    }

    bool empty() const { return pair_freq_.empty(); }

    /// Best pair by score, ties to the lexicographically smallest strings.
    std::pair<int, int> best(const Vocab& vocab) const {
        std::uint64_t best_key = 0;
        std::uint64_t best_pf = 0;
        std::uint64_t best_fl = 1;
        std::uint64_t best_fr = 1;
        bool have = false;
        for (const auto& [key, pf] : pair_freq_) {
            const int l = static_cast<int>(key >> 32);
            const int r = static_cast<int>(key & 0xffffffffU);
            const std::uint64_t fl = token_freq_[static_cast<std::size_t>(l)];
            const std::uint64_t fr = token_freq_[static_cast<std::size_t>(r)];
            bool better = !have;
            if (have) {
                // pf / (fl * fr) compared exactly by cross multiplication.
                const unsigned __int128 lhs = static_cast<unsigned __int128>(pf) * best_fl * best_fr;
                const unsigned __int128 rhs = static_cast<unsigned __int128>(best_pf) * fl * fr;
                if (lhs != rhs) {
                    better = lhs > rhs;
                } else {
                    const int bl = static_cast<int>(best_key >> 32);
                    const int br = static_cast<int>(best_key & 0xffffffffU);
                    better = std::tie(vocab.token(l), vocab.token(r)) < std::tie(vocab.token(bl), vocab.token(br));
                }
            }
            if (better) {
                have = true;
                best_key = key;
                best_pf = pf;
                best_fl = fl;
                best_fr = fr;
            }
        }
        return {static_cast<int>(best_key >> 32), static_cast<int>(best_key & 0xffffffffU)};
    }

    void merge(int left, int right, int merged) {
        if (static_cast<std::size_t>(merged) >= token_freq_.size()) {
            token_freq_.resize(static_cast<std::size_t>(merged) + 1, 0);
        }
        auto it = pair_words_.find(pair_key(left, right));
        if (it == pair_words_.end()) {
            return;
        }
        std::vector<std::uint32_t> affected = std::move(it->second);
        pair_words_.erase(it);
        std::sort(affected.begin(), affected.end());
        affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
        for (std::uint32_t w : affected) {
            auto& pieces = words_[w].pieces;
            bool hit = false;
            for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
                if (pieces[i] == left && pieces[i + 1] == right) {
                    hit = true;
                    break;
                }
            }
            if (!hit) {
                continue;
            }
            account(w, -1);
            std::vector<int> next;
            next.reserve(pieces.size());
            for (std::size_t i = 0; i < pieces.size(); ++i) {
                if (i + 1 < pieces.size() && pieces[i] == left && pieces[i + 1] == right) {
                    next.push_back(merged);
                    ++i;
                } else {
                    next.push_back(pieces[i]);
                }
            }
            pieces = std::move(next);
            account(w, +1);
        }
    }

private:
    void account(std::uint32_t w, int sign) {
        const TrainWord& word = words_[w];
        for (std::size_t i = 0; i < word.pieces.size(); ++i) {
            auto& f = token_freq_[static_cast<std::size_t>(word.pieces[i])];
            f = sign > 0 ? f + word.count : f - word.count;
            if (i + 1 < word.pieces.size()) {
                const std::uint64_t key = pair_key(word.pieces[i], word.pieces[i + 1]);
                if (sign > 0) {
                    pair_freq_[key] += word.count;
                    pair_words_[key].push_back(w);
                } else {
                    auto pit = pair_freq_.find(key);
                    pit->second -= word.count;
                    if (pit->second == 0) {
                        pair_freq_.erase(pit);
                    }
                }
            }
        }
    }

    std::vector<TrainWord> words_;
    std::vector<std::uint64_t> token_freq_;
    std::unordered_map<std::uint64_t, std::uint64_t> pair_freq_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> pair_words_;
};

}  // namespace

Vocab train_vocab(const std::map<std::string, std::uint64_t>& word_counts, std::size_t target_size) {
    if (word_counts.empty()) {
        throw ConfigError("cannot train a vocabulary on an empty corpus");
    }
    if (target_size < kAlphabetSize) {
        throw ConfigError("vocabulary target size " + std::to_string(target_size) + " is below the alphabet size " +
                          std::to_string(kAlphabetSize));
    }
    Vocab vocab;
    std::vector<TrainWord> words;
    words.reserve(word_counts.size());
    for (const auto& [word, count] : word_counts) {
        if (word.empty() || count == 0) {
            continue;
        }
        TrainWord w;
        w.count = count;
        for (std::size_t i = 0; i < word.size(); ++i) {
            const std::string piece = i == 0 ? std::string(1, word[i]) : "##" + std::string(1, word[i]);
            const int id = vocab.id(piece);
            if (id < 0) {
                throw ParseError("character outside the hash alphabet in '" + word + "'");
            }
            w.pieces.push_back(id);
        }
        words.push_back(std::move(w));
    }
    MergeState state(std::move(words), vocab.size());
    while (vocab.size() < target_size && !state.empty()) {
        const auto [left, right] = state.best(vocab);
        const std::string merged = vocab.token(left) + std::string(strip_continuation(vocab.token(right)));
        const int id = vocab.add(merged);
        state.merge(left, right, id);
    }
    return vocab;
}

Vocab train_vocab(std::span<const std::string> corpus_hashes, std::size_t target_size) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& h : corpus_hashes) {
        ++counts[h];
    }
    return train_vocab(counts, target_size);
}

// ---------------------------------------------------------------------------
// Encoding

std::vector<int> wordpiece(std::string_view word, const Vocab& vocab) {
    std::vector<int> out;
    std::size_t start = 0;
    std::string candidate;
    while (start < word.size()) {
        int found = -1;
        std::size_t end = word.size();
        for (; end > start; --end) {
            candidate.assign(start > 0 ? "##" : "");
            candidate.append(word.substr(start, end - start));
            found = vocab.id(candidate);
            if (found >= 0) {
                break;
            }
        }
        if (found < 0) {
            return {kUnkId};
        }
        out.push_back(found);
        start = end;
    }
    return out;
}

std::vector<int> encode_hash(std::string_view hash, const Vocab& vocab) {
    if (hash.size() != 15) {
        throw ParseError("hash must be 15 characters: '" + std::string(hash) + "'");
    }
    for (char c : hash) {
        if (c <= ' ' || c > '~') {
            throw ParseError("hash contains a non-printable character");
        }
    }
    return wordpiece(hash, vocab);
}

std::string decode_pieces(std::span<const int> ids, const Vocab& vocab) {
    std::string out;
    for (int id : ids) {
        out += strip_continuation(vocab.token(id));
    }
    return out;
}

std::size_t Encoding::content_length() const {
    std::size_t n = ids.size();
    while (n > 0 && attention_mask[n - 1] == 0) {
        --n;
    }
    return n;
}

Encoding encode_hashes(std::span<const std::string> hashes, const Vocab& vocab, std::size_t max_len) {
    if (max_len < 3 || max_len > kMaxSeqLen) {
        throw ConfigError("max_len must be in [3, " + std::to_string(kMaxSeqLen) + "]");
    }
    Encoding enc;
    enc.ids.push_back(kClsId);
    for (const auto& h : hashes) {
        const std::vector<int> pieces = encode_hash(h, vocab);
        if (enc.ids.size() + pieces.size() + 1 > max_len) {
            break;
        }
        const std::size_t start = enc.ids.size();
        enc.ids.insert(enc.ids.end(), pieces.begin(), pieces.end());
        enc.hash_spans.emplace_back(start, enc.ids.size());
    }
    enc.ids.push_back(kSepId);
    enc.attention_mask.assign(enc.ids.size(), 1);
    enc.labels.assign(enc.ids.size(), kIgnoreLabel);
    return enc;
}

Encoding encode_trajectory(const Trajectory& traj, const Vocab& vocab, std::size_t max_len) {
    return encode_hashes(traj.hashes, vocab, max_len);
}

Encoding encode_region(const CellId& cell, const Vocab& vocab) {
    const std::string h = cell.hash();
    return encode_hashes(std::span<const std::string>(&h, 1), vocab, kMaxSeqLen);
}

void pad_to(Encoding& enc, std::size_t length) {
    if (length < enc.ids.size()) {
        throw ContractViolation("cannot pad an encoding to a shorter length");
    }
    enc.ids.resize(length, kPadId);
    enc.attention_mask.resize(length, 0);
    enc.labels.resize(length, kIgnoreLabel);
}

std::size_t masked_hash_count(std::size_t n_hashes, double ratio) {
    const auto n = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n_hashes)));
    return std::min(n_hashes, std::max<std::size_t>(1, n));
}

Encoding mask_whole_hash(Encoding enc, std::uint64_t seed, const MaskingOptions& opts, std::size_t vocab_size) {
    if (enc.hash_spans.empty()) {
        throw ContractViolation("cannot mask an encoding without hash spans");
    }
    if (opts.bert_corruption && vocab_size <= static_cast<std::size_t>(kNumSpecials)) {
        throw ContractViolation("BERT-style corruption needs the vocabulary size");
    }
    Rng rng(seed);
    const std::size_t n = masked_hash_count(enc.hash_spans.size(), opts.ratio);
    for (std::size_t span_idx : rng.sample_without_replacement(enc.hash_spans.size(), n)) {
        const auto [start, end] = enc.hash_spans[span_idx];
        int mode = 0;  // 0 mask, 1 random, 2 keep
        if (opts.bert_corruption) {
            const double u = rng.uniform();
            mode = u < 0.8 ? 0 : (u < 0.9 ? 1 : 2);
        }
        for (std::size_t i = start; i < end; ++i) {
            enc.labels[i] = enc.ids[i];
            if (mode == 0) {
                enc.ids[i] = kMaskId;
            } else if (mode == 1) {
                enc.ids[i] = kNumSpecials + static_cast<int>(rng.index(vocab_size - kNumSpecials));
            }
        }
    }
    return enc;
}

std::vector<MaskedRecord> mask_corpus(std::span<const Trajectory> trajs, const Vocab& vocab, std::uint64_t seed,
                                      std::size_t max_len, const MaskingOptions& opts) {
    std::vector<MaskedRecord> out;
    out.reserve(trajs.size());
    for (const Trajectory& t : trajs) {
        out.push_back({t.traj_id, mask_whole_hash(encode_trajectory(t, vocab, max_len), derive_seed(seed, t.traj_id),
                                                  opts, vocab.size())});
    }
    return out;
}

void write_masked_corpus(std::span<const Trajectory> trajs, std::span<const MaskedRecord> masked,
                         const std::string& path) {
    if (trajs.size() != masked.size()) {
        throw ContractViolation("masked corpus needs one encoding per trajectory");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write masked corpus " + path);
    }
    for (std::size_t k = 0; k < trajs.size(); ++k) {
        const Trajectory& t = trajs[k];
        const Encoding& e = masked[k].encoding;
        if (t.traj_id != masked[k].traj_id) {
            throw ContractViolation("masked corpus records out of order");
        }
        out << t.traj_id << '\t' << t.month << '\t';
        for (std::size_t i = 0; i < t.hashes.size(); ++i) {
            out << (i ? " " : "") << t.hashes[i];
        }
        out << '\t';
        for (std::size_t i = 0; i < t.times.size(); ++i) {
            out << (i ? " " : "") << format_iso8601(t.times[i]);
        }
        out << '\t';
        const std::size_t n = e.content_length();
        for (std::size_t i = 0; i < n; ++i) {
            out << (i ? " " : "") << e.ids[i];
        }
        out << '\t';
        for (std::size_t i = 0; i < n; ++i) {
            out << (i ? " " : "") << e.labels[i];
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing masked corpus " + path);
    }
}

std::vector<MaskedRecord> read_masked_corpus(const std::string& path, const Vocab& vocab, std::size_t max_len) {
    CsvReader reader(path, '\t');
    std::vector<MaskedRecord> out;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        if (f.size() != 6) {
            throw ParseError(reader.where() + ": expected 6 tab-separated fields");
        }
        std::vector<std::string> hashes;
        for (std::string_view h : split(f[2], ' ')) {
            hashes.emplace_back(h);
        }
        Encoding enc = encode_hashes(hashes, vocab, max_len);
        const auto ids = split(f[4], ' ');
        const auto labels = split(f[5], ' ');
        if (ids.size() != enc.ids.size() || labels.size() != enc.ids.size()) {
            throw ParseError(reader.where() + ": token arrays do not match the hashes under this vocabulary");
        }
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const int id = parse_int(ids[i], reader.where());
            const int label = parse_int(labels[i], reader.where());
            const bool consistent = label == kIgnoreLabel ? id == enc.ids[i] : label == enc.ids[i];
            if (!consistent || id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
                throw ParseError(reader.where() + ": masked tokens inconsistent with the hashes");
            }
            enc.ids[i] = id;
            enc.labels[i] = label;
        }
        out.push_back({std::string(f[0]), std::move(enc)});
    }
    return out;
}

}  // namespace mtm
