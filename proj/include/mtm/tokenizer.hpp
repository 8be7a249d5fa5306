#pragma once

// Spatial tokenization: a WordPiece vocabulary learned over cell-hash
// strings, greedy longest-match encoding, and whole-hash masking.

#include "mtm/geodesy.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mtm {

struct Trajectory;

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kSepId = 3;
inline constexpr int kMaskId = 4;
inline constexpr int kNumSpecials = 5;
inline constexpr int kIgnoreLabel = -100;
inline constexpr std::size_t kMaxSeqLen = 512;
/// Specials + 16 word-initial hex digits + 16 "##" continuations.
inline constexpr std::size_t kAlphabetSize = 37;

class Vocab {
public:
    /// Specials plus the single-character alphabet.
    Vocab();

    /// Tokens in id order; the first five must be the specials.
    static Vocab from_tokens(std::vector<std::string> tokens);
    static Vocab load(const std::string& path);
    void save(const std::string& path) const;
    /// File text: one token per line, line number = id.
    std::string to_text() const;

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    /// -1 when absent.
    int id(std::string_view token) const;
    bool contains(std::string_view token) const { return id(token) >= 0; }

    /// Returns the id of `token`, appending it if new.
    int add(const std::string& token);

    /// FNV-1a 64 of to_text(); recorded in checkpoints.
    std::uint64_t content_hash() const;

    friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

/// WordPiece training: start from the alphabet and repeatedly merge the
/// adjacent pair maximizing freq(pair) / (freq(left) * freq(right)), ties
/// broken by the lexicographically smallest (left, right), until the
/// vocabulary reaches `target_size` or no pair remains. `word_counts` maps a
/// hash to its number of occurrences.
Vocab train_vocab(const std::map<std::string, std::uint64_t>& word_counts, std::size_t target_size);
/// Convenience: every element is one occurrence.
Vocab train_vocab(std::span<const std::string> corpus_hashes, std::size_t target_size);

/// Greedy longest match from the left; pieces after the first carry "##".
/// A word that cannot be covered becomes a single [UNK].
std::vector<int> wordpiece(std::string_view word, const Vocab& vocab);

/// As wordpiece, after checking the hash is 15 printable characters
/// (ParseError otherwise).
std::vector<int> encode_hash(std::string_view hash, const Vocab& vocab);

/// Concatenation of pieces with "##" stripped.
std::string decode_pieces(std::span<const int> ids, const Vocab& vocab);

struct Encoding {
    std::vector<int> ids;
    std::vector<int> attention_mask;
    std::vector<int> labels;  // kIgnoreLabel where no loss applies
    /// Half-open token ranges, one per encoded hash.
    std::vector<std::pair<std::size_t, std::size_t>> hash_spans;

    std::size_t size() const { return ids.size(); }
    /// Positions before padding.
    std::size_t content_length() const;
    friend bool operator==(const Encoding&, const Encoding&) = default;
};

/// [CLS] + pieces of each hash + [SEP], truncated at a hash boundary so the
/// result fits in max_len.
Encoding encode_hashes(std::span<const std::string> hashes, const Vocab& vocab, std::size_t max_len = kMaxSeqLen);
Encoding encode_trajectory(const Trajectory& traj, const Vocab& vocab, std::size_t max_len = kMaxSeqLen);
Encoding encode_region(const CellId& cell, const Vocab& vocab);

/// Appends [PAD] (attention 0, label ignored) up to `length`.
void pad_to(Encoding& enc, std::size_t length);

struct MaskingOptions {
    double ratio = 0.20;
    /// BERT-style corruption per selected hash: 80% [MASK], 10% random
    /// tokens, 10% unchanged. Off: always [MASK].
    bool bert_corruption = false;
};

/// max(1, round(ratio * n_hashes)).
std::size_t masked_hash_count(std::size_t n_hashes, double ratio);

/// Selects whole hashes uniformly without replacement and masks every token
/// inside them; labels carry the original ids at masked positions.
Encoding mask_whole_hash(Encoding enc, std::uint64_t seed, const MaskingOptions& opts = {},
                         std::size_t vocab_size = 0);

struct MaskedRecord {
    std::string traj_id;
    Encoding encoding;
};

/// Static pre-masking of a split: seed per trajectory = derive(seed, traj_id).
std::vector<MaskedRecord> mask_corpus(std::span<const Trajectory> trajs, const Vocab& vocab, std::uint64_t seed,
                                      std::size_t max_len = kMaxSeqLen, const MaskingOptions& opts = {});

/// Corpus record fields plus two parallel arrays: masked token ids and
/// labels. Reading re-derives spans from the hashes and checks consistency.
void write_masked_corpus(std::span<const Trajectory> trajs, std::span<const MaskedRecord> masked,
                         const std::string& path);
std::vector<MaskedRecord> read_masked_corpus(const std::string& path, const Vocab& vocab,
                                             std::size_t max_len = kMaxSeqLen);

}  // namespace mtm
