#include "fixtures.hpp"

#include "mtm/errors.hpp"
#include "mtm/rng.hpp"
#include "mtm/tokenizer.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace mtm;

namespace {

// Brute-force WordPiece trainer: recount everything after every merge.
std::vector<std::string> naive_train(const std::map<std::string, std::uint64_t>& counts, std::size_t target) {
    std::vector<std::string> vocab = Vocab().tokens();
    std::vector<std::pair<std::vector<std::string>, std::uint64_t>> words;
    for (const auto& [w, c] : counts) {
        std::vector<std::string> pieces;
        for (std::size_t i = 0; i < w.size(); ++i) {
            pieces.push_back((i ? "##" : "") + std::string(1, w[i]));
        }
        words.emplace_back(pieces, c);
    }
    while (vocab.size() < target) {
        std::map<std::string, std::uint64_t> tok;
        std::map<std::pair<std::string, std::string>, std::uint64_t> pair;
        for (const auto& [p, c] : words) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                tok[p[i]] += c;
                if (i + 1 < p.size()) {
                    pair[{p[i], p[i + 1]}] += c;
                }
            }
        }
        if (pair.empty()) {
            break;
        }
        // map order = lexicographic (left, right), so strict improvement keeps the smallest on ties.
        const std::pair<std::string, std::string>* best = nullptr;
        unsigned __int128 bn = 0, bd = 1;
        for (const auto& [k, f] : pair) {
            const unsigned __int128 d = static_cast<unsigned __int128>(tok[k.first]) * tok[k.second];
            if (!best || static_cast<unsigned __int128>(f) * bd > bn * d) {
                best = &k;
                bn = f;
                bd = d;
            }
        }
        const auto [l, r] = *best;
        const std::string merged = l + r.substr(r.rfind("##") == 0 ? 2 : 0);
        if (std::find(vocab.begin(), vocab.end(), merged) == vocab.end()) {
            vocab.push_back(merged);
        }
        for (auto& [p, c] : words) {
            std::vector<std::string> out;
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (i + 1 < p.size() && p[i] == l && p[i + 1] == r) {
                    out.push_back(merged);
                    ++i;
                } else {
                    out.push_back(p[i]);
                }
            }
            p = out;
        }
    }
    return vocab;
}

const std::vector<std::string>& corpus_hashes() {
    static const std::vector<std::string> h = [] {
        std::vector<std::string> out;
        for (const auto& t : mtm::test::small_corpus()) {
            out.insert(out.end(), t.hashes.begin(), t.hashes.end());
        }
        return out;
    }();
    return h;
}

}  // namespace

TEST_CASE("base vocabulary holds specials and the hex alphabet") {
    const Vocab v;
    CHECK(v.size() == kAlphabetSize);
    CHECK(v.token(kPadId) == "[PAD]");
    CHECK(v.token(kUnkId) == "[UNK]");
    CHECK(v.token(kClsId) == "[CLS]");
    CHECK(v.token(kSepId) == "[SEP]");
    CHECK(v.token(kMaskId) == "[MASK]");
    CHECK(v.contains("a"));
    CHECK(v.contains("##f"));
    CHECK_THROWS(Vocab::from_tokens({"a", "b"}));
}

TEST_CASE("trainer matches a brute-force trainer") {
    std::map<std::string, std::uint64_t> counts;
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
        const CellId c{static_cast<std::int32_t>(rng.integer(-20, 20)), static_cast<std::int32_t>(rng.integer(-20, 20)),
                       8};
        counts[c.hash()] += 1 + rng.index(5);
    }
    for (std::size_t target : {40u, 80u, 150u}) {
        CHECK(train_vocab(counts, target).tokens() == naive_train(counts, target));
    }
}

TEST_CASE("trainer breaks score ties by the smallest pair") {
    // "ab" and "cd" have identical scores; "ab" < "cd".
    const std::map<std::string, std::uint64_t> counts = {{"ab", 1}, {"cd", 1}};
    const Vocab v = train_vocab(counts, kAlphabetSize + 1);
    CHECK(v.token(static_cast<int>(kAlphabetSize)) == "ab");
}

TEST_CASE("trainer is deterministic and respects the target size") {
    const Vocab a = train_vocab(corpus_hashes(), 300);
    const Vocab b = train_vocab(corpus_hashes(), 300);
    CHECK(a == b);
    CHECK(a.size() <= 300);
    CHECK(a.content_hash() == b.content_hash());
    CHECK_THROWS_AS(train_vocab(corpus_hashes(), 10), ConfigError);
}

TEST_CASE("every corpus hash round-trips through the tokenizer") {
    for (std::size_t size : {static_cast<std::size_t>(kAlphabetSize), std::size_t{200}, std::size_t{1000}}) {
        const Vocab v = train_vocab(corpus_hashes(), size);
        std::size_t unk = 0;
        for (const auto& h : std::set<std::string>(corpus_hashes().begin(), corpus_hashes().end())) {
            const auto ids = encode_hash(h, v);
            unk += std::count(ids.begin(), ids.end(), kUnkId);
            CHECK(decode_pieces(ids, v) == h);
        }
        CHECK(unk == 0);
    }
}

TEST_CASE("greedy longest match and unknown words") {
    Vocab v;
    v.add("88");
    v.add("##80");
    v.add("##800");
    const auto ids = wordpiece("88800", v);
    REQUIRE(ids.size() == 2);
    CHECK(v.token(ids[0]) == "88");
    CHECK(v.token(ids[1]) == "##800");
    CHECK(wordpiece("88x", v) == std::vector<int>{kUnkId});
    CHECK_THROWS_AS(encode_hash("8880000080000f", v), ParseError);
    CHECK_THROWS_AS(encode_hash("88800000800\n00f", v), ParseError);
}

TEST_CASE("encoding frames hashes and truncates at hash boundaries") {
    const Vocab v;  // one piece per character: 15 tokens per hash
    const std::vector<std::string> hashes(4, CellId{1, 2, 8}.hash());
    const Encoding full = encode_hashes(hashes, v, 512);
    CHECK(full.size() == 2 + 60);
    CHECK(full.ids.front() == kClsId);
    CHECK(full.ids.back() == kSepId);
    CHECK(full.hash_spans.size() == 4);
    const Encoding cut = encode_hashes(hashes, v, 40);
    CHECK(cut.size() == 2 + 30);
    CHECK(cut.hash_spans.size() == 2);
    CHECK(cut.ids.back() == kSepId);
    CHECK_THROWS_AS(encode_hashes(hashes, v, 2), ConfigError);
    Encoding padded = cut;
    pad_to(padded, 50);
    CHECK(padded.size() == 50);
    CHECK(padded.content_length() == cut.size());
    CHECK(padded.ids.back() == kPadId);
    CHECK(padded.labels.back() == kIgnoreLabel);
}

TEST_CASE("masked hash count") {
    CHECK(masked_hash_count(1, 0.2) == 1);
    CHECK(masked_hash_count(2, 0.2) == 1);
    CHECK(masked_hash_count(10, 0.2) == 2);
    CHECK(masked_hash_count(12, 0.2) == 2);
    CHECK(masked_hash_count(13, 0.2) == 3);
    CHECK(masked_hash_count(100, 0.2) == 20);
}

TEST_CASE("whole-hash masking masks exactly max(1, round(0.2 H)) hashes and nothing partial") {
    const Vocab v = train_vocab(corpus_hashes(), 400);
    const auto& corpus = mtm::test::small_corpus();
    const auto masked = mask_corpus(corpus, v, 99, 128);
    REQUIRE(masked.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Encoding clean = encode_trajectory(corpus[i], v, 128);
        const Encoding& m = masked[i].encoding;
        CHECK(masked[i].traj_id == corpus[i].traj_id);
        REQUIRE(m.hash_spans == clean.hash_spans);
        std::size_t hashes_masked = 0;
        for (const auto& [b, e] : m.hash_spans) {
            std::size_t inside = 0;
            for (std::size_t p = b; p < e; ++p) {
                if (m.labels[p] != kIgnoreLabel) {
                    ++inside;
                    CHECK(m.ids[p] == kMaskId);
                    CHECK(m.labels[p] == clean.ids[p]);
                } else {
                    CHECK(m.ids[p] == clean.ids[p]);
                }
            }
            CHECK((inside == 0 || inside == e - b));
            hashes_masked += inside > 0;
        }
        CHECK(hashes_masked == masked_hash_count(m.hash_spans.size(), 0.2));
        CHECK(m.labels.front() == kIgnoreLabel);
        CHECK(m.labels.back() == kIgnoreLabel);
    }
}

TEST_CASE("BERT corruption keeps whole-hash labels") {
    const Vocab v = train_vocab(corpus_hashes(), 400);
    const Encoding clean = encode_trajectory(mtm::test::small_corpus().front(), v, 512);
    MaskingOptions opts;
    opts.bert_corruption = true;
    const Encoding m = mask_whole_hash(clean, 5, opts, v.size());
    std::size_t labelled_hashes = 0;
    for (const auto& [b, e] : m.hash_spans) {
        std::size_t inside = 0;
        for (std::size_t p = b; p < e; ++p) {
            inside += m.labels[p] != kIgnoreLabel;
        }
        CHECK((inside == 0 || inside == e - b));
        labelled_hashes += inside > 0;
    }
    CHECK(labelled_hashes == masked_hash_count(clean.hash_spans.size(), 0.2));
    CHECK(mask_whole_hash(clean, 5, opts, v.size()) == m);
}

TEST_CASE("masked corpus file round-trips") {
    const Vocab v = train_vocab(corpus_hashes(), 300);
    const auto& corpus = mtm::test::small_corpus();
    const auto masked = mask_corpus(corpus, v, 4, 64);
    const std::string dir = mtm::test::temp_dir("masked");
    write_masked_corpus(corpus, masked, dir + "/m.tsv");
    const auto back = read_masked_corpus(dir + "/m.tsv", v, 64);
    REQUIRE(back.size() == masked.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].traj_id == masked[i].traj_id);
        CHECK(back[i].encoding == masked[i].encoding);
    }
    v.save(dir + "/vocab.txt");
    CHECK(Vocab::load(dir + "/vocab.txt") == v);
}
