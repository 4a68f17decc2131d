#include <doctest.h>

#include <random>

#include "idte/error.hpp"
#include "idte/text.hpp"

using namespace idte;

namespace {
const NormalizationRules kRules = NormalizationRules::defaults();
}

TEST_CASE("obfuscated spellings from observed posts") {
    CHECK(normalize_obfuscation("A.c.i.D", kRules) == "acid");
    CHECK(normalize_obfuscation("s.H.r.ø.o.M.s", kRules) == "shrooms");
    CHECK(normalize_obfuscation("A.c.i.D, s.H.r.ø.o.M.s", kRules) == "acid, shrooms");
    CHECK(normalize_obfuscation("hello world", kRules) == "hello world");
}

TEST_CASE("separator collapse needs three letters and one repeated separator") {
    CHECK(normalize_obfuscation("U.S", kRules) == "u.s");
    CHECK(normalize_obfuscation("c-o-k-e", kRules) == "coke");
    CHECK(normalize_obfuscation("x.a-n.a-x", kRules) == "x.a-n.a-x");
    CHECK(normalize_obfuscation("e.g. fine", kRules) == "e.g. fine");
}

TEST_CASE("homoglyph file matches the built-in table") {
    auto loaded = load_homoglyph_rules(std::string(IDTE_DATA_DIR) + "/homoglyphs.txt");
    CHECK(loaded.homoglyphs == kRules.homoglyphs);
    auto extra = parse_homoglyph_rules("# comment\n\xc3\xa6 e\n", kRules);
    CHECK(normalize_obfuscation("m\xc3\xa6th", extra) == "meth");
    CHECK(parse_homoglyph_rules("\xc3\xa6 E\n").homoglyphs.at(U'\u00e6') == 'e');
    CHECK_THROWS_AS(parse_homoglyph_rules("\xc3\xa6 7\n"), ContractError);
    CHECK_THROWS_AS(parse_homoglyph_rules("\xc3\xa6 ee\n"), ContractError);
}

TEST_CASE("normalization is idempotent on random strings") {
    const std::u32string alphabet = U"aBcDeXyz.-_*~ #øΘ1é";
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 24);
    for (int i = 0; i < 2000; ++i) {
        std::u32string s;
        for (std::size_t k = len(rng); k > 0; --k) s.push_back(alphabet[pick(rng)]);
        const std::string once = normalize_obfuscation(utf8_encode(s), kRules);
        CHECK(normalize_obfuscation(once, kRules) == once);
    }
}

TEST_CASE("hashtag extraction") {
    using V = std::vector<std::string>;
    CHECK(extract_hashtags("#anxiety#pain#depression#weightloss#xanax#oxy") ==
          V{"#anxiety", "#pain", "#depression", "#weightloss", "#xanax", "#oxy"});
    CHECK(extract_hashtags("no tags here").empty());
    CHECK(extract_hashtags("#LSD and #lsd") == V{"#lsd", "#lsd"});
    CHECK(extract_hashtags("# alone, #a-b").size() == 1);
}

TEST_CASE("hashtags are a subsequence of the lowercased input") {
    const std::string alphabet = "ab#C1 .#";
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    for (int i = 0; i < 1000; ++i) {
        std::string s;
        for (int k = 0; k < 20; ++k) s.push_back(alphabet[pick(rng)]);
        std::string lower = s;
        for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        std::string joined;
        for (const auto& t : extract_hashtags(s)) joined += t.substr(1);
        std::size_t pos = 0;
        for (char ch : joined) {
            pos = lower.find(ch, pos);
            REQUIRE(pos != std::string::npos);
            ++pos;
        }
    }
}

TEST_CASE("vocabulary construction") {
    auto v = build_vocab({"a a b"}, 1, 100);
    REQUIRE(v.size() == 6);
    CHECK(v.token(0) == "[PAD]");
    CHECK(v.token(1) == "[CLS]");
    CHECK(v.token(2) == "[SEP]");
    CHECK(v.token(3) == "[UNK]");
    CHECK(v.id("a") == 4);
    CHECK(v.id("b") == 5);
    CHECK(build_vocab({"a a b"}, 3, 100).size() == Vocabulary::kReserved);
    CHECK(build_vocab({"b a", "c"}, 1, 100).tokens() == build_vocab({"b a", "c"}, 1, 100).tokens());
    CHECK(build_vocab({"c b a"}, 1, 6).tokens().back() == "b");
    CHECK_THROWS_AS(build_vocab({}, 1, 100), ContractError);
}

TEST_CASE("tokenize") {
    auto v = Vocabulary::from_tokens({"#xanax", "for", "sale"});
    auto empty = tokenize("", v, 16);
    CHECK(empty.ids == std::vector<int>{Vocabulary::kCls});
    auto t = tokenize("#xanax for sale", v, 16);
    CHECK(t.ids == std::vector<int>{Vocabulary::kCls, v.id("#xanax"), v.id("for"), v.id("sale")});
    CHECK(t.tokens.front() == "[CLS]");
    CHECK(tokenize("zzzz-unknown", v, 16).ids == std::vector<int>{Vocabulary::kCls, Vocabulary::kUnk});
    CHECK(tokenize("for sale for sale for sale", v, 3).length() == 3);
    auto obf = Vocabulary::from_tokens({"acid"});
    CHECK(tokenize("A.c.i.D", obf, 8).ids.back() == obf.id("acid"));
    TokenizerOptions raw;
    raw.normalize = false;
    CHECK(tokenize("A.c.i.D", obf, 8, raw).ids.back() != obf.id("acid"));
}

TEST_CASE("token ids stay within the vocabulary") {
    auto v = build_vocab({"red fish blue fish", "one #two three"}, 1, 7);
    std::mt19937_64 rng(13);
    const std::vector<std::string> words{"red", "fish", "#two", "zebra", "one", "!!", "blue"};
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    for (int i = 0; i < 200; ++i) {
        std::string s;
        for (int k = 0; k < 12; ++k) s += words[pick(rng)] + " ";
        auto t = tokenize(s, v, 9);
        CHECK(t.length() <= 9);
        for (int id : t.ids) CHECK(static_cast<std::size_t>(id) < v.size());
    }
}
