#include <doctest.h>

#include <set>
#include <sstream>

#include "idte/error.hpp"
#include "idte/synthdata.hpp"
#include "idte/text.hpp"

using namespace idte;

namespace {

std::string jsonl(const std::vector<SuspectIDTE>& records) {
    std::ostringstream out;
    write_jsonl(out, records);
    return out.str();
}

bool has_obfuscation_chars(const std::string& text) {
    for (char32_t ch : utf8_decode(text)) {
        if (ch >= 0x80) return true;
        if (ch == U'.' || ch == U'-' || ch == U'_' || ch == U'*' || ch == U'~') return true;
    }
    return false;
}

}  // namespace

TEST_CASE("no obfuscation when the rate is zero") {
    CorpusConfig c;
    c.n = 1500;
    c.seed = 41;
    auto corpus = generate_corpus(c);
    REQUIRE(corpus.records.size() == 1500);
    for (const auto& r : corpus.records) CHECK_FALSE(has_obfuscation_chars(r.text));
    CHECK(corpus.stats.obfuscated_terms == 0);
}

TEST_CASE("obfuscated terms normalize back to lexicon terms") {
    CorpusConfig c;
    c.n = 400;
    c.obfuscation_rate = 1.0;
    c.seed = 42;
    auto corpus = generate_corpus(c);
    CHECK(corpus.stats.obfuscated_terms == corpus.stats.total_terms);
    const auto lex = default_lexicons(9);
    std::set<std::string> terms;
    for (const auto& l : lex) terms.insert(l.begin(), l.end());
    const auto rules = NormalizationRules::defaults();
    std::size_t recovered = 0;
    for (const auto& r : corpus.records) {
        if (!r.labels || !r.labels->any_drug()) continue;
        for (const auto& w : split_words(r.text)) recovered += terms.count(w);
        (void)rules;
    }
    CHECK(recovered > 0);
}

TEST_CASE("same seed, same bytes; different seed, different bytes") {
    CorpusConfig c;
    c.n = 300;
    c.obfuscation_rate = 0.4;
    c.seed = 7;
    const auto a = jsonl(generate_corpus(c).records);
    CHECK(a == jsonl(generate_corpus(c).records));
    c.seed = 8;
    CHECK(a != jsonl(generate_corpus(c).records));

    PlatformConfig p;
    p.users = 100;
    p.dealers = 10;
    p.posts = 500;
    p.seed = 1;
    const auto g1 = platform_to_json(synth_platform(p)).dump();
    CHECK(g1 == platform_to_json(synth_platform(p)).dump());
    p.seed = 2;
    CHECK(g1 != platform_to_json(synth_platform(p)).dump());
}

TEST_CASE("marginal prior is honored") {
    CorpusConfig c;
    c.n = 10000;
    c.priors = default_priors(9);
    c.priors[1] = 0.3;
    c.seed = 43;
    auto corpus = generate_corpus(c);
    std::size_t hits = 0;
    for (const auto& r : corpus.records) hits += (*r.labels)[1];
    const double rate = static_cast<double>(hits) / 10000.0;
    CHECK(rate >= 0.28);
    CHECK(rate <= 0.32);
}

TEST_CASE("every generated record satisfies the drug-free rule") {
    for (auto mode : {DependenceMode::text_only, DependenceMode::image_only, DependenceMode::joint_and}) {
        CorpusConfig c;
        c.n = 3000;
        c.mode = mode;
        c.bundle_rate = 0.1;
        c.seed = 44;
        for (const auto& r : generate_corpus(c).records) {
            REQUIRE(r.labels);
            CHECK(r.labels->satisfies_drug_free_rule());
            CHECK(r.labels->width() == 10);
            CHECK(r.image_features.size() == c.d_img);
        }
    }
}

TEST_CASE("comments reference existing posts") {
    CorpusConfig c;
    c.n = 500;
    c.comment_fraction = 0.3;
    c.seed = 45;
    auto records = generate_corpus(c).records;
    std::set<std::uint64_t> posts;
    std::size_t comments = 0;
    for (const auto& r : records)
        if (r.kind == RecordKind::post) posts.insert(r.id);
    for (const auto& r : records)
        if (r.kind == RecordKind::comment) {
            ++comments;
            REQUIRE(r.parent_id);
            CHECK(posts.count(*r.parent_id) == 1);
        }
    CHECK(comments > 0);
    CHECK_NOTHROW(validate_records(records));
}

TEST_CASE("joint mode emits unimodal distractors with bounded ceilings") {
    CorpusConfig c;
    c.n = 4000;
    c.seed = 46;
    auto corpus = generate_corpus(c);
    for (std::size_t d = 0; d < 9; ++d) {
        const auto& s = corpus.stats.per_drug[d];
        CHECK(s.positives == s.positives_with_term);
        CHECK(s.positives == s.positives_with_prototype);
        CHECK(s.text_distractors > 0);
        CHECK(s.image_distractors > 0);
        CHECK(corpus.stats.text_ceiling(d) < 1.0);
        CHECK(corpus.stats.image_ceiling(d) < 1.0);
    }
}

TEST_CASE("invalid configs") {
    CorpusConfig c;
    c.priors = {0.5, 1.5};
    CHECK_THROWS_AS(generate_corpus(c), ContractError);
    CorpusConfig d;
    d.obfuscation_rate = -0.1;
    CHECK_THROWS_AS(generate_corpus(d), ContractError);
    PlatformConfig p;
    p.users = 10;
    p.dealers = 11;
    CHECK_THROWS_AS(synth_platform(p), ContractError);
}

TEST_CASE("platform with no dealers has no drug content") {
    PlatformConfig p;
    p.users = 200;
    p.dealers = 0;
    p.posts = 1000;
    auto g = synth_platform(p);
    CHECK(g.dealer_count() == 0);
    for (const auto& post : g.posts) CHECK_FALSE(post.drug_ad);
    for (const auto& cm : g.comments) CHECK_FALSE(cm.drug_ad);
}

TEST_CASE("default platform shape and dealer invariants") {
    auto g = synth_platform(PlatformConfig{});
    CHECK(g.users.size() == 1000);
    CHECK(g.dealer_count() == 100);
    CHECK(g.posts.size() >= 10000);
    std::set<std::uint64_t> dealers;
    for (const auto& u : g.users)
        if (u.dealer) dealers.insert(u.id);
    std::size_t ad_comments = 0;
    for (const auto& cm : g.comments)
        if (cm.drug_ad) {
            ++ad_comments;
            CHECK(dealers.count(cm.author_id) == 1);
            REQUIRE(g.find_post(cm.post_id) != nullptr);
        }
    CHECK(ad_comments > 0);
    std::set<std::string> drug_tags(g.drug_hashtags.begin(), g.drug_hashtags.end());
    for (const auto& post : g.posts)
        if (post.drug_ad) {
            CHECK(dealers.count(post.author_id) == 1);
            bool any = false;
            for (const auto& t : post.hashtags) any = any || drug_tags.count(t);
            CHECK(any);
        }
    auto back = platform_from_json(platform_to_json(g));
    CHECK(platform_to_json(back) == platform_to_json(g));
}
