#include "idte/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "idte/error.hpp"
#include "idte/random.hpp"
#include "idte/text.hpp"

namespace idte {

namespace {

// Innocent filler; no entry is a lexicon term or a single letter.
const std::vector<std::string> kFiller = {
    "dm",       "for",     "price",   "today",  "delivery", "fresh",   "sunny",   "beach",  "weekend", "vibes",
    "good",     "quality", "fast",    "shipping", "hit",    "me",      "up",      "with",   "the",     "best",
    "deals",    "in",      "town",    "love",   "this",     "new",     "drop",    "stock",  "available", "now",
    "message",  "contact", "trusted", "plug",   "legit",    "service", "friends", "party",  "night",   "city",
    "summer",   "chill",   "happy",   "friday", "coffee",   "music",   "travel",  "photo",  "style",   "life",
    "order",    "ready",   "local",   "pickup", "discreet", "packs",   "menu",    "link",   "bio",     "call",
};

const std::vector<std::string> kGenericWords = {
    "instagood", "photooftheday", "love",   "fashion", "beautiful", "happy",   "cute",   "tbt",    "followme",
    "nature",    "travel",        "style",  "summer",  "food",      "art",     "selfie", "friends", "fitness",
    "music",     "party",         "sunset", "beach",   "family",    "weekend", "vibes",  "coffee", "gym",
    "dog",       "cat",           "city",   "night",   "sky",       "smile",   "fun",    "girl",   "boy",
    "life",      "picoftheday",   "model",  "motivation",
};

const std::vector<std::string> kDrugTagExtras = {"plug", "420", "trap", "dealer", "stoner", "highlife", "pharma", "rave",
                                                 "party", "supply", "connect", "menu"};

std::string letters_for(std::size_t k) {
    std::string s;
    do {
        s.push_back(static_cast<char>('a' + k % 26));
        k /= 26;
    } while (k > 0);
    return s;
}

// Sampler over ranks 0..n-1 with weight 1/(rank+1)^s.
class ZipfSampler {
public:
    ZipfSampler(std::size_t n, double s) : cdf_(n) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) cdf_[i] = total += 1.0 / std::pow(static_cast<double>(i + 1), s);
        for (auto& c : cdf_) c /= total;
    }
    std::size_t operator()(std::mt19937_64& rng) const {
        const double u = uniform01(rng);
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

private:
    std::vector<double> cdf_;
};

std::size_t count_draw(std::mt19937_64& rng, double mean) {
    const double floor = std::floor(mean);
    return static_cast<std::size_t>(floor) + (bernoulli(rng, mean - floor) ? 1 : 0);
}

// Lowercase ASCII letter -> non-ASCII look-alikes from the default rules.
const std::map<char, std::vector<char32_t>>& homoglyph_options() {
    static const std::map<char, std::vector<char32_t>> table = [] {
        std::map<char, std::vector<char32_t>> t;
        for (const auto& [from, to] : NormalizationRules::defaults().homoglyphs)
            if (from > 0x7F) t[to].push_back(from);
        return t;
    }();
    return table;
}

std::string obfuscate(const std::string& term, std::mt19937_64& rng) {
    static const std::u32string kSeparators = U".-_*~·•";
    const auto& glyphs = homoglyph_options();
    std::size_t style = uniform_index(rng, 3);  // 0 separators, 1 homoglyphs, 2 both
    bool any_glyph = false;
    for (char c : term)
        if (glyphs.count(c)) any_glyph = true;
    if (!any_glyph) style = 0;

    std::u32string letters;
    bool replaced = false;
    for (char c : term) {
        char32_t out = static_cast<char32_t>(c);
        if (style != 0) {
            auto it = glyphs.find(c);
            if (it != glyphs.end() && bernoulli(rng, 0.5)) {
                out = it->second[uniform_index(rng, it->second.size())];
                replaced = true;
            }
        }
        if (out < 0x80 && bernoulli(rng, 0.3)) out = static_cast<char32_t>(c - 'a' + 'A');
        letters.push_back(out);
    }
    if (style != 0 && !replaced) {
        // Force one substitution so the style is visible.
        for (std::size_t i = 0; i < term.size(); ++i) {
            auto it = glyphs.find(term[i]);
            if (it != glyphs.end()) {
                letters[i] = it->second[uniform_index(rng, it->second.size())];
                break;
            }
        }
    }
    if (style == 1) return utf8_encode(letters);
    const char32_t sep = kSeparators[uniform_index(rng, kSeparators.size())];
    std::u32string joined;
    for (std::size_t i = 0; i < letters.size(); ++i) {
        if (i) joined.push_back(sep);
        joined.push_back(letters[i]);
    }
    return utf8_encode(joined);
}

std::vector<std::vector<double>> random_prototypes(std::size_t count, std::size_t d, double norm, std::uint64_t seed) {
    std::mt19937_64 rng(mix64(seed ^ 0x70726f746fULL));
    std::vector<std::vector<double>> out(count, std::vector<double>(d));
    for (auto& p : out) {
        double sq = 0.0;
        for (auto& v : p) {
            v = normal(rng);
            sq += v * v;
        }
        const double s = norm / std::sqrt(std::max(sq, 1e-12));
        for (auto& v : p) v *= s;
    }
    return out;
}

}  // namespace

std::string to_string(DependenceMode mode) {
    switch (mode) {
        case DependenceMode::text_only: return "text_only";
        case DependenceMode::image_only: return "image_only";
        case DependenceMode::joint_and: return "joint_and";
    }
    return "unknown";
}

DependenceMode dependence_mode_from_string(std::string_view name) {
    for (auto m : {DependenceMode::text_only, DependenceMode::image_only, DependenceMode::joint_and})
        if (to_string(m) == name) return m;
    throw ContractError("unknown dependence mode '" + std::string(name) + "'");
}

std::vector<double> default_priors(std::size_t drug_count) {
    std::vector<double> p(drug_count + 1, 0.08);
    if (drug_count == kDefaultDrugCount) p = {0.0, 0.14, 0.08, 0.08, 0.08, 0.07, 0.06, 0.06, 0.08, 0.06};
    double none = 1.0;
    for (std::size_t c = 1; c < p.size(); ++c) none *= 1.0 - p[c];
    p[0] = none;
    return p;
}

std::vector<std::vector<std::string>> default_lexicons(std::size_t drug_count) {
    if (drug_count == kDefaultDrugCount)
        return {{"weed", "kush", "cannabis", "ganja"},  {"codeine", "lean", "syrup"},
                {"mdma", "molly", "ecstasy"},           {"xanax", "xans", "bars"},
                {"oxy", "percs", "oxycodone"},          {"shrooms", "mushrooms", "psilocybin"},
                {"acid", "lsd", "tabs"},                {"coke", "cocaine", "blow"},
                {"meth", "ketamine", "dmt", "crystal"}};
    std::vector<std::vector<std::string>> out(drug_count);
    for (std::size_t d = 0; d < drug_count; ++d)
        for (std::size_t k = 0; k < 3; ++k) out[d].push_back("zq" + letters_for(d) + "v" + letters_for(k));
    return out;
}

CorpusConfig CorpusConfig::resolved() const {
    CorpusConfig c = *this;
    if (c.priors.empty()) c.priors = default_priors(c.drug_count);
    if (c.lexicons.empty()) c.lexicons = default_lexicons(c.drug_count);
    if (c.prototypes.empty()) c.prototypes = random_prototypes(c.drug_count, c.d_img, c.prototype_norm, c.seed);
    return c;
}

void CorpusConfig::validate() const {
    const CorpusConfig c = resolved();
    if (c.drug_count == 0) throw ContractError("drug_count must be positive");
    if (c.priors.size() != c.drug_count + 1)
        throw ContractError("priors must have " + std::to_string(c.drug_count + 1) + " entries, got " +
                            std::to_string(c.priors.size()));
    for (std::size_t i = 0; i < c.priors.size(); ++i)
        if (!(c.priors[i] >= 0.0 && c.priors[i] <= 1.0))
            throw ContractError("prior " + std::to_string(i) + " = " + std::to_string(c.priors[i]) + " outside [0, 1]");
    auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw ContractError(std::string(name) + " must lie in [0, 1]");
    };
    unit(c.obfuscation_rate, "obfuscation_rate");
    unit(c.distractor_rate, "distractor_rate");
    unit(c.bundle_rate, "bundle_rate");
    unit(c.comment_fraction, "comment_fraction");
    if (c.noise_scale < 0.0) throw ContractError("noise_scale must be non-negative");
    if (c.authors == 0) throw ContractError("authors must be positive");
    if (c.d_img == 0) throw ContractError("d_img must be positive");

    if (c.lexicons.size() != c.drug_count) throw ContractError("one lexicon per drug label required");
    std::set<std::string> seen;
    for (std::size_t d = 0; d < c.lexicons.size(); ++d) {
        if (c.lexicons[d].empty()) throw ContractError("lexicon for drug " + std::to_string(d + 1) + " is empty");
        for (const auto& t : c.lexicons[d]) {
            if (t.size() < 3 || !std::all_of(t.begin(), t.end(), [](char ch) { return ch >= 'a' && ch <= 'z'; }))
                throw ContractError("lexicon term '" + t + "' must be three or more lowercase ASCII letters");
            if (!seen.insert(t).second) throw ContractError("lexicon term '" + t + "' appears in two classes");
        }
    }
    if (c.prototypes.size() != c.drug_count) throw ContractError("one prototype per drug label required");
    for (std::size_t a = 0; a < c.prototypes.size(); ++a) {
        if (c.prototypes[a].size() != c.d_img)
            throw ContractError("prototype " + std::to_string(a + 1) + " length != d_img");
        for (std::size_t b = 0; b < a; ++b)
            if (c.prototypes[a] == c.prototypes[b])
                throw ContractError("prototypes " + std::to_string(b + 1) + " and " + std::to_string(a + 1) + " coincide");
    }

    if (c.bundle_rate > 0.0 && c.drug_count >= 2) {
        const std::size_t kmax = std::min<std::size_t>(8, c.drug_count);
        const double inclusion = (2.0 + static_cast<double>(kmax)) / 2.0 / static_cast<double>(c.drug_count);
        for (std::size_t d = 1; d <= c.drug_count; ++d)
            if (c.priors[d] < c.bundle_rate * inclusion || (c.bundle_rate < 1.0 && c.priors[d] - c.bundle_rate * inclusion > 1.0 - c.bundle_rate))
                throw ContractError("prior " + std::to_string(d) + " incompatible with bundle_rate " +
                                    std::to_string(c.bundle_rate));
    }
}

void to_json(nlohmann::json& j, const CorpusConfig& c) {
    j = nlohmann::json{{"n", c.n},
                       {"drug_count", c.drug_count},
                       {"priors", c.priors},
                       {"mode", to_string(c.mode)},
                       {"obfuscation_rate", c.obfuscation_rate},
                       {"distractor_rate", c.distractor_rate},
                       {"bundle_rate", c.bundle_rate},
                       {"lexicons", c.lexicons},
                       {"prototypes", c.prototypes},
                       {"d_img", c.d_img},
                       {"prototype_norm", c.prototype_norm},
                       {"noise_scale", c.noise_scale},
                       {"comment_fraction", c.comment_fraction},
                       {"authors", c.authors},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, CorpusConfig& c) {
    CorpusConfig d;
    c.n = j.value("n", d.n);
    c.drug_count = j.value("drug_count", d.drug_count);
    c.priors = j.value("priors", d.priors);
    c.mode = dependence_mode_from_string(j.value("mode", to_string(d.mode)));
    c.obfuscation_rate = j.value("obfuscation_rate", d.obfuscation_rate);
    c.distractor_rate = j.value("distractor_rate", d.distractor_rate);
    c.bundle_rate = j.value("bundle_rate", d.bundle_rate);
    c.lexicons = j.value("lexicons", d.lexicons);
    c.prototypes = j.value("prototypes", d.prototypes);
    c.d_img = j.value("d_img", d.d_img);
    c.prototype_norm = j.value("prototype_norm", d.prototype_norm);
    c.noise_scale = j.value("noise_scale", d.noise_scale);
    c.comment_fraction = j.value("comment_fraction", d.comment_fraction);
    c.authors = j.value("authors", d.authors);
    c.seed = j.value("seed", d.seed);
}

double CorpusStats::text_ceiling(std::size_t d) const {
    const auto& s = per_drug.at(d);
    const std::size_t with_term_neg = s.text_distractors;
    const std::size_t without_pos = s.positives - s.positives_with_term;
    const std::size_t without_neg = n - s.positives - with_term_neg;
    const double errors = static_cast<double>(std::min(s.positives_with_term, with_term_neg) + std::min(without_pos, without_neg));
    return 1.0 - errors / static_cast<double>(n);
}

double CorpusStats::image_ceiling(std::size_t d) const {
    const auto& s = per_drug.at(d);
    const std::size_t without_pos = s.positives - s.positives_with_prototype;
    const std::size_t without_neg = n - s.positives - s.image_distractors;
    const double errors =
        static_cast<double>(std::min(s.positives_with_prototype, s.image_distractors) + std::min(without_pos, without_neg));
    return 1.0 - errors / static_cast<double>(n);
}

void to_json(nlohmann::json& j, const CorpusStats& s) {
    j = nlohmann::json::object();
    j["n"] = s.n;
    j["obfuscated_terms"] = s.obfuscated_terms;
    j["total_terms"] = s.total_terms;
    auto drugs = nlohmann::json::array();
    for (std::size_t d = 0; d < s.per_drug.size(); ++d) {
        const auto& c = s.per_drug[d];
        drugs.push_back({{"label", category_name(d + 1, s.per_drug.size() + 1)},
                         {"positives", c.positives},
                         {"positives_with_term", c.positives_with_term},
                         {"positives_with_prototype", c.positives_with_prototype},
                         {"text_distractors", c.text_distractors},
                         {"image_distractors", c.image_distractors},
                         {"text_ceiling", s.text_ceiling(d)},
                         {"image_ceiling", s.image_ceiling(d)}});
    }
    j["per_drug"] = std::move(drugs);
}

Corpus generate_corpus(const CorpusConfig& input) {
    input.validate();
    const CorpusConfig cfg = input.resolved();
    const std::size_t C = cfg.drug_count;
    std::mt19937_64 rng(cfg.seed);

    // Non-bundle Bernoulli rates chosen so that marginals equal the priors.
    const bool bundles = cfg.bundle_rate > 0.0 && C >= 2;
    const std::size_t kmax = std::min<std::size_t>(8, C);
    const double inclusion = bundles ? (2.0 + static_cast<double>(kmax)) / 2.0 / static_cast<double>(C) : 0.0;
    std::vector<double> q(C + 1, 0.0);
    for (std::size_t d = 1; d <= C; ++d)
        q[d] = bundles ? (cfg.bundle_rate < 1.0 ? (cfg.priors[d] - cfg.bundle_rate * inclusion) / (1.0 - cfg.bundle_rate) : 0.0)
                       : cfg.priors[d];

    Corpus corpus;
    corpus.stats.n = cfg.n;
    corpus.stats.per_drug.assign(C, {});
    std::vector<std::uint64_t> post_ids;
    std::vector<std::size_t> drug_order(C);

    for (std::size_t i = 0; i < cfg.n; ++i) {
        SuspectIDTE r;
        r.id = i + 1;
        r.author_id = uniform_index(rng, cfg.authors) + 1;
        if (!post_ids.empty() && bernoulli(rng, cfg.comment_fraction)) {
            r.kind = RecordKind::comment;
            r.parent_id = post_ids[uniform_index(rng, post_ids.size())];
        } else {
            post_ids.push_back(r.id);
        }

        std::vector<bool> label(C + 1, false);
        if (bundles && bernoulli(rng, cfg.bundle_rate)) {
            const std::size_t k = 2 + uniform_index(rng, kmax - 1);
            for (std::size_t d = 0; d < C; ++d) drug_order[d] = d + 1;
            shuffle(std::span<std::size_t>(drug_order), rng);
            for (std::size_t t = 0; t < k; ++t) label[drug_order[t]] = true;
        } else {
            for (std::size_t d = 1; d <= C; ++d) label[d] = bernoulli(rng, q[d]);
        }

        std::vector<bool> term(C + 1, false), proto(C + 1, false);
        for (std::size_t d = 1; d <= C; ++d) {
            switch (cfg.mode) {
                case DependenceMode::joint_and:
                    if (label[d]) {
                        term[d] = proto[d] = true;
                    } else if (bernoulli(rng, cfg.distractor_rate)) {
                        (bernoulli(rng, 0.5) ? term[d] : proto[d]) = true;
                    }
                    break;
                case DependenceMode::text_only:
                    term[d] = label[d];
                    proto[d] = bernoulli(rng, cfg.priors[d]);
                    break;
                case DependenceMode::image_only:
                    proto[d] = label[d];
                    term[d] = bernoulli(rng, cfg.priors[d]);
                    break;
            }
            auto& s = corpus.stats.per_drug[d - 1];
            if (label[d]) {
                ++s.positives;
                if (term[d]) ++s.positives_with_term;
                if (proto[d]) ++s.positives_with_prototype;
            } else {
                if (term[d]) ++s.text_distractors;
                if (proto[d]) ++s.image_distractors;
            }
        }

        // Text: filler words with lexicon terms inserted at random positions.
        std::vector<std::string> words;
        const std::size_t n_words = 6 + uniform_index(rng, 7);
        for (std::size_t w = 0; w < n_words; ++w) words.push_back(kFiller[uniform_index(rng, kFiller.size())]);
        for (std::size_t d = 1; d <= C; ++d) {
            if (!term[d]) continue;
            const auto& lex = cfg.lexicons[d - 1];
            std::string t = lex[uniform_index(rng, lex.size())];
            ++corpus.stats.total_terms;
            if (bernoulli(rng, cfg.obfuscation_rate)) {
                t = obfuscate(t, rng);
                ++corpus.stats.obfuscated_terms;
            }
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, words.size() + 1)), std::move(t));
        }
        for (std::size_t w = 0; w < words.size(); ++w) r.text += (w ? " " : "") + words[w];

        const std::size_t n_tags = 1 + uniform_index(rng, 3);
        std::set<std::string> tags;
        for (std::size_t t = 0; t < n_tags; ++t) tags.insert("#" + kGenericWords[uniform_index(rng, kGenericWords.size())]);
        r.hashtags.assign(tags.begin(), tags.end());

        r.image_features.assign(cfg.d_img, 0.0);
        for (std::size_t d = 1; d <= C; ++d)
            if (proto[d])
                for (std::size_t k = 0; k < cfg.d_img; ++k) r.image_features[k] += cfg.prototypes[d - 1][k];
        for (auto& v : r.image_features) v += cfg.noise_scale * normal(rng);

        std::vector<std::size_t> drugs;
        for (std::size_t d = 1; d <= C; ++d)
            if (label[d]) drugs.push_back(d);
        r.labels = LabelVector::from_drugs(C, drugs);
        corpus.records.push_back(std::move(r));
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Platform

void PlatformConfig::validate() const {
    if (dealers > users)
        throw ContractError("dealer count " + std::to_string(dealers) + " exceeds user count " + std::to_string(users));
    if (users == 0) throw ContractError("users must be positive");
    if (drug_hashtags < 2 && dealers > 0) throw ContractError("drug_hashtags must be at least 2");
    if (generic_hashtags == 0) throw ContractError("generic_hashtags must be positive");
    if (min_direct_posts == 0 || min_direct_posts > max_direct_posts)
        throw ContractError("direct post range must satisfy 1 <= min <= max");
    if (dealers * max_direct_posts > posts)
        throw ContractError("posts (" + std::to_string(posts) + ") too few for " + std::to_string(dealers) +
                            " dealers with up to " + std::to_string(max_direct_posts) + " direct posts each");
    if (zipf_exponent < 0.0 || comments_per_drug_post < 0.0 || comments_per_innocent_post < 0.0)
        throw ContractError("rates must be non-negative");
    if (d_img == 0) throw ContractError("d_img must be positive");
}

void to_json(nlohmann::json& j, const PlatformConfig& c) {
    j = nlohmann::json{{"users", c.users},
                       {"dealers", c.dealers},
                       {"posts", c.posts},
                       {"drug_hashtags", c.drug_hashtags},
                       {"generic_hashtags", c.generic_hashtags},
                       {"zipf_exponent", c.zipf_exponent},
                       {"min_direct_posts", c.min_direct_posts},
                       {"max_direct_posts", c.max_direct_posts},
                       {"ad_comments_per_dealer", c.ad_comments_per_dealer},
                       {"comments_per_drug_post", c.comments_per_drug_post},
                       {"comments_per_innocent_post", c.comments_per_innocent_post},
                       {"d_img", c.d_img},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, PlatformConfig& c) {
    PlatformConfig d;
    c.users = j.value("users", d.users);
    c.dealers = j.value("dealers", d.dealers);
    c.posts = j.value("posts", d.posts);
    c.drug_hashtags = j.value("drug_hashtags", d.drug_hashtags);
    c.generic_hashtags = j.value("generic_hashtags", d.generic_hashtags);
    c.zipf_exponent = j.value("zipf_exponent", d.zipf_exponent);
    c.min_direct_posts = j.value("min_direct_posts", d.min_direct_posts);
    c.max_direct_posts = j.value("max_direct_posts", d.max_direct_posts);
    c.ad_comments_per_dealer = j.value("ad_comments_per_dealer", d.ad_comments_per_dealer);
    c.comments_per_drug_post = j.value("comments_per_drug_post", d.comments_per_drug_post);
    c.comments_per_innocent_post = j.value("comments_per_innocent_post", d.comments_per_innocent_post);
    c.d_img = j.value("d_img", d.d_img);
    c.seed = j.value("seed", d.seed);
}

std::size_t PlatformGraph::dealer_count() const {
    return static_cast<std::size_t>(std::count_if(users.begin(), users.end(), [](const auto& u) { return u.dealer; }));
}

const PlatformPost* PlatformGraph::find_post(std::uint64_t id) const {
    auto it = std::lower_bound(posts.begin(), posts.end(), id, [](const PlatformPost& p, std::uint64_t v) { return p.id < v; });
    return it != posts.end() && it->id == id ? &*it : nullptr;
}

PlatformGraph synth_platform(const PlatformConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    PlatformGraph g;

    // Hashtag universe.
    std::set<std::string> used;
    for (const auto& lex : default_lexicons(kDefaultDrugCount))
        for (const auto& t : lex)
            if (g.drug_hashtags.size() < cfg.drug_hashtags && used.insert("#" + t).second) g.drug_hashtags.push_back("#" + t);
    for (std::size_t k = 0; g.drug_hashtags.size() < cfg.drug_hashtags; ++k) {
        const auto& lex = default_lexicons(kDefaultDrugCount);
        const auto& base = lex[k % lex.size()][0];
        std::string tag = "#" + base + kDrugTagExtras[(k / lex.size()) % kDrugTagExtras.size()];
        if (k / (lex.size() * kDrugTagExtras.size()) > 0) tag += std::to_string(k / (lex.size() * kDrugTagExtras.size()));
        if (used.insert(tag).second) g.drug_hashtags.push_back(tag);
    }
    for (std::size_t k = 0; g.generic_hashtags.size() < cfg.generic_hashtags; ++k) {
        std::string tag = "#" + kGenericWords[k % kGenericWords.size()];
        if (k >= kGenericWords.size()) tag += std::to_string(k / kGenericWords.size());
        if (used.insert(tag).second) g.generic_hashtags.push_back(tag);
    }
    const ZipfSampler generic_rank(g.generic_hashtags.size(), cfg.zipf_exponent);

    // Users and planted dealers.
    std::vector<std::uint64_t> ids(cfg.users);
    for (std::size_t i = 0; i < cfg.users; ++i) ids[i] = i + 1;
    g.users.resize(cfg.users);
    for (std::size_t i = 0; i < cfg.users; ++i) g.users[i].id = ids[i];
    std::vector<std::uint64_t> order = ids;
    shuffle(std::span<std::uint64_t>(order), rng);
    std::vector<std::uint64_t> dealers(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg.dealers));
    std::vector<std::uint64_t> normals(order.begin() + static_cast<std::ptrdiff_t>(cfg.dealers), order.end());
    std::sort(dealers.begin(), dealers.end());
    std::sort(normals.begin(), normals.end());
    for (auto d : dealers) g.users[d - 1].dealer = true;
    const auto& any_user = normals.empty() ? dealers : normals;

    auto innocent_text = [&](std::size_t words) {
        std::string s;
        for (std::size_t w = 0; w < words; ++w) s += (w ? " " : "") + kFiller[uniform_index(rng, kFiller.size())];
        return s;
    };
    const auto lexicons = default_lexicons(kDefaultDrugCount);
    auto ad_text = [&] {
        const auto& lex = lexicons[uniform_index(rng, lexicons.size())];
        return "dm for " + lex[uniform_index(rng, lex.size())] + " " + innocent_text(3);
    };
    const auto prototypes = random_prototypes(1, cfg.d_img, 3.0, cfg.seed);
    auto image = [&](bool drug) {
        std::vector<double> f(cfg.d_img);
        for (std::size_t k = 0; k < cfg.d_img; ++k) f[k] = (drug ? prototypes[0][k] : 0.0) + 0.3 * normal(rng);
        return f;
    };

    // Posts: direct drug ads by dealers, the rest innocent by normal users.
    std::vector<PlatformPost> posts;
    for (auto d : dealers) {
        const std::size_t k = cfg.min_direct_posts + uniform_index(rng, cfg.max_direct_posts - cfg.min_direct_posts + 1);
        for (std::size_t p = 0; p < k; ++p) {
            PlatformPost post;
            post.author_id = d;
            post.drug_ad = true;
            post.text = ad_text();
            std::set<std::string> tags;
            const std::size_t n_drug = 2 + uniform_index(rng, std::min<std::size_t>(3, g.drug_hashtags.size() - 1));
            while (tags.size() < n_drug) tags.insert(g.drug_hashtags[uniform_index(rng, g.drug_hashtags.size())]);
            const std::size_t n_noise = uniform_index(rng, 3);
            for (std::size_t t = 0; t < n_noise; ++t) tags.insert(g.generic_hashtags[generic_rank(rng)]);
            post.hashtags.assign(tags.begin(), tags.end());
            post.image_features = image(true);
            posts.push_back(std::move(post));
        }
    }
    while (posts.size() < cfg.posts) {
        PlatformPost post;
        post.author_id = any_user[uniform_index(rng, any_user.size())];
        post.text = innocent_text(5 + uniform_index(rng, 6));
        std::set<std::string> tags;
        const std::size_t n_tags = 1 + uniform_index(rng, 5);
        for (std::size_t t = 0; t < n_tags; ++t) tags.insert(g.generic_hashtags[generic_rank(rng)]);
        post.hashtags.assign(tags.begin(), tags.end());
        post.image_features = image(false);
        posts.push_back(std::move(post));
    }
    shuffle(std::span<PlatformPost>(posts), rng);
    for (std::size_t i = 0; i < posts.size(); ++i) posts[i].id = i + 1;

    // Comments: dealers under drug ads, normal users under innocent posts,
    // then planted drug-ad comments under innocent posts.
    std::uint64_t next_comment = posts.size() + 1;
    std::vector<std::uint64_t> innocent_ids;
    for (const auto& post : posts) {
        if (!post.drug_ad) innocent_ids.push_back(post.id);
        const std::size_t n = count_draw(rng, post.drug_ad ? cfg.comments_per_drug_post : cfg.comments_per_innocent_post);
        for (std::size_t c = 0; c < n; ++c) {
            PlatformComment cm;
            cm.id = next_comment++;
            cm.post_id = post.id;
            cm.drug_ad = post.drug_ad;
            cm.author_id = post.drug_ad ? dealers[uniform_index(rng, dealers.size())] : any_user[uniform_index(rng, any_user.size())];
            cm.text = post.drug_ad ? ad_text() : innocent_text(3 + uniform_index(rng, 4));
            g.comments.push_back(std::move(cm));
        }
    }
    if (!innocent_ids.empty())
        for (auto d : dealers)
            for (std::size_t c = 0; c < cfg.ad_comments_per_dealer; ++c) {
                PlatformComment cm;
                cm.id = next_comment++;
                cm.post_id = innocent_ids[uniform_index(rng, innocent_ids.size())];
                cm.author_id = d;
                cm.drug_ad = true;
                cm.text = ad_text();
                g.comments.push_back(std::move(cm));
            }
    g.posts = std::move(posts);
    return g;
}

nlohmann::json platform_to_json(const PlatformGraph& g) {
    nlohmann::json j;
    auto users = nlohmann::json::array();
    for (const auto& u : g.users) users.push_back({{"id", u.id}, {"dealer", u.dealer}});
    auto posts = nlohmann::json::array();
    for (const auto& p : g.posts)
        posts.push_back({{"id", p.id},
                         {"author_id", p.author_id},
                         {"text", p.text},
                         {"hashtags", p.hashtags},
                         {"image_features", p.image_features},
                         {"drug_ad", p.drug_ad}});
    auto comments = nlohmann::json::array();
    for (const auto& c : g.comments)
        comments.push_back(
            {{"id", c.id}, {"post_id", c.post_id}, {"author_id", c.author_id}, {"text", c.text}, {"drug_ad", c.drug_ad}});
    j["users"] = std::move(users);
    j["posts"] = std::move(posts);
    j["comments"] = std::move(comments);
    j["drug_hashtags"] = g.drug_hashtags;
    j["generic_hashtags"] = g.generic_hashtags;
    return j;
}

PlatformGraph platform_from_json(const nlohmann::json& j) {
    PlatformGraph g;
    try {
        for (const auto& u : j.at("users")) g.users.push_back({u.at("id").get<std::uint64_t>(), u.value("dealer", false)});
        for (const auto& p : j.at("posts")) {
            PlatformPost post;
            post.id = p.at("id").get<std::uint64_t>();
            post.author_id = p.at("author_id").get<std::uint64_t>();
            post.text = p.value("text", std::string());
            post.hashtags = p.value("hashtags", std::vector<std::string>{});
            post.image_features = p.value("image_features", std::vector<double>{});
            post.drug_ad = p.value("drug_ad", false);
            g.posts.push_back(std::move(post));
        }
        for (const auto& c : j.at("comments")) {
            PlatformComment cm;
            cm.id = c.at("id").get<std::uint64_t>();
            cm.post_id = c.at("post_id").get<std::uint64_t>();
            cm.author_id = c.at("author_id").get<std::uint64_t>();
            cm.text = c.value("text", std::string());
            cm.drug_ad = c.value("drug_ad", false);
            g.comments.push_back(std::move(cm));
        }
        g.drug_hashtags = j.value("drug_hashtags", std::vector<std::string>{});
        g.generic_hashtags = j.value("generic_hashtags", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed platform document: ") + e.what());
    }
    std::sort(g.posts.begin(), g.posts.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::sort(g.comments.begin(), g.comments.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::set<std::uint64_t> dealers;
    for (const auto& u : g.users)
        if (u.dealer) dealers.insert(u.id);
    for (const auto& c : g.comments) {
        if (!g.find_post(c.post_id)) throw ValidationError("comment " + std::to_string(c.id) + " references a missing post");
        if (c.drug_ad && !dealers.count(c.author_id))
            throw ValidationError("drug-ad comment " + std::to_string(c.id) + " authored by a non-dealer");
    }
    return g;
}

void save_platform(const std::filesystem::path& path, const PlatformGraph& g) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << platform_to_json(g).dump() << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

PlatformGraph load_platform(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return platform_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace idte
