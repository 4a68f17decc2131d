#include "idte/text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "idte/error.hpp"

namespace idte {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool is_ascii_letter(char32_t c) { return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z'); }
bool is_ascii_digit(char32_t c) { return c >= U'0' && c <= U'9'; }
bool is_ascii_alnum(char32_t c) { return is_ascii_letter(c) || is_ascii_digit(c); }
char32_t ascii_lower(char32_t c) { return (c >= U'A' && c <= U'Z') ? c + 32 : c; }

bool is_space(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' || c == 0x00A0 ||
           c == 0x3000 || (c >= 0x2000 && c <= 0x200B);
}

// Word characters for tokenization: ASCII alphanumerics and any non-ASCII
// code point that is not whitespace (so "shrøøms" stays one token).
bool is_word_char(char32_t c) { return is_ascii_alnum(c) || (c >= 0x80 && !is_space(c)); }

// A letter standing alone between non-letters.
bool single_letter_at(const std::u32string& s, std::size_t i) {
    if (i >= s.size() || !is_ascii_letter(s[i])) return false;
    if (i > 0 && is_ascii_letter(s[i - 1])) return false;
    if (i + 1 < s.size() && is_ascii_letter(s[i + 1])) return false;
    return true;
}

std::u32string collapse_separated_letters(const std::u32string& s, std::u32string_view separators) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (single_letter_at(s, i) && i + 1 < s.size() && separators.find(s[i + 1]) != std::u32string_view::npos) {
            const char32_t sep = s[i + 1];
            std::size_t j = i;
            std::size_t letters = 1;
            while (j + 2 < s.size() && s[j + 1] == sep && single_letter_at(s, j + 2)) {
                j += 2;
                ++letters;
            }
            if (letters >= 3) {
                for (std::size_t k = i; k <= j; k += 2) out.push_back(s[k]);
                i = j + 1;
                continue;
            }
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

}  // namespace

std::u32string utf8_decode(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        if (i + len > s.size()) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool ok = true;
        for (std::size_t k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        if (!ok) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string utf8_encode(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) {
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = kReplacement;
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization rules

NormalizationRules NormalizationRules::defaults() {
    NormalizationRules r;
    r.homoglyphs = {
        // o-like
        {U'ø', 'o'}, {U'Ø', 'o'}, {U'Θ', 'o'}, {U'θ', 'o'}, {U'ο', 'o'}, {U'Ο', 'o'}, {U'о', 'o'}, {U'О', 'o'},
        {U'ö', 'o'}, {U'ó', 'o'}, {U'ò', 'o'}, {U'ô', 'o'}, {U'õ', 'o'},
        // a-like
        {U'а', 'a'}, {U'А', 'a'}, {U'α', 'a'}, {U'á', 'a'}, {U'à', 'a'}, {U'ä', 'a'}, {U'â', 'a'}, {U'å', 'a'},
        // e-like
        {U'е', 'e'}, {U'Е', 'e'}, {U'é', 'e'}, {U'è', 'e'}, {U'ë', 'e'}, {U'ê', 'e'}, {U'€', 'e'},
        // i-like
        {U'і', 'i'}, {U'І', 'i'}, {U'ı', 'i'}, {U'í', 'i'}, {U'ì', 'i'}, {U'ï', 'i'}, {U'Ι', 'i'},
        // others
        {U'ѕ', 's'}, {U'Ѕ', 's'}, {U'с', 'c'}, {U'С', 'c'}, {U'ç', 'c'}, {U'р', 'p'}, {U'Р', 'p'},
        {U'х', 'x'}, {U'Х', 'x'}, {U'у', 'y'}, {U'к', 'k'}, {U'К', 'k'}, {U'ü', 'u'}, {U'ú', 'u'},
        {U'ñ', 'n'}, {U'Μ', 'm'}, {U'М', 'm'}, {U'Κ', 'k'}, {U'Τ', 't'}, {U'Т', 't'},
    };
    return r;
}

void NormalizationRules::validate() const {
    for (const auto& [from, to] : homoglyphs)
        if (to < 'a' || to > 'z')
            throw ContractError("homoglyph target for U+" + std::to_string(static_cast<unsigned>(from)) +
                                " is not a lowercase ASCII letter");
    for (char32_t c : separators)
        if (is_ascii_alnum(c) || is_space(c))
            throw ContractError("separator set may not contain letters, digits or whitespace");
}

NormalizationRules parse_homoglyph_rules(std::string_view text, NormalizationRules base) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto u = utf8_decode(line);
        std::size_t i = 0;
        while (i < u.size() && is_space(u[i])) ++i;
        if (i >= u.size() || u[i] == U'#') continue;
        const char32_t from = u[i++];
        while (i < u.size() && is_space(u[i])) ++i;
        if (i >= u.size() || !is_ascii_letter(u[i]) || (i + 1 < u.size() && !is_space(u[i + 1]) && u[i + 1] != U'#'))
            throw ContractError("homoglyph rules line " + std::to_string(lineno) + ": expected '<char> <ascii-letter>'");
        base.homoglyphs[from] = static_cast<char>(ascii_lower(u[i]));
    }
    base.validate();
    return base;
}

NormalizationRules load_homoglyph_rules(const std::filesystem::path& path, NormalizationRules base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open homoglyph rules " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_homoglyph_rules(ss.str(), std::move(base));
}

std::string normalize_obfuscation(std::string_view text, const NormalizationRules& rules) {
    std::u32string s = utf8_decode(text);
    if (rules.map_homoglyphs)
        for (auto& c : s)
            if (auto it = rules.homoglyphs.find(c); it != rules.homoglyphs.end()) c = static_cast<char32_t>(it->second);
    if (rules.collapse_separators) s = collapse_separated_letters(s, rules.separators);
    if (rules.lowercase)
        for (auto& c : s) c = ascii_lower(c);
    return utf8_encode(s);
}

std::vector<std::string> extract_hashtags(std::string_view text) {
    const auto s = utf8_decode(text);
    std::vector<std::string> tags;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == U'#' && i + 1 < s.size() && is_ascii_alnum(s[i + 1])) {
            std::string tag = "#";
            std::size_t j = i + 1;
            while (j < s.size() && is_ascii_alnum(s[j])) tag.push_back(static_cast<char>(ascii_lower(s[j++])));
            tags.push_back(std::move(tag));
            i = j;
        } else {
            ++i;
        }
    }
    return tags;
}

// ---------------------------------------------------------------------------
// Vocabulary and tokenization

Vocabulary::Vocabulary() {
    add("[PAD]");
    add("[CLS]");
    add("[SEP]");
    add("[UNK]");
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    for (const auto& t : tokens) {
        if (v.contains(t)) throw ContractError("duplicate vocabulary token '" + t + "'");
        v.add(t);
    }
    return v;
}

int Vocabulary::add(std::string token) {
    const int id = static_cast<int>(tokens_.size());
    ids_.emplace(token, id);
    tokens_.push_back(std::move(token));
    return id;
}

int Vocabulary::id(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

std::vector<std::string> split_words(std::string_view text, const TokenizerOptions& options) {
    std::string normalized;
    if (options.normalize) {
        normalized = normalize_obfuscation(text, options.rules);
        text = normalized;
    }
    const auto s = utf8_decode(text);
    std::vector<std::string> words;
    std::u32string cur;
    auto flush = [&] {
        if (!cur.empty() && !(cur.size() == 1 && cur[0] == U'#')) words.push_back(utf8_encode(cur));
        cur.clear();
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char32_t c = s[i];
        if (c == U'#' && i + 1 < s.size() && is_word_char(s[i + 1])) {
            flush();
            cur.push_back(c);
        } else if (is_word_char(c)) {
            cur.push_back(ascii_lower(c));
        } else if ((c == U'-' || c == U'_' || c == U'\'') && !cur.empty() && cur != U"#" && i + 1 < s.size() &&
                   is_word_char(s[i + 1])) {
            // joiner inside a word: "well-known", "zzzz-unknown"
            cur.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return words;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq, std::size_t max_size,
                       const TokenizerOptions& options) {
    if (corpus.empty()) throw ContractError("build_vocab: empty corpus");
    if (min_freq == 0) throw ContractError("build_vocab: min_freq must be positive");
    if (max_size < Vocabulary::kReserved)
        throw ContractError("build_vocab: max_size must be at least " + std::to_string(Vocabulary::kReserved));
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& doc : corpus)
        for (auto& w : split_words(doc, options)) ++freq[w];

    Vocabulary reserved;
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [w, n] : freq)
        if (n >= min_freq && !reserved.contains(w)) kept.emplace_back(w, n);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (kept.size() > max_size - Vocabulary::kReserved) kept.resize(max_size - Vocabulary::kReserved);
    std::vector<std::string> tokens;
    tokens.reserve(kept.size());
    for (auto& [w, _] : kept) tokens.push_back(w);
    return Vocabulary::from_tokens(tokens);
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_seq, const TokenizerOptions& options) {
    if (max_seq == 0) throw ContractError("tokenize: max_seq must be positive");
    TokenSequence seq;
    seq.ids.push_back(Vocabulary::kCls);
    seq.tokens.emplace_back("[CLS]");
    for (auto& w : split_words(text, options)) {
        if (seq.ids.size() >= max_seq) break;
        seq.ids.push_back(vocab.id(w));
        seq.tokens.push_back(std::move(w));
    }
    return seq;
}

}  // namespace idte
