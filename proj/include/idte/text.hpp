#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace idte {

/// Rules for undoing common evasion spellings such as "A.c.i.D" or "shrøøms".
struct NormalizationRules {
    /// Code point -> lowercase ASCII letter.
    std::map<char32_t, char> homoglyphs;
    /// Characters that may separate single letters ("a.c.i.d", "c-o-k-e").
    std::u32string separators = U".-_*~·•";
    bool map_homoglyphs = true;
    bool collapse_separators = true;
    bool lowercase = true;

    /// Built-in homoglyph table (the same one shipped in data/homoglyphs.txt).
    static NormalizationRules defaults();
    /// Throws ContractError when a homoglyph target is not a lowercase ASCII
    /// letter or a separator is a letter or digit.
    void validate() const;
};

/// Parses "<char> <ascii-letter>" lines; '#' starts a comment.
NormalizationRules parse_homoglyph_rules(std::string_view text, NormalizationRules base = {});
NormalizationRules load_homoglyph_rules(const std::filesystem::path& path, NormalizationRules base = {});

/// Maps homoglyphs, collapses runs of three or more single letters joined by
/// one repeated separator ("s.H.r.o.o.M.s" -> "sHrooMs"), then lowercases.
/// Idempotent.
std::string normalize_obfuscation(std::string_view text, const NormalizationRules& rules);

/// Maximal "#"+alphanumeric runs, lowercased, in order, duplicates kept.
std::vector<std::string> extract_hashtags(std::string_view text);

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kCls = 1;
    static constexpr int kSep = 2;
    static constexpr int kUnk = 3;
    static constexpr std::size_t kReserved = 4;

    Vocabulary();
    /// Reserved tokens followed by `tokens` in order.
    static Vocabulary from_tokens(const std::vector<std::string>& tokens);

    int id(std::string_view token) const;  // kUnk when absent
    bool contains(std::string_view token) const;
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    int add(std::string token);
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

struct TokenizerOptions {
    bool normalize = true;
    NormalizationRules rules = NormalizationRules::defaults();
};

/// Splits on whitespace and punctuation, keeping "#tag" runs whole.
/// Lowercases; applies normalize_obfuscation first when enabled.
std::vector<std::string> split_words(std::string_view text, const TokenizerOptions& options = {});

/// Tokens with frequency >= min_freq, most frequent first, ties
/// lexicographic; the result holds at most max_size entries including the
/// four reserved tokens.
Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq, std::size_t max_size,
                       const TokenizerOptions& options = {});

struct TokenSequence {
    std::vector<int> ids;              // ids[0] == Vocabulary::kCls
    std::vector<std::string> tokens;   // original strings, "[CLS]" first
    std::size_t length() const { return ids.size(); }
};

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_seq,
                       const TokenizerOptions& options = {});

// UTF-8 helpers; invalid bytes decode to U+FFFD.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

}  // namespace idte
