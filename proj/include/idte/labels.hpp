#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace idte {

/// Default number of drug labels. Slot 0 of every label vector is the
/// drug-free flag, so vectors have kDefaultDrugCount + 1 = 10 slots.
inline constexpr std::size_t kDefaultDrugCount = 9;

inline constexpr std::array<std::string_view, 10> kCategoryNames = {
    "non_drug", "marijuana", "codeine", "mdma", "xanax", "painkillers", "mushrooms", "lsd", "cocaine", "other_drugs",
};

/// Index of a canonical category string, or nullopt.
std::optional<std::size_t> category_index(std::string_view name);

/// Name for slot `index` of a width-`width` label vector. Canonical names for
/// the default width, "drug_<i>" otherwise.
std::string category_name(std::size_t index, std::size_t width = kCategoryNames.size());

/// Binary (C+1)-slot multilabel vector; slot 0 is the drug-free flag.
class LabelVector {
public:
    LabelVector() = default;
    explicit LabelVector(std::size_t width) : bits_(width, 0) {}
    explicit LabelVector(std::vector<std::uint8_t> bits);

    /// Ground-truth vector for a drug set, with slot 0 derived.
    static LabelVector from_drugs(std::size_t drug_count, const std::vector<std::size_t>& drugs);

    std::size_t width() const { return bits_.size(); }
    bool operator[](std::size_t i) const { return bits_.at(i) != 0; }
    void set(std::size_t i, bool on) { bits_.at(i) = on ? 1 : 0; }
    const std::vector<std::uint8_t>& bits() const { return bits_; }
    bool any_drug() const;

    /// Drug-free rule: slot 0 is set iff no drug slot is set.
    bool satisfies_drug_free_rule() const;
    /// Rewrites slot 0 from the drug slots.
    void derive_drug_free();

    bool operator==(const LabelVector&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// Throws ValidationError when the ground-truth rule is violated.
void validate_ground_truth(const LabelVector& labels, std::string_view record_id = {});

}  // namespace idte
