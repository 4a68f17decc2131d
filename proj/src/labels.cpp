#include "idte/labels.hpp"

#include <algorithm>

#include "idte/error.hpp"

namespace idte {

std::optional<std::size_t> category_index(std::string_view name) {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
        if (kCategoryNames[i] == name) return i;
    return std::nullopt;
}

std::string category_name(std::size_t index, std::size_t width) {
    if (width == kCategoryNames.size() && index < width) return std::string(kCategoryNames[index]);
    if (index == 0) return "non_drug";
    return "drug_" + std::to_string(index);
}

LabelVector::LabelVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_)
        if (b > 1) throw ValidationError("label bits must be 0 or 1");
}

LabelVector LabelVector::from_drugs(std::size_t drug_count, const std::vector<std::size_t>& drugs) {
    LabelVector v(drug_count + 1);
    for (auto d : drugs) {
        if (d == 0 || d > drug_count) throw ContractError("drug index " + std::to_string(d) + " out of range");
        v.set(d, true);
    }
    v.derive_drug_free();
    return v;
}

bool LabelVector::any_drug() const {
    return std::any_of(bits_.begin() + (bits_.empty() ? 0 : 1), bits_.end(), [](auto b) { return b != 0; });
}

bool LabelVector::satisfies_drug_free_rule() const {
    if (bits_.empty()) return false;
    return (bits_[0] != 0) == !any_drug();
}

void LabelVector::derive_drug_free() {
    if (!bits_.empty()) bits_[0] = any_drug() ? 0 : 1;
}

void validate_ground_truth(const LabelVector& labels, std::string_view record_id) {
    if (labels.width() < 2) throw ValidationError("label vector must have at least 2 slots");
    if (!labels.satisfies_drug_free_rule()) {
        std::string msg = "drug-free rule violated";
        if (!record_id.empty()) msg += " in record " + std::string(record_id);
        throw ValidationError(msg);
    }
}

}  // namespace idte
