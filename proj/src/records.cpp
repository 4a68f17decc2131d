#include "idte/records.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "idte/error.hpp"

namespace idte {

std::string to_string(RecordKind kind) { return kind == RecordKind::post ? "post" : "comment"; }

nlohmann::json record_to_json(const SuspectIDTE& r, bool with_labels) {
    nlohmann::json j;
    j["id"] = r.id;
    j["kind"] = to_string(r.kind);
    j["parent_id"] = r.parent_id ? nlohmann::json(*r.parent_id) : nlohmann::json(nullptr);
    j["author_id"] = r.author_id;
    j["text"] = r.text;
    j["hashtags"] = r.hashtags;
    j["image_features"] = r.image_features;
    if (with_labels) {
        if (r.labels) {
            std::vector<int> bits(r.labels->bits().begin(), r.labels->bits().end());
            j["labels"] = bits;
        } else {
            j["labels"] = nullptr;
        }
    }
    return j;
}

SuspectIDTE record_from_json(const nlohmann::json& j) {
    SuspectIDTE r;
    try {
        r.id = j.at("id").get<std::uint64_t>();
        const auto kind = j.value("kind", std::string("post"));
        if (kind == "post")
            r.kind = RecordKind::post;
        else if (kind == "comment")
            r.kind = RecordKind::comment;
        else
            throw ValidationError("record " + std::to_string(r.id) + ": unknown kind '" + kind + "'");
        if (j.contains("parent_id") && !j.at("parent_id").is_null()) r.parent_id = j.at("parent_id").get<std::uint64_t>();
        r.author_id = j.value("author_id", std::uint64_t{0});
        r.text = j.value("text", std::string());
        if (j.contains("hashtags")) r.hashtags = j.at("hashtags").get<std::vector<std::string>>();
        if (j.contains("image_features")) r.image_features = j.at("image_features").get<std::vector<double>>();
        if (j.contains("labels") && !j.at("labels").is_null()) {
            std::vector<std::uint8_t> bits;
            for (const auto& b : j.at("labels")) {
                const int v = b.get<int>();
                if (v != 0 && v != 1) throw ValidationError("record " + std::to_string(r.id) + ": label bits must be 0/1");
                bits.push_back(static_cast<std::uint8_t>(v));
            }
            r.labels = LabelVector(std::move(bits));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed record: ") + e.what());
    }
    return r;
}

void write_jsonl(std::ostream& out, const std::vector<SuspectIDTE>& records, bool with_labels) {
    for (const auto& r : records) out << record_to_json(r, with_labels).dump() << '\n';
    if (!out) throw IoError("write failed");
}

std::vector<SuspectIDTE> read_jsonl(std::istream& in) {
    std::vector<SuspectIDTE> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(record_from_json(j));
    }
    return out;
}

void save_jsonl(const std::filesystem::path& path, const std::vector<SuspectIDTE>& records, bool with_labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_jsonl(out, records, with_labels);
}

std::vector<SuspectIDTE> load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_jsonl(in);
}

void validate_records(const std::vector<SuspectIDTE>& records) {
    std::set<std::uint64_t> posts, ids;
    for (const auto& r : records) {
        if (!ids.insert(r.id).second) throw ValidationError("duplicate record id " + std::to_string(r.id));
        if (r.kind == RecordKind::post) posts.insert(r.id);
    }
    for (const auto& r : records) {
        if (r.kind == RecordKind::comment && (!r.parent_id || !posts.count(*r.parent_id)))
            throw ValidationError("comment " + std::to_string(r.id) + " does not reference an existing post");
        if (r.kind == RecordKind::post && r.parent_id)
            throw ValidationError("post " + std::to_string(r.id) + " carries a parent_id");
        if (r.labels) validate_ground_truth(*r.labels, std::to_string(r.id));
    }
}

}  // namespace idte
