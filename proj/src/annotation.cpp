#include "idte/annotation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <httplib.h>

#include "idte/error.hpp"
#include "idte/labels.hpp"

namespace idte {

std::string to_string(AnnotationLevel level) {
    switch (level) {
        case AnnotationLevel::hashtag: return "hashtag";
        case AnnotationLevel::image: return "image";
        case AnnotationLevel::comment: return "comment";
    }
    return "unknown";
}

const std::vector<std::string>& AnnotationRecord::level(AnnotationLevel l) const {
    switch (l) {
        case AnnotationLevel::hashtag: return hashtag_labels;
        case AnnotationLevel::image: return image_labels;
        case AnnotationLevel::comment: return comment_labels;
    }
    throw ContractError("unknown annotation level");
}

nlohmann::json annotation_to_json(const AnnotationRecord& r) {
    return nlohmann::json{{"idte_id", r.idte_id},
                          {"annotator_id", r.annotator_id},
                          {"hashtag_labels", r.hashtag_labels},
                          {"image_labels", r.image_labels},
                          {"comment_labels", r.comment_labels},
                          {"created_at", r.created_at}};
}

AnnotationRecord annotation_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("annotation must be a JSON object");
    AnnotationRecord r;
    try {
        r.idte_id = j.at("idte_id").get<std::uint64_t>();
        r.annotator_id = j.at("annotator_id").get<std::string>();
        r.hashtag_labels = j.value("hashtag_labels", std::vector<std::string>{});
        r.image_labels = j.value("image_labels", std::vector<std::string>{});
        r.comment_labels = j.value("comment_labels", std::vector<std::string>{});
        r.created_at = j.value("created_at", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed annotation: ") + e.what());
    }
    return r;
}

std::vector<std::string> canonical_label_set(const std::vector<std::string>& labels, std::string_view level) {
    std::set<std::size_t> idx;
    for (const auto& l : labels) {
        auto i = category_index(l);
        if (!i) throw ValidationError("unknown category '" + l + "' in " + std::string(level) + "_labels");
        idx.insert(*i);
    }
    if (idx.count(0) && idx.size() > 1)
        throw ValidationError("non_drug combined with drug categories in " + std::string(level) + "_labels");
    std::vector<std::string> out;
    for (auto i : idx) out.emplace_back(kCategoryNames[i]);
    return out;
}

std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void to_json(nlohmann::json& j, const AgreementReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    j = nlohmann::json::object();
    j["items_compared"] = r.items_compared;
    j["pairs"] = r.pairs;
    j["overall"] = opt(r.overall);
    j["levels"] = nlohmann::json::object();
    for (const auto& [k, v] : r.levels) j["levels"][k] = opt(v);
    j["categories"] = nlohmann::json::object();
    for (const auto& [k, v] : r.categories) j["categories"][k] = opt(v);
    j["conflicts"] = r.conflicts;
}

// ---------------------------------------------------------------------------
// Store

AnnotationStore::AnnotationStore(std::vector<SuspectIDTE> items) : items_(std::move(items)) {
    std::sort(items_.begin(), items_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < items_.size(); ++i)
        if (items_[i].id == items_[i - 1].id) throw ValidationError("duplicate item id " + std::to_string(items_[i].id));
}

AnnotationStore::AnnotationStore(std::vector<SuspectIDTE> items, std::filesystem::path log_path)
    : AnnotationStore(std::move(items)) {
    log_path_ = std::move(log_path);
    replay();
    log_fd_ = ::open(log_path_->c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (log_fd_ < 0) throw IoError("cannot open annotation log " + log_path_->string());
}

AnnotationStore::~AnnotationStore() {
    if (log_fd_ >= 0) ::close(log_fd_);
}

void AnnotationStore::replay() {
    std::error_code ec;
    if (!std::filesystem::exists(*log_path_, ec)) return;
    std::ifstream in(*log_path_, std::ios::binary);
    if (!in) throw IoError("cannot read annotation log " + log_path_->string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    const auto last_nl = content.rfind('\n');
    const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (complete != content.size()) {
        // Torn append from a crash: drop the partial line.
        std::filesystem::resize_file(*log_path_, complete);
        content.resize(complete);
    }
    std::istringstream lines(content);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto rev = j.at("revision").get<std::uint64_t>();
            AnnotationRecord r = annotation_from_json(j.at("record"));
            if (!find_item(r.idte_id))
                throw IoError("annotation log line " + std::to_string(lineno) + " references unknown item " +
                              std::to_string(r.idte_id));
            apply(r, rev);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("corrupt annotation log line " + std::to_string(lineno) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw IoError("corrupt annotation log line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

const SuspectIDTE* AnnotationStore::find_item(std::uint64_t id) const {
    auto it = std::lower_bound(items_.begin(), items_.end(), id, [](const SuspectIDTE& r, std::uint64_t v) { return r.id < v; });
    return it != items_.end() && it->id == id ? &*it : nullptr;
}

void AnnotationStore::apply(const AnnotationRecord& r, std::uint64_t revision) {
    by_item_[r.idte_id][r.annotator_id] = r;
    revision_ = std::max(revision_, revision);
    const bool drug_positive = std::any_of(r.hashtag_labels.begin(), r.hashtag_labels.end(),
                                           [](const std::string& l) { return l != "non_drug"; });
    if (drug_positive) update_hashtag_pool_inplace(weights_, find_item(r.idte_id)->hashtags);
}

std::uint64_t AnnotationStore::submit(AnnotationRecord r) {
    if (r.annotator_id.empty()) throw ValidationError("annotator_id must be non-empty");
    r.hashtag_labels = canonical_label_set(r.hashtag_labels, "hashtag");
    r.image_labels = canonical_label_set(r.image_labels, "image");
    r.comment_labels = canonical_label_set(r.comment_labels, "comment");
    if (r.created_at.empty()) r.created_at = utc_timestamp();

    std::unique_lock lock(mutex_);
    if (!find_item(r.idte_id)) throw NotFoundError("unknown idte_id " + std::to_string(r.idte_id));
    const std::uint64_t rev = revision_ + 1;
    if (log_fd_ >= 0) {
        const std::string line = nlohmann::json{{"revision", rev}, {"record", annotation_to_json(r)}}.dump() + "\n";
        std::size_t off = 0;
        while (off < line.size()) {
            const auto n = ::write(log_fd_, line.data() + off, line.size() - off);
            if (n < 0) throw IoError("annotation log write failed");
            off += static_cast<std::size_t>(n);
        }
        if (::fsync(log_fd_) != 0) throw IoError("annotation log fsync failed");
    }
    apply(r, rev);
    return rev;
}

std::optional<SuspectIDTE> AnnotationStore::next_unlabeled(const std::string& annotator_id) const {
    std::shared_lock lock(mutex_);
    const SuspectIDTE* unannotated = nullptr;
    const SuspectIDTE* crowded = nullptr;
    for (const auto& item : items_) {
        auto it = by_item_.find(item.id);
        const std::size_t n = it == by_item_.end() ? 0 : it->second.size();
        if (n > 0 && it->second.count(annotator_id)) continue;
        if (n == 1) return item;
        if (n == 0 && !unannotated) unannotated = &item;
        if (n >= 2 && !crowded) crowded = &item;
    }
    if (unannotated) return *unannotated;
    if (crowded) return *crowded;
    return std::nullopt;
}

AgreementReport AnnotationStore::agreement() const {
    std::shared_lock lock(mutex_);
    AgreementReport rep;
    std::map<std::string, std::size_t> level_agree, cat_agree;
    std::size_t all_agree = 0, observations = 0;
    for (const auto& [id, by_annotator] : by_item_) {
        if (by_annotator.size() < 2) continue;
        ++rep.items_compared;
        bool conflict = false;
        std::vector<const AnnotationRecord*> recs;
        for (const auto& [_, r] : by_annotator) recs.push_back(&r);
        for (std::size_t a = 0; a < recs.size(); ++a)
            for (std::size_t b = a + 1; b < recs.size(); ++b) {
                ++rep.pairs;
                bool every = true;
                for (auto l : kAnnotationLevels) {
                    const auto& la = recs[a]->level(l);
                    const auto& lb = recs[b]->level(l);
                    if (la == lb)
                        ++level_agree[to_string(l)];
                    else
                        every = false;
                    ++observations;
                    for (const auto& name : kCategoryNames) {
                        const bool ina = std::find(la.begin(), la.end(), name) != la.end();
                        const bool inb = std::find(lb.begin(), lb.end(), name) != lb.end();
                        if (ina == inb) ++cat_agree[std::string(name)];
                    }
                }
                if (every) ++all_agree;
                if (!every) conflict = true;
            }
        if (conflict) rep.conflicts.push_back(id);
    }
    auto rate = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    for (auto l : kAnnotationLevels) rep.levels[to_string(l)] = rate(level_agree[to_string(l)], rep.pairs);
    for (const auto& name : kCategoryNames) rep.categories[std::string(name)] = rate(cat_agree[std::string(name)], observations);
    rep.overall = rate(all_agree, rep.pairs);
    return rep;
}

ExportResult AnnotationStore::export_dataset() const {
    std::shared_lock lock(mutex_);
    ExportResult out;
    std::ostringstream corpus, adjud;
    const std::size_t drugs = kCategoryNames.size() - 1;
    for (const auto& item : items_) {
        auto it = by_item_.find(item.id);
        if (it == by_item_.end() || it->second.empty()) continue;
        const std::size_t n = it->second.size();
        std::vector<std::size_t> votes(drugs + 1, 0);
        for (const auto& [_, r] : it->second) {
            std::set<std::size_t> united;
            for (auto l : kAnnotationLevels)
                for (const auto& name : r.level(l)) united.insert(*category_index(name));
            for (auto c : united) ++votes[c];
        }
        LabelVector labels(drugs + 1);
        std::vector<std::string> tied;
        for (std::size_t c = 1; c <= drugs; ++c) {
            if (2 * votes[c] > n) labels.set(c, true);
            else if (2 * votes[c] == n) tied.emplace_back(kCategoryNames[c]);
        }
        if (!tied.empty()) {
            nlohmann::json v = nlohmann::json::object();
            for (std::size_t c = 1; c <= drugs; ++c)
                if (votes[c]) v[std::string(kCategoryNames[c])] = votes[c];
            adjud << nlohmann::json{{"id", item.id}, {"annotators", n}, {"votes", v}, {"tied", tied}}.dump() << '\n';
            ++out.adjudicated;
            continue;
        }
        labels.derive_drug_free();
        validate_ground_truth(labels, std::to_string(item.id));
        SuspectIDTE rec = item;
        rec.labels = labels;
        corpus << record_to_json(rec, true).dump() << '\n';
        ++out.exported;
    }
    out.corpus = corpus.str();
    out.adjudication = adjud.str();
    return out;
}

ExportResult AnnotationStore::export_to(const std::filesystem::path& corpus, const std::filesystem::path& adjudication) const {
    ExportResult r = export_dataset();
    for (const auto& [path, body] : {std::pair{corpus, &r.corpus}, std::pair{adjudication, &r.adjudication}}) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open " + path.string() + " for writing");
        out << *body;
        if (!out) throw IoError("write failed: " + path.string());
    }
    return r;
}

std::uint64_t AnnotationStore::revision() const {
    std::shared_lock lock(mutex_);
    return revision_;
}

std::vector<AnnotationRecord> AnnotationStore::records() const {
    std::shared_lock lock(mutex_);
    std::vector<AnnotationRecord> out;
    for (const auto& [_, m] : by_item_)
        for (const auto& [__, r] : m) out.push_back(r);
    return out;
}

HashtagPool AnnotationStore::hashtag_weights() const {
    std::shared_lock lock(mutex_);
    return weights_;
}

nlohmann::json AnnotationStore::state_json() const {
    std::shared_lock lock(mutex_);
    nlohmann::json j;
    j["revision"] = revision_;
    auto recs = nlohmann::json::array();
    for (const auto& [_, m] : by_item_)
        for (const auto& [__, r] : m) recs.push_back(annotation_to_json(r));
    j["records"] = std::move(recs);
    j["hashtag_weights"] = weights_.counts;
    return j;
}

// ---------------------------------------------------------------------------
// HTTP

struct AnnotationServer::Impl {
    AnnotationStore& store;
    httplib::Server server;
    explicit Impl(AnnotationStore& s) : store(s) {}
};

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
}

}  // namespace

AnnotationServer::AnnotationServer(AnnotationStore& store) : impl_(std::make_unique<Impl>(store)) {
    auto& srv = impl_->server;
    auto& st = impl_->store;
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Headers", "Content-Type"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    srv.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });

    srv.Get("/api/posts/next", [&st](const httplib::Request& req, httplib::Response& res) {
        const auto annotator = req.get_param_value("annotator");
        if (annotator.empty()) return send_error(res, 400, "missing query parameter 'annotator'");
        auto item = st.next_unlabeled(annotator);
        if (!item) {
            res.status = 204;
            return;
        }
        res.set_content(record_to_json(*item, false).dump(), "application/json");
    });

    srv.Post("/api/annotations", [&st](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::parse_error& e) {
            return send_error(res, 400, std::string("invalid JSON: ") + e.what());
        }
        try {
            AnnotationRecord r = annotation_from_json(body);
            const auto rev = st.submit(r);
            res.status = 201;
            res.set_content(nlohmann::json{{"revision", rev}, {"idte_id", r.idte_id}, {"annotator_id", r.annotator_id}}.dump(),
                            "application/json");
        } catch (const NotFoundError& e) {
            send_error(res, 404, e.what());
        } catch (const ValidationError& e) {
            send_error(res, 422, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    });

    srv.Get("/api/agreement", [&st](const httplib::Request&, httplib::Response& res) {
        res.set_content(nlohmann::json(st.agreement()).dump(), "application/json");
    });

    srv.Get("/api/export", [&st](const httplib::Request& req, httplib::Response& res) {
        const auto ex = st.export_dataset();
        const bool adjudication = req.get_param_value("file") == "adjudication";
        res.set_content(adjudication ? ex.adjudication : ex.corpus, "application/x-ndjson");
    });
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) throw IoError("cannot bind " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void AnnotationServer::listen_after_bind() { impl_->server.listen_after_bind(); }

void AnnotationServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace idte
