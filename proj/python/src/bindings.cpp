#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "idte/annotation.hpp"
#include "idte/crawler.hpp"
#include "idte/hashtag_graph.hpp"
#include "idte/metrics.hpp"
#include "idte/model.hpp"
#include "idte/synthdata.hpp"
#include "idte/text.hpp"

namespace py = pybind11;
using json = nlohmann::json;

namespace {

// Structured values cross the boundary as JSON text; the Python wrapper decodes.
std::vector<idte::SuspectIDTE> parse_records(const std::string& jsonl) {
    std::istringstream in(jsonl);
    return idte::read_jsonl(in);
}

std::string dump_records(const std::vector<idte::SuspectIDTE>& records, bool with_labels = true) {
    std::ostringstream out;
    idte::write_jsonl(out, records, with_labels);
    return out.str();
}

std::vector<idte::LabelVector> to_labels(const std::vector<std::vector<int>>& rows) {
    std::vector<idte::LabelVector> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        std::vector<std::uint8_t> bits;
        for (int b : r) bits.push_back(b ? 1 : 0);
        out.emplace_back(std::move(bits));
    }
    return out;
}

idte::TokenizerOptions tokenizer_options(bool normalize) {
    idte::TokenizerOptions t;
    t.normalize = normalize;
    return t;
}

}  // namespace

PYBIND11_MODULE(_idte, m) {
    m.doc() = "Native core of the idte toolkit";

    // Translators run newest first, so the base class goes first.
    py::register_exception<idte::Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<idte::ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<idte::ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<idte::DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<idte::NotFoundError>(m, "NotFoundError", PyExc_KeyError);
    py::register_exception<idte::IoError>(m, "IoError", PyExc_OSError);

    m.def("normalize_obfuscation",
          [](const std::string& text) { return idte::normalize_obfuscation(text, idte::NormalizationRules::defaults()); },
          py::arg("text"));
    m.def("extract_hashtags", &idte::extract_hashtags, py::arg("text"));
    m.def("tokenize_words", [](const std::string& text, bool normalize) { return idte::split_words(text, tokenizer_options(normalize)); },
          py::arg("text"), py::arg("normalize") = true);

    m.def(
        "evaluate_json",
        [](const std::vector<std::vector<int>>& truths, const std::vector<std::vector<int>>& preds) {
            const auto y = to_labels(truths), p = to_labels(preds);
            return json(idte::evaluate(y, p)).dump();
        },
        py::arg("truths"), py::arg("preds"));
    m.def(
        "bce_loss",
        [](const std::vector<std::vector<double>>& probs, const std::vector<std::vector<int>>& targets) {
            return idte::bce_loss(probs, to_labels(targets));
        },
        py::arg("probs"), py::arg("targets"));
    m.def("predict_labels", [](const std::vector<double>& probs, double tau) { return idte::predict_labels(probs, tau).bits(); },
          py::arg("probs"), py::arg("tau") = 0.5);

    m.def(
        "generate_corpus_json",
        [](const std::string& config) {
            auto cfg = json::parse(config).get<idte::CorpusConfig>();
            py::gil_scoped_release release;
            auto corpus = idte::generate_corpus(cfg);
            return std::make_pair(dump_records(corpus.records), json(corpus.stats).dump());
        },
        py::arg("config"));
    m.def(
        "synth_platform_json",
        [](const std::string& config) {
            auto cfg = json::parse(config).get<idte::PlatformConfig>();
            return idte::platform_to_json(idte::synth_platform(cfg)).dump();
        },
        py::arg("config"));
    m.def(
        "crawl_json",
        [](const std::string& platform, const std::vector<std::string>& seeds, double tpr, double fpr, std::uint64_t gate_seed,
           const std::string& config) {
            const auto graph = idte::platform_from_json(json::parse(platform));
            const auto cfg = json::parse(config).get<idte::CrawlConfig>();
            idte::SimulatedPlatform sim(graph);
            const auto state = idte::crawl(sim, seeds, idte::GateModel{tpr, fpr, gate_seed}, cfg);
            return std::make_pair(dump_records(state.records, false), idte::crawl_summary(state, &graph).dump());
        },
        py::arg("platform"), py::arg("seeds"), py::arg("tpr") = 0.95, py::arg("fpr") = 0.05, py::arg("gate_seed") = 0,
        py::arg("config") = "{}");
    m.def(
        "hashtag_graph_json",
        [](const std::string& records, std::uint64_t seed) {
            const auto g = idte::build_cooccurrence_graph(parse_records(records));
            if (g.node_count() == 0) return json{{"nodes", json::array()}, {"edges", json::array()}}.dump();
            return idte::graph_to_json(g, idte::graph_stats(g), idte::detect_communities(g, seed)).dump();
        },
        py::arg("records"), py::arg("seed") = 0);

    py::class_<idte::TrainedModel>(m, "Model")
        .def_property_readonly("kind", [](const idte::TrainedModel& t) { return idte::to_string(t.kind); })
        .def_property_readonly("config_json", [](const idte::TrainedModel& t) { return json(t.config).dump(); })
        .def_property_readonly("vocab", [](const idte::TrainedModel& t) { return t.vocab.tokens(); })
        .def("predict_probs", [](const idte::TrainedModel& t, const std::string& records) {
            auto recs = parse_records(records);
            py::gil_scoped_release release;
            return idte::predict_probs(t, recs);
        })
        .def("evaluate_json", [](const idte::TrainedModel& t, const std::string& records) {
            auto recs = parse_records(records);
            py::gil_scoped_release release;
            return json(idte::evaluate_records(t, recs)).dump();
        })
        .def("save", [](const idte::TrainedModel& t, const std::string& path) { idte::save_model(path, t); });

    m.def("load_model", [](const std::string& path) { return idte::load_model(path); }, py::arg("path"));

    m.def(
        "train",
        [](const std::string& records, const std::string& kind, const std::string& model_config, std::size_t epochs,
           std::size_t batch_size, double lr, double train_fraction, std::uint64_t seed, bool normalize) {
            auto recs = parse_records(records);
            auto mc = json::parse(model_config).get<idte::ModelConfig>();
            idte::TrainConfig tc;
            tc.epochs = epochs;
            tc.batch_size = batch_size;
            tc.adam.lr = lr;
            tc.train_fraction = train_fraction;
            tc.split_seed = seed;
            tc.shuffle_seed = seed;
            const auto k = idte::model_kind_from_string(kind);
            py::gil_scoped_release release;
            auto out = idte::train(recs, k, mc, tc, tokenizer_options(normalize));
            py::gil_scoped_acquire acquire;
            return py::make_tuple(std::move(out.model), json(out.history).dump(), out.train_index, out.test_index);
        },
        py::arg("records"), py::arg("kind") = "mmbt", py::arg("model_config") = "{}", py::arg("epochs") = 50,
        py::arg("batch_size") = 32, py::arg("lr") = 2e-5, py::arg("train_fraction") = 0.75, py::arg("seed") = 0,
        py::arg("normalize") = true);
}
