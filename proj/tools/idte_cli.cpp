// idte: command-line entry point.

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "idte/annotation.hpp"
#include "idte/crawler.hpp"
#include "idte/error.hpp"
#include "idte/hashtag_graph.hpp"
#include "idte/model.hpp"
#include "idte/synthdata.hpp"

namespace {

using nlohmann::json;

// Reads a JSON object as CLI11 config: top-level scalars and arrays map to
// global options, nested objects to the subcommand of the same name.
// Keys may use '_' or '-'.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
        std::vector<CLI::ConfigItem> items;
        flatten(j, {}, items);
        return items;
    }

private:
    static std::string option_name(std::string key) {
        std::replace(key.begin(), key.end(), '_', '-');
        return key;
    }
    static std::string scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

    static void flatten(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
        for (const auto& [key, value] : obj.items()) {
            if (value.is_object()) {
                auto p = parents;
                p.push_back(key);
                flatten(value, p, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = option_name(key);
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            } else if (!value.is_null()) {
                item.inputs.push_back(scalar(value));
            }
            out.push_back(std::move(item));
        }
    }
};

struct Globals {
    std::uint64_t seed = 0;
    bool pretty = false;
};

void write_json(const std::filesystem::path& path, const json& j, bool pretty) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw idte::IoError("cannot open " + path.string() + " for writing");
    out << (pretty ? j.dump(2) : j.dump()) << '\n';
    if (!out) throw idte::IoError("write failed: " + path.string());
}

void require_input(const std::filesystem::path& path, const char* what) {
    if (!std::filesystem::is_regular_file(path)) throw idte::IoError(std::string(what) + " not found: " + path.string());
}

void require_output_dir(const std::filesystem::path& path) {
    const auto dir = path.parent_path();
    if (!dir.empty() && !std::filesystem::is_directory(dir))
        throw idte::IoError("output directory does not exist: " + dir.string());
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

void print_metrics_table(const idte::MetricsReport& m, std::ostream& os) {
    os << std::fixed << std::setprecision(4);
    os << "subset_accuracy  " << m.subset_accuracy << "\n"
       << "hamming_loss     " << m.hamming_loss << "\n"
       << "micro P/R/F1     " << m.micro_precision << " " << m.micro_recall << " " << m.micro_f1 << "\n"
       << "macro P/R/F1     " << m.macro_precision << " " << m.macro_recall << " " << m.macro_f1 << "\n";
}

// ---------------------------------------------------------------------------

struct GenCorpusOpts {
    std::string out, stats, mode = "joint_and";
    idte::CorpusConfig config;
};

void add_gen_corpus(CLI::App& app, GenCorpusOpts& o) {
    auto* c = app.add_subcommand("gen-corpus", "Generate a labeled synthetic corpus (JSONL)");
    c->add_option("--out", o.out, "Output corpus JSONL")->required();
    c->add_option("--stats", o.stats, "Write generator statistics JSON");
    c->add_option("--n", o.config.n, "Number of records")->capture_default_str();
    c->add_option("--mode", o.mode, "Label dependence: text_only, image_only or joint_and")
        ->check(CLI::IsMember({"text_only", "image_only", "joint_and"}))
        ->capture_default_str();
    c->add_option("--drug-count", o.config.drug_count, "Number of drug labels")->capture_default_str();
    c->add_option("--priors", o.config.priors, "Per-label priors (drug_count + 1 values; first is informational)")
        ->delimiter(',');
    c->add_option("--obfuscation-rate", o.config.obfuscation_rate, "Fraction of term occurrences obfuscated")
        ->capture_default_str();
    c->add_option("--distractor-rate", o.config.distractor_rate, "One-modality decoy rate")->capture_default_str();
    c->add_option("--bundle-rate", o.config.bundle_rate, "Multi-drug ad rate")->capture_default_str();
    c->add_option("--d-img", o.config.d_img, "Image feature length")->capture_default_str();
    c->add_option("--noise-scale", o.config.noise_scale, "Image noise standard deviation")->capture_default_str();
}

int run_gen_corpus(GenCorpusOpts& o, const Globals& g) {
    require_output_dir(o.out);
    if (!o.stats.empty()) require_output_dir(o.stats);
    o.config.mode = idte::dependence_mode_from_string(o.mode);
    o.config.seed = g.seed;
    auto corpus = idte::generate_corpus(o.config);
    idte::save_jsonl(o.out, corpus.records);
    if (!o.stats.empty()) write_json(o.stats, json(corpus.stats), g.pretty);
    std::cerr << "wrote " << corpus.records.size() << " records to " << o.out << "\n";
    return 0;
}

struct GenPlatformOpts {
    std::string out;
    idte::PlatformConfig config;
};

void add_gen_platform(CLI::App& app, GenPlatformOpts& o) {
    auto* c = app.add_subcommand("gen-platform", "Generate a simulated platform with planted dealers (JSON)");
    c->add_option("--out", o.out, "Output platform JSON")->required();
    c->add_option("--users", o.config.users, "User count")->capture_default_str();
    c->add_option("--dealers", o.config.dealers, "Planted dealer count")->capture_default_str();
    c->add_option("--posts", o.config.posts, "Post count")->capture_default_str();
    c->add_option("--drug-hashtags", o.config.drug_hashtags, "Drug hashtag universe size")->capture_default_str();
    c->add_option("--generic-hashtags", o.config.generic_hashtags, "Generic hashtag universe size")->capture_default_str();
}

int run_gen_platform(GenPlatformOpts& o, const Globals& g) {
    require_output_dir(o.out);
    o.config.seed = g.seed;
    auto graph = idte::synth_platform(o.config);
    idte::save_platform(o.out, graph);
    std::cerr << "wrote platform with " << graph.users.size() << " users, " << graph.posts.size() << " posts, "
              << graph.comments.size() << " comments to " << o.out << "\n";
    return 0;
}

struct TrainOpts {
    std::string data, out, kind = "mmbt", history, report, homoglyphs;
    bool no_normalize = false;
    idte::ModelConfig model;
    idte::TrainConfig train;
    idte::VocabOptions vocab;
};

void add_train(CLI::App& app, TrainOpts& o) {
    auto* c = app.add_subcommand("train", "Train a model on a labeled corpus");
    c->add_option("--data", o.data, "Labeled corpus JSONL")->required();
    c->add_option("--out", o.out, "Model checkpoint path (metadata goes to <out>.meta.json)")->required();
    c->add_option("--kind", o.kind, "mmbt, text_only, image_only, concat or fbc")
        ->check(CLI::IsMember({"mmbt", "text_only", "image_only", "concat", "fbc"}))
        ->capture_default_str();
    c->add_option("--epochs", o.train.epochs, "Training epochs")->capture_default_str();
    c->add_option("--batch-size", o.train.batch_size, "Mini-batch size")->capture_default_str();
    c->add_option("--lr", o.train.adam.lr, "Adam learning rate")->capture_default_str();
    c->add_option("--train-fraction", o.train.train_fraction, "Training split fraction")->capture_default_str();
    c->add_option("--d-model", o.model.d_model, "Hidden width")->capture_default_str();
    c->add_option("--heads", o.model.n_heads, "Attention heads")->capture_default_str();
    c->add_option("--layers", o.model.n_layers, "Encoder layers")->capture_default_str();
    c->add_option("--ff-dim", o.model.ff_dim, "Feed-forward width")->capture_default_str();
    c->add_option("--max-seq", o.model.max_seq, "Maximum sequence length")->capture_default_str();
    c->add_option("--image-tokens", o.model.image_tokens, "Image tokens M")->capture_default_str();
    c->add_option("--fbc-rank", o.model.fbc_rank, "FBC factor rank")->capture_default_str();
    c->add_option("--threshold", o.model.threshold, "Decision threshold")->capture_default_str();
    c->add_option("--vocab-size", o.vocab.max_size, "Vocabulary cap including reserved tokens")->capture_default_str();
    c->add_option("--min-freq", o.vocab.min_freq, "Minimum token frequency")->capture_default_str();
    c->add_flag("--no-normalize", o.no_normalize, "Disable obfuscation normalization");
    c->add_option("--homoglyphs", o.homoglyphs, "Extra homoglyph rules file");
    c->add_option("--history", o.history, "Write per-epoch history JSON");
    c->add_option("--report", o.report, "Write held-out MetricsReport JSON");
}

int run_train(TrainOpts& o, const Globals& g) {
    require_input(o.data, "data file");
    if (!o.homoglyphs.empty()) require_input(o.homoglyphs, "homoglyph rules");
    require_output_dir(o.out);
    for (const auto& p : {o.history, o.report})
        if (!p.empty()) require_output_dir(p);

    auto records = idte::load_jsonl(o.data);
    idte::TokenizerOptions tok;
    tok.normalize = !o.no_normalize;
    if (!o.homoglyphs.empty()) tok.rules = idte::load_homoglyph_rules(o.homoglyphs, tok.rules);
    o.model.seed = g.seed;
    o.train.split_seed = g.seed;
    o.train.shuffle_seed = g.seed;
    o.train.evaluate_each_epoch = !o.history.empty();

    auto outcome = idte::train(records, idte::model_kind_from_string(o.kind), o.model, o.train, tok, o.vocab);
    idte::save_model(o.out, outcome.model);
    if (!o.history.empty()) write_json(o.history, json(outcome.history), g.pretty);

    std::vector<idte::SuspectIDTE> test;
    for (auto i : outcome.test_index) test.push_back(records[i]);
    if (!test.empty()) {
        const auto report = idte::evaluate_records(outcome.model, test);
        if (!o.report.empty()) write_json(o.report, json(report), g.pretty);
        if (g.pretty) print_metrics_table(report, std::cout);
    }
    std::cerr << "trained " << o.kind << " on " << outcome.train_index.size() << " records; final loss "
              << (outcome.history.epochs.empty() ? outcome.history.initial_train_loss
                                                 : outcome.history.epochs.back().train_loss)
              << "\n";
    return 0;
}

struct EvalOpts {
    std::string data, model, report;
};

void add_eval(CLI::App& app, EvalOpts& o) {
    auto* c = app.add_subcommand("eval", "Evaluate a trained model on a labeled corpus");
    c->add_option("--data", o.data, "Labeled corpus JSONL")->required();
    c->add_option("--model", o.model, "Model checkpoint")->required();
    c->add_option("--report", o.report, "Write MetricsReport JSON (stdout when omitted)");
}

int run_eval(EvalOpts& o, const Globals& g) {
    require_input(o.model, "model checkpoint");
    require_input(idte::sidecar_path(o.model), "model metadata");
    require_input(o.data, "data file");
    if (!o.report.empty()) require_output_dir(o.report);
    auto model = idte::load_model(o.model);
    auto records = idte::load_jsonl(o.data);
    const auto report = idte::evaluate_records(model, records);
    if (o.report.empty())
        std::cout << (g.pretty ? json(report).dump(2) : json(report).dump()) << "\n";
    else
        write_json(o.report, json(report), g.pretty);
    if (g.pretty) print_metrics_table(report, std::cout);
    return 0;
}

struct CrawlOpts {
    std::string platform, out, summary, seeds;
    std::size_t seed_count = 10;
    idte::GateModel gate;
    idte::CrawlConfig crawl;
    idte::PlatformConfig generated;
};

void add_crawl(CLI::App& app, CrawlOpts& o) {
    auto* c = app.add_subcommand("crawl-sim", "Run the hashtag crawl against a simulated platform");
    c->add_option("--platform", o.platform, "Platform JSON (generated from --seed when omitted)");
    c->add_option("--users", o.generated.users, "Users when generating")->capture_default_str();
    c->add_option("--dealers", o.generated.dealers, "Dealers when generating")->capture_default_str();
    c->add_option("--posts", o.generated.posts, "Posts when generating")->capture_default_str();
    c->add_option("--seeds", o.seeds, "Comma-separated seed hashtags (default: first --seed-count drug hashtags)");
    c->add_option("--seed-count", o.seed_count, "Seed hashtags taken from the platform")->capture_default_str();
    c->add_option("--tpr", o.gate.tpr, "Gate true-positive rate")->capture_default_str();
    c->add_option("--fpr", o.gate.fpr, "Gate false-positive rate")->capture_default_str();
    c->add_option("--gate-seed", o.gate.seed, "Gate seed")->capture_default_str();
    c->add_option("--threshold", o.crawl.dealer_threshold, "Stop after this many dealer accounts")->capture_default_str();
    c->add_option("--top-k", o.crawl.top_k, "Hashtags added per iteration")->capture_default_str();
    c->add_option("--posts-per-tag", o.crawl.posts_per_hashtag, "Posts fetched per hashtag")->capture_default_str();
    c->add_option("--out", o.out, "Collected records JSONL")->required();
    c->add_option("--summary", o.summary, "Summary JSON (stdout when omitted)");
}

int run_crawl(CrawlOpts& o, const Globals& g) {
    if (!o.platform.empty()) require_input(o.platform, "platform file");
    require_output_dir(o.out);
    if (!o.summary.empty()) require_output_dir(o.summary);
    idte::PlatformGraph graph;
    if (o.platform.empty()) {
        o.generated.seed = g.seed;
        graph = idte::synth_platform(o.generated);
    } else {
        graph = idte::load_platform(o.platform);
    }
    std::vector<std::string> seeds = split_csv(o.seeds);
    if (seeds.empty())
        seeds.assign(graph.drug_hashtags.begin(),
                     graph.drug_hashtags.begin() + static_cast<std::ptrdiff_t>(std::min(o.seed_count, graph.drug_hashtags.size())));
    if (seeds.empty()) throw idte::ContractError("no seed hashtags given and the platform has no drug hashtags");

    idte::SimulatedPlatform platform(graph);
    auto state = idte::crawl(platform, seeds, o.gate, o.crawl);
    idte::save_jsonl(o.out, state.records, false);
    const auto summary = idte::crawl_summary(state, &graph);
    if (o.summary.empty())
        std::cout << (g.pretty ? summary.dump(2) : summary.dump()) << "\n";
    else
        write_json(o.summary, summary, g.pretty);
    return 0;
}

struct GraphOpts {
    std::string data, out;
    bool posts_only = true;
};

void add_graph(CLI::App& app, GraphOpts& o) {
    auto* c = app.add_subcommand("graph", "Hashtag co-occurrence graph, communities and centrality");
    c->add_option("--data", o.data, "Records JSONL (corpus or crawl output)")->required();
    c->add_option("--out", o.out, "Graph JSON")->required();
    c->add_flag("--include-comments{false}", o.posts_only, "Also pair hashtags found in comments");
}

int run_graph(GraphOpts& o, const Globals& g) {
    require_input(o.data, "data file");
    require_output_dir(o.out);
    auto records = idte::load_jsonl(o.data);
    if (o.posts_only)
        std::erase_if(records, [](const idte::SuspectIDTE& r) { return r.kind != idte::RecordKind::post; });
    auto graph = idte::build_cooccurrence_graph(records);
    if (graph.node_count() == 0) throw idte::ContractError("no hashtags found in " + o.data);
    const auto part = idte::detect_communities(graph, g.seed);
    const auto stats = idte::graph_stats(graph);
    write_json(o.out, idte::graph_to_json(graph, stats, part), g.pretty);
    std::cerr << graph.node_count() << " hashtags, " << graph.edge_count() << " edges, " << part.count << " communities\n";
    return 0;
}

struct ServeOpts {
    std::string items, store, host = "127.0.0.1", export_corpus, export_adjudication;
    int port = 8080;
};

void add_serve(CLI::App& app, ServeOpts& o) {
    auto* c = app.add_subcommand("serve", "Serve the annotation API");
    c->add_option("--items", o.items, "Records to annotate (JSONL; labels ignored)")->required();
    c->add_option("--store", o.store, "Append-only annotation log")->required();
    c->add_option("--host", o.host, "Listen address")->capture_default_str();
    c->add_option("--port", o.port, "Listen port (0 picks one)")->capture_default_str();
    c->add_option("--export", o.export_corpus, "Export the merged corpus to this path and exit");
    c->add_option("--adjudication", o.export_adjudication, "With --export: adjudication file path");
}

idte::AnnotationServer* g_server = nullptr;

int run_serve(ServeOpts& o, const Globals&) {
    require_input(o.items, "items file");
    require_output_dir(o.store);
    if (!o.export_corpus.empty()) require_output_dir(o.export_corpus);
    if (!o.export_adjudication.empty()) require_output_dir(o.export_adjudication);
    auto items = idte::load_jsonl(o.items);
    for (auto& r : items) r.labels.reset();
    idte::AnnotationStore store(std::move(items), o.store);

    if (!o.export_corpus.empty()) {
        const auto adj = o.export_adjudication.empty() ? o.export_corpus + ".adjudication.jsonl" : o.export_adjudication;
        const auto r = store.export_to(o.export_corpus, adj);
        std::cerr << "exported " << r.exported << " records, " << r.adjudicated << " to adjudication\n";
        return 0;
    }
    idte::AnnotationServer server(store);
    const int port = server.bind(o.host, o.port);
    g_server = &server;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
    });
    std::cout << "listening on http://" << o.host << ":" << port << std::endl;
    server.listen_after_bind();
    g_server = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal drug-trafficking detection toolkit"};
    app.require_subcommand(1, 1);
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON config file; command-line flags override its values");
    app.allow_config_extras(CLI::config_extras_mode::error);

    Globals globals;
    app.add_option("--seed", globals.seed, "Global seed")->capture_default_str();
    app.add_flag("--pretty", globals.pretty, "Indented JSON and human-readable tables");

    GenCorpusOpts gen_corpus;
    GenPlatformOpts gen_platform;
    TrainOpts train;
    EvalOpts eval;
    CrawlOpts crawl;
    GraphOpts graph;
    ServeOpts serve;
    add_gen_corpus(app, gen_corpus);
    add_gen_platform(app, gen_platform);
    add_train(app, train);
    add_eval(app, eval);
    add_crawl(app, crawl);
    add_graph(app, graph);
    add_serve(app, serve);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "gen-corpus") return run_gen_corpus(gen_corpus, globals);
        if (name == "gen-platform") return run_gen_platform(gen_platform, globals);
        if (name == "train") return run_train(train, globals);
        if (name == "eval") return run_eval(eval, globals);
        if (name == "crawl-sim") return run_crawl(crawl, globals);
        if (name == "graph") return run_graph(graph, globals);
        if (name == "serve") return run_serve(serve, globals);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
