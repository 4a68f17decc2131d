// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 1 for ctest).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "idte/annotation.hpp"
#include "idte/crawler.hpp"
#include "idte/hashtag_graph.hpp"
#include "idte/metrics.hpp"
#include "idte/model.hpp"
#include "idte/synthdata.hpp"
#include "idte/text.hpp"
#include "support/oracles.hpp"

using namespace idte;
namespace fs = std::filesystem;

namespace tol {
constexpr double metric_oracle = 1e-12;
constexpr double metric_oracle_seconds = 10.0;
constexpr double grad_rel = 1e-4;
constexpr double grad_floor = 1e-5;  // below this, compare absolutely (roundoff ~1e-10)
constexpr double grad_h = 1e-5;
constexpr double grad_seconds = 120.0;
constexpr double loss_uniform = 1e-12;
constexpr double loss_fixture = 1e-5;
constexpr double fusion_margin = 0.05;
constexpr double fusion_seconds = 900.0;
constexpr std::size_t fusion_epochs = 30;
constexpr double fusion_lr = 1e-3;
constexpr double obfuscation_gain = 0.03;
constexpr std::size_t crawler_min_recall = 80;
constexpr double crawler_seconds = 30.0;
constexpr double community_accuracy = 0.9;
constexpr double betweenness_abs = 1e-9;  // float summation order only
}  // namespace tol

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

void run(const std::string& name, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(false, name, std::string("exception: ") + e.what());
    }
}

// --------------------------------------------------------------------------

void metric_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<std::size_t> width(2, 10), size(1, 50);
    std::uniform_real_distribution<double> dens(0.0, 1.0);
    double worst = 0.0;
    for (int b = 0; b < 1000; ++b) {
        const std::size_t w = width(rng), n = size(rng);
        const double dy = dens(rng), dp = dens(rng);
        std::vector<LabelVector> y, p;
        for (std::size_t i = 0; i < n; ++i) {
            y.push_back(oracle::random_labels(w, dy, rng));
            p.push_back(oracle::random_labels(w, dp, rng));
        }
        worst = std::max(worst, oracle::max_metric_diff(oracle::metrics(y, p), evaluate(y, p)));
    }
    const double secs = seconds_since(t0);
    report(worst <= tol::metric_oracle && secs < tol::metric_oracle_seconds, "metric-oracle",
           "1000 batches, max |diff| " + fmt("%.3g", worst) + ", " + fmt("%.2f", secs) + " s");
}

void metric_spots() {
    LabelVector truth(10), off(10);
    truth.set(3, true);
    off.set(3, true);
    off.set(7, true);
    std::vector<LabelVector> y{truth, truth}, p{truth, off};
    const auto ex = example_metrics(y, p);
    LabelCounts c;
    c.examples = 2;
    c.per_label = {ConfusionCounts{1, 1, 0, 0}, ConfusionCounts{0, 0, 1, 1}};
    const auto agg = micro_macro(c);
    const bool ok = ex.subset_accuracy == 0.5 && std::abs(ex.hamming_loss - 0.05) < 1e-15 &&
                    agg.micro_precision == 0.5 && agg.micro_recall == 0.5 && agg.micro_f1 == 0.5 &&
                    agg.macro_precision == 0.25 && agg.macro_recall == 0.5 &&
                    std::abs(agg.macro_f1 - 1.0 / 3.0) < 1e-15;
    report(ok, "metric-spot-values",
           "subset " + fmt("%.3f", ex.subset_accuracy) + ", hamming " + fmt("%.3f", ex.hamming_loss) + ", micro F1 " +
               fmt("%.3f", agg.micro_f1) + ", macro F1 " + fmt("%.6f", agg.macro_f1));
}

void gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::size_t checked = 0;
    std::string where;
    for (std::uint64_t seed : {1, 2, 3}) {
        auto prob = oracle::tiny_problem(seed);
        auto params = init_params(prob.config, ModelKind::mmbt);
        auto [loss, grads] = oracle::loss_and_grad(ModelKind::mmbt, prob, params);
        auto r = oracle::check_gradients(
            params, grads, [&](const ModelParams& q) { return oracle::plain_loss(ModelKind::mmbt, prob, q); }, tol::grad_h,
            tol::grad_floor);
        checked += r.checked;
        if (r.worst > worst) {
            worst = r.worst;
            where = "seed " + std::to_string(seed) + " " + r.worst_at;
        }
    }
    const double secs = seconds_since(t0);
    report(worst < tol::grad_rel && secs < tol::grad_seconds, "gradient-check",
           std::to_string(checked) + " parameter elements over 3 seeds, worst rel err " + fmt("%.3g", worst) + " (" +
               where + "), " + fmt("%.1f", secs) + " s");
}

void loss_fixtures() {
    std::vector<ProbVector> half{ProbVector(10, 0.5)};
    std::vector<LabelVector> any{LabelVector::from_drugs(9, {3})};
    const double a = bce_loss(half, any);
    std::vector<ProbVector> p{{0.9, 0.2}};
    std::vector<LabelVector> t{LabelVector(std::vector<std::uint8_t>{1, 0})};
    const double b = bce_loss(p, t);
    report(std::abs(a - 10 * std::log(2.0)) <= tol::loss_uniform && std::abs(b - 0.32850) <= tol::loss_fixture,
           "loss-fixtures", "uniform " + fmt("%.12f", a) + ", fixture " + fmt("%.6f", b));
}

struct FusionRun {
    std::map<ModelKind, double> macro_f1;
};

FusionRun fusion_seed(std::uint64_t seed) {
    CorpusConfig cc;
    cc.n = 2000;
    cc.mode = DependenceMode::joint_and;
    cc.seed = seed;
    const auto corpus = generate_corpus(cc);
    FusionRun out;
    for (auto kind : {ModelKind::mmbt, ModelKind::text_only, ModelKind::image_only, ModelKind::concat, ModelKind::fbc}) {
        ModelConfig mc;
        mc.seed = seed;
        mc.max_seq = 40;
        TrainConfig tc;
        tc.epochs = tol::fusion_epochs;
        tc.adam.lr = tol::fusion_lr;
        tc.split_seed = seed;
        tc.shuffle_seed = seed;
        tc.evaluate_each_epoch = false;
        auto trained = train(corpus.records, kind, mc, tc);
        std::vector<SuspectIDTE> test;
        for (auto i : trained.test_index) test.push_back(corpus.records[i]);
        out.macro_f1[kind] = evaluate_records(trained.model, test).macro_f1;
    }
    return out;
}

void fusion() {
    const auto t0 = std::chrono::steady_clock::now();
    bool trend = true;
    std::size_t late_wins = 0;
    std::ostringstream trend_detail, late_detail;
    for (std::uint64_t seed : {0, 1, 2}) {
        const auto r = fusion_seed(seed);
        const double m = r.macro_f1.at(ModelKind::mmbt), t = r.macro_f1.at(ModelKind::text_only),
                     i = r.macro_f1.at(ModelKind::image_only), c = r.macro_f1.at(ModelKind::concat),
                     f = r.macro_f1.at(ModelKind::fbc);
        trend = trend && m - std::max(t, i) >= tol::fusion_margin;
        if (m >= c && m >= f) ++late_wins;
        trend_detail << " [seed " << seed << ": mmbt " << fmt("%.3f", m) << ", text " << fmt("%.3f", t) << ", image "
                     << fmt("%.3f", i) << "]";
        late_detail << " [seed " << seed << ": mmbt " << fmt("%.3f", m) << ", concat " << fmt("%.3f", c) << ", fbc "
                    << fmt("%.3f", f) << "]";
    }
    const double secs = seconds_since(t0);
    report(trend && secs < tol::fusion_seconds, "fusion-trend",
           "macro F1 on held-out 25%," + trend_detail.str() + ", " + fmt("%.0f", secs) + " s for 15 trainings");
    report(late_wins >= 2, "late-fusion", std::to_string(late_wins) + "/3 seeds with mmbt >= concat and fbc," + late_detail.str());
}

void obfuscation() {
    const auto rules = NormalizationRules::defaults();
    const bool fixtures =
        normalize_obfuscation("A.c.i.D", rules) == "acid" && normalize_obfuscation("s.H.r.ø.o.M.s", rules) == "shrooms";
    CorpusConfig cc;
    cc.n = 2000;
    cc.mode = DependenceMode::text_only;
    cc.obfuscation_rate = 0.5;
    cc.seed = 0;
    const auto corpus = generate_corpus(cc);
    double f1[2] = {0, 0};
    for (int norm = 0; norm < 2; ++norm) {
        ModelConfig mc;
        mc.max_seq = 48;
        TrainConfig tc;
        tc.epochs = tol::fusion_epochs;
        tc.adam.lr = tol::fusion_lr;
        tc.evaluate_each_epoch = false;
        TokenizerOptions to;
        to.normalize = norm == 1;
        auto trained = train(corpus.records, ModelKind::text_only, mc, tc, to);
        std::vector<SuspectIDTE> test;
        for (auto i : trained.test_index) test.push_back(corpus.records[i]);
        f1[norm] = evaluate_records(trained.model, test).macro_f1;
    }
    report(fixtures && f1[1] - f1[0] >= tol::obfuscation_gain, "obfuscation",
           std::string("fixtures ") + (fixtures ? "ok" : "WRONG") + ", text model macro F1 normalized " + fmt("%.3f", f1[1]) +
               " vs raw " + fmt("%.3f", f1[0]));
}

void crawler() {
    const auto t0 = std::chrono::steady_clock::now();
    PlatformConfig pc;
    pc.users = 1000;
    pc.dealers = 100;
    pc.seed = 7;
    const auto g = synth_platform(pc);
    const std::vector<std::string> seeds(g.drug_hashtags.begin(), g.drug_hashtags.begin() + 10);
    CrawlConfig cfg;
    cfg.dealer_threshold = 100;
    auto run_once = [&](GateModel gate) {
        SimulatedPlatform platform(g);
        return crawl(platform, seeds, gate, cfg);
    };
    const auto noisy = run_once(GateModel{0.95, 0.05, 11});
    const auto noisy_again = run_once(GateModel{0.95, 0.05, 11});
    const auto perfect = run_once(GateModel{1.0, 0.0, 11});
    const std::size_t found = planted_dealers_found(noisy, g);
    const std::size_t found_oracle = planted_dealers_found(perfect, g);
    const bool deterministic = noisy.collected_posts == noisy_again.collected_posts &&
                               noisy.dealer_accounts == noisy_again.dealer_accounts;
    const double secs = seconds_since(t0);
    report(found >= tol::crawler_min_recall && found_oracle == 100 && deterministic && secs < tol::crawler_seconds,
           "crawler-recall",
           "noisy gate " + std::to_string(found) + "/100 (stop " + to_string(noisy.stop) + "), oracle gate " +
               std::to_string(found_oracle) + "/100 (stop " + to_string(perfect.stop) + "), deterministic " +
               (deterministic ? "yes" : "no") + ", " + fmt("%.2f", secs) + " s");
}

void drug_free_rule() {
    std::size_t checked = 0, bad = 0;
    auto check = [&](const SuspectIDTE& r) {
        ++checked;
        if (!r.labels || !r.labels->satisfies_drug_free_rule()) ++bad;
    };
    for (auto mode : {DependenceMode::text_only, DependenceMode::image_only, DependenceMode::joint_and})
        for (double bundle : {0.0, 0.03, 0.1})
            for (std::uint64_t seed : {0, 1}) {
                CorpusConfig cc;
                cc.n = 2000;
                cc.mode = mode;
                cc.bundle_rate = bundle;
                cc.obfuscation_rate = 0.3;
                cc.seed = seed;
                for (const auto& r : generate_corpus(cc).records) check(r);
            }
    // exported annotations with random, often conflicting votes
    CorpusConfig small;
    small.n = 300;
    auto items = generate_corpus(small).records;
    for (auto& r : items) r.labels.reset();
    AnnotationStore store(items);
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> who(1, 5), cat(0, 9), count(0, 3);
    for (const auto& item : items)
        for (std::size_t a = who(rng); a > 0; --a) {
            AnnotationRecord rec;
            rec.idte_id = item.id;
            rec.annotator_id = "annotator" + std::to_string(a);
            for (auto* level : {&rec.hashtag_labels, &rec.image_labels, &rec.comment_labels}) {
                for (std::size_t k = count(rng); k > 0; --k) {
                    const auto c = cat(rng);
                    if (c != 0) level->push_back(std::string(kCategoryNames[c]));
                }
                if (level->empty()) level->push_back("non_drug");
            }
            store.submit(rec);
        }
    const auto exported = store.export_dataset();
    std::istringstream in(exported.corpus);
    const auto recs = read_jsonl(in);
    for (const auto& r : recs) check(r);
    report(bad == 0 && !recs.empty(), "drug-free-rule",
           std::to_string(checked) + " labeled records (" + std::to_string(recs.size()) + " exported), " +
               std::to_string(bad) + " violations");
}

void communities() {
    std::ostringstream detail;
    bool ok = true;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto [g, block] = oracle::planted_blocks(30, 0.8, 0.02, seed);
        const double acc = oracle::block_accuracy(detect_communities(g, seed), block);
        ok = ok && acc >= tol::community_accuracy;
        detail << (seed ? ", " : "") << fmt("%.3f", acc);
    }
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> nodes(2, 50);
    std::uniform_real_distribution<double> dens(0.02, 0.5);
    double worst = 0.0;
    std::size_t graphs = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = nodes(rng);
        const double p = dens(rng);
        std::vector<SuspectIDTE> posts;
        std::uint64_t id = 1;
        for (std::size_t i = 0; i < n; ++i) {
            SuspectIDTE r;
            r.id = id++;
            r.hashtags = {"#n" + std::to_string(i)};
            posts.push_back(r);
            for (std::size_t j = i + 1; j < n; ++j)
                if (bernoulli(rng, p)) {
                    SuspectIDTE e;
                    e.id = id++;
                    e.hashtags = {"#n" + std::to_string(i), "#n" + std::to_string(j)};
                    posts.push_back(e);
                }
        }
        auto g = build_cooccurrence_graph(posts);
        const auto stats = graph_stats(g);
        const auto ref = oracle::betweenness(g);
        for (std::size_t v = 0; v < g.node_count(); ++v) worst = std::max(worst, std::abs(stats[v].betweenness - ref[v]));
        ++graphs;
    }
    ok = ok && worst <= tol::betweenness_abs;
    report(ok, "community-recovery",
           "planted accuracy per seed " + detail.str() + "; betweenness max |diff| " + fmt("%.3g", worst) + " over " +
               std::to_string(graphs) + " graphs <= 50 nodes");
}

void persistence() {
    const fs::path dir = fs::temp_directory_path() / ("idte_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto log = dir / "annotations.jsonl";
    CorpusConfig cc;
    cc.n = 200;
    auto items = generate_corpus(cc).records;
    for (auto& r : items) r.labels.reset();
    nlohmann::json live;
    std::string export_live;
    {
        AnnotationStore store(items, log);
        std::mt19937_64 rng(3);
        std::uniform_int_distribution<std::size_t> item(0, items.size() - 1), who(1, 4), cat(1, 9);
        for (int k = 0; k < 500; ++k) {
            AnnotationRecord rec;
            rec.idte_id = items[item(rng)].id;
            rec.annotator_id = "a" + std::to_string(who(rng));
            rec.hashtag_labels = {std::string(kCategoryNames[cat(rng)])};
            rec.image_labels = {"non_drug"};
            store.submit(rec);
        }
        live = store.state_json();
        export_live = store.export_dataset().corpus;
    }
    {
        std::ofstream torn(log, std::ios::app | std::ios::binary);
        torn << R"({"revision":501,"record":{"idte_id":)";
    }
    AnnotationStore replayed(items, log);
    const bool same_state = replayed.state_json() == live;
    replayed.export_to(dir / "c1.jsonl", dir / "a1.jsonl");
    replayed.export_to(dir / "c2.jsonl", dir / "a2.jsonl");
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    const bool idempotent = slurp(dir / "c1.jsonl") == slurp(dir / "c2.jsonl") &&
                            slurp(dir / "a1.jsonl") == slurp(dir / "a2.jsonl") && slurp(dir / "c1.jsonl") == export_live;
    fs::remove_all(dir);
    report(same_state && idempotent, "persistence",
           std::string("replay after torn write ") + (same_state ? "identical" : "DIFFERS") + ", export " +
               (idempotent ? "byte-identical" : "DIFFERS"));
}

}  // namespace

int main() {
    run("metric-oracle", metric_oracle);
    run("metric-spot-values", metric_spots);
    run("gradient-check", gradients);
    run("loss-fixtures", loss_fixtures);
    run("crawler-recall", crawler);
    run("drug-free-rule", drug_free_rule);
    run("community-recovery", communities);
    run("persistence", persistence);
    run("obfuscation", obfuscation);
    run("fusion", fusion);
    std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed")) << std::endl;
    return failures ? 1 : 0;
}
