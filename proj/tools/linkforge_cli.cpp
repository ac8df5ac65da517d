// Operator entry points: index building, single-mention linking, batch evaluation,
// ablation suites, funnel accounting, and dataset conversion.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "linkforge/eval.hpp"
#include "linkforge/http_backend.hpp"
#include "linkforge/linkforge.hpp"

namespace fs = std::filesystem;
using namespace linkforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitBackendError = 2;

struct CommonOpts {
    std::string config_path;
    std::string kb_path;
    std::string tasks_path;
    std::string run_dir = "runs/latest";
    std::string backend = "mock-oracle";
    std::string endpoint = "http://127.0.0.1:8000/v1";
    std::string model;
    std::string retriever;
    std::string ordering;
    std::string scorer;
    std::string constant_answer;
    int k = -1;
    int samples = -1;
    int gate_n = -1;
    int budget = -1;
    int max_concurrency = -1;
    int embed_dim = 16;
    bool include_none = false;
    bool no_reranker = false;
    bool no_selection = false;
    bool no_descriptions = false;
    bool no_reasoning = false;
    bool no_self_consistency = false;
    std::uint64_t seed = 0;
};

void add_common_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "pipeline config file (JSON)");
    cmd->add_option("--seed", o.seed, "seed for mock backends and shuffles");
    cmd->add_option("--run-dir", o.run_dir, "output directory for run artifacts");
}

void add_pipeline_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--kb", o.kb_path, "knowledge base file (JSONL)");
    cmd->add_option("--backend", o.backend, "http | mock-oracle | mock-scripted")
        ->check(CLI::IsMember({"http", "mock-oracle", "mock-scripted"}));
    cmd->add_option("--endpoint", o.endpoint, "inference server base URL");
    cmd->add_option("--model", o.model, "model name sent to the server");
    cmd->add_option("--retriever", o.retriever, "bm25 | dense | dict");
    cmd->add_option("--budget", o.budget, "retrieval budget n");
    cmd->add_option("--k", o.k, "rerank cutoff k");
    cmd->add_option("--samples", o.samples, "self-consistency samples k_sc");
    cmd->add_option("--gate-n", o.gate_n, "normalized-accuracy gate size");
    cmd->add_flag("--include-none", o.include_none, "offer the None option");
    cmd->add_option("--ordering", o.ordering, "candidate ordering for the selection prompt");
    cmd->add_option("--scorer", o.scorer,
                    "generative_yes_no | embedding_cosine | retrieval_passthrough");
    cmd->add_option("--max-concurrency", o.max_concurrency, "in-flight request cap");
    cmd->add_option("--embed-dim", o.embed_dim, "mock embedder dimension");
    cmd->add_option("--constant-answer", o.constant_answer,
                    "mock-scripted: emit this completion for every sample");
    cmd->add_flag("--no-reranker", o.no_reranker, "forward all candidates, no cutoff");
    cmd->add_flag("--no-selection", o.no_selection, "take the top reranked candidate");
    cmd->add_flag("--no-descriptions", o.no_descriptions, "present entity names only");
    cmd->add_flag("--no-reasoning", o.no_reasoning, "ask for a direct answer");
    cmd->add_flag("--no-self-consistency", o.no_self_consistency, "single sample");
}

PipelineConfig build_config(const CommonOpts& o) {
    PipelineConfig cfg;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw Error("cannot open config file: " + o.config_path);
        nlohmann::json j;
        in >> j;
        cfg = pipeline_config_from_json(j);
    }
    // flags override the file
    if (!o.retriever.empty()) cfg.retriever = retriever_from_string(o.retriever);
    if (o.budget > 0) cfg.retrieval_budget = o.budget;
    if (o.k > 0) cfg.rerank.k = o.k;
    if (!o.scorer.empty()) cfg.rerank.scorer_kind = scorer_kind_from_string(o.scorer);
    if (o.samples > 0) cfg.selection.num_samples = o.samples;
    if (o.gate_n > 0) cfg.gate_n = o.gate_n;
    if (o.include_none) cfg.selection.include_none = true;
    if (!o.ordering.empty()) cfg.selection.ordering = ordering_from_string(o.ordering);
    if (o.max_concurrency > 0) cfg.max_concurrency = o.max_concurrency;
    if (o.no_reranker) cfg.no_reranker = true;
    if (o.no_selection) cfg.no_selection = true;
    if (o.no_descriptions) cfg.no_descriptions = true;
    if (o.no_reasoning) cfg.no_reasoning = true;
    if (o.no_self_consistency) cfg.no_self_consistency = true;
    cfg.selection.ordering_seed = o.seed;
    cfg.gate_n = std::max(cfg.gate_n, cfg.rerank.k);
    cfg.validate();
    return cfg;
}

std::unique_ptr<Backend> make_backend(const CommonOpts& o, const std::vector<MentionTask>& tasks,
                                      const KnowledgeBase& kb, const PipelineConfig& cfg) {
    if (o.backend == "http") {
        HttpBackendConfig hc;
        hc.endpoint = o.endpoint;
        hc.model = o.model;
        if (cfg.max_concurrency > 0) hc.max_concurrency = cfg.max_concurrency;
        return std::make_unique<HttpBackend>(hc);
    }
    if (o.backend == "mock-oracle") {
        auto backend = std::make_unique<MockOracleBackend>(
            make_oracle_backend(tasks, kb, cfg, static_cast<std::size_t>(o.embed_dim), o.seed));
        return backend;
    }
    auto scripted = std::make_unique<MockScriptedBackend>(o.seed,
                                                          static_cast<std::size_t>(o.embed_dim));
    if (!o.constant_answer.empty()) scripted->set_constant_completion(o.constant_answer);
    return scripted;
}

struct LoadedWorld {
    LoadedKb loaded;
    std::vector<MentionTask> tasks;
    std::unique_ptr<Backend> backend;
    std::optional<Bm25Index> bm25;
    std::optional<DenseIndex> dense;
    ScoreCache cache;
    PipelineDeps deps;
};

// Loads KB + tasks, constructs the backend and whichever index the retriever needs.
std::unique_ptr<LoadedWorld> open_world(const CommonOpts& o, const PipelineConfig& cfg,
                                        bool need_tasks) {
    auto world = std::make_unique<LoadedWorld>();
    if (o.kb_path.empty()) throw Error("--kb is required");
    world->loaded = load_kb_file(o.kb_path);
    if (need_tasks) {
        if (o.tasks_path.empty()) throw Error("--tasks is required");
        world->tasks = load_tasks_file(o.tasks_path);
    }
    world->backend = make_backend(o, world->tasks, world->loaded.kb, cfg);
    bool tasks_all_provided = need_tasks && !world->tasks.empty();
    for (const auto& t : world->tasks)
        if (t.candidates.empty()) tasks_all_provided = false;
    if (!tasks_all_provided) {
        switch (cfg.retriever) {
            case RetrieverKind::bm25:
                world->bm25 = Bm25Index::build(world->loaded.kb);
                break;
            case RetrieverKind::dense:
                world->dense = DenseIndex::build(world->loaded.kb, backend_embedder(*world->backend));
                break;
            case RetrieverKind::dict:
                break;
        }
    }
    world->deps.kb = &world->loaded.kb;
    world->deps.aliases = &world->loaded.aliases;
    world->deps.backend = world->backend.get();
    world->deps.cache = &world->cache;
    if (world->bm25) world->deps.bm25 = &*world->bm25;
    if (world->dense) world->deps.dense = &*world->dense;
    return world;
}

void write_metrics(const std::string& run_dir, const EvalReport& report) {
    fs::create_directories(run_dir);
    std::ofstream out(fs::path(run_dir) / "metrics.json");
    if (!out) throw Error("cannot write metrics.json under " + run_dir);
    out << to_json(report).dump(2) << '\n';
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << content;
}

int cmd_build_index(const CommonOpts& o, const std::string& type, const std::string& out_path,
                    double k1, double b) {
    if (o.kb_path.empty()) throw Error("--kb is required");
    auto loaded = load_kb_file(o.kb_path);
    if (type == "bm25") {
        auto idx = Bm25Index::build(loaded.kb, k1, b);
        idx.save(out_path);
        std::cout << "bm25 index over " << idx.doc_count() << " entities -> " << out_path << "\n";
    } else {
        PipelineConfig cfg;
        auto backend = make_backend(o, {}, loaded.kb, cfg);
        auto idx = DenseIndex::build(loaded.kb, backend_embedder(*backend));
        idx.save(out_path);
        std::cout << "dense index over " << idx.size() << " entities (dim " << idx.dim()
                  << ") -> " << out_path << "\n";
    }
    return kExitOk;
}

int cmd_link(const CommonOpts& o, const std::string& text, const std::string& span,
             const std::string& gold) {
    PipelineConfig cfg = build_config(o);
    const std::size_t colon = span.find(':');
    if (colon == std::string::npos) throw Error("--span must be START:END (half-open)");
    MentionTask task;
    task.id = "cli";
    task.text = text;
    task.mention_start = std::stoul(span.substr(0, colon));
    task.mention_end = std::stoul(span.substr(colon + 1));
    if (!gold.empty()) task.gold_id = gold;

    auto world = std::make_unique<LoadedWorld>();
    world->loaded = load_kb_file(o.kb_path);
    world->tasks = {task};
    world->backend = make_backend(o, world->tasks, world->loaded.kb, cfg);
    if (cfg.retriever == RetrieverKind::bm25) world->bm25 = Bm25Index::build(world->loaded.kb);
    if (cfg.retriever == RetrieverKind::dense)
        world->dense = DenseIndex::build(world->loaded.kb, backend_embedder(*world->backend));
    world->deps.kb = &world->loaded.kb;
    world->deps.aliases = &world->loaded.aliases;
    world->deps.backend = world->backend.get();
    world->deps.cache = &world->cache;
    if (world->bm25) world->deps.bm25 = &*world->bm25;
    if (world->dense) world->deps.dense = &*world->dense;

    LinkOutcome outcome = link(task, cfg, world->deps);
    if (outcome.decision.result) {
        const Entity& e = world->loaded.kb.get(*outcome.decision.result);
        std::cout << "decision: " << e.id << "  " << verbalize_entity(e) << "\n";
    } else {
        std::cout << "decision: NONE (no matching entity)\n";
    }
    if (!outcome.decision.vote_counts.empty()) {
        std::cout << "votes:";
        for (const auto& [key, count] : outcome.decision.vote_counts)
            std::cout << " " << key << "=" << count;
        if (outcome.decision.fallback_used) std::cout << " (fallback)";
        std::cout << "\n";
    }
    std::map<std::string, double> retrieval_scores;
    for (const auto& st : outcome.stages)
        if (st.stage == "retrieval")
            for (const auto& c : st.candidates) retrieval_scores[c.id] = c.score;
    std::cout << "candidates:\n";
    std::cout << "  " << std::left << std::setw(5) << "idx" << std::setw(12) << "id"
              << std::setw(10) << "rerank" << std::setw(12) << "retrieval"
              << "name\n";
    for (const auto& st : outcome.stages) {
        if (st.stage != "rerank" && st.stage != "rerank(skipped)") continue;
        int i = 1;
        for (const auto& c : st.candidates) {
            const Entity& e = world->loaded.kb.get(c.id);
            std::ostringstream rr, rs;
            rr << std::fixed << std::setprecision(4) << c.score;
            rs << std::fixed << std::setprecision(4) << retrieval_scores[c.id];
            std::cout << "  " << std::left << std::setw(5) << i++ << std::setw(12) << c.id
                      << std::setw(10) << rr.str() << std::setw(12) << rs.str() << e.name
                      << "\n";
        }
    }
    return kExitOk;
}

std::string cache_path(const std::string& run_dir) {
    return (fs::path(run_dir) / "score_cache.jsonl").string();
}

int cmd_eval(const CommonOpts& o) {
    PipelineConfig cfg = build_config(o);
    auto world = open_world(o, cfg, true);
    world->cache.load(cache_path(o.run_dir));
    BatchResult batch = link_batch(world->tasks, cfg, world->deps);
    EvalReport report = evaluate(world->tasks, batch.outcomes, world->loaded.kb, cfg);
    write_run_dir(o.run_dir, world->tasks, batch);
    write_metrics(o.run_dir, report);
    world->cache.save(cache_path(o.run_dir));
    std::cout << render_text(report);
    std::cout << "artifacts: " << o.run_dir << "/{decisions.jsonl,traces.jsonl,funnel.json,metrics.json}\n";
    return kExitOk;
}

int cmd_ablate(const CommonOpts& o, const std::string& suite, const std::string& orderings_csv_arg,
               const std::string& ks_arg, const std::string& ksc_arg) {
    PipelineConfig cfg = build_config(o);
    auto world = open_world(o, cfg, true);
    fs::create_directories(o.run_dir);
    world->cache.load(cache_path(o.run_dir));
    struct SaveCache {
        ScoreCache& cache;
        std::string path;
        ~SaveCache() {
            try {
                cache.save(path);
            } catch (...) {
            }
        }
    } save_cache{world->cache, cache_path(o.run_dir)};

    auto split_list = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(item);
        return out;
    };

    if (suite == "ordering") {
        std::vector<Ordering> orderings;
        for (const auto& name : split_list(orderings_csv_arg))
            orderings.push_back(ordering_from_string(name));
        auto rows = ordering_ablation(world->tasks, cfg, orderings, world->deps);
        const std::string csv = orderings_csv(rows);
        write_text_file((fs::path(o.run_dir) / "orderings.csv").string(), csv);
        std::cout << csv;
        return kExitOk;
    }
    if (suite == "k-sweep") {
        std::vector<int> ks;
        for (const auto& v : split_list(ks_arg)) ks.push_back(std::stoi(v));
        auto rows = sweep_k(world->tasks, cfg, ks, world->deps);
        const std::string csv = ksweep_csv(rows);
        write_text_file((fs::path(o.run_dir) / "ksweep.csv").string(), csv);
        std::cout << csv;
        return kExitOk;
    }
    if (suite == "self-consistency") {
        std::vector<int> ksc;
        for (const auto& v : split_list(ksc_arg)) ksc.push_back(std::stoi(v));
        PipelineConfig run_cfg = cfg;
        for (int k_sc : ksc) run_cfg.selection.num_samples =
            std::max(run_cfg.selection.num_samples, k_sc);
        BatchResult batch = link_batch(world->tasks, run_cfg, world->deps);
        auto rows = sweep_self_consistency(batch.outcomes, world->tasks, ksc,
                                           run_cfg.selection.include_none);
        const std::string csv = self_consistency_csv(rows);
        write_text_file((fs::path(o.run_dir) / "self_consistency.csv").string(), csv);
        std::cout << csv;
        return kExitOk;
    }
    if (suite == "components") {
        struct Variant {
            const char* name;
            void (*apply)(PipelineConfig&);
        };
        const Variant variants[] = {
            {"full", [](PipelineConfig&) {}},
            {"no_reranker", [](PipelineConfig& c) { c.no_reranker = true; }},
            {"no_self_consistency", [](PipelineConfig& c) { c.no_self_consistency = true; }},
            {"no_descriptions", [](PipelineConfig& c) { c.no_descriptions = true; }},
            {"no_reasoning", [](PipelineConfig& c) { c.no_reasoning = true; }},
            {"no_selection", [](PipelineConfig& c) { c.no_selection = true; }},
        };
        std::ostringstream csv;
        csv << "variant,accuracy,normalized_accuracy\n";
        for (const auto& v : variants) {
            PipelineConfig run_cfg = cfg;
            v.apply(run_cfg);
            BatchResult batch = link_batch(world->tasks, run_cfg, world->deps);
            EvalReport report = evaluate(world->tasks, batch.outcomes, world->loaded.kb, run_cfg);
            csv << v.name << ',' << report.overall_accuracy << ',';
            if (report.normalized_accuracy_value) csv << *report.normalized_accuracy_value;
            csv << '\n';
        }
        write_text_file((fs::path(o.run_dir) / "components.csv").string(), csv.str());
        std::cout << csv.str();
        return kExitOk;
    }
    throw Error("unknown ablation suite: " + suite +
                " (expected ordering | k-sweep | self-consistency | components)");
}

FunnelSummary funnel_from_decisions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::vector<FunnelRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        FunnelRecord r;
        r.has_gold = j.contains("gold_id");
        r.gold_is_unk = r.has_gold && j["gold_id"].get<std::string>() == kUnkGoldId;
        r.gold_in_retrieved = j.value("gold_in_retrieved", false);
        r.gold_in_topk = j.value("gold_in_topk", false);
        r.selected_correct = j.value("correct", false);
        r.error = j.contains("error");
        r.terminal = j.value("terminal", "");
        records.push_back(r);
    }
    return funnel_summary(records);
}

int cmd_funnel(const CommonOpts& o) {
    FunnelSummary summary;
    const fs::path decisions = fs::path(o.run_dir) / "decisions.jsonl";
    if (o.tasks_path.empty() && fs::exists(decisions)) {
        summary = funnel_from_decisions(decisions.string());
    } else {
        PipelineConfig cfg = build_config(o);
        auto world = open_world(o, cfg, true);
        BatchResult batch = link_batch(world->tasks, cfg, world->deps);
        write_run_dir(o.run_dir, world->tasks, batch);
        summary = batch.funnel;
    }
    // keep whatever else lives in funnel.json (the eval timing block), update the counts
    nlohmann::json j = nlohmann::json::object();
    const fs::path funnel_path = fs::path(o.run_dir) / "funnel.json";
    if (fs::exists(funnel_path)) {
        std::ifstream in(funnel_path);
        in >> j;
    }
    j["funnel"] = to_json(summary);
    fs::create_directories(o.run_dir);
    write_text_file(funnel_path.string(), j.dump(2) + "\n");
    std::cout << "total               " << summary.total << "\n"
              << "entering retrieval  " << summary.entering_retrieval << "\n"
              << "after retrieval     " << summary.retained_after_retrieval << " (lost "
              << summary.lost_at_retrieval << ")\n"
              << "after rerank        " << summary.retained_after_rerank << " (lost "
              << summary.lost_at_rerank << ")\n"
              << "correct selection   " << summary.correct_after_selection << " (lost "
              << summary.lost_at_selection << ")\n";
    if (summary.unk_gold > 0)
        std::cout << "UNK mentions        " << summary.unk_gold << " (" << summary.unk_correct
                  << " correctly NONE)\n";
    return kExitOk;
}

int cmd_convert(const CommonOpts& o, const std::string& adapter, const std::string& input,
                const std::string& out_kb, const std::string& out_tasks, int sentences,
                const std::string& unk_token) {
    AdapterSpec spec;
    // adapter settings come from the config file "adapters" section; flags override
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw Error("cannot open config file: " + o.config_path);
        nlohmann::json j;
        in >> j;
        if (j.contains("adapters")) {
            const auto& a = j["adapters"];
            if (a.contains("kind")) spec.kind = adapter_kind_from_string(a["kind"]);
            spec.description_sentences = a.value("description_sentences", 0);
            spec.unk_marker = a.value("unk_marker", spec.unk_marker);
            if (a.contains("abbreviations"))
                spec.abbreviations = a["abbreviations"].get<std::vector<std::string>>();
        }
    }
    if (!adapter.empty()) spec.kind = adapter_kind_from_string(adapter);
    if (sentences > 0) spec.description_sentences = sentences;
    if (!unk_token.empty()) spec.unk_marker = unk_token;
    ConvertStats stats = convert(spec, input, out_kb, out_tasks);
    std::cout << "converted " << stats.entities << " entities, " << stats.mentions
              << " mentions -> " << out_kb << ", " << out_tasks << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"linkforge: coarse-to-fine entity linking over an inference server"};
    app.require_subcommand(1);

    CommonOpts o;

    auto* build_index = app.add_subcommand("build-index", "build a retrieval index snapshot");
    std::string index_type = "bm25", index_out = "index.json";
    double k1 = 1.5, b = 0.75;
    add_common_flags(build_index, o);
    add_pipeline_flags(build_index, o);
    build_index->add_option("--type", index_type, "bm25 | dense")
        ->check(CLI::IsMember({"bm25", "dense"}));
    build_index->add_option("--out", index_out, "output snapshot path");
    build_index->add_option("--k1", k1, "BM25 k1");
    build_index->add_option("--b", b, "BM25 b");

    auto* link_cmd = app.add_subcommand("link", "link one mention");
    std::string text, span, gold;
    add_common_flags(link_cmd, o);
    add_pipeline_flags(link_cmd, o);
    link_cmd->add_option("--text", text, "context text")->required();
    link_cmd->add_option("--span", span, "mention span START:END (half-open)")->required();
    link_cmd->add_option("--gold", gold, "gold entity id (oracle backend / orderings)");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a mention task file");
    add_common_flags(eval_cmd, o);
    add_pipeline_flags(eval_cmd, o);
    eval_cmd->add_option("--tasks", o.tasks_path, "mention task file (JSONL)");

    auto* ablate_cmd = app.add_subcommand("ablate", "run an ablation suite");
    std::string suite = "components";
    std::string orderings_arg = "reranker,random";
    std::string ks_arg = "1,5,10";
    std::string ksc_arg = "1,2,3,5,10";
    add_common_flags(ablate_cmd, o);
    add_pipeline_flags(ablate_cmd, o);
    ablate_cmd->add_option("--tasks", o.tasks_path, "mention task file (JSONL)");
    ablate_cmd->add_option("--suite", suite, "ordering | k-sweep | self-consistency | components");
    ablate_cmd->add_option("--orderings", orderings_arg, "comma-separated ordering names");
    ablate_cmd->add_option("--ks", ks_arg, "comma-separated k values");
    ablate_cmd->add_option("--ksc", ksc_arg, "comma-separated k_sc values");

    auto* funnel_cmd = app.add_subcommand("funnel", "retention funnel for a run or task file");
    add_common_flags(funnel_cmd, o);
    add_pipeline_flags(funnel_cmd, o);
    funnel_cmd->add_option("--tasks", o.tasks_path, "mention task file (JSONL)");

    auto* convert_cmd = app.add_subcommand("convert", "convert a benchmark layout");
    std::string adapter, input_dir, out_kb = "kb.jsonl", out_tasks = "tasks.jsonl", unk_token;
    int sentences = 0;
    add_common_flags(convert_cmd, o);
    convert_cmd->add_option(
        "--adapter", adapter,
        "wikia_dump | taxonomy | acronym_dict | generic_jsonl (default generic_jsonl)");
    convert_cmd->add_option("--input", input_dir, "input directory")->required();
    convert_cmd->add_option("--out-kb", out_kb, "canonical KB output path");
    convert_cmd->add_option("--out-tasks", out_tasks, "canonical task output path");
    convert_cmd->add_option("--sentences", sentences, "first-N-sentences description policy");
    convert_cmd->add_option("--unk-token", unk_token, "gold id used for UNK mentions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return kExitInputError;
    }

    try {
        if (build_index->parsed()) return cmd_build_index(o, index_type, index_out, k1, b);
        if (link_cmd->parsed()) return cmd_link(o, text, span, gold);
        if (eval_cmd->parsed()) return cmd_eval(o);
        if (ablate_cmd->parsed())
            return cmd_ablate(o, suite, orderings_arg, ks_arg, ksc_arg);
        if (funnel_cmd->parsed()) return cmd_funnel(o);
        if (convert_cmd->parsed())
            return cmd_convert(o, adapter, input_dir, out_kb, out_tasks, sentences, unk_token);
    } catch (const TransportError& ex) {
        std::cerr << "backend transport failure: " << ex.what() << "\n";
        return kExitBackendError;
    } catch (const BackendRefused& ex) {
        std::cerr << "backend refused request: " << ex.what() << "\n";
        return kExitBackendError;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitInputError;
    }
    return kExitInputError;
}
