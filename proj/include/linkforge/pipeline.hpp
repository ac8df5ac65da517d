#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "linkforge/adapters.hpp"
#include "linkforge/errors.hpp"
#include "linkforge/gateway.hpp"
#include "linkforge/kb.hpp"
#include "linkforge/rerank.hpp"
#include "linkforge/retrieval.hpp"
#include "linkforge/select.hpp"

namespace linkforge {

// Reserved gold id for mentions with no counterpart in the KB. Never a KB entity;
// a NONE decision is the correct answer for it.
inline constexpr const char* kUnkGoldId = "__UNK__";

enum class RetrieverKind { bm25, dense, dict };

inline const char* to_string(RetrieverKind k) {
    switch (k) {
        case RetrieverKind::bm25: return "bm25";
        case RetrieverKind::dense: return "dense";
        case RetrieverKind::dict: return "dict";
    }
    return "?";
}

inline RetrieverKind retriever_from_string(const std::string& s) {
    for (RetrieverKind k : {RetrieverKind::bm25, RetrieverKind::dense, RetrieverKind::dict})
        if (s == to_string(k)) return k;
    throw Error("unknown retriever: " + s);
}

struct PipelineConfig {
    RetrieverKind retriever = RetrieverKind::bm25;
    int retrieval_budget = 64;
    RerankConfig rerank;
    SelectionConfig selection;
    int gate_n = 64;  // normalized-accuracy gate over the pre-rerank pool
    bool no_reranker = false;
    bool no_selection = false;
    bool no_descriptions = false;
    bool no_reasoning = false;
    bool no_self_consistency = false;
    int max_concurrency = 8;
    int context_max_chars = 0;       // 0 = no truncation; else centered on the mention
    int bm25_context_sentences = 1;  // sentences around the mention added to the BM25 query
    std::string dense_query_instruction;  // prepended for instruction-tuned embedders

    void validate() const {
        if (retrieval_budget < 1) throw Error("retrieval_budget must be >= 1");
        if (rerank.k < 1) throw Error("rerank.k must be >= 1");
        if (selection.num_samples < 1) throw Error("selection.num_samples must be >= 1");
        if (gate_n < rerank.k)
            throw Error("gate_n must be >= rerank.k for the normalized-accuracy gate");
    }
};

inline nlohmann::json to_json(const PipelineConfig& c) {
    return nlohmann::json{
        {"retriever", to_string(c.retriever)},
        {"retrieval_budget", c.retrieval_budget},
        {"rerank",
         {{"k", c.rerank.k},
          {"instruction_text", c.rerank.instruction_text},
          {"scorer_kind", to_string(c.rerank.scorer_kind)}}},
        {"selection",
         {{"num_samples", c.selection.num_samples},
          {"include_none", c.selection.include_none},
          {"ordering", to_string(c.selection.ordering)},
          {"ordering_seed", c.selection.ordering_seed},
          {"temperature", c.selection.temperature},
          {"max_output_tokens", c.selection.max_output_tokens},
          {"reasoning_enabled", c.selection.reasoning_enabled},
          {"include_descriptions", c.selection.include_descriptions},
          {"max_description_chars", c.selection.max_description_chars}}},
        {"gate_n", c.gate_n},
        {"no_reranker", c.no_reranker},
        {"no_selection", c.no_selection},
        {"no_descriptions", c.no_descriptions},
        {"no_reasoning", c.no_reasoning},
        {"no_self_consistency", c.no_self_consistency},
        {"max_concurrency", c.max_concurrency},
        {"context_max_chars", c.context_max_chars},
        {"bm25_context_sentences", c.bm25_context_sentences},
        {"dense_query_instruction", c.dense_query_instruction}};
}

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    if (j.contains("retriever")) c.retriever = retriever_from_string(j["retriever"]);
    c.retrieval_budget = j.value("retrieval_budget", c.retrieval_budget);
    if (j.contains("rerank")) {
        const auto& r = j["rerank"];
        c.rerank.k = r.value("k", c.rerank.k);
        c.rerank.instruction_text = r.value("instruction_text", c.rerank.instruction_text);
        if (r.contains("scorer_kind"))
            c.rerank.scorer_kind = scorer_kind_from_string(r["scorer_kind"]);
    }
    if (j.contains("selection")) {
        const auto& s = j["selection"];
        c.selection.num_samples = s.value("num_samples", c.selection.num_samples);
        c.selection.include_none = s.value("include_none", c.selection.include_none);
        if (s.contains("ordering")) c.selection.ordering = ordering_from_string(s["ordering"]);
        c.selection.ordering_seed = s.value("ordering_seed", c.selection.ordering_seed);
        c.selection.temperature = s.value("temperature", c.selection.temperature);
        c.selection.max_output_tokens = s.value("max_output_tokens", c.selection.max_output_tokens);
        c.selection.reasoning_enabled = s.value("reasoning_enabled", c.selection.reasoning_enabled);
        c.selection.include_descriptions =
            s.value("include_descriptions", c.selection.include_descriptions);
        c.selection.max_description_chars =
            s.value("max_description_chars", c.selection.max_description_chars);
    }
    c.gate_n = j.value("gate_n", c.gate_n);
    c.no_reranker = j.value("no_reranker", c.no_reranker);
    c.no_selection = j.value("no_selection", c.no_selection);
    c.no_descriptions = j.value("no_descriptions", c.no_descriptions);
    c.no_reasoning = j.value("no_reasoning", c.no_reasoning);
    c.no_self_consistency = j.value("no_self_consistency", c.no_self_consistency);
    c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
    c.context_max_chars = j.value("context_max_chars", c.context_max_chars);
    c.bm25_context_sentences = j.value("bm25_context_sentences", c.bm25_context_sentences);
    c.dense_query_instruction = j.value("dense_query_instruction", c.dense_query_instruction);
    return c;
}

inline std::string config_hash(const PipelineConfig& c) { return to_hex(fnv1a64(to_json(c).dump())); }

struct MentionTask {
    std::string id;
    std::string text;
    std::size_t mention_start = 0;
    std::size_t mention_end = 0;
    std::optional<std::string> gold_id;
    std::vector<std::string> candidates;  // precomputed benchmark candidates, may be empty
    std::string domain;
};

inline std::vector<MentionTask> load_tasks(std::istream& in) {
    std::vector<MentionTask> tasks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            throw MalformedRecord(line_no, std::string("invalid JSON: ") + ex.what());
        }
        MentionTask t;
        if (!j.contains("id") || !j["id"].is_string())
            throw MalformedRecord(line_no, "missing required string field \"id\"");
        if (!j.contains("text") || !j["text"].is_string())
            throw MalformedRecord(line_no, "missing required string field \"text\"");
        if (!j.contains("mention_start") || !j.contains("mention_end"))
            throw MalformedRecord(line_no, "missing mention offsets");
        t.id = j["id"].get<std::string>();
        t.text = j["text"].get<std::string>();
        t.mention_start = j["mention_start"].get<std::size_t>();
        t.mention_end = j["mention_end"].get<std::size_t>();
        if (j.contains("gold_id") && j["gold_id"].is_string())
            t.gold_id = j["gold_id"].get<std::string>();
        if (j.contains("candidates"))
            t.candidates = j["candidates"].get<std::vector<std::string>>();
        t.domain = j.value("domain", "");
        tasks.push_back(std::move(t));
    }
    return tasks;
}

inline std::vector<MentionTask> load_tasks_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open tasks file: " + path);
    return load_tasks(in);
}

// Per-mention attrition of the gold entity through the stages.
struct FunnelRecord {
    bool has_gold = false;
    bool gold_is_unk = false;
    bool gold_in_retrieved = false;
    bool gold_in_topk = false;
    bool selected_correct = false;
    bool error = false;
    std::string terminal;
};

struct FunnelSummary {
    std::size_t total = 0;
    std::size_t errors = 0;
    std::size_t no_gold = 0;
    std::size_t unk_gold = 0;
    std::size_t unk_correct = 0;
    std::size_t entering_retrieval = 0;  // entity-gold mentions
    std::size_t retained_after_retrieval = 0;
    std::size_t lost_at_retrieval = 0;
    std::size_t retained_after_rerank = 0;
    std::size_t lost_at_rerank = 0;
    std::size_t correct_after_selection = 0;
    std::size_t lost_at_selection = 0;
};

// Stage counts with conservation: entering(stage) = retained(stage) + lost(stage).
// Only entity-gold mentions flow through the retention chain; UNK-gold mentions have no
// ground-truth entity to retain and are tallied separately.
inline FunnelSummary funnel_summary(const std::vector<FunnelRecord>& records) {
    FunnelSummary s;
    s.total = records.size();
    for (const auto& r : records) {
        if (r.error) {
            ++s.errors;
            continue;
        }
        if (!r.has_gold) {
            ++s.no_gold;
            continue;
        }
        if (r.gold_is_unk) {
            ++s.unk_gold;
            if (r.selected_correct) ++s.unk_correct;
            continue;
        }
        ++s.entering_retrieval;
        if (r.gold_in_retrieved) ++s.retained_after_retrieval;
        if (r.gold_in_topk) ++s.retained_after_rerank;
        if (r.selected_correct && r.gold_in_topk) ++s.correct_after_selection;
    }
    s.lost_at_retrieval = s.entering_retrieval - s.retained_after_retrieval;
    s.lost_at_rerank = s.retained_after_retrieval - s.retained_after_rerank;
    s.lost_at_selection = s.retained_after_rerank - s.correct_after_selection;
    return s;
}

inline nlohmann::json to_json(const FunnelSummary& s) {
    return nlohmann::json{{"total", s.total},
                          {"errors", s.errors},
                          {"no_gold", s.no_gold},
                          {"unk_gold", s.unk_gold},
                          {"unk_correct", s.unk_correct},
                          {"entering_retrieval", s.entering_retrieval},
                          {"retained_after_retrieval", s.retained_after_retrieval},
                          {"lost_at_retrieval", s.lost_at_retrieval},
                          {"retained_after_rerank", s.retained_after_rerank},
                          {"lost_at_rerank", s.lost_at_rerank},
                          {"correct_after_selection", s.correct_after_selection},
                          {"lost_at_selection", s.lost_at_selection}};
}

struct StageSample {
    std::string id;
    double score = 0.0;
};

struct StageTrace {
    std::string stage;
    double wall_ms = 0.0;
    std::vector<StageSample> candidates;
    std::string note;
};

struct LinkOutcome {
    std::string task_id;
    LinkingDecision decision;
    FunnelRecord funnel;
    std::vector<StageTrace> stages;
    std::vector<std::string> retrieved_ids;  // full pre-rerank pool in rank order
    std::vector<std::string> reranked_ids;   // full post-rerank order (before top-k cut)
    std::vector<std::string> candidate_pool;  // first gate_n retrieved ids
    bool error = false;
    std::string error_message;
    double wall_time_s = 0.0;
};

struct PipelineDeps {
    const KnowledgeBase* kb = nullptr;
    const AliasDictionary* aliases = nullptr;
    const Bm25Index* bm25 = nullptr;
    const DenseIndex* dense = nullptr;
    Backend* backend = nullptr;
    ScoreCache* cache = nullptr;
};

namespace detail {

// Keeps at most max_chars around the mention, centered on it, and rebases the offsets.
inline MentionTask truncate_context(const MentionTask& task, int max_chars) {
    if (max_chars <= 0 || task.text.size() <= static_cast<std::size_t>(max_chars)) return task;
    const std::size_t limit = static_cast<std::size_t>(max_chars);
    const std::size_t mention_len = task.mention_end - task.mention_start;
    std::size_t begin;
    if (mention_len >= limit) {
        begin = task.mention_start;
    } else {
        const std::size_t slack = (limit - mention_len) / 2;
        begin = task.mention_start > slack ? task.mention_start - slack : 0;
        if (begin + limit > task.text.size())
            begin = task.text.size() - limit;
    }
    MentionTask out = task;
    out.text = task.text.substr(begin, limit);
    out.mention_start = task.mention_start - begin;
    out.mention_end = std::min(task.mention_end - begin, out.text.size());
    return out;
}

inline std::string bm25_query(const MentionTask& task, const MarkedContext& ctx,
                              int window_sentences) {
    std::string query = ctx.surface();
    if (window_sentences < 0) return query;
    auto spans = sentence_spans(task.text);
    std::ptrdiff_t hit = -1;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        if (task.mention_start >= spans[i].begin && task.mention_start < spans[i].end) {
            hit = static_cast<std::ptrdiff_t>(i);
            break;
        }
    }
    if (hit < 0) return query + " " + task.text;
    const std::size_t lo = static_cast<std::size_t>(
        std::max<std::ptrdiff_t>(0, hit - window_sentences));
    const std::size_t hi = std::min(spans.size() - 1,
                                    static_cast<std::size_t>(hit) + static_cast<std::size_t>(window_sentences));
    return query + " " + task.text.substr(spans[lo].begin, spans[hi].end - spans[lo].begin);
}

inline CandidateSet provided_candidates(const MentionTask& task, const KnowledgeBase& kb) {
    CandidateSet set;
    set.mention_id = task.id;
    set.provenance = "provided";
    int rank = 1;
    for (const auto& id : task.candidates) {
        if (!kb.contains(id)) throw Error("precomputed candidate does not resolve in KB: " + id);
        Candidate c;
        c.entity_id = id;
        c.retrieval_rank = rank;
        c.retrieval_score = 1.0 / (1.0 + rank);
        set.items.push_back(std::move(c));
        ++rank;
    }
    return set;
}

inline std::vector<double> normalized(std::vector<double> v) {
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    const double norm = std::sqrt(norm_sq);
    if (norm < 1e-12) throw ZeroVector("query embedding has zero norm");
    for (double& x : v) x /= norm;
    return v;
}

}  // namespace detail

// One mention through retrieve -> rerank -> top-k -> select, with stage tracing and
// funnel accounting. Precomputed benchmark candidates override retrieval but still pass
// through the rerank and cutoff stages.
inline LinkOutcome link(const MentionTask& input_task, const PipelineConfig& cfg,
                        const PipelineDeps& deps) {
    if (!deps.kb || !deps.backend) throw Error("link requires a KB and a backend");
    Stopwatch total;
    LinkOutcome out;
    out.task_id = input_task.id;

    const MentionTask task = detail::truncate_context(input_task, cfg.context_max_chars);
    MarkedContext ctx = mark_mention(task.text, task.mention_start, task.mention_end);

    out.funnel.has_gold = task.gold_id.has_value();
    out.funnel.gold_is_unk = task.gold_id && *task.gold_id == kUnkGoldId;
    const bool entity_gold = out.funnel.has_gold && !out.funnel.gold_is_unk;

    // Stage 1: candidate generation.
    Stopwatch retrieval_watch;
    CandidateSet retrieved;
    if (!task.candidates.empty()) {
        retrieved = detail::provided_candidates(task, *deps.kb);
    } else {
        switch (cfg.retriever) {
            case RetrieverKind::bm25: {
                if (!deps.bm25) throw Error("bm25 retriever selected but no index provided");
                retrieved = deps.bm25->search(
                    detail::bm25_query(task, ctx, cfg.bm25_context_sentences),
                    static_cast<std::size_t>(cfg.retrieval_budget), task.id);
                break;
            }
            case RetrieverKind::dense: {
                if (!deps.dense) throw Error("dense retriever selected but no index provided");
                std::string query_text = ctx.surface();
                if (!cfg.dense_query_instruction.empty())
                    query_text = cfg.dense_query_instruction + "\n" + query_text;
                auto vec = deps.backend->embed({query_text}).at(0);
                retrieved = deps.dense->search(detail::normalized(std::move(vec)),
                                               static_cast<std::size_t>(cfg.retrieval_budget),
                                               task.id);
                break;
            }
            case RetrieverKind::dict: {
                if (!deps.aliases) throw Error("dict retriever selected but no alias dictionary");
                CandidateSet set;
                set.mention_id = task.id;
                set.provenance = "dict";
                int rank = 1;
                for (const auto& id : deps.aliases->lookup(ctx.surface())) {
                    if (rank > cfg.retrieval_budget) break;
                    Candidate c;
                    c.entity_id = id;
                    c.retrieval_rank = rank;
                    c.retrieval_score = 1.0 / (1.0 + rank);
                    set.items.push_back(std::move(c));
                    ++rank;
                }
                retrieved = std::move(set);
                break;
            }
        }
    }
    {
        StageTrace st;
        st.stage = "retrieval";
        st.wall_ms = retrieval_watch.millis();
        st.note = retrieved.provenance;
        for (const auto& c : retrieved.items) st.candidates.push_back({c.entity_id, c.retrieval_score});
        out.stages.push_back(std::move(st));
    }
    for (const auto& c : retrieved.items) out.retrieved_ids.push_back(c.entity_id);
    for (std::size_t i = 0; i < retrieved.items.size() && i < static_cast<std::size_t>(cfg.gate_n); ++i)
        out.candidate_pool.push_back(retrieved.items[i].entity_id);

    if (entity_gold)
        out.funnel.gold_in_retrieved =
            std::find(out.retrieved_ids.begin(), out.retrieved_ids.end(), *task.gold_id) !=
            out.retrieved_ids.end();

    if (retrieved.empty()) {
        out.decision.result = std::nullopt;
        out.decision.no_candidates = true;
        out.funnel.terminal = "no_candidates";
        out.funnel.selected_correct = out.funnel.gold_is_unk;  // NONE is right only for UNK
        out.wall_time_s = total.seconds();
        return out;
    }

    // Stage 2: pointwise rerank and cutoff. The no_reranker ablation forwards every
    // retrieved candidate in retrieval order, without cutoff.
    Stopwatch rerank_watch;
    CandidateSet topk;
    if (cfg.no_reranker) {
        topk = retrieved;
        for (std::size_t i = 0; i < topk.items.size(); ++i)
            topk.items[i].presented_index = static_cast<int>(i) + 1;
        out.reranked_ids = out.retrieved_ids;
    } else {
        CandidateSet reranked = rerank(ctx, retrieved, *deps.kb, cfg.rerank, *deps.backend,
                                       deps.cache, cfg.max_concurrency);
        for (const auto& c : reranked.items) out.reranked_ids.push_back(c.entity_id);
        topk = top_k(reranked, static_cast<std::size_t>(cfg.rerank.k));
    }
    {
        StageTrace st;
        st.stage = cfg.no_reranker ? "rerank(skipped)" : "rerank";
        st.wall_ms = rerank_watch.millis();
        for (const auto& c : topk.items)
            st.candidates.push_back({c.entity_id, c.rerank_score.value_or(0.0)});
        out.stages.push_back(std::move(st));
    }
    if (entity_gold) out.funnel.gold_in_topk = topk.contains(*task.gold_id);

    // Stage 3: LLM selection with self-consistency voting.
    Stopwatch select_watch;
    if (cfg.no_selection) {
        out.decision.result = topk.items.front().entity_id;
        out.decision.top_ranked_id = topk.items.front().entity_id;
        for (const auto& c : topk.items) out.decision.presented_ids.push_back(c.entity_id);
    } else {
        SelectionConfig sel = cfg.selection;
        if (cfg.no_self_consistency) sel.num_samples = 1;
        if (cfg.no_reasoning) sel.reasoning_enabled = false;
        if (cfg.no_descriptions) sel.include_descriptions = false;
        out.decision = select(ctx, topk, *deps.kb, sel, *deps.backend, task.gold_id);
    }
    {
        StageTrace st;
        st.stage = cfg.no_selection ? "selection(top1)" : "selection";
        st.wall_ms = select_watch.millis();
        for (const auto& id : out.decision.presented_ids) st.candidates.push_back({id, 0.0});
        out.stages.push_back(std::move(st));
    }

    if (out.funnel.has_gold) {
        if (out.funnel.gold_is_unk)
            out.funnel.selected_correct = !out.decision.result.has_value();
        else
            out.funnel.selected_correct =
                out.decision.result.has_value() && *out.decision.result == *task.gold_id;
        if (out.funnel.gold_is_unk)
            out.funnel.terminal = out.funnel.selected_correct ? "unk_correct" : "unk_incorrect";
        else if (!out.funnel.gold_in_retrieved)
            out.funnel.terminal = "lost_at_retrieval";
        else if (!out.funnel.gold_in_topk)
            out.funnel.terminal = "lost_at_rerank";
        else
            out.funnel.terminal = out.funnel.selected_correct ? "correct" : "lost_at_selection";
    } else {
        out.funnel.terminal = "no_gold";
    }
    out.wall_time_s = total.seconds();
    return out;
}

struct BatchTiming {
    double mean_wall_s = 0.0;
    double mean_tokens_per_sample = 0.0;
    long total_prompt_tokens = 0;
    long total_completion_tokens = 0;
    std::size_t total_samples = 0;
};

struct BatchResult {
    std::vector<LinkOutcome> outcomes;  // aligned with the input task order
    FunnelSummary funnel;
    BatchTiming timing;
};

// Processes mentions concurrently up to cfg.max_concurrency. Per-task failures are
// isolated: the outcome carries the error and the batch continues.
inline BatchResult link_batch(const std::vector<MentionTask>& tasks, const PipelineConfig& cfg,
                              const PipelineDeps& deps) {
    cfg.validate();
    BatchResult result;
    result.outcomes.resize(tasks.size());
    parallel_for(tasks.size(), cfg.max_concurrency, [&](std::size_t i) {
        try {
            result.outcomes[i] = link(tasks[i], cfg, deps);
        } catch (const std::exception& ex) {
            LinkOutcome failed;
            failed.task_id = tasks[i].id;
            failed.error = true;
            failed.error_message = ex.what();
            failed.decision.result = std::nullopt;
            failed.funnel.has_gold = tasks[i].gold_id.has_value();
            failed.funnel.gold_is_unk = tasks[i].gold_id && *tasks[i].gold_id == kUnkGoldId;
            failed.funnel.error = true;
            failed.funnel.terminal = "error";
            result.outcomes[i] = std::move(failed);
        }
    });
    std::vector<FunnelRecord> records;
    records.reserve(result.outcomes.size());
    double wall = 0.0;
    for (const auto& o : result.outcomes) {
        records.push_back(o.funnel);
        wall += o.wall_time_s;
        result.timing.total_prompt_tokens += o.decision.prompt_tokens;
        for (int t : o.decision.sample_tokens) {
            result.timing.total_completion_tokens += t;
            ++result.timing.total_samples;
        }
    }
    result.funnel = funnel_summary(records);
    if (!result.outcomes.empty()) result.timing.mean_wall_s = wall / static_cast<double>(result.outcomes.size());
    if (result.timing.total_samples > 0)
        result.timing.mean_tokens_per_sample = static_cast<double>(result.timing.total_completion_tokens) /
                                               static_cast<double>(result.timing.total_samples);
    return result;
}

inline bool decision_correct(const LinkingDecision& decision, const std::string& gold_id) {
    if (gold_id == kUnkGoldId) return !decision.result.has_value();
    return decision.result.has_value() && *decision.result == gold_id;
}

struct KSweepRow {
    int k = 0;
    double overall_accuracy = 0.0;
    std::optional<double> selection_accuracy;  // over mentions whose gold reached top-k
    std::optional<double> accuracy_at_k;       // over mentions whose gold was retrieved
};

// Re-evaluates the pipeline for several k values. Requires the score cache so rerank
// scores are computed once; selection re-runs per k.
inline std::vector<KSweepRow> sweep_k(const std::vector<MentionTask>& tasks, PipelineConfig cfg,
                                      const std::vector<int>& ks, const PipelineDeps& deps) {
    if (!deps.cache && cfg.rerank.scorer_kind == ScorerKind::generative_yes_no)
        throw Error("sweep_k requires an enabled score cache");
    std::vector<KSweepRow> rows;
    for (int k : ks) {
        PipelineConfig swept = cfg;
        swept.rerank.k = k;
        swept.gate_n = std::max(cfg.gate_n, k);
        BatchResult batch = link_batch(tasks, swept, deps);
        KSweepRow row;
        row.k = k;
        std::size_t with_gold = 0, correct = 0;
        std::vector<RankedItem> ranked;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (!tasks[i].gold_id) continue;
            ++with_gold;
            if (batch.outcomes[i].funnel.selected_correct) ++correct;
            if (*tasks[i].gold_id != kUnkGoldId) {
                RankedItem item;
                item.ranked_ids = batch.outcomes[i].reranked_ids;
                item.gold_id = *tasks[i].gold_id;
                item.gated = batch.outcomes[i].funnel.gold_in_retrieved;
                ranked.push_back(std::move(item));
            }
        }
        if (with_gold == 0) throw EmptySet("sweep_k requires gold labels");
        row.overall_accuracy = static_cast<double>(correct) / static_cast<double>(with_gold);
        if (batch.funnel.retained_after_rerank > 0)
            row.selection_accuracy = static_cast<double>(batch.funnel.correct_after_selection) /
                                     static_cast<double>(batch.funnel.retained_after_rerank);
        bool any_gated = std::any_of(ranked.begin(), ranked.end(),
                                     [](const RankedItem& r) { return r.gated; });
        if (any_gated) row.accuracy_at_k = accuracy_at_k(ranked, static_cast<std::size_t>(k));
        rows.push_back(std::move(row));
    }
    return rows;
}

// Oracle backend wired to a task set: registers each task's rendered context (after the
// configured truncation, so lookups match what the pipeline sends) against its gold.
inline MockOracleBackend make_oracle_backend(const std::vector<MentionTask>& tasks,
                                             const KnowledgeBase& kb, const PipelineConfig& cfg,
                                             std::size_t embed_dim = 16, std::uint64_t seed = 0) {
    MockOracleBackend backend(embed_dim, seed);
    for (const auto& task : tasks) {
        if (!task.gold_id) continue;
        const MentionTask t = detail::truncate_context(task, cfg.context_max_chars);
        MarkedContext ctx = mark_mention(t.text, t.mention_start, t.mention_end);
        if (*task.gold_id == kUnkGoldId) {
            backend.register_none(ctx.rendered);
            continue;
        }
        const Entity* gold = kb.find(*task.gold_id);
        if (!gold) continue;
        backend.register_gold(ctx.rendered, gold->name, verbalize_entity(*gold));
    }
    return backend;
}

// ---- run-directory artifacts -------------------------------------------------------

inline nlohmann::json decision_to_json(const LinkOutcome& o,
                                       const std::optional<std::string>& gold_id) {
    nlohmann::json j;
    j["id"] = o.task_id;
    j["result"] = o.decision.result.has_value() ? nlohmann::json(*o.decision.result)
                                                : nlohmann::json(nullptr);
    if (gold_id) {
        j["gold_id"] = *gold_id;
        j["correct"] = o.funnel.selected_correct;
    }
    j["vote_counts"] = o.decision.vote_counts;
    j["fallback_used"] = o.decision.fallback_used;
    j["no_candidates"] = o.decision.no_candidates;
    j["presented"] = o.decision.presented_ids;
    nlohmann::json parsed = nlohmann::json::array();
    for (const auto& p : o.decision.parsed) parsed.push_back(p.str());
    j["parsed"] = std::move(parsed);
    j["candidate_pool"] = o.candidate_pool;
    j["gold_in_retrieved"] = o.funnel.gold_in_retrieved;
    j["gold_in_topk"] = o.funnel.gold_in_topk;
    j["terminal"] = o.funnel.terminal;
    j["prompt_tokens"] = o.decision.prompt_tokens;
    j["sample_tokens"] = o.decision.sample_tokens;
    // wall times live in traces.jsonl and funnel.json; decisions.jsonl stays
    // byte-identical across runs for a fixed seed
    if (o.error) j["error"] = o.error_message;
    return j;
}

inline void write_run_dir(const std::string& dir, const std::vector<MentionTask>& tasks,
                          const BatchResult& batch) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream decisions(fs::path(dir) / "decisions.jsonl");
    std::ofstream traces(fs::path(dir) / "traces.jsonl");
    if (!decisions || !traces) throw Error("cannot write run directory: " + dir);
    for (std::size_t i = 0; i < batch.outcomes.size(); ++i) {
        const LinkOutcome& o = batch.outcomes[i];
        decisions << decision_to_json(o, i < tasks.size() ? tasks[i].gold_id : std::nullopt).dump()
                  << '\n';
        nlohmann::json t;
        t["id"] = o.task_id;
        nlohmann::json stages = nlohmann::json::array();
        for (const auto& s : o.stages) {
            nlohmann::json sj;
            sj["stage"] = s.stage;
            sj["wall_ms"] = s.wall_ms;
            if (!s.note.empty()) sj["note"] = s.note;
            nlohmann::json cands = nlohmann::json::array();
            for (const auto& c : s.candidates) cands.push_back({{"id", c.id}, {"score", c.score}});
            sj["candidates"] = std::move(cands);
            stages.push_back(std::move(sj));
        }
        t["stages"] = std::move(stages);
        t["raw_samples"] = o.decision.raw_samples;
        traces << t.dump() << '\n';
    }
    nlohmann::json funnel;
    funnel["funnel"] = to_json(batch.funnel);
    funnel["timing"] = {{"mean_wall_s", batch.timing.mean_wall_s},
                        {"mean_tokens_per_sample", batch.timing.mean_tokens_per_sample},
                        {"total_prompt_tokens", batch.timing.total_prompt_tokens},
                        {"total_completion_tokens", batch.timing.total_completion_tokens},
                        {"total_samples", batch.timing.total_samples}};
    std::ofstream fj(fs::path(dir) / "funnel.json");
    fj << funnel.dump(2) << '\n';
}

}  // namespace linkforge
