#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "linkforge/errors.hpp"
#include "linkforge/gateway.hpp"
#include "linkforge/kb.hpp"
#include "linkforge/rerank.hpp"

namespace linkforge {

// Candidate list orderings for the selection prompt. answer_first/answer_last are oracle
// orderings for the positional-bias harness and require a known gold. The none_* values
// keep the reranker order and move only the "0. None of the candidates" line.
enum class Ordering {
    reranker,
    bm25,
    random,
    answer_first,
    answer_last,
    none_first,
    none_last,
    none_random,
};

inline const char* to_string(Ordering o) {
    switch (o) {
        case Ordering::reranker: return "reranker";
        case Ordering::bm25: return "bm25";
        case Ordering::random: return "random";
        case Ordering::answer_first: return "answer_first";
        case Ordering::answer_last: return "answer_last";
        case Ordering::none_first: return "none_first";
        case Ordering::none_last: return "none_last";
        case Ordering::none_random: return "none_random";
    }
    return "?";
}

inline Ordering ordering_from_string(const std::string& s) {
    for (Ordering o : {Ordering::reranker, Ordering::bm25, Ordering::random,
                       Ordering::answer_first, Ordering::answer_last, Ordering::none_first,
                       Ordering::none_last, Ordering::none_random})
        if (s == to_string(o)) return o;
    throw Error("unknown ordering: " + s);
}

struct SelectionConfig {
    int num_samples = 10;  // self-consistency sample count k_sc
    bool include_none = false;
    Ordering ordering = Ordering::reranker;
    std::uint64_t ordering_seed = 0;
    double temperature = 0.7;
    int max_output_tokens = 4096;
    bool reasoning_enabled = true;
    bool include_descriptions = true;
    int max_description_chars = 0;  // 0 = no truncation
};

struct ParsedAnswer {
    enum class Kind { index, none, invalid };
    Kind kind = Kind::invalid;
    int index = 0;  // valid when kind == index

    static ParsedAnswer make_index(int i) { return {Kind::index, i}; }
    static ParsedAnswer make_none() { return {Kind::none, 0}; }
    static ParsedAnswer make_invalid() { return {Kind::invalid, 0}; }

    bool operator==(const ParsedAnswer&) const = default;

    std::string str() const {
        switch (kind) {
            case Kind::index: return std::to_string(index);
            case Kind::none: return "NONE";
            case Kind::invalid: return "INVALID";
        }
        return "?";
    }
};

// Extracts the model's final index choice. Accepts `answer: N`, `"answer": N` and
// `answer N` (case-insensitive, single or double quotes); the last occurrence wins, so
// any reasoning prefix is skipped. 0 maps to NONE only when the None option was offered.
inline ParsedAnswer parse_answer(const std::string& completion, int max_index,
                                 bool include_none) {
    static const std::regex pattern(R"(["']?answer["']?\s*(?::\s*|\s+)["']?(\d+))",
                                    std::regex::icase);
    std::optional<long long> last;
    for (auto it = std::sregex_iterator(completion.begin(), completion.end(), pattern);
         it != std::sregex_iterator(); ++it) {
        const std::string digits = (*it)[1].str();
        if (digits.size() > 9) {
            last = -1;  // syntactically an answer, numerically out of any range
            continue;
        }
        last = std::stoll(digits);
    }
    if (!last) return ParsedAnswer::make_invalid();
    const long long lo = include_none ? 0 : 1;
    if (*last < lo || *last > max_index) return ParsedAnswer::make_invalid();
    if (*last == 0) return ParsedAnswer::make_none();
    return ParsedAnswer::make_index(static_cast<int>(*last));
}

struct SelectionPrompt {
    std::string system_text;
    std::string user_text;
    std::vector<std::string> presented_ids;  // presented index i (1-based) -> id at [i-1]
};

namespace detail {

// Deterministic shuffle seeded by (seed, context) so batch order cannot influence it.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
    std::uint64_t state = seed ^ 0x6a09e667f3bcc909ULL;
    auto next = [&state]() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[next() % i]);
}

}  // namespace detail

inline SelectionPrompt build_selection_prompt(const MarkedContext& ctx, const CandidateSet& topk,
                                              const KnowledgeBase& kb, const SelectionConfig& cfg,
                                              const std::optional<std::string>& gold_id =
                                                  std::nullopt) {
    if (topk.empty()) throw Error("selection requires a non-empty top-k set");

    std::vector<const Candidate*> order;
    order.reserve(topk.items.size());
    for (const auto& c : topk.items) order.push_back(&c);

    switch (cfg.ordering) {
        case Ordering::reranker:
        case Ordering::none_first:
        case Ordering::none_last:
        case Ordering::none_random:
            break;  // keep the incoming (reranker) order
        case Ordering::bm25:
            std::stable_sort(order.begin(), order.end(), [](const Candidate* a, const Candidate* b) {
                return a->retrieval_score > b->retrieval_score;
            });
            break;
        case Ordering::random:
            detail::seeded_shuffle(order, cfg.ordering_seed ^ fnv1a64(ctx.rendered));
            break;
        case Ordering::answer_first:
        case Ordering::answer_last: {
            if (!gold_id)
                throw OrderingNeedsGold("ordering " + std::string(to_string(cfg.ordering)) +
                                        " requires a gold entity");
            auto it = std::find_if(order.begin(), order.end(),
                                   [&](const Candidate* c) { return c->entity_id == *gold_id; });
            if (it != order.end()) {
                const Candidate* gold = *it;
                order.erase(it);
                if (cfg.ordering == Ordering::answer_first)
                    order.insert(order.begin(), gold);
                else
                    order.push_back(gold);
            }
            break;
        }
    }

    // Position of the None line among size()+1 lines: 0 = first (the default).
    std::size_t none_pos = 0;
    if (cfg.include_none) {
        if (cfg.ordering == Ordering::none_last)
            none_pos = order.size();
        else if (cfg.ordering == Ordering::none_random)
            none_pos = (cfg.ordering_seed ^ fnv1a64(ctx.rendered) ^ 0x5bd1e995) % (order.size() + 1);
    }

    SelectionPrompt prompt;
    prompt.system_text = prompts::kSelectionSystem;
    std::string body;
    int next_index = 1;
    for (std::size_t slot = 0; slot <= order.size(); ++slot) {
        if (cfg.include_none && slot == none_pos) {
            body += prompts::kNoneOptionLine;
            body += '\n';
        }
        if (slot == order.size()) break;
        const Entity& e = kb.get(order[slot]->entity_id);
        std::string text;
        if (!cfg.include_descriptions) {
            text = e.name;
        } else if (cfg.max_description_chars > 0 &&
                   e.description.size() > static_cast<std::size_t>(cfg.max_description_chars)) {
            Entity clipped = e;
            clipped.description.resize(static_cast<std::size_t>(cfg.max_description_chars));
            text = verbalize_entity(clipped);
        } else {
            text = verbalize_entity(e);
        }
        body += std::to_string(next_index) + ". " + text + '\n';
        prompt.presented_ids.push_back(e.id);
        ++next_index;
    }
    while (!body.empty() && body.back() == '\n') body.pop_back();
    prompt.user_text = ctx.rendered + "\n\n" + body;
    return prompt;
}

struct VoteResult {
    std::optional<std::string> result;  // nullopt = the None sentinel
    bool fallback_used = false;
    std::map<std::string, int> vote_counts;  // keys "1".."k", "NONE", "INVALID"
};

// Majority vote over parsed answers. INVALID votes abstain; ties break toward the best
// presented rank, with NONE ranked 0 (best). If every vote is INVALID the top reranked
// candidate wins and the decision is flagged.
inline VoteResult majority_vote(const std::vector<ParsedAnswer>& votes,
                                const std::vector<std::string>& presented_ids,
                                const std::string& top_ranked_id, bool include_none) {
    if (votes.empty()) throw Error("majority_vote over an empty vote list");
    VoteResult out;
    std::map<int, int> tally;  // rank key: 0 = NONE, i = presented index i
    for (const auto& v : votes) {
        out.vote_counts[v.str()] += 1;
        if (v.kind == ParsedAnswer::Kind::invalid) continue;
        const int key = v.kind == ParsedAnswer::Kind::none ? 0 : v.index;
        tally[key] += 1;
    }
    if (tally.empty()) {
        out.result = top_ranked_id;
        out.fallback_used = true;
        return out;
    }
    int best_key = -1;
    int best_count = -1;
    for (const auto& [key, count] : tally) {
        // std::map iterates keys ascending, so on equal counts the earliest
        // presented rank (NONE = 0 first) is kept.
        if (count > best_count) {
            best_count = count;
            best_key = key;
        }
    }
    if (best_key == 0) {
        if (!include_none) throw Error("NONE vote without a None option");
        out.result = std::nullopt;
    } else {
        out.result = presented_ids.at(static_cast<std::size_t>(best_key) - 1);
    }
    return out;
}

struct LinkingDecision {
    std::optional<std::string> result;  // nullopt = the None sentinel
    std::map<std::string, int> vote_counts;
    bool fallback_used = false;
    bool no_candidates = false;
    std::vector<std::string> raw_samples;
    std::vector<ParsedAnswer> parsed;
    std::vector<std::string> presented_ids;
    std::string top_ranked_id;
    int prompt_tokens = 0;
    std::vector<int> sample_tokens;
    double wall_time_s = 0.0;
    bool truncated = false;
};

// One chat request with n = k_sc samples, parsed and majority-voted.
inline LinkingDecision select(const MarkedContext& ctx, const CandidateSet& topk,
                              const KnowledgeBase& kb, const SelectionConfig& cfg,
                              Backend& gateway,
                              const std::optional<std::string>& gold_id = std::nullopt) {
    if (topk.empty()) throw Error("selection requires a non-empty top-k set");
    SelectionPrompt prompt = build_selection_prompt(ctx, topk, kb, cfg, gold_id);

    ChatRequest req;
    req.system_text = prompt.system_text;
    req.user_text = prompt.user_text;
    req.temperature = cfg.temperature;
    req.num_samples = std::max(1, cfg.num_samples);
    req.max_tokens = cfg.max_output_tokens;
    req.reasoning_enabled = cfg.reasoning_enabled;

    Stopwatch sw;
    ChatResponse resp = gateway.chat_sample(req);

    LinkingDecision decision;
    decision.presented_ids = prompt.presented_ids;
    decision.top_ranked_id = topk.items.front().entity_id;
    decision.raw_samples = resp.completions;
    decision.prompt_tokens = resp.prompt_tokens;
    decision.sample_tokens = resp.completion_tokens;
    decision.truncated = resp.truncated;
    for (const auto& completion : resp.completions)
        decision.parsed.push_back(parse_answer(
            completion, static_cast<int>(prompt.presented_ids.size()), cfg.include_none));
    VoteResult vote = majority_vote(decision.parsed, decision.presented_ids,
                                    decision.top_ranked_id, cfg.include_none);
    decision.result = vote.result;
    decision.fallback_used = vote.fallback_used;
    decision.vote_counts = vote.vote_counts;
    decision.wall_time_s = sw.seconds();
    return decision;
}

struct VoteDiagnostics {
    std::map<int, int> distinct_answer_histogram;  // distinct non-INVALID answers -> decisions
    double invalid_rate = 0.0;
    std::size_t total_samples = 0;
};

inline VoteDiagnostics vote_diagnostics(const std::vector<LinkingDecision>& decisions) {
    VoteDiagnostics d;
    std::size_t invalid = 0;
    for (const auto& dec : decisions) {
        int distinct = 0;
        for (const auto& [key, count] : dec.vote_counts) {
            if (key == "INVALID") {
                invalid += static_cast<std::size_t>(count);
                continue;
            }
            if (count > 0) ++distinct;
        }
        d.distinct_answer_histogram[distinct] += 1;
        for (const auto& [key, count] : dec.vote_counts)
            d.total_samples += static_cast<std::size_t>(count);
    }
    d.invalid_rate = d.total_samples == 0
                         ? 0.0
                         : static_cast<double>(invalid) / static_cast<double>(d.total_samples);
    return d;
}

}  // namespace linkforge
