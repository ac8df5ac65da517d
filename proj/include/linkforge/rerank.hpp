#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "linkforge/errors.hpp"
#include "linkforge/gateway.hpp"
#include "linkforge/kb.hpp"
#include "linkforge/prompts.hpp"
#include "linkforge/retrieval.hpp"

namespace linkforge {

enum class ScorerKind { generative_yes_no, embedding_cosine, retrieval_passthrough };

inline const char* to_string(ScorerKind kind) {
    switch (kind) {
        case ScorerKind::generative_yes_no: return "generative_yes_no";
        case ScorerKind::embedding_cosine: return "embedding_cosine";
        case ScorerKind::retrieval_passthrough: return "retrieval_passthrough";
    }
    return "?";
}

inline ScorerKind scorer_kind_from_string(const std::string& s) {
    if (s == "generative_yes_no") return ScorerKind::generative_yes_no;
    if (s == "embedding_cosine") return ScorerKind::embedding_cosine;
    if (s == "retrieval_passthrough") return ScorerKind::retrieval_passthrough;
    throw Error("unknown scorer kind: " + s);
}

struct RerankConfig {
    int k = 10;
    std::string instruction_text = prompts::kRerankerInstruction;
    ScorerKind scorer_kind = ScorerKind::generative_yes_no;
};

// softmax(lp_yes, lp_no)_0, computed as the logistic of the logit difference so neither
// exponential can overflow.
inline double score_from_logits(double lp_yes, double lp_no) {
    if (!std::isfinite(lp_yes) || !std::isfinite(lp_no))
        throw NonFiniteInput("yes/no logits must be finite");
    const double d = lp_yes - lp_no;
    if (d >= 0.0) {
        return 1.0 / (1.0 + std::exp(-d));
    }
    const double e = std::exp(d);
    return e / (1.0 + e);
}

// Thread-safe content-addressed cache of yes/no logits, keyed by a hash of
// (instruction, query, document). Persists as line-delimited JSON.
class ScoreCache {
public:
    static std::string key(const std::string& instruction, const std::string& query,
                           const std::string& document) {
        std::uint64_t h = fnv1a64(instruction);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(query, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(document, h);
        return to_hex(h);
    }

    std::optional<YesNoLogits> find(const std::string& k) const {
        std::lock_guard lock(mu_);
        auto it = map_.find(k);
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    void insert(const std::string& k, YesNoLogits logits) {
        std::lock_guard lock(mu_);
        map_.emplace(k, logits);
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return map_.size();
    }

    void save(const std::string& path) const {
        std::lock_guard lock(mu_);
        std::ofstream out(path);
        if (!out) throw Error("cannot write score cache: " + path);
        for (const auto& [k, v] : map_) {
            nlohmann::json j{{"key", k}, {"lp_yes", v.lp_yes}, {"lp_no", v.lp_no}};
            out << j.dump() << '\n';
        }
    }

    void load(const std::string& path) {
        std::ifstream in(path);
        if (!in) return;  // absent cache file is an empty cache
        std::lock_guard lock(mu_);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line);
            map_[j.at("key").get<std::string>()] = {j.at("lp_yes").get<double>(),
                                                    j.at("lp_no").get<double>()};
        }
    }

private:
    mutable std::mutex mu_;
    std::unordered_map<std::string, YesNoLogits> map_;
};

namespace detail {

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DimensionMismatch("cosine over mixed dimensions");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na < 1e-24 || nb < 1e-24) throw ZeroVector("cosine of zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace detail

// Assigns rerank_score to every candidate and sorts descending (stable on ties, so the
// prior retrieval order breaks them). A candidate whose scoring call fails after the
// gateway's own retries scores 0 and is flagged, rather than aborting the mention.
inline CandidateSet rerank(const MarkedContext& ctx, const CandidateSet& cands,
                           const KnowledgeBase& kb, const RerankConfig& cfg, Backend& gateway,
                           ScoreCache* cache = nullptr, int max_concurrency = 8) {
    if (cands.empty()) throw Error("rerank requires a non-empty candidate set");
    CandidateSet out = cands;

    switch (cfg.scorer_kind) {
        case ScorerKind::retrieval_passthrough: {
            for (auto& c : out.items) c.rerank_score = 1.0 / (1.0 + c.retrieval_rank);
            break;
        }
        case ScorerKind::embedding_cosine: {
            // Query = mention surface, matching the dense retriever's query; ranking then
            // agrees with a dense search restricted to this candidate subset.
            std::vector<std::string> texts;
            texts.push_back(ctx.surface());
            for (const auto& c : out.items) texts.push_back(verbalize_entity(kb.get(c.entity_id)));
            auto vectors = gateway.embed(texts);
            for (std::size_t i = 0; i < out.items.size(); ++i) {
                const double cos = detail::cosine(vectors[0], vectors[i + 1]);
                out.items[i].rerank_score = score_from_logits(cos, 0.0);
            }
            break;
        }
        case ScorerKind::generative_yes_no: {
            if (cfg.instruction_text.empty())
                throw Error("generative scorer requires a non-empty instruction");
            parallel_for(out.items.size(), max_concurrency, [&](std::size_t i) {
                Candidate& c = out.items[i];
                const std::string document = verbalize_entity(kb.get(c.entity_id));
                const std::string cache_key =
                    cache ? ScoreCache::key(cfg.instruction_text, ctx.rendered, document)
                          : std::string();
                if (cache) {
                    if (auto hit = cache->find(cache_key)) {
                        c.rerank_score = score_from_logits(hit->lp_yes, hit->lp_no);
                        return;
                    }
                }
                try {
                    YesNoLogits logits =
                        gateway.score_yes_no({cfg.instruction_text, ctx.rendered, document});
                    if (cache) cache->insert(cache_key, logits);
                    c.rerank_score = score_from_logits(logits.lp_yes, logits.lp_no);
                } catch (const std::exception&) {
                    c.rerank_score = 0.0;
                    c.scoring_failed = true;
                }
            });
            break;
        }
    }

    std::stable_sort(out.items.begin(), out.items.end(), [](const Candidate& a, const Candidate& b) {
        return a.rerank_score.value_or(0.0) > b.rerank_score.value_or(0.0);
    });
    out.provenance = cands.provenance + "+rerank";
    return out;
}

// First min(k, size) candidates of a score-sorted set. presented_index is assigned
// 1..m here (0 stays reserved for the None option); prompt construction reassigns it
// when an ordering permutes the list.
inline CandidateSet top_k(const CandidateSet& cands, std::size_t k) {
    CandidateSet out;
    out.mention_id = cands.mention_id;
    out.provenance = cands.provenance;
    const std::size_t m = std::min(k, cands.items.size());
    out.items.assign(cands.items.begin(), cands.items.begin() + static_cast<std::ptrdiff_t>(m));
    for (std::size_t i = 0; i < out.items.size(); ++i)
        out.items[i].presented_index = static_cast<int>(i) + 1;
    return out;
}

struct RankedItem {
    std::vector<std::string> ranked_ids;  // post-rerank order
    std::string gold_id;
    bool gated = false;  // gold was in the pre-rerank candidate pool
};

// Fraction of gated items whose gold appears within the top k of the reranked order.
inline double accuracy_at_k(const std::vector<RankedItem>& items, std::size_t k) {
    std::size_t gated = 0;
    std::size_t hit = 0;
    for (const auto& item : items) {
        if (!item.gated) continue;
        ++gated;
        const std::size_t limit = std::min(k, item.ranked_ids.size());
        for (std::size_t i = 0; i < limit; ++i) {
            if (item.ranked_ids[i] == item.gold_id) {
                ++hit;
                break;
            }
        }
    }
    if (gated == 0) throw EmptyGatedSet("accuracy_at_k over an empty gated set");
    return static_cast<double>(hit) / static_cast<double>(gated);
}

}  // namespace linkforge
