#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "linkforge/errors.hpp"
#include "linkforge/pipeline.hpp"

namespace linkforge {

// Fraction of decisions matching gold; a NONE decision matches an UNK gold.
inline double accuracy(const std::vector<std::optional<std::string>>& decisions,
                       const std::vector<std::string>& golds) {
    if (decisions.size() != golds.size()) throw Error("decisions/golds size mismatch");
    if (decisions.empty()) throw EmptySet("accuracy over an empty set");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (golds[i] == kUnkGoldId) {
            if (!decisions[i].has_value()) ++correct;
        } else if (decisions[i].has_value() && *decisions[i] == golds[i]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(decisions.size());
}

// Accuracy restricted to mentions whose gold is among the first gate_n pool entries.
inline double normalized_accuracy(const std::vector<std::optional<std::string>>& decisions,
                                  const std::vector<std::string>& golds,
                                  const std::vector<std::vector<std::string>>& pools,
                                  std::size_t gate_n) {
    if (decisions.size() != golds.size() || decisions.size() != pools.size())
        throw Error("decisions/golds/pools size mismatch");
    std::vector<std::optional<std::string>> gated_decisions;
    std::vector<std::string> gated_golds;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const auto& pool = pools[i];
        const std::size_t limit = std::min(gate_n, pool.size());
        bool gated = false;
        for (std::size_t p = 0; p < limit; ++p) {
            if (pool[p] == golds[i]) {
                gated = true;
                break;
            }
        }
        if (gated) {
            gated_decisions.push_back(decisions[i]);
            gated_golds.push_back(golds[i]);
        }
    }
    if (gated_decisions.empty()) throw EmptyGatedSet("no mention passes the candidate gate");
    return accuracy(gated_decisions, gated_golds);
}

// Accuracy over UNK-gold and entity-gold subsets; an empty subset reports absent.
inline std::pair<std::optional<double>, std::optional<double>> unk_split_accuracy(
    const std::vector<std::optional<std::string>>& decisions,
    const std::vector<std::string>& golds) {
    if (decisions.size() != golds.size()) throw Error("decisions/golds size mismatch");
    std::size_t unk_n = 0, unk_correct = 0, ent_n = 0, ent_correct = 0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (golds[i] == kUnkGoldId) {
            ++unk_n;
            if (!decisions[i].has_value()) ++unk_correct;
        } else {
            ++ent_n;
            if (decisions[i].has_value() && *decisions[i] == golds[i]) ++ent_correct;
        }
    }
    std::pair<std::optional<double>, std::optional<double>> out;
    if (unk_n > 0) out.first = static_cast<double>(unk_correct) / static_cast<double>(unk_n);
    if (ent_n > 0) out.second = static_cast<double>(ent_correct) / static_cast<double>(ent_n);
    return out;
}

// Mention categories by surface/name overlap. Rule order matters: a name identical to
// the mention is HO even though it also satisfies the AS substring condition.
enum class MentionCategory { HO, MC, AS, LO };

inline const char* to_string(MentionCategory c) {
    switch (c) {
        case MentionCategory::HO: return "HO";
        case MentionCategory::MC: return "MC";
        case MentionCategory::AS: return "AS";
        case MentionCategory::LO: return "LO";
    }
    return "?";
}

inline MentionCategory categorize_mention(const std::string& surface,
                                          const std::string& gold_name) {
    const std::string s = collapse_whitespace(surface);
    const std::string n = collapse_whitespace(gold_name);
    if (s == n) return MentionCategory::HO;
    // Disambiguation phrase operationalized as a parenthesized suffix.
    if (n.size() > s.size() + 3 && n.compare(0, s.size(), s) == 0 &&
        n.compare(s.size(), 2, " (") == 0 && n.back() == ')')
        return MentionCategory::MC;
    if (!s.empty() && n.find(s) != std::string::npos) return MentionCategory::AS;
    return MentionCategory::LO;
}

// Half-width of the 95% Wald (normal-approximation) binomial confidence interval.
inline double wald_ci(double p, std::size_t n) {
    if (p < 0.0 || p > 1.0) throw Error("p must be in [0, 1]");
    if (n < 1) throw Error("n must be >= 1");
    return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

struct DomainCount {
    std::string domain;
    std::size_t correct = 0;
    std::size_t total = 0;

    double accuracy() const {
        return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    }
};

struct Aggregate {
    double macro = 0.0;  // unweighted mean of per-domain accuracies
    double micro = 0.0;  // pooled correct / total
};

inline Aggregate aggregate(const std::vector<DomainCount>& domains) {
    if (domains.empty()) throw EmptySet("aggregate over zero domains");
    Aggregate a;
    std::size_t correct = 0, total = 0;
    for (const auto& d : domains) {
        a.macro += d.accuracy();
        correct += d.correct;
        total += d.total;
    }
    a.macro /= static_cast<double>(domains.size());
    a.micro = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    return a;
}

// ---- ablation drivers ----------------------------------------------------------------

struct OrderingResult {
    Ordering ordering{};
    std::size_t n = 0;
    double accuracy = 0.0;
    std::optional<double> selection_accuracy;  // over mentions whose gold reached top-k
};

// Runs selection once per ordering over identical top-k sets (rerank scores come from
// the shared cache), mirroring the positional-bias harness.
inline std::vector<OrderingResult> ordering_ablation(const std::vector<MentionTask>& tasks,
                                                     PipelineConfig cfg,
                                                     const std::vector<Ordering>& orderings,
                                                     const PipelineDeps& deps) {
    for (Ordering o : orderings) {
        if (o == Ordering::answer_first || o == Ordering::answer_last) {
            for (const auto& t : tasks)
                if (!t.gold_id)
                    throw OrderingNeedsGold("ordering " + std::string(to_string(o)) +
                                            " requires gold labels for every task");
        }
    }
    std::vector<OrderingResult> rows;
    for (Ordering o : orderings) {
        PipelineConfig run_cfg = cfg;
        run_cfg.selection.ordering = o;
        BatchResult batch = link_batch(tasks, run_cfg, deps);
        OrderingResult row;
        row.ordering = o;
        std::size_t with_gold = 0, correct = 0;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (!tasks[i].gold_id) continue;
            ++with_gold;
            if (batch.outcomes[i].funnel.selected_correct) ++correct;
        }
        if (with_gold == 0) throw EmptySet("ordering_ablation requires gold labels");
        row.n = with_gold;
        row.accuracy = static_cast<double>(correct) / static_cast<double>(with_gold);
        if (batch.funnel.retained_after_rerank > 0)
            row.selection_accuracy = static_cast<double>(batch.funnel.correct_after_selection) /
                                     static_cast<double>(batch.funnel.retained_after_rerank);
        rows.push_back(row);
    }
    return rows;
}

struct SelfConsistencyRow {
    int k_sc = 0;
    double selection_accuracy = 0.0;  // over gated decisions (gold reached top-k)
    double invalid_rate = 0.0;
    std::size_t n = 0;
};

// Revotes stored sample lists truncated to each k_sc (prefix rule); no extra inference.
inline std::vector<SelfConsistencyRow> sweep_self_consistency(
    const std::vector<LinkOutcome>& outcomes, const std::vector<MentionTask>& tasks,
    const std::vector<int>& ksc_values, bool include_none) {
    if (outcomes.size() != tasks.size()) throw Error("outcomes/tasks size mismatch");
    std::vector<std::size_t> gated;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!tasks[i].gold_id || outcomes[i].error) continue;
        if (!outcomes[i].funnel.gold_in_topk) continue;
        if (outcomes[i].decision.parsed.empty()) continue;  // selection never sampled
        gated.push_back(i);
    }
    std::vector<SelfConsistencyRow> rows;
    for (int k_sc : ksc_values) {
        if (k_sc < 1) throw Error("k_sc must be >= 1");
        SelfConsistencyRow row;
        row.k_sc = k_sc;
        row.n = gated.size();
        std::size_t correct = 0, invalid = 0, samples = 0;
        for (std::size_t i : gated) {
            const auto& decision = outcomes[i].decision;
            if (static_cast<std::size_t>(k_sc) > decision.parsed.size())
                throw RequestedExceedsStored("k_sc " + std::to_string(k_sc) + " exceeds the " +
                                             std::to_string(decision.parsed.size()) +
                                             " stored samples");
            std::vector<ParsedAnswer> prefix(decision.parsed.begin(),
                                             decision.parsed.begin() + k_sc);
            for (const auto& p : prefix) {
                ++samples;
                if (p.kind == ParsedAnswer::Kind::invalid) ++invalid;
            }
            VoteResult vote = majority_vote(prefix, decision.presented_ids,
                                            decision.top_ranked_id, include_none);
            LinkingDecision revoted;
            revoted.result = vote.result;
            if (decision_correct(revoted, *tasks[i].gold_id)) ++correct;
        }
        if (!gated.empty())
            row.selection_accuracy = static_cast<double>(correct) / static_cast<double>(gated.size());
        if (samples > 0) row.invalid_rate = static_cast<double>(invalid) / static_cast<double>(samples);
        rows.push_back(row);
    }
    return rows;
}

// ---- report ----------------------------------------------------------------------------

struct CategoryStat {
    std::size_t n = 0;
    std::size_t correct = 0;

    double accuracy() const {
        return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
    }
};

struct EvalReport {
    std::size_t total = 0;
    std::size_t with_gold = 0;
    double overall_accuracy = 0.0;
    double overall_ci = 0.0;
    std::size_t gate_n = 0;
    std::size_t gated_count = 0;
    std::optional<double> normalized_accuracy_value;
    double normalized_ci = 0.0;
    std::size_t unk_count = 0;
    std::optional<double> unk_accuracy;
    double unk_ci = 0.0;
    std::size_t non_unk_count = 0;
    std::optional<double> non_unk_accuracy;
    double non_unk_ci = 0.0;
    std::vector<DomainCount> domains;
    double macro_accuracy = 0.0;
    double micro_accuracy = 0.0;
    std::map<std::string, CategoryStat> categories;  // HO / MC / AS / LO
    FunnelSummary funnel;
    VoteDiagnostics diagnostics;
    std::string config_hash;
};

inline EvalReport evaluate(const std::vector<MentionTask>& tasks,
                           const std::vector<LinkOutcome>& outcomes, const KnowledgeBase& kb,
                           const PipelineConfig& cfg) {
    if (tasks.size() != outcomes.size()) throw Error("tasks/outcomes size mismatch");
    EvalReport report;
    report.total = tasks.size();
    report.gate_n = static_cast<std::size_t>(cfg.gate_n);
    report.config_hash = config_hash(cfg);

    std::vector<std::optional<std::string>> decisions;
    std::vector<std::string> golds;
    std::vector<std::vector<std::string>> pools;
    std::map<std::string, DomainCount> domain_map;
    std::vector<LinkingDecision> decision_objects;
    std::vector<FunnelRecord> records;

    for (std::size_t i = 0; i < tasks.size(); ++i) {
        records.push_back(outcomes[i].funnel);
        decision_objects.push_back(outcomes[i].decision);
        if (!tasks[i].gold_id) continue;
        decisions.push_back(outcomes[i].decision.result);
        golds.push_back(*tasks[i].gold_id);
        pools.push_back(outcomes[i].candidate_pool);

        const bool correct = outcomes[i].funnel.selected_correct;
        auto& dom = domain_map[tasks[i].domain.empty() ? "all" : tasks[i].domain];
        dom.domain = tasks[i].domain.empty() ? "all" : tasks[i].domain;
        dom.total += 1;
        dom.correct += correct ? 1 : 0;

        if (*tasks[i].gold_id != kUnkGoldId) {
            if (const Entity* gold = kb.find(*tasks[i].gold_id)) {
                const std::string surface = tasks[i].text.substr(
                    tasks[i].mention_start, tasks[i].mention_end - tasks[i].mention_start);
                auto& cat = report.categories[to_string(categorize_mention(surface, gold->name))];
                cat.n += 1;
                cat.correct += correct ? 1 : 0;
            }
        }
    }

    report.with_gold = golds.size();
    if (!golds.empty()) {
        report.overall_accuracy = accuracy(decisions, golds);
        report.overall_ci = wald_ci(report.overall_accuracy, golds.size());
        try {
            report.normalized_accuracy_value =
                normalized_accuracy(decisions, golds, pools, report.gate_n);
            report.gated_count = 0;
            for (std::size_t i = 0; i < golds.size(); ++i) {
                const std::size_t limit = std::min(report.gate_n, pools[i].size());
                for (std::size_t p = 0; p < limit; ++p) {
                    if (pools[i][p] == golds[i]) {
                        ++report.gated_count;
                        break;
                    }
                }
            }
            if (report.gated_count > 0)
                report.normalized_ci = wald_ci(*report.normalized_accuracy_value, report.gated_count);
        } catch (const EmptyGatedSet&) {
            report.normalized_accuracy_value.reset();
        }
        auto [unk, non_unk] = unk_split_accuracy(decisions, golds);
        report.unk_accuracy = unk;
        report.non_unk_accuracy = non_unk;
        for (const auto& g : golds)
            (g == kUnkGoldId ? report.unk_count : report.non_unk_count) += 1;
        if (unk && report.unk_count > 0) report.unk_ci = wald_ci(*unk, report.unk_count);
        if (non_unk && report.non_unk_count > 0)
            report.non_unk_ci = wald_ci(*non_unk, report.non_unk_count);

        for (auto& [name, dom] : domain_map) report.domains.push_back(dom);
        Aggregate agg = aggregate(report.domains);
        report.macro_accuracy = agg.macro;
        report.micro_accuracy = agg.micro;
    }

    report.funnel = funnel_summary(records);
    report.diagnostics = vote_diagnostics(decision_objects);
    return report;
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["total"] = r.total;
    j["with_gold"] = r.with_gold;
    j["overall_accuracy"] = r.overall_accuracy;
    j["overall_ci95"] = r.overall_ci;
    j["gate_n"] = r.gate_n;
    j["gated_count"] = r.gated_count;
    j["normalized_accuracy"] = r.normalized_accuracy_value.has_value()
                                   ? nlohmann::json(*r.normalized_accuracy_value)
                                   : nlohmann::json(nullptr);
    j["normalized_ci95"] = r.normalized_ci;
    j["unk_count"] = r.unk_count;
    j["unk_accuracy"] =
        r.unk_accuracy.has_value() ? nlohmann::json(*r.unk_accuracy) : nlohmann::json(nullptr);
    j["unk_ci95"] = r.unk_ci;
    j["non_unk_count"] = r.non_unk_count;
    j["non_unk_accuracy"] = r.non_unk_accuracy.has_value() ? nlohmann::json(*r.non_unk_accuracy)
                                                           : nlohmann::json(nullptr);
    j["non_unk_ci95"] = r.non_unk_ci;
    nlohmann::json domains = nlohmann::json::array();
    for (const auto& d : r.domains)
        domains.push_back({{"domain", d.domain},
                           {"n", d.total},
                           {"correct", d.correct},
                           {"accuracy", d.accuracy()}});
    j["domains"] = std::move(domains);
    j["macro_accuracy"] = r.macro_accuracy;
    j["micro_accuracy"] = r.micro_accuracy;
    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [name, stat] : r.categories)
        cats[name] = {{"n", stat.n}, {"correct", stat.correct}, {"accuracy", stat.accuracy()}};
    j["categories"] = std::move(cats);
    j["funnel"] = to_json(r.funnel);
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [distinct, count] : r.diagnostics.distinct_answer_histogram)
        hist[std::to_string(distinct)] = count;
    j["diagnostics"] = {{"distinct_answer_histogram", std::move(hist)},
                        {"invalid_rate", r.diagnostics.invalid_rate},
                        {"total_samples", r.diagnostics.total_samples}};
    j["config_hash"] = r.config_hash;
    return j;
}

namespace detail {

inline std::string pct(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v * 100.0;
    return os.str();
}

inline std::string pct_opt(const std::optional<double>& v) { return v ? pct(*v) : "-"; }

}  // namespace detail

inline std::string render_text(const EvalReport& r) {
    std::ostringstream os;
    os << "mentions           " << r.total << " (" << r.with_gold << " with gold)\n";
    os << "overall accuracy   " << detail::pct(r.overall_accuracy) << " +/- "
       << detail::pct(r.overall_ci) << "\n";
    os << "normalized acc     " << detail::pct_opt(r.normalized_accuracy_value) << " (gate_n="
       << r.gate_n << ", gated=" << r.gated_count << ")\n";
    os << "UNK accuracy       " << detail::pct_opt(r.unk_accuracy) << " (n=" << r.unk_count
       << ")\n";
    os << "non-UNK accuracy   " << detail::pct_opt(r.non_unk_accuracy) << " (n=" << r.non_unk_count
       << ")\n";
    os << "macro / micro      " << detail::pct(r.macro_accuracy) << " / "
       << detail::pct(r.micro_accuracy) << "\n";
    if (r.domains.size() > 1) {
        os << "domains:\n";
        for (const auto& d : r.domains)
            os << "  " << std::left << std::setw(20) << d.domain << detail::pct(d.accuracy())
               << " (n=" << d.total << ")\n";
    }
    if (!r.categories.empty()) {
        os << "categories:\n";
        for (const auto& [name, stat] : r.categories)
            os << "  " << std::left << std::setw(4) << name << detail::pct(stat.accuracy())
               << " (n=" << stat.n << ")\n";
    }
    os << "funnel             " << r.funnel.entering_retrieval << " -> "
       << r.funnel.retained_after_retrieval << " -> " << r.funnel.retained_after_rerank << " -> "
       << r.funnel.correct_after_selection << " (losses " << r.funnel.lost_at_retrieval << "/"
       << r.funnel.lost_at_rerank << "/" << r.funnel.lost_at_selection << ")\n";
    os << "invalid rate       " << detail::pct(r.diagnostics.invalid_rate) << " over "
       << r.diagnostics.total_samples << " samples\n";
    os << "config hash        " << r.config_hash << "\n";
    return os.str();
}

// ---- CSV exports ----------------------------------------------------------------------

inline std::string orderings_csv(const std::vector<OrderingResult>& rows) {
    std::ostringstream os;
    os << "ordering,n,accuracy,selection_accuracy\n";
    for (const auto& row : rows) {
        os << to_string(row.ordering) << ',' << row.n << ',' << row.accuracy << ',';
        if (row.selection_accuracy) os << *row.selection_accuracy;
        os << '\n';
    }
    return os.str();
}

inline std::string ksweep_csv(const std::vector<KSweepRow>& rows) {
    std::ostringstream os;
    os << "k,overall_accuracy,selection_accuracy,accuracy_at_k\n";
    for (const auto& row : rows) {
        os << row.k << ',' << row.overall_accuracy << ',';
        if (row.selection_accuracy) os << *row.selection_accuracy;
        os << ',';
        if (row.accuracy_at_k) os << *row.accuracy_at_k;
        os << '\n';
    }
    return os.str();
}

inline std::string self_consistency_csv(const std::vector<SelfConsistencyRow>& rows) {
    std::ostringstream os;
    os << "k_sc,n,selection_accuracy,invalid_rate\n";
    for (const auto& row : rows)
        os << row.k_sc << ',' << row.n << ',' << row.selection_accuracy << ',' << row.invalid_rate
           << '\n';
    return os.str();
}

}  // namespace linkforge
