#include <catch2/catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "linkforge/eval.hpp"

using namespace linkforge;

namespace {

std::optional<std::string> some(const std::string& s) { return s; }
const std::optional<std::string> kNone = std::nullopt;

}  // namespace

TEST_CASE("accuracy counts matches, treating NONE as the UNK answer") {
    CHECK(accuracy({some("a"), some("b")}, {"a", "b"}) == 1.0);
    CHECK(accuracy({some("a"), some("x"), some("b"), some("x"), some("c"), some("x"), some("d"),
                    some("x"), some("e"), some("f")},
                   {"a", "q", "b", "q", "c", "q", "d", "q", "e", "f"}) == Catch::Approx(0.6));
    CHECK(accuracy({kNone}, {kUnkGoldId}) == 1.0);
    CHECK(accuracy({kNone}, {"a"}) == 0.0);
    CHECK_THROWS_AS(accuracy({}, {}), EmptySet);
}

TEST_CASE("normalized_accuracy restricts to the gated subset") {
    // 10 mentions, 8 gated, 6 of those correct -> 0.75
    std::vector<std::optional<std::string>> decisions;
    std::vector<std::string> golds;
    std::vector<std::vector<std::string>> pools;
    for (int i = 0; i < 10; ++i) {
        golds.push_back("g" + std::to_string(i));
        const bool gated = i < 8;
        const bool correct = i < 6;
        decisions.push_back(correct ? some(golds.back()) : some("wrong"));
        pools.push_back(gated ? std::vector<std::string>{"x", golds.back(), "y"}
                              : std::vector<std::string>{"x", "y"});
    }
    CHECK(normalized_accuracy(decisions, golds, pools, 64) == Catch::Approx(0.75));
}

TEST_CASE("normalized_accuracy equals plain accuracy when the gate is vacuous") {
    std::vector<std::optional<std::string>> decisions = {some("a"), some("z"), some("c")};
    std::vector<std::string> golds = {"a", "b", "c"};
    std::vector<std::vector<std::string>> pools = {{"a"}, {"b"}, {"c"}};
    CHECK(normalized_accuracy(decisions, golds, pools, 5) ==
          Catch::Approx(accuracy(decisions, golds)));
}

TEST_CASE("normalized_accuracy honors the gate boundary and rejects empty gates") {
    std::vector<std::optional<std::string>> decisions = {some("g")};
    std::vector<std::string> golds = {"g"};
    std::vector<std::vector<std::string>> deep_pool = {{"a", "b", "c", "g"}};
    CHECK(normalized_accuracy(decisions, golds, deep_pool, 4) == 1.0);
    CHECK_THROWS_AS(normalized_accuracy(decisions, golds, deep_pool, 3), EmptyGatedSet);
}

TEST_CASE("unk_split_accuracy: predict-NONE-always gets UNK 1.0, non-UNK 0.0") {
    std::vector<std::optional<std::string>> decisions(6, kNone);
    std::vector<std::string> golds = {kUnkGoldId, "a", kUnkGoldId, "b", "c", kUnkGoldId};
    auto [unk, non_unk] = unk_split_accuracy(decisions, golds);
    REQUIRE(unk.has_value());
    REQUIRE(non_unk.has_value());
    CHECK(*unk == 1.0);
    CHECK(*non_unk == 0.0);
}

TEST_CASE("unk_split_accuracy reports an absent side when a subset is empty") {
    auto [unk, non_unk] = unk_split_accuracy({some("a")}, {"a"});
    CHECK_FALSE(unk.has_value());
    REQUIRE(non_unk.has_value());
    CHECK(*non_unk == 1.0);
}

TEST_CASE("unk_split_accuracy matches the counting oracle on a scripted split") {
    fixtures::Rng rng(5);
    std::vector<std::optional<std::string>> decisions;
    std::vector<std::string> golds;
    std::size_t unk_c = 0, unk_n = 0, ent_c = 0, ent_n = 0;
    for (int i = 0; i < 100; ++i) {
        if (rng.unit() < 0.5) {
            golds.push_back(kUnkGoldId);
            ++unk_n;
            if (rng.unit() < 0.3) {
                decisions.push_back(kNone);
                ++unk_c;
            } else {
                decisions.push_back(some("e"));
            }
        } else {
            golds.push_back("g" + std::to_string(i));
            ++ent_n;
            if (rng.unit() < 0.6) {
                decisions.push_back(some(golds.back()));
                ++ent_c;
            } else {
                decisions.push_back(kNone);
            }
        }
    }
    auto [unk, non_unk] = unk_split_accuracy(decisions, golds);
    CHECK(*unk == Catch::Approx(static_cast<double>(unk_c) / unk_n));
    CHECK(*non_unk == Catch::Approx(static_cast<double>(ent_c) / ent_n));
}

TEST_CASE("categorize_mention follows the documented rule order") {
    CHECK(categorize_mention("Batman", "Batman (Lego)") == MentionCategory::MC);
    CHECK(categorize_mention("Paris", "Paris") == MentionCategory::HO);
    CHECK(categorize_mention("Lee", "Ann Lee") == MentionCategory::AS);
    CHECK(categorize_mention("Rijsel", "Lille") == MentionCategory::LO);
    // identity wins over the substring rule
    CHECK(categorize_mention("X", "X") == MentionCategory::HO);
    // parenthesized suffix must be non-empty and terminal
    CHECK(categorize_mention("Batman", "Batman ()") != MentionCategory::MC);
    CHECK(categorize_mention("Batman", "Batman (Lego) II") == MentionCategory::AS);
    // comparisons are whitespace-normalized but case-sensitive
    CHECK(categorize_mention("batman", "Batman") == MentionCategory::LO);
    CHECK(categorize_mention("Ann  Lee", "Ann Lee") == MentionCategory::HO);
}

TEST_CASE("wald_ci reproduces the published interval and the hand values") {
    CHECK(wald_ci(0.2675, 1824) == Catch::Approx(0.0203).margin(5e-5));
    CHECK(wald_ci(0.0, 50) == 0.0);
    CHECK(wald_ci(0.5, 100) == Catch::Approx(0.098).margin(5e-4));
}

TEST_CASE("wald_ci is symmetric in p and maximal at one half") {
    fixtures::Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const double p = rng.unit();
        const std::size_t n = 1 + rng.below(5000);
        CHECK(wald_ci(p, n) == Catch::Approx(wald_ci(1.0 - p, n)).margin(1e-15));
        CHECK(wald_ci(p, n) <= wald_ci(0.5, n) + 1e-15);
    }
    CHECK_THROWS_AS(wald_ci(1.5, 10), Error);
}

TEST_CASE("aggregate computes macro and micro averages") {
    auto agg = aggregate({{"a", 9, 10}, {"b", 45, 90}});
    CHECK(agg.macro == Catch::Approx(0.7));
    CHECK(agg.micro == Catch::Approx(0.54));
    auto one = aggregate({{"only", 3, 4}});
    CHECK(one.macro == Catch::Approx(0.75));
    CHECK(one.micro == Catch::Approx(0.75));
    CHECK_THROWS_AS(aggregate({}), EmptySet);
}

TEST_CASE("macro equals micro for equal-size domains") {
    fixtures::Rng rng(8);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<DomainCount> domains;
        const std::size_t size = 10 + rng.below(50);
        const std::size_t k = 2 + rng.below(4);
        for (std::size_t d = 0; d < k; ++d)
            domains.push_back({"d" + std::to_string(d), rng.below(size + 1), size});
        auto agg = aggregate(domains);
        CHECK(agg.macro == Catch::Approx(agg.micro).margin(1e-12));
    }
}

namespace {

struct EvalHarness {
    fixtures::World world;
    PipelineConfig cfg;
    std::optional<Bm25Index> bm25;
    std::optional<MockOracleBackend> oracle;
    ScoreCache cache;
    PipelineDeps deps;

    EvalHarness(std::size_t entities, std::size_t mentions, std::uint64_t seed,
                PipelineConfig config, double miss_rate = 0.0)
        : world(fixtures::synthetic_world(entities, mentions, seed, miss_rate)),
          cfg(std::move(config)) {
        oracle.emplace(make_oracle_backend(world.tasks, world.loaded.kb, cfg));
        bm25.emplace(Bm25Index::build(world.loaded.kb));
        deps.kb = &world.loaded.kb;
        deps.aliases = &world.loaded.aliases;
        deps.bm25 = &*bm25;
        deps.backend = &*oracle;
        deps.cache = &cache;
    }
};

}  // namespace

TEST_CASE("ordering_ablation under the oracle yields identical accuracy for all orderings") {
    EvalHarness h(20, 25, 61, fixtures::oracle_pipeline_config(5));
    auto rows = ordering_ablation(
        h.world.tasks, h.cfg,
        {Ordering::reranker, Ordering::bm25, Ordering::random, Ordering::answer_first,
         Ordering::answer_last},
        h.deps);
    REQUIRE(rows.size() == 5);
    for (const auto& row : rows) CHECK(row.accuracy == Catch::Approx(rows[0].accuracy));
}

TEST_CASE("ordering_ablation exposes a scripted position bias") {
    auto world = fixtures::bias_world(15, 25, 62);
    auto bm25 = Bm25Index::build(world.loaded.kb);
    MockScriptedBackend biased;  // always answers the first presented candidate
    biased.set_constant_completion("answer: 1");
    PipelineDeps deps;
    deps.kb = &world.loaded.kb;
    deps.bm25 = &bm25;
    deps.backend = &biased;
    PipelineConfig cfg = fixtures::oracle_pipeline_config(5);
    cfg.rerank.scorer_kind = ScorerKind::retrieval_passthrough;
    auto rows =
        ordering_ablation(world.tasks, cfg, {Ordering::answer_first, Ordering::answer_last}, deps);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].selection_accuracy.has_value());
    REQUIRE(rows[1].selection_accuracy.has_value());
    CHECK(*rows[0].selection_accuracy == 1.0);
    CHECK(*rows[1].selection_accuracy == 0.0);
}

TEST_CASE("ordering_ablation refuses oracle orderings without gold") {
    EvalHarness h(10, 5, 63, fixtures::oracle_pipeline_config(3));
    auto tasks = h.world.tasks;
    tasks[2].gold_id.reset();
    CHECK_THROWS_AS(ordering_ablation(tasks, h.cfg, {Ordering::answer_first}, h.deps),
                    OrderingNeedsGold);
}

TEST_CASE("sweep_self_consistency follows the prefix rule") {
    EvalHarness h(10, 1, 64, fixtures::oracle_pipeline_config(3));
    auto batch = link_batch(h.world.tasks, h.cfg, h.deps);
    REQUIRE(batch.outcomes[0].funnel.gold_in_topk);
    // overwrite the stored samples with a scripted [gold, wrong, gold] pattern
    auto& decision = batch.outcomes[0].decision;
    const std::string gold = *h.world.tasks[0].gold_id;
    int gold_index = 0;
    for (std::size_t i = 0; i < decision.presented_ids.size(); ++i)
        if (decision.presented_ids[i] == gold) gold_index = static_cast<int>(i) + 1;
    REQUIRE(gold_index > 0);
    const int wrong_index = gold_index == 1 ? 2 : 1;
    decision.parsed = {ParsedAnswer::make_index(gold_index),
                       ParsedAnswer::make_index(wrong_index),
                       ParsedAnswer::make_index(gold_index)};

    auto rows = sweep_self_consistency(batch.outcomes, h.world.tasks, {1, 2, 3}, false);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].selection_accuracy == 1.0);  // first sample is gold
    // at 2 the vote ties; the documented rule favors the smaller presented index
    const double expected_at_2 = gold_index < wrong_index ? 1.0 : 0.0;
    CHECK(rows[1].selection_accuracy == expected_at_2);
    CHECK(rows[2].selection_accuracy == 1.0);  // 2-1 majority for gold
}

TEST_CASE("sweep_self_consistency: unanimous decisions keep accuracy constant") {
    EvalHarness h(15, 20, 65, fixtures::oracle_pipeline_config(5));
    PipelineConfig cfg = h.cfg;
    cfg.selection.num_samples = 6;
    auto batch = link_batch(h.world.tasks, cfg, h.deps);
    auto rows = sweep_self_consistency(batch.outcomes, h.world.tasks, {1, 2, 3, 6}, false);
    for (const auto& row : rows)
        CHECK(row.selection_accuracy == Catch::Approx(rows[0].selection_accuracy));
}

TEST_CASE("sweep_self_consistency rejects requests beyond the stored samples") {
    EvalHarness h(10, 3, 66, fixtures::oracle_pipeline_config(3));
    PipelineConfig cfg = h.cfg;
    cfg.selection.num_samples = 2;
    auto batch = link_batch(h.world.tasks, cfg, h.deps);
    CHECK_THROWS_AS(sweep_self_consistency(batch.outcomes, h.world.tasks, {5}, false),
                    RequestedExceedsStored);
}

TEST_CASE("evaluate assembles a full report with a stable config hash") {
    EvalHarness h(25, 40, 67, fixtures::oracle_pipeline_config(5), 0.2);
    auto batch = link_batch(h.world.tasks, h.cfg, h.deps);
    auto report = evaluate(h.world.tasks, batch.outcomes, h.world.loaded.kb, h.cfg);
    CHECK(report.total == 40);
    CHECK(report.with_gold == 40);
    CHECK(report.overall_accuracy >= 0.0);
    CHECK(report.overall_accuracy <= 1.0);
    CHECK(report.config_hash == config_hash(h.cfg));
    REQUIRE(report.domains.size() == 2);  // fixtures use even/odd domains
    const double by_hand =
        (static_cast<double>(report.domains[0].correct) + report.domains[1].correct) /
        static_cast<double>(report.domains[0].total + report.domains[1].total);
    CHECK(report.micro_accuracy == Catch::Approx(by_hand));
    // serialization carries every advertised block
    auto j = to_json(report);
    for (const char* key :
         {"overall_accuracy", "normalized_accuracy", "unk_accuracy", "non_unk_accuracy",
          "domains", "macro_accuracy", "micro_accuracy", "categories", "funnel", "diagnostics",
          "config_hash"})
        CHECK(j.contains(key));
    CHECK_FALSE(render_text(report).empty());
}

TEST_CASE("csv exports carry one row per entry") {
    std::vector<OrderingResult> orows;
    orows.push_back({Ordering::reranker, 10, 0.9, 0.95});
    orows.push_back({Ordering::random, 10, 0.8, std::nullopt});
    auto csv = orderings_csv(orows);
    CHECK(csv.find("reranker,10,0.9,0.95") != std::string::npos);
    CHECK(csv.find("random,10,0.8,") != std::string::npos);
    std::vector<KSweepRow> krows = {{5, 0.7, 0.9, 0.8}};
    CHECK(ksweep_csv(krows).find("5,0.7,0.9,0.8") != std::string::npos);
    std::vector<SelfConsistencyRow> srows = {{3, 0.75, 0.1, 20}};
    CHECK(self_consistency_csv(srows).find("3,20,0.75,0.1") != std::string::npos);
}
