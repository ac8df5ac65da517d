#include <catch2/catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "linkforge/select.hpp"

using namespace linkforge;

namespace {

CandidateSet topk_of(const std::vector<std::string>& ids) {
    CandidateSet set;
    set.mention_id = "m";
    set.provenance = "test";
    int rank = 1;
    for (const auto& id : ids) {
        Candidate c;
        c.entity_id = id;
        c.retrieval_rank = rank;
        c.retrieval_score = 1.0 / rank;
        c.rerank_score = 1.0 / rank;
        c.presented_index = rank;
        set.items.push_back(c);
        ++rank;
    }
    return set;
}

ParsedAnswer idx(int i) { return ParsedAnswer::make_index(i); }
const ParsedAnswer kNone = ParsedAnswer::make_none();
const ParsedAnswer kInvalid = ParsedAnswer::make_invalid();

}  // namespace

TEST_CASE("selection prompt lists the None line first, then indexed candidates") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("France hosted the Olympics in Paris.", 30, 35);
    SelectionConfig cfg;
    cfg.include_none = true;
    auto prompt = build_selection_prompt(ctx, topk_of({"Q1", "Q2"}), loaded.kb, cfg);
    auto lines = split_lines(prompt.user_text);
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "France hosted the Olympics in [Paris].");
    CHECK(lines[1].empty());
    CHECK(lines[2] == "0. None of the candidates");
    CHECK(lines[3] == "1. Paris (city): Capital city of France");
    CHECK(lines[4] == "2. Paris (novel): 1897 novel by Emile Zola");
    CHECK(prompt.system_text == prompts::kSelectionSystem);
    CHECK(prompt.presented_ids == std::vector<std::string>{"Q1", "Q2"});
}

TEST_CASE("selection prompt omits the None line when not offered") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("about Paris today", 6, 11);
    SelectionConfig cfg;
    cfg.include_none = false;
    auto prompt = build_selection_prompt(ctx, topk_of({"Q1", "Q2", "Q3"}), loaded.kb, cfg);
    auto lines = split_lines(prompt.user_text);
    REQUIRE(lines.size() == 5);
    CHECK(lines[2] == "1. Paris (city): Capital city of France");
    CHECK(lines[4] == "3. France: Country in Europe");
    CHECK(prompt.user_text.find("None of the candidates") == std::string::npos);
}

TEST_CASE("answer_first moves the gold to index 1; answer_last to the end") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("about Paris today", 6, 11);
    SelectionConfig cfg;
    cfg.ordering = Ordering::answer_first;
    auto prompt = build_selection_prompt(ctx, topk_of({"Q1", "Q2", "Q3"}), loaded.kb, cfg,
                                         std::optional<std::string>("Q3"));
    CHECK(prompt.presented_ids == std::vector<std::string>{"Q3", "Q1", "Q2"});
    cfg.ordering = Ordering::answer_last;
    prompt = build_selection_prompt(ctx, topk_of({"Q1", "Q2", "Q3"}), loaded.kb, cfg,
                                    std::optional<std::string>("Q3"));
    CHECK(prompt.presented_ids == std::vector<std::string>{"Q1", "Q2", "Q3"});
    prompt = build_selection_prompt(ctx, topk_of({"Q3", "Q1", "Q2"}), loaded.kb, cfg,
                                    std::optional<std::string>("Q3"));
    CHECK(prompt.presented_ids == std::vector<std::string>{"Q1", "Q2", "Q3"});
}

TEST_CASE("oracle orderings demand a gold entity") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("about Paris today", 6, 11);
    SelectionConfig cfg;
    cfg.ordering = Ordering::answer_first;
    CHECK_THROWS_AS(build_selection_prompt(ctx, topk_of({"Q1"}), loaded.kb, cfg),
                    OrderingNeedsGold);
}

TEST_CASE("none_last and none_random place the zero line without renumbering candidates") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("about Paris today", 6, 11);
    SelectionConfig cfg;
    cfg.include_none = true;
    cfg.ordering = Ordering::none_last;
    auto prompt = build_selection_prompt(ctx, topk_of({"Q1", "Q2"}), loaded.kb, cfg);
    auto lines = split_lines(prompt.user_text);
    CHECK(lines.back() == "0. None of the candidates");
    CHECK(lines[2] == "1. Paris (city): Capital city of France");

    cfg.ordering = Ordering::none_random;
    cfg.ordering_seed = 4;
    auto prompt_a = build_selection_prompt(ctx, topk_of({"Q1", "Q2"}), loaded.kb, cfg);
    auto prompt_b = build_selection_prompt(ctx, topk_of({"Q1", "Q2"}), loaded.kb, cfg);
    CHECK(prompt_a.user_text == prompt_b.user_text);  // deterministic given seed
    CHECK(prompt_a.user_text.find("0. None of the candidates") != std::string::npos);
}

TEST_CASE("random ordering is a seeded permutation of the same candidates") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("about Paris today", 6, 11);
    SelectionConfig cfg;
    cfg.ordering = Ordering::random;
    cfg.ordering_seed = 12;
    auto a = build_selection_prompt(ctx, topk_of({"Q1", "Q2", "Q3"}), loaded.kb, cfg);
    auto b = build_selection_prompt(ctx, topk_of({"Q1", "Q2", "Q3"}), loaded.kb, cfg);
    CHECK(a.presented_ids == b.presented_ids);
    auto sorted = a.presented_ids;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<std::string>{"Q1", "Q2", "Q3"});
}

TEST_CASE("descriptions can be suppressed or clipped in the prompt") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("about Paris today", 6, 11);
    SelectionConfig cfg;
    cfg.include_descriptions = false;
    auto prompt = build_selection_prompt(ctx, topk_of({"Q1"}), loaded.kb, cfg);
    CHECK(split_lines(prompt.user_text)[2] == "1. Paris (city)");
    cfg.include_descriptions = true;
    cfg.max_description_chars = 7;
    prompt = build_selection_prompt(ctx, topk_of({"Q1"}), loaded.kb, cfg);
    CHECK(split_lines(prompt.user_text)[2] == "1. Paris (city): Capital");
}

TEST_CASE("prompt construction is deterministic") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("about Paris today", 6, 11);
    SelectionConfig cfg;
    cfg.include_none = true;
    auto a = build_selection_prompt(ctx, topk_of({"Q2", "Q1"}), loaded.kb, cfg);
    auto b = build_selection_prompt(ctx, topk_of({"Q2", "Q1"}), loaded.kb, cfg);
    CHECK(a.system_text == b.system_text);
    CHECK(a.user_text == b.user_text);
}

TEST_CASE("parse_answer accepts the trace forms from real runs") {
    CHECK(parse_answer("let me think it over at length... answer: 3", 10, false) == idx(3));
    CHECK(parse_answer("reasoning </think> \"answer\": 0", 10, true) == kNone);
    CHECK(parse_answer("the best is probably Paris", 10, false) == kInvalid);
}

TEST_CASE("parse_answer accepts case and quoting variants, keeping the last occurrence") {
    CHECK(parse_answer("Answer: 7", 10, false) == idx(7));
    CHECK(parse_answer("ANSWER 4", 10, false) == idx(4));
    CHECK(parse_answer("answer:5", 10, false) == idx(5));
    CHECK(parse_answer("'answer': 1", 10, false) == idx(1));
    CHECK(parse_answer("answer: \"2\"", 10, false) == idx(2));
    CHECK(parse_answer("answer: 1 ... no wait, answer: 3", 10, false) == idx(3));
    CHECK(parse_answer("{\"answer\": 9}", 10, false) == idx(9));
}

TEST_CASE("parse_answer never returns an out-of-range index") {
    CHECK(parse_answer("answer: 0", 10, false) == kInvalid);  // 0 needs the None option
    CHECK(parse_answer("answer: 0", 10, true) == kNone);
    CHECK(parse_answer("answer: 11", 10, true) == kInvalid);
    CHECK(parse_answer("answer: -1", 10, true) == kInvalid);
    CHECK(parse_answer("answer: 99999999999999", 10, true) == kInvalid);
    fixtures::Rng rng(2);
    for (int i = 0; i < 500; ++i) {
        const int max_index = 1 + static_cast<int>(rng.below(12));
        const bool include_none = rng.unit() < 0.5;
        const int value = static_cast<int>(rng.below(20));
        auto parsed = parse_answer("answer: " + std::to_string(value), max_index, include_none);
        if (parsed.kind == ParsedAnswer::Kind::index) {
            CHECK(parsed.index >= 1);
            CHECK(parsed.index <= max_index);
        }
        if (parsed.kind == ParsedAnswer::Kind::none) CHECK(include_none);
    }
}

TEST_CASE("parse_answer rejects adversarial non-answers") {
    const char* negatives[] = {
        "",
        "answer:",
        "answer: x",
        "answers everywhere",
        "the answerer said nothing",
        "ans: 3",
        "index 4 looks right",
        "answer forthcoming",
        "response: 2",
        "answer42",  // no separator
    };
    for (const char* s : negatives) {
        INFO(s);
        CHECK(parse_answer(s, 10, true) == kInvalid);
    }
}

TEST_CASE("majority_vote picks the strict majority") {
    auto vote = majority_vote({idx(2), idx(2), idx(7)}, {"a", "b", "c", "d", "e", "f", "g"}, "a",
                              false);
    CHECK(vote.result == std::optional<std::string>("b"));
    CHECK_FALSE(vote.fallback_used);
    CHECK(vote.vote_counts.at("2") == 2);
    CHECK(vote.vote_counts.at("7") == 1);
}

TEST_CASE("majority_vote tie goes to the best presented rank") {
    auto vote = majority_vote({idx(1), idx(3)}, {"a", "b", "c"}, "a", false);
    CHECK(vote.result == std::optional<std::string>("a"));

    // exhaustive cross-check of the documented rule on all two-vote combinations
    for (int u = 1; u <= 3; ++u) {
        for (int v = 1; v <= 3; ++v) {
            auto out = majority_vote({idx(u), idx(v)}, {"a", "b", "c"}, "a", false);
            const int expected = std::min(u, v);  // equal counts -> smaller presented index
            const std::string expected_id(1, static_cast<char>('a' + expected - 1));
            CHECK(out.result == std::optional<std::string>(expected_id));
        }
    }
}

TEST_CASE("majority_vote treats NONE as the best rank in ties") {
    auto vote = majority_vote({kNone, idx(1)}, {"a"}, "a", true);
    CHECK(vote.result == std::nullopt);
    auto majority = majority_vote({kNone, idx(1), idx(1)}, {"a"}, "a", true);
    CHECK(majority.result == std::optional<std::string>("a"));
}

TEST_CASE("majority_vote falls back to the top candidate when every vote is invalid") {
    auto vote = majority_vote({kInvalid, kInvalid}, {"a", "b"}, "a", false);
    CHECK(vote.result == std::optional<std::string>("a"));
    CHECK(vote.fallback_used);
    CHECK(vote.vote_counts.at("INVALID") == 2);
}

TEST_CASE("majority_vote ignores invalid votes when valid ones exist") {
    auto vote = majority_vote({kInvalid, idx(2), kInvalid}, {"a", "b"}, "a", false);
    CHECK(vote.result == std::optional<std::string>("b"));
    CHECK_FALSE(vote.fallback_used);
}

TEST_CASE("majority_vote is invariant under vote permutation") {
    fixtures::Rng rng(77);
    std::vector<std::string> ids = {"a", "b", "c", "d"};
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<ParsedAnswer> votes;
        const std::size_t n = 1 + rng.below(8);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = rng.unit();
            if (r < 0.15)
                votes.push_back(kInvalid);
            else if (r < 0.3)
                votes.push_back(kNone);
            else
                votes.push_back(idx(1 + static_cast<int>(rng.below(4))));
        }
        auto base = majority_vote(votes, ids, "a", true);
        for (int shuffle = 0; shuffle < 5; ++shuffle) {
            for (std::size_t i = votes.size(); i > 1; --i)
                std::swap(votes[i - 1], votes[rng.below(i)]);
            auto again = majority_vote(votes, ids, "a", true);
            CHECK(again.result == base.result);
            CHECK(again.fallback_used == base.fallback_used);
        }
    }
}

TEST_CASE("select votes scripted samples and records the tallies") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("about Paris today", 6, 11);
    MockScriptedBackend backend;
    backend.push_chat_script({"answer: 1", "answer: 2", "answer: 1"});
    SelectionConfig cfg;
    cfg.num_samples = 3;
    auto decision = select(ctx, topk_of({"Q1", "Q2", "Q3"}), loaded.kb, cfg, backend);
    CHECK(decision.result == std::optional<std::string>("Q1"));
    CHECK(decision.vote_counts.at("1") == 2);
    CHECK(decision.vote_counts.at("2") == 1);
    CHECK(decision.raw_samples.size() == 3);
    CHECK(decision.parsed.size() == 3);
    CHECK(decision.prompt_tokens > 0);
}

TEST_CASE("select with the oracle backend returns the gold whenever presented") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("France hosted the Olympics in Paris.", 30, 35);
    MockOracleBackend backend;
    backend.register_gold(ctx.rendered, loaded.kb.get("Q1").name,
                          verbalize_entity(loaded.kb.get("Q1")));
    SelectionConfig cfg;
    cfg.num_samples = 5;
    auto decision = select(ctx, topk_of({"Q2", "Q1", "Q3"}), loaded.kb, cfg, backend);
    CHECK(decision.result == std::optional<std::string>("Q1"));
    CHECK(decision.vote_counts.at("2") == 5);
}

TEST_CASE("oracle accuracy is order-independent: answers track the gold's presented index") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("France hosted the Olympics in Paris.", 30, 35);
    MockOracleBackend backend;
    backend.register_gold(ctx.rendered, loaded.kb.get("Q1").name,
                          verbalize_entity(loaded.kb.get("Q1")));
    SelectionConfig cfg;
    cfg.num_samples = 2;
    for (auto ids : {std::vector<std::string>{"Q1", "Q2", "Q3"},
                     std::vector<std::string>{"Q3", "Q2", "Q1"},
                     std::vector<std::string>{"Q2", "Q1", "Q3"}}) {
        auto decision = select(ctx, topk_of(ids), loaded.kb, cfg, backend);
        CHECK(decision.result == std::optional<std::string>("Q1"));
    }
}

TEST_CASE("single-sample selection is the no-self-consistency path") {
    auto loaded = fixtures::intro_kb();
    auto ctx = mark_mention("about Paris today", 6, 11);
    MockScriptedBackend backend;
    backend.set_constant_completion("answer: 2");
    SelectionConfig cfg;
    cfg.num_samples = 1;
    auto decision = select(ctx, topk_of({"Q1", "Q2"}), loaded.kb, cfg, backend);
    CHECK(decision.result == std::optional<std::string>("Q2"));
    CHECK(decision.raw_samples.size() == 1);
    int total = 0;
    for (const auto& [key, count] : decision.vote_counts) total += count;
    CHECK(total == 1);
    auto reqs = backend.chat_requests();
    REQUIRE(reqs.size() == 1);
    CHECK(reqs[0].num_samples == 1);
}

TEST_CASE("vote_diagnostics summarizes diversity and invalid rate") {
    std::vector<LinkingDecision> decisions;
    {
        LinkingDecision d;  // unanimous
        d.vote_counts = {{"1", 5}};
        decisions.push_back(d);
    }
    {
        LinkingDecision d;  // even split over two answers
        d.vote_counts = {{"1", 5}, {"2", 5}};
        decisions.push_back(d);
    }
    auto diag = vote_diagnostics(decisions);
    CHECK(diag.distinct_answer_histogram.at(1) == 1);
    CHECK(diag.distinct_answer_histogram.at(2) == 1);
    CHECK(diag.invalid_rate == 0.0);
    CHECK(diag.total_samples == 15);
}

TEST_CASE("vote_diagnostics reports a scripted 10% invalid rate exactly") {
    std::vector<LinkingDecision> decisions;
    for (int i = 0; i < 10; ++i) {
        LinkingDecision d;
        d.vote_counts = {{"1", 9}, {"INVALID", 1}};
        decisions.push_back(d);
    }
    auto diag = vote_diagnostics(decisions);
    CHECK(diag.invalid_rate == Catch::Approx(0.10).margin(1e-15));
    CHECK(diag.total_samples == 100);
}
