#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "linkforge/linkforge.hpp"

namespace fixtures {

using namespace linkforge;

// The three-entity KB from the running "Paris" example.
inline LoadedKb intro_kb() {
    std::istringstream in(
        R"json({"id":"Q1","name":"Paris (city)","description":"Capital city of France"}
{"id":"Q2","name":"Paris (novel)","description":"1897 novel by Emile Zola"}
{"id":"Q3","name":"France","description":"Country in Europe"})json");
    return load_kb(in, "intro");
}

inline MentionTask intro_task() {
    MentionTask t;
    t.id = "m1";
    t.text = "France hosted the Olympics in Paris.";
    t.mention_start = 30;
    t.mention_end = 35;
    t.gold_id = "Q1";
    return t;
}

// splitmix64; self-contained so fixtures never depend on stdlib distribution details.
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
    double unit() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }
};

inline const std::vector<std::string>& word_pool() {
    static const std::vector<std::string> pool = {
        "alpha",  "bravo",  "cobalt", "delta",  "ember",   "fjord",  "glade",  "harbor",
        "indigo", "juniper","kestrel","lumen",  "marble",  "nectar", "onyx",   "prairie",
        "quartz", "raven",  "saffron","tundra", "umber",   "velvet", "willow", "xenon",
        "yonder", "zephyr", "basalt", "cinder", "drift",   "echo",   "flint",  "grove",
        "heron",  "isle",   "jade",   "knoll",  "lagoon",  "mesa",   "north",  "orchid"};
    return pool;
}

struct World {
    LoadedKb loaded;
    std::vector<MentionTask> tasks;
};

// Synthetic KB plus mention tasks. Contexts mix the gold entity's name with distractor
// vocabulary so retrieval ranks vary; a miss_rate slice of mentions uses an out-of-vocab
// surface so the gold is usually not retrieved at all.
inline World synthetic_world(std::size_t n_entities, std::size_t n_mentions, std::uint64_t seed,
                             double miss_rate = 0.15) {
    World world;
    Rng rng(seed);
    const auto& pool = word_pool();
    for (std::size_t i = 0; i < n_entities; ++i) {
        Entity e;
        e.id = "E" + std::to_string(i);
        e.name = pool[rng.below(pool.size())] + " " + pool[rng.below(pool.size())] + " " +
                 std::to_string(i);
        const std::size_t desc_len = 4 + rng.below(6);
        for (std::size_t w = 0; w < desc_len; ++w) {
            if (w > 0) e.description += ' ';
            e.description += pool[rng.below(pool.size())];
        }
        world.loaded.aliases.add(e.name, e.id);
        world.loaded.kb.add(std::move(e));
    }
    const auto& entities = world.loaded.kb.entities();
    for (std::size_t j = 0; j < n_mentions; ++j) {
        const Entity& gold = entities[rng.below(entities.size())];
        const bool miss = rng.unit() < miss_rate;
        const std::string surface = miss ? "zzz" + std::to_string(j) : gold.name;
        std::string noise;
        const std::size_t noise_len = 3 + rng.below(5);
        for (std::size_t w = 0; w < noise_len; ++w) {
            if (rng.unit() < 0.5) {
                noise += ' ' + pool[rng.below(pool.size())];
            } else {
                const Entity& other = entities[rng.below(entities.size())];
                noise += ' ' + other.description.substr(0, other.description.find(' '));
            }
        }
        MentionTask t;
        t.id = "m" + std::to_string(j);
        std::string prefix = "Note " + std::to_string(j) + " concerns ";
        t.text = prefix + surface + " alongside" + noise + ".";
        t.mention_start = prefix.size();
        t.mention_end = prefix.size() + surface.size();
        t.gold_id = gold.id;
        t.domain = j % 2 == 0 ? "even" : "odd";
        world.tasks.push_back(std::move(t));
    }
    return world;
}

// Every context names the gold entity plus exactly one distractor, and description
// vocabulary is disjoint from name vocabulary, so retrieval returns exactly those two.
// Useful where a harness needs gold always gated and never alone in the prompt.
inline World bias_world(std::size_t n_entities, std::size_t n_mentions, std::uint64_t seed) {
    World world;
    Rng rng(seed);
    const auto& pool = word_pool();
    n_entities = std::min(n_entities, pool.size());
    for (std::size_t i = 0; i < n_entities; ++i) {
        Entity e;
        e.id = "E" + std::to_string(i);
        e.name = pool[i] + " " + std::to_string(i + 100);
        const std::size_t desc_len = 3 + rng.below(4);
        for (std::size_t w = 0; w < desc_len; ++w) {
            if (w > 0) e.description += ' ';
            e.description += pool[rng.below(pool.size())] + "ness";
        }
        world.loaded.kb.add(std::move(e));
    }
    const auto& entities = world.loaded.kb.entities();
    for (std::size_t j = 0; j < n_mentions; ++j) {
        const std::size_t g = rng.below(entities.size());
        std::size_t d = rng.below(entities.size());
        if (d == g) d = (d + 1) % entities.size();
        const Entity& gold = entities[g];
        const Entity& distractor = entities[d];
        MentionTask t;
        t.id = "m" + std::to_string(j);
        const std::string prefix = "Report " + std::to_string(j) + " compares " +
                                   distractor.name + " with ";
        t.text = prefix + gold.name + " in detail.";
        t.mention_start = prefix.size();
        t.mention_end = prefix.size() + gold.name.size();
        t.gold_id = gold.id;
        world.tasks.push_back(std::move(t));
    }
    return world;
}

inline PipelineConfig oracle_pipeline_config(int k = 10, int budget = 15) {
    PipelineConfig cfg;
    cfg.retriever = RetrieverKind::bm25;
    cfg.retrieval_budget = budget;
    cfg.rerank.k = k;
    cfg.rerank.scorer_kind = ScorerKind::retrieval_passthrough;
    cfg.gate_n = std::max(64, k);
    cfg.selection.num_samples = 3;
    cfg.selection.temperature = 0.0;
    cfg.max_concurrency = 4;
    return cfg;
}

}  // namespace fixtures
