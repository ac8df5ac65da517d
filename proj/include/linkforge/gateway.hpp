#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "linkforge/errors.hpp"
#include "linkforge/prompts.hpp"
#include "linkforge/util.hpp"

namespace linkforge {

struct ChatRequest {
    std::string system_text;
    std::string user_text;
    double temperature = 0.7;
    int num_samples = 1;
    int max_tokens = 4096;
    bool reasoning_enabled = true;
};

struct ChatResponse {
    std::vector<std::string> completions;
    std::vector<int> completion_tokens;  // generated tokens per completion
    int prompt_tokens = 0;
    double wall_time_s = 0.0;
    bool truncated = false;  // some completion hit max_tokens
};

struct YesNoScoreRequest {
    std::string instruction;
    std::string query;
    std::string document;
};

struct YesNoLogits {
    double lp_yes = 0.0;
    double lp_no = 0.0;
};

// Uniform access to an inference server: sampling, single-token yes/no log-probability
// scoring, and embeddings. Implementations must be safe for concurrent callers.
class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse chat_sample(const ChatRequest& req) = 0;
    virtual YesNoLogits score_yes_no(const YesNoScoreRequest& req) = 0;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
    virtual std::string name() const = 0;
};

// Deterministic per-text pseudo-embedding. splitmix64 with an explicit bit-to-double
// mapping, so output is identical across runs and platforms.
inline std::vector<double> hash_embed_one(const std::string& text, std::size_t dim,
                                          std::uint64_t seed) {
    std::uint64_t state = fnv1a64(text) ^ (seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
    std::vector<double> v(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z = z ^ (z >> 31);
        v[j] = static_cast<double>(z >> 11) * (1.0 / 9007199254740992.0) * 2.0 - 1.0;
    }
    return v;
}

inline std::vector<std::vector<double>> hash_embed(const std::vector<std::string>& texts,
                                                   std::size_t dim, std::uint64_t seed) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(hash_embed_one(t, dim, seed));
    return out;
}

// A selection prompt's user message decomposed back into the rendered context and the
// indexed option lines. Mock backends use this to locate candidates.
struct SelectionPromptView {
    std::string context;
    std::vector<std::pair<int, std::string>> options;  // (index, line body after "i. ")
};

inline SelectionPromptView parse_selection_prompt(const std::string& user_text) {
    auto lines = split_lines(user_text);
    auto is_option = [](const std::string& line) -> std::optional<std::pair<int, std::string>> {
        std::size_t p = 0;
        while (p < line.size() && std::isdigit(static_cast<unsigned char>(line[p]))) ++p;
        if (p == 0 || p + 1 >= line.size() || line[p] != '.' || line[p + 1] != ' ')
            return std::nullopt;
        return std::make_pair(std::stoi(line.substr(0, p)), line.substr(p + 2));
    };
    std::size_t block_start = lines.size();
    while (block_start > 0) {
        auto opt = is_option(lines[block_start - 1]);
        if (!opt) break;
        --block_start;
    }
    SelectionPromptView view;
    for (std::size_t i = block_start; i < lines.size(); ++i)
        view.options.push_back(*is_option(lines[i]));
    std::string ctx;
    for (std::size_t i = 0; i < block_start; ++i) {
        ctx += lines[i];
        if (i + 1 < block_start) ctx += '\n';
    }
    while (!ctx.empty() && (ctx.back() == '\n' || ctx.back() == '\r')) ctx.pop_back();
    view.context = std::move(ctx);
    return view;
}

// Offline backend that knows the gold entity for registered contexts. Selection requests
// get "answer: <gold index>"; yes/no scoring strongly favors the gold document. Contexts
// without a registered gold fall back to lexical overlap (scoring) and the first option
// (selection), which keeps single-shot CLI runs sensible.
class MockOracleBackend : public Backend {
public:
    struct GoldEntry {
        std::string name;
        std::string verbalization;
    };

    explicit MockOracleBackend(std::size_t embed_dim = 16, std::uint64_t seed = 0)
        : embed_dim_(embed_dim), seed_(seed) {}

    void register_gold(const std::string& rendered_context, std::string gold_name,
                       std::string gold_verbalization) {
        gold_by_context_[rendered_context] = {std::move(gold_name), std::move(gold_verbalization)};
    }

    // Marks a context whose correct answer is the None option ("answer: 0").
    void register_none(const std::string& rendered_context) {
        none_contexts_.insert(rendered_context);
    }

    ChatResponse chat_sample(const ChatRequest& req) override {
        Stopwatch sw;
        auto view = parse_selection_prompt(req.user_text);
        int answer = 0;
        const GoldEntry* gold = find_gold(view.context);
        if (none_contexts_.count(view.context)) {
            answer = 0;
        } else if (gold) {
            for (const auto& [idx, body] : view.options) {
                if (idx == 0) continue;
                if (body == gold->verbalization || body == gold->name) {
                    answer = idx;
                    break;
                }
            }
        } else {
            for (const auto& [idx, body] : view.options) {
                if (idx >= 1) {
                    answer = idx;
                    break;
                }
            }
        }
        ChatResponse resp;
        const std::string completion = "answer: " + std::to_string(answer);
        resp.completions.assign(static_cast<std::size_t>(req.num_samples), completion);
        resp.completion_tokens.assign(static_cast<std::size_t>(req.num_samples),
                                      word_count(completion));
        resp.prompt_tokens = word_count(req.system_text) + word_count(req.user_text);
        resp.wall_time_s = sw.seconds();
        return resp;
    }

    YesNoLogits score_yes_no(const YesNoScoreRequest& req) override {
        if (none_contexts_.count(req.query)) return {-10.0, 0.0};  // nothing is relevant
        const GoldEntry* gold = find_gold(req.query);
        if (gold) {
            if (req.document == gold->verbalization || req.document == gold->name)
                return {0.0, -10.0};
            return {-10.0, 0.0};
        }
        // No registered gold: lexical overlap, with the bracketed mention surface
        // counting double so the mentioned entity outranks context-only matches.
        double overlap = token_overlap(req.query, req.document);
        const std::size_t open = req.query.find('[');
        const std::size_t close = req.query.find(']', open == std::string::npos ? 0 : open);
        if (open != std::string::npos && close != std::string::npos && close > open)
            overlap += 2.0 * token_overlap(req.query.substr(open + 1, close - open - 1),
                                           req.document);
        return {overlap, 0.0};
    }

    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
        if (texts.empty()) throw Error("embed requires a non-empty batch");
        return hash_embed(texts, embed_dim_, seed_);
    }

    std::string name() const override { return "mock-oracle"; }

    static int token_overlap(const std::string& a, const std::string& b) {
        std::unordered_set<std::string> seen;
        std::string cur;
        auto flush = [&](std::unordered_set<std::string>& dst) {
            if (!cur.empty()) {
                dst.insert(cur);
                cur.clear();
            }
        };
        for (unsigned char c : a) {
            if (std::isalnum(c))
                cur.push_back(static_cast<char>(std::tolower(c)));
            else
                flush(seen);
        }
        flush(seen);
        std::unordered_set<std::string> counted;
        int overlap = 0;
        for (unsigned char c : b) {
            if (std::isalnum(c)) {
                cur.push_back(static_cast<char>(std::tolower(c)));
            } else if (!cur.empty()) {
                if (seen.count(cur) && counted.insert(cur).second) ++overlap;
                cur.clear();
            }
        }
        if (!cur.empty() && seen.count(cur) && counted.insert(cur).second) ++overlap;
        cur.clear();
        return overlap;
    }

private:
    const GoldEntry* find_gold(const std::string& context) const {
        auto it = gold_by_context_.find(context);
        return it == gold_by_context_.end() ? nullptr : &it->second;
    }

    std::unordered_map<std::string, GoldEntry> gold_by_context_;
    std::unordered_set<std::string> none_contexts_;
    std::size_t embed_dim_;
    std::uint64_t seed_;
};

// Fully scriptable backend for tests and ablation fixtures.
//
// chat_sample resolution order:
//   1. queued scripts (one vector of completions per call, cycled to num_samples),
//   2. a constant completion,
//   3. seeded pseudo-random strings derived from (seed, prompt content, sample index).
// temperature == 0 collapses all samples of a request to one generation.
class MockScriptedBackend : public Backend {
public:
    explicit MockScriptedBackend(std::uint64_t seed = 0, std::size_t embed_dim = 16)
        : seed_(seed), embed_dim_(embed_dim) {}

    void push_chat_script(std::vector<std::string> completions) {
        std::lock_guard lock(mu_);
        chat_scripts_.push_back(std::move(completions));
    }
    void set_constant_completion(std::string completion) {
        std::lock_guard lock(mu_);
        constant_completion_ = std::move(completion);
    }
    void set_yes_no(const std::string& document, double lp_yes, double lp_no) {
        std::lock_guard lock(mu_);
        yes_no_by_document_[document] = {lp_yes, lp_no};
    }
    void set_default_yes_no(double lp_yes, double lp_no) {
        std::lock_guard lock(mu_);
        default_yes_no_ = {lp_yes, lp_no};
    }
    // Next n chat/scoring calls raise TransportError.
    void fail_next(int n) {
        std::lock_guard lock(mu_);
        fail_remaining_ = n;
    }
    void set_token_counts(int per_sample, int prompt) {
        std::lock_guard lock(mu_);
        scripted_completion_tokens_ = per_sample;
        scripted_prompt_tokens_ = prompt;
    }

    ChatResponse chat_sample(const ChatRequest& req) override {
        std::lock_guard lock(mu_);
        ++chat_calls_;
        chat_requests_.push_back(req);
        maybe_fail();
        ChatResponse resp;
        const std::size_t n = static_cast<std::size_t>(req.num_samples);
        if (!chat_scripts_.empty()) {
            auto script = chat_scripts_.front();
            chat_scripts_.erase(chat_scripts_.begin());
            if (script.empty()) throw Error("empty chat script entry");
            for (std::size_t i = 0; i < n; ++i) resp.completions.push_back(script[i % script.size()]);
        } else if (constant_completion_) {
            resp.completions.assign(n, *constant_completion_);
        } else {
            const std::uint64_t base = fnv1a64(req.user_text, fnv1a64(req.system_text, seed_ + 0x51ed));
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t draw = req.temperature == 0.0 ? 0 : i;
                resp.completions.push_back("sample-" + to_hex(fnv1a64(std::to_string(draw), base)));
            }
        }
        for (const auto& c : resp.completions)
            resp.completion_tokens.push_back(
                scripted_completion_tokens_ ? *scripted_completion_tokens_ : word_count(c));
        resp.prompt_tokens = scripted_prompt_tokens_
                                 ? *scripted_prompt_tokens_
                                 : word_count(req.system_text) + word_count(req.user_text);
        return resp;
    }

    YesNoLogits score_yes_no(const YesNoScoreRequest& req) override {
        std::lock_guard lock(mu_);
        ++score_calls_;
        score_requests_.push_back(req);
        maybe_fail();
        auto it = yes_no_by_document_.find(req.document);
        if (it != yes_no_by_document_.end()) return it->second;
        return default_yes_no_;
    }

    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
        if (texts.empty()) throw Error("embed requires a non-empty batch");
        return hash_embed(texts, embed_dim_, seed_);
    }

    std::string name() const override { return "mock-scripted"; }

    int chat_calls() const {
        std::lock_guard lock(mu_);
        return chat_calls_;
    }
    int score_calls() const {
        std::lock_guard lock(mu_);
        return score_calls_;
    }
    std::vector<ChatRequest> chat_requests() const {
        std::lock_guard lock(mu_);
        return chat_requests_;
    }
    std::vector<YesNoScoreRequest> score_requests() const {
        std::lock_guard lock(mu_);
        return score_requests_;
    }

private:
    void maybe_fail() {
        if (fail_remaining_ > 0) {
            --fail_remaining_;
            throw TransportError("scripted transport failure");
        }
    }

    mutable std::mutex mu_;
    std::uint64_t seed_;
    std::size_t embed_dim_;
    std::vector<std::vector<std::string>> chat_scripts_;
    std::optional<std::string> constant_completion_;
    std::unordered_map<std::string, YesNoLogits> yes_no_by_document_;
    YesNoLogits default_yes_no_{0.0, 0.0};
    std::optional<int> scripted_completion_tokens_;
    std::optional<int> scripted_prompt_tokens_;
    int fail_remaining_ = 0;
    int chat_calls_ = 0;
    int score_calls_ = 0;
    std::vector<ChatRequest> chat_requests_;
    std::vector<YesNoScoreRequest> score_requests_;
};

// Adapts a backend's embedding endpoint to the retrieval-side Embedder signature.
inline std::function<std::vector<std::vector<double>>(const std::vector<std::string>&)>
backend_embedder(Backend& backend) {
    return [&backend](const std::vector<std::string>& texts) { return backend.embed(texts); };
}

}  // namespace linkforge
