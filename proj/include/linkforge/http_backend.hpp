#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <limits>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "linkforge/errors.hpp"
#include "linkforge/gateway.hpp"
#include "linkforge/prompts.hpp"

namespace linkforge {

struct HttpBackendConfig {
    std::string endpoint = "http://127.0.0.1:8000/v1";  // base URL, path prefix allowed
    std::string model;
    std::string api_key_env = "LINKFORGE_API_KEY";
    int max_concurrency = 8;  // global in-flight request cap
    int max_retries = 3;      // retried on transport errors and 429/5xx
    double retry_base_delay_s = 0.5;
    int timeout_s = 300;
    int top_logprobs = 20;
    std::vector<std::string> yes_tokens = {"yes"};
    std::vector<std::string> no_tokens = {"no"};
    // Reasoning toggle mapping. When the server exposes a chat-template switch, name it
    // here (sent as {"chat_template_kwargs": {<field>: false}}); otherwise a plain
    // prompt-side suffix is appended to the system message.
    std::string reasoning_toggle_field;
    std::string no_reasoning_system_suffix =
        "\n\nAnswer directly with your final answer only. Do not show any reasoning.";
};

// Chat-completions client. Yes/no scoring rides the same protocol with max_tokens = 1
// and top-K log-probabilities requested.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config)
        : config_(std::move(config)),
          semaphore_(std::max(1, config_.max_concurrency)) {
        split_endpoint(config_.endpoint, host_, path_prefix_);
        if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }

    ChatResponse chat_sample(const ChatRequest& req) override {
        Stopwatch sw;
        nlohmann::json body = chat_body(req);
        nlohmann::json payload;
        try {
            payload = post_json("/chat/completions", body);
        } catch (const BackendRefused&) {
            if (req.num_samples <= 1) throw;
            // Some servers reject n > 1; fall back to sequential single-sample requests.
            ChatResponse merged;
            for (int i = 0; i < req.num_samples; ++i) {
                ChatRequest single = req;
                single.num_samples = 1;
                ChatResponse one = chat_sample(single);
                merged.completions.push_back(one.completions.at(0));
                merged.completion_tokens.push_back(one.completion_tokens.at(0));
                if (i == 0) merged.prompt_tokens = one.prompt_tokens;
                merged.truncated = merged.truncated || one.truncated;
            }
            merged.wall_time_s = sw.seconds();
            return merged;
        }
        ChatResponse resp;
        if (!payload.contains("choices") || !payload["choices"].is_array())
            throw TransportError("chat response missing choices array");
        for (const auto& choice : payload["choices"]) {
            resp.completions.push_back(choice.value("message", nlohmann::json::object())
                                           .value("content", std::string()));
            if (choice.value("finish_reason", "") == "length") resp.truncated = true;
        }
        if (resp.completions.empty()) throw TransportError("chat response carried no completions");
        int total_completion_tokens = 0;
        if (payload.contains("usage")) {
            resp.prompt_tokens = payload["usage"].value("prompt_tokens", 0);
            total_completion_tokens = payload["usage"].value("completion_tokens", 0);
        }
        // Usage reports an aggregate over all n choices; spread it evenly.
        const int per = total_completion_tokens / static_cast<int>(resp.completions.size());
        resp.completion_tokens.assign(resp.completions.size(), per);
        resp.wall_time_s = sw.seconds();
        return resp;
    }

    YesNoLogits score_yes_no(const YesNoScoreRequest& req) override {
        nlohmann::json body;
        body["model"] = config_.model;
        body["messages"] = nlohmann::json::array(
            {{{"role", "system"}, {"content", req.instruction}},
             {{"role", "user"}, {"content", prompts::yes_no_user_message(req.query, req.document)}}});
        body["temperature"] = 0.0;
        body["n"] = 1;
        body["max_tokens"] = 1;
        body["logprobs"] = true;
        body["top_logprobs"] = config_.top_logprobs;
        nlohmann::json payload = post_json("/chat/completions", body);

        const nlohmann::json* top = nullptr;
        try {
            const auto& content = payload.at("choices").at(0).at("logprobs").at("content");
            if (content.is_array() && !content.empty()) top = &content.at(0).at("top_logprobs");
        } catch (const nlohmann::json::exception&) {
            throw LogprobsUnsupported("server response carries no token log-probabilities");
        }
        if (!top || !top->is_array() || top->empty())
            throw LogprobsUnsupported("server response carries no token log-probabilities");

        double min_lp = std::numeric_limits<double>::infinity();
        std::optional<double> best_yes;
        std::optional<double> best_no;
        for (const auto& entry : *top) {
            const std::string token = ascii_lower(trim(entry.value("token", "")));
            const double lp = entry.value("logprob", 0.0);
            min_lp = std::min(min_lp, lp);
            for (const auto& y : config_.yes_tokens)
                if (token == y && (!best_yes || lp > *best_yes)) best_yes = lp;
            for (const auto& n : config_.no_tokens)
                if (token == n && (!best_no || lp > *best_no)) best_no = lp;
        }
        // A token absent from the returned top-K is floored below everything observed.
        const double floor = min_lp - 10.0;
        return {best_yes.value_or(floor), best_no.value_or(floor)};
    }

    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
        if (texts.empty()) throw Error("embed requires a non-empty batch");
        nlohmann::json body;
        body["model"] = config_.model;
        body["input"] = texts;
        nlohmann::json payload = post_json("/embeddings", body);
        if (!payload.contains("data") || !payload["data"].is_array())
            throw TransportError("embedding response missing data array");
        std::vector<std::vector<double>> out(texts.size());
        std::size_t next = 0;
        for (const auto& item : payload["data"]) {
            std::size_t slot = item.contains("index") ? item["index"].get<std::size_t>() : next;
            if (slot >= out.size()) throw TransportError("embedding response index out of range");
            out[slot] = item.at("embedding").get<std::vector<double>>();
            ++next;
        }
        const std::size_t dim = out.empty() ? 0 : out.front().size();
        for (const auto& v : out)
            if (v.size() != dim || v.empty())
                throw DimensionMismatch("embedding batch returned mixed dimensions");
        return out;
    }

    std::string name() const override { return "http"; }

private:
    nlohmann::json chat_body(const ChatRequest& req) const {
        nlohmann::json body;
        body["model"] = config_.model;
        std::string system_text = req.system_text;
        if (!req.reasoning_enabled && config_.reasoning_toggle_field.empty())
            system_text += config_.no_reasoning_system_suffix;
        body["messages"] = nlohmann::json::array({{{"role", "system"}, {"content", system_text}},
                                                  {{"role", "user"}, {"content", req.user_text}}});
        body["temperature"] = req.temperature;
        body["n"] = req.num_samples;
        body["max_tokens"] = req.max_tokens;
        if (!req.reasoning_enabled && !config_.reasoning_toggle_field.empty())
            body["chat_template_kwargs"] = {{config_.reasoning_toggle_field, false}};
        return body;
    }

    nlohmann::json post_json(const std::string& route, const nlohmann::json& body) {
        const std::string path = path_prefix_ + route;
        const std::string payload = body.dump();
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        std::string last_error;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                const double delay = config_.retry_base_delay_s * static_cast<double>(1 << (attempt - 1));
                std::this_thread::sleep_for(std::chrono::duration<double>(std::min(delay, 8.0)));
            }
            httplib::Result result;
            {
                semaphore_.acquire();
                struct Release {
                    std::counting_semaphore<>& s;
                    ~Release() { s.release(); }
                } release{semaphore_};
                httplib::Client client(host_);
                client.set_connection_timeout(config_.timeout_s);
                client.set_read_timeout(config_.timeout_s);
                client.set_write_timeout(config_.timeout_s);
                result = client.Post(path, headers, payload, "application/json");
            }
            if (!result) {
                last_error = "transport failure: " + httplib::to_string(result.error());
                continue;
            }
            if (result->status == 429 || result->status >= 500) {
                last_error = "server returned status " + std::to_string(result->status);
                continue;
            }
            if (result->status >= 400)
                throw BackendRefused("server refused request with status " +
                                         std::to_string(result->status) + ": " + result->body,
                                     result->status);
            try {
                return nlohmann::json::parse(result->body);
            } catch (const nlohmann::json::exception& ex) {
                throw TransportError(std::string("malformed server response: ") + ex.what(),
                                     result->status);
            }
        }
        throw TransportError(last_error + " (after " + std::to_string(config_.max_retries + 1) +
                             " attempts)");
    }

    static void split_endpoint(const std::string& endpoint, std::string& host, std::string& prefix) {
        std::size_t scheme = endpoint.find("://");
        std::size_t path_start =
            endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
        if (path_start == std::string::npos) {
            host = endpoint;
            prefix.clear();
        } else {
            host = endpoint.substr(0, path_start);
            prefix = endpoint.substr(path_start);
        }
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }

    HttpBackendConfig config_;
    std::string host_;
    std::string path_prefix_;
    std::string api_key_;
    std::counting_semaphore<> semaphore_;
};

}  // namespace linkforge
