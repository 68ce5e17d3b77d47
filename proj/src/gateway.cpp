#include "pdesharp/gateway.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace pdesharp {

using nlohmann::json;

const char* role_name(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

Conversation& Conversation::add_system(std::string text) {
    messages.push_back({Role::system, std::move(text)});
    return *this;
}

Conversation& Conversation::add_user(std::string text) {
    messages.push_back({Role::user, std::move(text)});
    return *this;
}

Conversation& Conversation::add_assistant(std::string text) {
    messages.push_back({Role::assistant, std::move(text)});
    return *this;
}

void validate_conversation(const Conversation& conv) {
    const auto& msgs = conv.messages;
    if (msgs.empty()) throw GatewayError("conversation is empty");
    if (msgs.front().role == Role::assistant)
        throw GatewayError("conversation opens with an assistant turn");
    for (std::size_t i = 1; i < msgs.size(); ++i) {
        if (msgs[i].role == Role::system)
            throw GatewayError("system message at position " + std::to_string(i) +
                               ", only allowed first");
        if (msgs[i].role == msgs[i - 1].role)
            throw GatewayError("consecutive " + std::string(role_name(msgs[i].role)) +
                               " turns at position " + std::to_string(i));
    }
}

CompletionResult complete(Conversation& conv, Backend& backend) {
    if (conv.messages.empty()) throw GatewayError("complete: conversation is empty");
    if (conv.model_id.empty()) throw GatewayError("complete: conversation has no model_id");
    validate_conversation(conv);
    if (conv.messages.back().role == Role::assistant)
        throw GatewayError("complete: conversation already ends with an assistant turn");

    std::string base = conv.key.empty() ? std::string("call") : conv.key;
    std::string call_key = base + "/" + std::to_string(conv.completed_calls);
    CompletionResult result = backend.complete(conv, call_key);
    if (result.usage.input_tokens < 0 || result.usage.output_tokens < 0)
        throw GatewayError("backend reported negative token counts for " + call_key);
    result.usage.model_id = conv.model_id;
    result.usage.purpose = conv.purpose;
    ++conv.completed_calls;
    return result;
}

std::string request_digest(const Conversation& conv) {
    json j;
    j["model"] = conv.model_id;
    j["temperature"] = conv.params.temperature;
    j["max_tokens"] = conv.params.max_tokens;
    json msgs = json::array();
    for (const auto& m : conv.messages)
        msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    j["messages"] = msgs;
    return sha256_hex(j.dump());
}

// ---- scripted --------------------------------------------------------------------

void ScriptedBackend::add(const std::string& key, std::string text, long input_tokens,
                          long output_tokens) {
    CompletionResult r;
    r.text = std::move(text);
    r.usage.input_tokens = input_tokens;
    r.usage.output_tokens = output_tokens;
    responses_[key] = std::move(r);
}

void ScriptedBackend::set_fallback(
    std::function<CompletionResult(const Conversation&, const std::string&)> fn) {
    fallback_ = std::move(fn);
}

ScriptedBackend ScriptedBackend::from_json_file(const std::filesystem::path& path) {
    json j = json::parse(read_text_file(path));
    ScriptedBackend backend;
    for (const auto& [key, entry] : j.at("responses").items())
        backend.add(key, entry.at("text").get<std::string>(), entry.value("input_tokens", 0L),
                    entry.value("output_tokens", 0L));
    return backend;
}

CompletionResult ScriptedBackend::complete(const Conversation& conv, const std::string& key) {
    auto it = responses_.find(key);
    if (it != responses_.end()) return it->second;
    if (fallback_) return fallback_(conv, key);
    throw GatewayError("no scripted response for call " + key);
}

// ---- live ------------------------------------------------------------------------

LiveBackend::LiveBackend(LiveConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) throw GatewayError("live backend needs a base_url");
    if (cfg_.max_attempts < 1) throw GatewayError("live backend max_attempts must be >= 1");
}

CompletionResult LiveBackend::complete(const Conversation& conv, const std::string& key) {
    std::string credential;
    if (!cfg_.api_key_env.empty()) {
        const char* v = std::getenv(cfg_.api_key_env.c_str());
        if (!v || !*v)
            throw GatewayError("credential environment variable " + cfg_.api_key_env +
                               " is not set");
        credential = v;
    }

    json body;
    body["model"] = conv.model_id;
    body["temperature"] = conv.params.temperature;
    body["max_tokens"] = conv.params.max_tokens;
    json msgs = json::array();
    for (const auto& m : conv.messages)
        msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    body["messages"] = msgs;
    const std::string payload = body.dump();

    static thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
    std::string last_error;
    double delay_ms = static_cast<double>(cfg_.backoff_initial_ms);

    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
        if (attempt > 1) {
            double jitter = 1.0 + cfg_.backoff_jitter * (2.0 * uniform01(jitter_rng) - 1.0);
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long>(delay_ms * jitter)));
            delay_ms *= cfg_.backoff_factor;
        }

        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(cfg_.timeout_seconds);
        client.set_read_timeout(cfg_.timeout_seconds);
        httplib::Headers headers;
        if (!credential.empty()) headers.emplace("Authorization", "Bearer " + credential);

        auto res = client.Post(cfg_.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            json j = json::parse(res->body, nullptr, false);
            if (j.is_discarded())
                throw GatewayError("malformed response body for " + key);
            try {
                CompletionResult out;
                out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
                const auto& usage = j.at("usage");
                out.usage.input_tokens = usage.at("prompt_tokens").get<long>();
                out.usage.output_tokens = usage.at("completion_tokens").get<long>();
                return out;
            } catch (const json::exception& e) {
                throw GatewayError("response for " + key +
                                   " lacks assistant text or usage counts: " + e.what());
            }
        }
        last_error = "HTTP " + std::to_string(res->status);
        bool transient = res->status == 429 || res->status >= 500;
        if (!transient)
            throw GatewayError("request " + key + " rejected: " + last_error + " " + res->body);
    }
    throw GatewayError("request " + key + " failed after " + std::to_string(cfg_.max_attempts) +
                       " attempts: " + last_error);
}

// ---- transcripts -----------------------------------------------------------------

GatewayMode gateway_mode_from_string(const std::string& s) {
    if (s == "live") return GatewayMode::live;
    if (s == "record") return GatewayMode::record;
    if (s == "replay") return GatewayMode::replay;
    throw GatewayError("unknown gateway mode: " + s);
}

const char* gateway_mode_name(GatewayMode m) {
    switch (m) {
        case GatewayMode::live: return "live";
        case GatewayMode::record: return "record";
        case GatewayMode::replay: return "replay";
    }
    return "live";
}

TranscriptStore::TranscriptStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string TranscriptStore::sanitize_key(const std::string& key) {
    std::string out;
    out.reserve(key.size());
    for (char c : key) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')
            out += c;
        else if (c == '/')
            out += '-';
        else
            out += '_';
    }
    return out;
}

void TranscriptStore::record(const std::string& key, const Conversation& conv,
                             const CompletionResult& result) {
    std::lock_guard<std::mutex> lock(mu_);
    std::filesystem::create_directories(dir_);
    json j;
    j["seq"] = seq_++;
    j["key"] = key;
    j["digest"] = request_digest(conv);
    json req;
    req["model"] = conv.model_id;
    req["temperature"] = conv.params.temperature;
    req["max_tokens"] = conv.params.max_tokens;
    json msgs = json::array();
    for (const auto& m : conv.messages)
        msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    req["messages"] = msgs;
    j["request"] = req;
    j["response"] = {{"text", result.text}};
    j["usage"] = {{"input_tokens", result.usage.input_tokens},
                  {"output_tokens", result.usage.output_tokens}};
    write_file_atomic(dir_ / (sanitize_key(key) + ".json"), j.dump(2) + "\n");
}

bool TranscriptStore::has(const std::string& key) const {
    return std::filesystem::exists(dir_ / (sanitize_key(key) + ".json"));
}

CompletionResult TranscriptStore::replay(const std::string& key, const Conversation& conv) const {
    auto path = dir_ / (sanitize_key(key) + ".json");
    if (!std::filesystem::exists(path))
        throw GatewayError("no recorded response for call " + key);
    json j = json::parse(read_text_file(path));
    std::string want = request_digest(conv);
    std::string have = j.at("digest").get<std::string>();
    if (want != have)
        throw GatewayError("transcript digest mismatch for call " + key +
                           ": the prompts differ from the recorded run");
    CompletionResult out;
    out.text = j.at("response").at("text").get<std::string>();
    out.usage.input_tokens = j.at("usage").at("input_tokens").get<long>();
    out.usage.output_tokens = j.at("usage").at("output_tokens").get<long>();
    return out;
}

CompletionResult RecordingBackend::complete(const Conversation& conv, const std::string& key) {
    CompletionResult result = inner_.complete(conv, key);
    store_.record(key, conv, result);
    return result;
}

CompletionResult ReplayBackend::complete(const Conversation& conv, const std::string& key) {
    return store_.replay(key, conv);
}

// ---- cost ------------------------------------------------------------------------

CostBreakdown cost_total(const std::vector<UsageRecord>& ledger, const PriceTable& prices) {
    CostBreakdown out;
    for (const auto& rec : ledger) {
        if (rec.input_tokens < 0 || rec.output_tokens < 0)
            throw GatewayError("negative token count in usage ledger");
        auto it = prices.models.find(rec.model_id);
        if (it == prices.models.end())
            throw GatewayError("no price for model " + rec.model_id);
        if (it->second.input_per_million < 0.0 || it->second.output_per_million < 0.0)
            throw GatewayError("negative price for model " + rec.model_id);
        out.input_cost +=
            static_cast<double>(rec.input_tokens) * it->second.input_per_million / 1e6;
        out.output_cost +=
            static_cast<double>(rec.output_tokens) * it->second.output_per_million / 1e6;
    }
    out.total = out.input_cost + out.output_cost;
    return out;
}

}  // namespace pdesharp
