#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "pdesharp/util.hpp"

// Chat-completion access with three interchangeable backends: live HTTP,
// scripted fixtures, and transcript replay. Everything the pipeline says to a
// model goes through complete(), which keys each call by conversation position
// so recorded runs can be replayed bit for bit.

namespace pdesharp {

struct GatewayError : Error {
    using Error::Error;
};

enum class Role { system, user, assistant };

const char* role_name(Role r);

struct Message {
    Role role;
    std::string content;
};

struct ChatParams {
    double temperature = 0.7;
    int max_tokens = 8192;
};

struct UsageRecord {
    std::string model_id;
    std::string purpose;  // analysis, genesis, judge, debug
    long input_tokens = 0;
    long output_tokens = 0;
};

struct Conversation {
    std::string model_id;
    std::string key;      // transcript position base, e.g. "analysis/classify"
    std::string purpose;  // tag copied onto every UsageRecord from this conversation
    ChatParams params;
    std::vector<Message> messages;
    int completed_calls = 0;

    Conversation& add_system(std::string text);
    Conversation& add_user(std::string text);
    Conversation& add_assistant(std::string text);
};

// system only as the opening message, no two consecutive turns by the same role
void validate_conversation(const Conversation& conv);

struct CompletionResult {
    std::string text;
    UsageRecord usage;
};

class Backend {
  public:
    virtual ~Backend() = default;
    // key is the call's stable position ("<conversation key>/<call index>")
    virtual CompletionResult complete(const Conversation& conv, const std::string& key) = 0;
};

// Validates the conversation, asks the backend, stamps model/purpose onto the
// usage record, and advances the conversation's call counter. The assistant
// text is not appended; the caller decides what enters the history.
CompletionResult complete(Conversation& conv, Backend& backend);

// Canonical request hash (model, messages, params); replay uses it to detect
// prompt drift against the recorded run.
std::string request_digest(const Conversation& conv);

// ---- backends ------------------------------------------------------------------

// Fixture backend: responses addressed by call key. A fallback functor can
// synthesize answers for keys outside the script (used by the fuzz suites).
//
// JSON fixture format: {"responses": {"<key>": {"text": "...",
// "input_tokens": 120, "output_tokens": 40}, ...}}  (token fields optional)
class ScriptedBackend : public Backend {
  public:
    ScriptedBackend() = default;
    void add(const std::string& key, std::string text, long input_tokens = 0,
             long output_tokens = 0);
    void set_fallback(std::function<CompletionResult(const Conversation&, const std::string&)> fn);
    static ScriptedBackend from_json_file(const std::filesystem::path& path);

    CompletionResult complete(const Conversation& conv, const std::string& key) override;

  private:
    std::map<std::string, CompletionResult> responses_;
    std::function<CompletionResult(const Conversation&, const std::string&)> fallback_;
};

struct LiveConfig {
    std::string base_url;  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string api_key_env;  // name of the env var holding the credential; empty = no auth
    int max_attempts = 3;
    int backoff_initial_ms = 250;
    double backoff_factor = 2.0;
    double backoff_jitter = 0.2;  // +- fraction of the delay
    int timeout_seconds = 120;
};

// Chat-completions HTTP client. Retries connection errors, 429 and 5xx with
// exponential backoff; other statuses fail immediately.
class LiveBackend : public Backend {
  public:
    explicit LiveBackend(LiveConfig cfg);
    CompletionResult complete(const Conversation& conv, const std::string& key) override;

  private:
    LiveConfig cfg_;
};

// ---- transcripts -----------------------------------------------------------------

enum class GatewayMode { live, record, replay };

GatewayMode gateway_mode_from_string(const std::string& s);
const char* gateway_mode_name(GatewayMode m);

// One JSON file per call, named by the sanitized call key so directory
// listings are reproducible. Writes are serialized.
class TranscriptStore {
  public:
    explicit TranscriptStore(std::filesystem::path dir);

    void record(const std::string& key, const Conversation& conv, const CompletionResult& result);
    CompletionResult replay(const std::string& key, const Conversation& conv) const;
    bool has(const std::string& key) const;

    const std::filesystem::path& dir() const { return dir_; }
    static std::string sanitize_key(const std::string& key);

  private:
    std::filesystem::path dir_;
    mutable std::mutex mu_;
    int seq_ = 0;
};

class RecordingBackend : public Backend {
  public:
    RecordingBackend(Backend& inner, TranscriptStore& store) : inner_(inner), store_(store) {}
    CompletionResult complete(const Conversation& conv, const std::string& key) override;

  private:
    Backend& inner_;
    TranscriptStore& store_;
};

class ReplayBackend : public Backend {
  public:
    explicit ReplayBackend(const TranscriptStore& store) : store_(store) {}
    CompletionResult complete(const Conversation& conv, const std::string& key) override;

  private:
    const TranscriptStore& store_;
};

// ---- cost accounting -------------------------------------------------------------

struct PriceTable {
    struct Price {
        double input_per_million = 0.0;
        double output_per_million = 0.0;
    };
    std::map<std::string, Price> models;
};

struct CostBreakdown {
    double input_cost = 0.0;
    double output_cost = 0.0;
    double total = 0.0;
};

CostBreakdown cost_total(const std::vector<UsageRecord>& ledger, const PriceTable& prices);

}  // namespace pdesharp
