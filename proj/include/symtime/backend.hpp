#pragma once

#include "symtime/symbolic_text.hpp"

#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace symtime {

struct BackendRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.1;
    int max_tokens = 1024;

    // Routing metadata. Used by the mock backend, never sent over HTTP.
    Stage stage = Stage::representation;
    int round = 0;
    int run = 0;
    std::string item_id;
};

/// Chat-completion capability. Implementations must be safe to call from
/// several pipeline runs at once. Transport failures throw Error(transport).
class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual std::string complete(const BackendRequest& request) = 0;
};

/// Scripted backend. The script is JSON Lines, one object per stage response:
///
///   {"stage": "inference", "response": "<inference>...</inference>"}
///
/// Optional keys: "item" and "run" restrict the entry to one dataset item or
/// run (absent means any), "round" selects a reflection round (default 0),
/// "error": "transport" makes the entry fail, and "fail_attempts": n fails
/// only the first n calls that select it. Lookup prefers an exact item, then
/// an exact run, then the highest round not above the requested one.
class MockBackend : public ModelBackend {
public:
    struct Entry {
        Stage stage = Stage::representation;
        std::optional<std::string> item;
        std::optional<int> run;
        int round = 0;
        std::string response;
        bool always_fail = false;
        int fail_attempts = 0;
    };

    explicit MockBackend(std::vector<Entry> entries);

    /// Throws ParseError(fact_parse) with the offending line span on a bad script.
    static MockBackend from_text(std::string_view jsonl);
    /// Throws Error(io) when the file cannot be read.
    static MockBackend from_file(const std::filesystem::path& path);

    std::string complete(const BackendRequest& request) override;

    /// Number of complete() calls, including failed ones.
    std::size_t calls() const noexcept { return calls_.load(); }

    const std::vector<Entry>& entries() const noexcept { return entries_; }

private:
    std::vector<Entry> entries_;
    std::vector<int> failures_left_;
    std::mutex mutex_;
    std::atomic<std::size_t> calls_{0};
};

struct HttpBackendConfig {
    /// Base URL ("https://host"), a ".../v1" prefix, or the full ".../chat/completions" URL.
    std::string endpoint;
    std::string model;
    /// Environment variable holding the API key; an unset variable sends no Authorization header.
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_seconds = 120;
};

/// POST /v1/chat/completions with {model, messages, temperature, max_tokens};
/// returns choices[0].message.content.
class HttpChatBackend : public ModelBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);

    std::string complete(const BackendRequest& request) override;

    const std::string& base_url() const noexcept { return base_; }
    const std::string& path() const noexcept { return path_; }

private:
    HttpBackendConfig config_;
    std::string base_;
    std::string path_;
};

} // namespace symtime
