#include "symtime/backend.hpp"

#include "symtime/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <tuple>

namespace symtime {

MockBackend::MockBackend(std::vector<Entry> entries) : entries_(std::move(entries)) {
    failures_left_.reserve(entries_.size());
    for (const auto& e : entries_) failures_left_.push_back(e.fail_attempts);
}

MockBackend MockBackend::from_text(std::string_view jsonl) {
    std::vector<Entry> entries;
    std::size_t line_start = 0;
    std::size_t line_no = 0;
    while (line_start < jsonl.size()) {
        std::size_t line_end = jsonl.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = jsonl.size();
        ++line_no;
        const std::string_view line = jsonl.substr(line_start, line_end - line_start);
        const Span span{line_start, line.size()};
        line_start = line_end + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        const auto bad = [&](const std::string& why) -> ParseError {
            return ParseError(Errc::fact_parse, "mock script line " + std::to_string(line_no) + ": " + why, span);
        };
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw bad(e.what());
        }
        if (!j.is_object()) throw bad("expected a JSON object");
        if (!j.contains("stage") || !j["stage"].is_string()) throw bad("missing string key \"stage\"");
        const auto stage = parse_stage(j["stage"].get<std::string>());
        if (!stage) throw bad("unknown stage '" + j["stage"].get<std::string>() + "'");

        Entry e;
        e.stage = *stage;
        try {
            if (j.contains("item") && !j["item"].is_null()) e.item = j["item"].get<std::string>();
            if (j.contains("run") && !j["run"].is_null()) e.run = j["run"].get<int>();
            e.round = j.value("round", 0);
            e.response = j.value("response", std::string());
            e.always_fail = j.value("error", std::string()) == "transport";
            e.fail_attempts = j.value("fail_attempts", 0);
        } catch (const nlohmann::json::exception& ex) {
            throw bad(ex.what());
        }
        if (!e.always_fail && !j.contains("response")) throw bad("missing key \"response\"");
        entries.push_back(std::move(e));
    }
    return MockBackend(std::move(entries));
}

MockBackend MockBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read mock script " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

std::string MockBackend::complete(const BackendRequest& request) {
    ++calls_;
    std::optional<std::size_t> best;
    std::tuple<bool, bool, int> best_key{};
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const Entry& e = entries_[i];
        if (e.stage != request.stage || e.round > request.round) continue;
        if (e.item && *e.item != request.item_id) continue;
        if (e.run && *e.run != request.run) continue;
        const std::tuple<bool, bool, int> key{e.item.has_value(), e.run.has_value(), e.round};
        if (!best || key > best_key) {
            best = i;
            best_key = key;
        }
    }
    if (!best)
        throw Error(Errc::pipeline, std::string("mock script has no response for stage ") + tag_name(request.stage) +
                                        " round " + std::to_string(request.round) + " item '" + request.item_id +
                                        "'");
    const Entry& e = entries_[*best];
    if (e.always_fail) throw Error(Errc::transport, "scripted transport failure");
    if (e.fail_attempts > 0) {
        std::lock_guard lock(mutex_);
        if (failures_left_[*best] > 0) {
            --failures_left_[*best];
            throw Error(Errc::transport, "scripted transient transport failure");
        }
    }
    return e.response;
}

namespace {

// Splits "scheme://host[:port][/path]" into the client base and the request path.
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::invalid_argument, "endpoint must start with http:// or https://");
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw Error(Errc::invalid_argument, "unsupported endpoint scheme '" + scheme + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? std::string() : url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    if (path.ends_with("/chat/completions")) return {base, path};
    if (path.ends_with("/v1")) return {base, path + "/chat/completions"};
    return {base, path + "/v1/chat/completions"};
}

} // namespace

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw Error(Errc::invalid_argument, "an endpoint URL is required");
    std::tie(base_, path_) = split_endpoint(config_.endpoint);
}

std::string HttpChatBackend::complete(const BackendRequest& request) {
    nlohmann::json body = {{"model", config_.model},
                           {"messages",
                            nlohmann::json::array({{{"role", "system"}, {"content", request.system_prompt}},
                                                   {{"role", "user"}, {"content", request.user_prompt}}})},
                           {"temperature", request.temperature},
                           {"max_tokens", request.max_tokens}};

    httplib::Client client(base_);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_write_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    const auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw Error(Errc::transport, "request to " + base_ + path_ + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw Error(Errc::transport, "endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                         res->body.substr(0, 200));
    try {
        const auto j = nlohmann::json::parse(res->body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        return content.is_string() ? content.get<std::string>() : std::string();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::transport, std::string("malformed chat completion response: ") + e.what());
    }
}

} // namespace symtime
