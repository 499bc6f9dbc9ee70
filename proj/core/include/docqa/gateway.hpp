#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

namespace docqa {

struct EndpointConfig {
    std::string base_url = "http://127.0.0.1:8000/v1";
    std::string model_name;
    double timeout_seconds = 120.0;
    int max_retries = 2;
    int max_in_flight = 4;
    std::optional<std::string> auth_token;
    std::chrono::milliseconds backoff_initial{250};
    std::chrono::milliseconds backoff_max{8000};

    /// Throws ConfigError when timeout <= 0, max_retries < 0 or max_in_flight < 1.
    void validate() const;
};

/// Delay slept before retry k (k = 1..max_retries): initial * 2^(k-1), capped.
std::vector<std::chrono::milliseconds> backoff_schedule(const EndpointConfig& cfg);

struct ContentPart {
    enum class Kind { text, image };
    Kind kind = Kind::text;
    /// Text, or an opaque image URL / data URI.
    std::string value;

    static ContentPart text(std::string s) { return {Kind::text, std::move(s)}; }
    static ContentPart image(std::string url) { return {Kind::image, std::move(url)}; }
};

struct ChatMessage {
    std::string role = "user";
    std::vector<ContentPart> content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    double top_p = 1.0;
    int top_k = 1;
    int max_tokens = 256;
    std::uint64_t seed = 0;
    /// Decoding-configuration id; sent as the X-Config-Id header, not in the body.
    std::optional<int> config_id;

    static ChatRequest user_text(std::string prompt);
};

/// Body of POST {base}/chat/completions.
nlohmann::json to_wire(const ChatRequest& req, const std::string& model);
/// Concatenation of all text parts, messages separated by '\n'.
std::string prompt_text(const ChatRequest& req);
std::uint64_t prompt_fingerprint(std::string_view prompt);

/// Parses {choices: [{message: {content}}]}; throws ContractError on any other shape.
std::string parse_chat_response(const nlohmann::json& body);
/// Parses {data: [{embedding: [...]}]}; throws ContractError on any other shape.
std::vector<std::vector<float>> parse_embedding_response(const nlohmann::json& body);

/// Text generation backend. Implementations must be safe for concurrent calls.
class GenerationClient {
public:
    virtual ~GenerationClient() = default;
    virtual std::string generate(const ChatRequest& req) = 0;
};

/// Embedding backend. Implementations must be safe for concurrent calls.
class EmbeddingClient {
public:
    virtual ~EmbeddingClient() = default;
    virtual std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& inputs) = 0;
    virtual std::size_t max_in_flight() const { return 1; }
};

/// Shared plumbing: per-endpoint in-flight limit, retries with exponential
/// backoff, and status/transport error classification.
class HttpTransport {
public:
    explicit HttpTransport(EndpointConfig cfg);
    ~HttpTransport();

    HttpTransport(const HttpTransport&) = delete;
    HttpTransport& operator=(const HttpTransport&) = delete;

    /// POSTs `body` to base_url + path. Transport failures, 429 and 5xx are
    /// retried; other non-2xx statuses throw EndpointError immediately.
    nlohmann::json post_json(const std::string& path, const nlohmann::json& body,
                             const std::vector<std::pair<std::string, std::string>>& headers = {});

    const EndpointConfig& config() const noexcept { return cfg_; }
    /// Attempts made by this transport so far (all requests).
    std::uint64_t attempts_made() const noexcept { return attempts_.load(); }

private:
    EndpointConfig cfg_;
    std::string scheme_host_port_;
    std::string path_prefix_;
    std::unique_ptr<std::counting_semaphore<>> in_flight_;
    std::atomic<std::uint64_t> attempts_{0};
};

class HttpGenerationClient final : public GenerationClient {
public:
    explicit HttpGenerationClient(EndpointConfig cfg) : transport_(std::move(cfg)) {}
    std::string generate(const ChatRequest& req) override;
    HttpTransport& transport() noexcept { return transport_; }

private:
    HttpTransport transport_;
};

class HttpEmbeddingClient final : public EmbeddingClient {
public:
    explicit HttpEmbeddingClient(EndpointConfig cfg) : transport_(std::move(cfg)) {}
    std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& inputs) override;
    std::size_t max_in_flight() const override
    {
        return static_cast<std::size_t>(transport_.config().max_in_flight);
    }

private:
    HttpTransport transport_;
};

/// In-process generation backend wrapping a callable.
class FunctionGenerationClient final : public GenerationClient {
public:
    using Fn = std::function<std::string(const ChatRequest&)>;
    explicit FunctionGenerationClient(Fn fn) : fn_(std::move(fn)) {}
    std::string generate(const ChatRequest& req) override { return fn_(req); }

private:
    Fn fn_;
};

}  // namespace docqa
