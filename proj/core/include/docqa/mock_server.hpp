#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace docqa {

/// Deterministic bag-of-features embedding: each content token of the
/// normalized text (with a leading "query: "/"passage: " prefix removed) is
/// hashed to a signed coordinate; the sum is L2-normalized. Text without
/// tokens maps to the first basis vector.
std::vector<float> hashed_embedding(std::string_view text, std::size_t dim);

struct MockResponse {
    int status = 200;
    std::string content;
    std::chrono::milliseconds delay{0};
};

/// Key of a scripted chat response. An unset field matches any value.
struct RequestFingerprint {
    std::optional<std::uint64_t> prompt_hash;
    std::optional<int> config_id;

    friend auto operator<=>(const RequestFingerprint&, const RequestFingerprint&) = default;
};

struct MockRequestLogEntry {
    std::string endpoint;  // "chat" or "embeddings"
    std::uint64_t prompt_hash = 0;
    std::optional<int> config_id;
    std::size_t batch_size = 0;
    int status = 0;
};

struct MockChatCall {
    std::string prompt;
    std::uint64_t prompt_hash = 0;
    std::optional<int> config_id;
    double temperature = 0.0;
    std::uint64_t seed = 0;
    std::size_t image_parts = 0;
};

/// OpenAI-shaped chat-completions and embeddings endpoint served from a
/// background thread on 127.0.0.1. Chat lookup order: exact (hash, config)
/// script, (hash, any), (any, config), the responder callback, the default
/// response, else HTTP 404. A script's responses are consumed in order and the
/// last one repeats.
class MockServer {
public:
    struct Options {
        std::size_t threads = 32;
        std::size_t embedding_dim = 1024;
        std::optional<std::string> default_content;
    };

    using ChatResponder = std::function<std::optional<MockResponse>(const MockChatCall&)>;
    using EmbeddingResponder = std::function<std::vector<float>(const std::string& input)>;

    MockServer();
    explicit MockServer(Options options);
    ~MockServer();

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    /// e.g. "http://127.0.0.1:40123/v1"
    std::string base_url() const;

    void script(RequestFingerprint key, std::vector<MockResponse> responses);
    void set_chat_responder(ChatResponder responder);
    void set_embedding_responder(EmbeddingResponder responder);
    /// The next `count` embedding requests fail with `status`.
    void fail_embeddings(std::size_t count, int status);
    void set_latency(std::chrono::milliseconds latency);

    std::vector<MockRequestLogEntry> request_log() const;
    void clear_log();
    /// Maximum number of requests observed executing simultaneously.
    std::size_t max_concurrency() const;

private:
    struct State;
    std::unique_ptr<State> state_;
};

}  // namespace docqa
