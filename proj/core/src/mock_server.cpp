#include "docqa/mock_server.hpp"

#include "docqa/gateway.hpp"
#include "docqa/hashing.hpp"
#include "docqa/text.hpp"
#include "docqa/tokenizer.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace docqa {

using nlohmann::json;

std::vector<float> hashed_embedding(std::string_view text, std::size_t dim)
{
    for (std::string_view prefix : {std::string_view("query: "), std::string_view("passage: ")}) {
        if (text.substr(0, prefix.size()) == prefix) {
            text.remove_prefix(prefix.size());
            break;
        }
    }
    std::vector<double> acc(dim, 0.0);
    for (const Token& t : content_tokens(normalize_text(text))) {
        const std::uint64_t h = fnv1a64(t.text);
        acc[h % dim] += (h >> 63) ? -1.0 : 1.0;
    }
    double sq = 0.0;
    for (double x : acc) {
        sq += x * x;
    }
    std::vector<float> out(dim, 0.0f);
    if (sq == 0.0) {
        out[0] = 1.0f;
        return out;
    }
    const double norm = std::sqrt(sq);
    for (std::size_t i = 0; i < dim; ++i) {
        out[i] = static_cast<float>(acc[i] / norm);
    }
    return out;
}

struct MockServer::State {
    Options options;
    httplib::Server server;
    std::thread thread;
    int port = 0;

    mutable std::mutex mu;
    std::map<RequestFingerprint, std::vector<MockResponse>> scripts;
    std::map<RequestFingerprint, std::size_t> cursors;
    ChatResponder chat_responder;
    EmbeddingResponder embedding_responder;
    std::size_t embedding_failures = 0;
    int embedding_failure_status = 500;
    std::chrono::milliseconds latency{0};
    std::vector<MockRequestLogEntry> log;

    std::atomic<std::size_t> active{0};
    std::atomic<std::size_t> peak{0};

    void enter()
    {
        const std::size_t now = ++active;
        std::size_t prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
    }
    void leave() { --active; }

    std::optional<MockResponse> next_scripted(const RequestFingerprint& key)
    {
        const auto it = scripts.find(key);
        if (it == scripts.end() || it->second.empty()) {
            return std::nullopt;
        }
        std::size_t& cursor = cursors[key];
        const MockResponse r = it->second[std::min(cursor, it->second.size() - 1)];
        ++cursor;
        return r;
    }
};

namespace {

std::string extract_prompt(const json& body, std::size_t& image_parts)
{
    std::string prompt;
    const json& messages = body.at("messages");
    for (std::size_t i = 0; i < messages.size(); ++i) {
        if (i > 0) {
            prompt.push_back('\n');
        }
        const json& content = messages[i].at("content");
        if (content.is_string()) {
            prompt += content.get<std::string>();
            continue;
        }
        for (const json& part : content) {
            if (part.value("type", "") == "text") {
                prompt += part.value("text", "");
            } else {
                ++image_parts;
            }
        }
    }
    return prompt;
}

json chat_body(const std::string& content)
{
    return {
        {"id", "mock"},
        {"object", "chat.completion"},
        {"choices", json::array({{{"index", 0},
                                  {"message", {{"role", "assistant"}, {"content", content}}},
                                  {"finish_reason", "stop"}}})},
    };
}

}  // namespace

MockServer::MockServer() : MockServer(Options{}) {}

MockServer::MockServer(Options options) : state_(std::make_unique<State>())
{
    State& st = *state_;
    st.options = std::move(options);
    const std::size_t threads = st.options.threads;
    st.server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

    st.server.Post("/v1/chat/completions", [&st](const httplib::Request& req, httplib::Response& res) {
        st.enter();
        struct Leave {
            State& s;
            ~Leave() { s.leave(); }
        } leave{st};

        MockChatCall call;
        try {
            const json body = json::parse(req.body);
            call.prompt = extract_prompt(body, call.image_parts);
            call.temperature = body.value("temperature", 0.0);
            call.seed = body.value("seed", std::uint64_t{0});
        } catch (const json::exception& e) {
            res.status = 400;
            res.set_content(std::string("bad request: ") + e.what(), "text/plain");
            return;
        }
        call.prompt_hash = prompt_fingerprint(call.prompt);
        if (req.has_header("X-Config-Id")) {
            call.config_id = std::stoi(req.get_header_value("X-Config-Id"));
        }

        std::optional<MockResponse> reply;
        std::chrono::milliseconds latency{0};
        ChatResponder responder;
        {
            std::lock_guard lock(st.mu);
            latency = st.latency;
            reply = st.next_scripted({call.prompt_hash, call.config_id});
            if (!reply) {
                reply = st.next_scripted({call.prompt_hash, std::nullopt});
            }
            if (!reply) {
                reply = st.next_scripted({std::nullopt, call.config_id});
            }
            responder = st.chat_responder;
        }
        if (!reply && responder) {
            reply = responder(call);
        }
        if (!reply && st.options.default_content) {
            reply = MockResponse{200, *st.options.default_content, {}};
        }
        if (!reply) {
            reply = MockResponse{404, "unscripted request", {}};
        }

        if (latency.count() > 0 || reply->delay.count() > 0) {
            std::this_thread::sleep_for(latency + reply->delay);
        }
        {
            std::lock_guard lock(st.mu);
            st.log.push_back({"chat", call.prompt_hash, call.config_id, 1, reply->status});
        }
        res.status = reply->status;
        if (reply->status >= 200 && reply->status < 300) {
            res.set_content(chat_body(reply->content).dump(), "application/json");
        } else {
            res.set_content(reply->content, "text/plain");
        }
    });

    st.server.Post("/v1/embeddings", [&st](const httplib::Request& req, httplib::Response& res) {
        st.enter();
        struct Leave {
            State& s;
            ~Leave() { s.leave(); }
        } leave{st};

        std::vector<std::string> inputs;
        try {
            const json body = json::parse(req.body);
            const json& input = body.at("input");
            if (input.is_string()) {
                inputs.push_back(input.get<std::string>());
            } else {
                inputs = input.get<std::vector<std::string>>();
            }
        } catch (const json::exception& e) {
            res.status = 400;
            res.set_content(std::string("bad request: ") + e.what(), "text/plain");
            return;
        }

        int status = 200;
        std::chrono::milliseconds latency{0};
        EmbeddingResponder responder;
        {
            std::lock_guard lock(st.mu);
            latency = st.latency;
            if (st.embedding_failures > 0) {
                --st.embedding_failures;
                status = st.embedding_failure_status;
            }
            responder = st.embedding_responder;
        }
        if (latency.count() > 0) {
            std::this_thread::sleep_for(latency);
        }
        {
            std::lock_guard lock(st.mu);
            st.log.push_back({"embeddings", 0, std::nullopt, inputs.size(), status});
        }
        if (status != 200) {
            res.status = status;
            res.set_content("scripted failure", "text/plain");
            return;
        }
        json data = json::array();
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            std::vector<float> v = responder ? responder(inputs[i]) : hashed_embedding(inputs[i], st.options.embedding_dim);
            data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", std::move(v)}});
        }
        res.set_content(json{{"object", "list"}, {"data", std::move(data)}}.dump(), "application/json");
    });

    st.port = st.server.bind_to_any_port("127.0.0.1");
    if (st.port <= 0) {
        throw std::runtime_error("mock server could not bind a port");
    }
    st.thread = std::thread([&st] { st.server.listen_after_bind(); });
    st.server.wait_until_ready();
}

MockServer::~MockServer()
{
    state_->server.stop();
    if (state_->thread.joinable()) {
        state_->thread.join();
    }
}

std::string MockServer::base_url() const
{
    return "http://127.0.0.1:" + std::to_string(state_->port) + "/v1";
}

void MockServer::script(RequestFingerprint key, std::vector<MockResponse> responses)
{
    std::lock_guard lock(state_->mu);
    state_->scripts[key] = std::move(responses);
    state_->cursors[key] = 0;
}

void MockServer::set_chat_responder(ChatResponder responder)
{
    std::lock_guard lock(state_->mu);
    state_->chat_responder = std::move(responder);
}

void MockServer::set_embedding_responder(EmbeddingResponder responder)
{
    std::lock_guard lock(state_->mu);
    state_->embedding_responder = std::move(responder);
}

void MockServer::fail_embeddings(std::size_t count, int status)
{
    std::lock_guard lock(state_->mu);
    state_->embedding_failures = count;
    state_->embedding_failure_status = status;
}

void MockServer::set_latency(std::chrono::milliseconds latency)
{
    std::lock_guard lock(state_->mu);
    state_->latency = latency;
}

std::vector<MockRequestLogEntry> MockServer::request_log() const
{
    std::lock_guard lock(state_->mu);
    return state_->log;
}

void MockServer::clear_log()
{
    std::lock_guard lock(state_->mu);
    state_->log.clear();
    state_->peak = 0;
}

std::size_t MockServer::max_concurrency() const
{
    return state_->peak.load();
}

}  // namespace docqa
