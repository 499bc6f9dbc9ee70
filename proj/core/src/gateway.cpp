#include "docqa/gateway.hpp"

#include "docqa/errors.hpp"
#include "docqa/hashing.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <thread>

namespace docqa {

using nlohmann::json;

void EndpointConfig::validate() const
{
    if (!(timeout_seconds > 0.0)) {
        throw ConfigError("endpoint timeout must be positive");
    }
    if (max_retries < 0) {
        throw ConfigError("endpoint max_retries must be >= 0");
    }
    if (max_in_flight < 1) {
        throw ConfigError("endpoint max_in_flight must be >= 1");
    }
    if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
        throw ConfigError("endpoint base_url must start with http:// or https://: '" + base_url + "'");
    }
}

std::vector<std::chrono::milliseconds> backoff_schedule(const EndpointConfig& cfg)
{
    std::vector<std::chrono::milliseconds> delays;
    auto delay = cfg.backoff_initial;
    for (int k = 0; k < cfg.max_retries; ++k) {
        delays.push_back(std::min(delay, cfg.backoff_max));
        if (delay < cfg.backoff_max) {
            delay *= 2;
        }
    }
    return delays;
}

ChatRequest ChatRequest::user_text(std::string prompt)
{
    ChatRequest req;
    req.messages.push_back({"user", {ContentPart::text(std::move(prompt))}});
    return req;
}

json to_wire(const ChatRequest& req, const std::string& model)
{
    json messages = json::array();
    for (const ChatMessage& m : req.messages) {
        json content;
        const bool text_only = m.content.size() == 1 && m.content.front().kind == ContentPart::Kind::text;
        if (text_only) {
            content = m.content.front().value;
        } else {
            content = json::array();
            for (const ContentPart& part : m.content) {
                if (part.kind == ContentPart::Kind::text) {
                    content.push_back({{"type", "text"}, {"text", part.value}});
                } else {
                    content.push_back({{"type", "image_url"}, {"image_url", {{"url", part.value}}}});
                }
            }
        }
        messages.push_back({{"role", m.role}, {"content", std::move(content)}});
    }
    return {
        {"model", model},
        {"messages", std::move(messages)},
        {"temperature", req.temperature},
        {"top_p", req.top_p},
        {"top_k", req.top_k},
        {"max_tokens", req.max_tokens},
        {"seed", req.seed},
    };
}

std::string prompt_text(const ChatRequest& req)
{
    std::string out;
    for (std::size_t i = 0; i < req.messages.size(); ++i) {
        if (i > 0) {
            out.push_back('\n');
        }
        for (const ContentPart& part : req.messages[i].content) {
            if (part.kind == ContentPart::Kind::text) {
                out += part.value;
            }
        }
    }
    return out;
}

std::uint64_t prompt_fingerprint(std::string_view prompt)
{
    return fnv1a64(prompt);
}

std::string parse_chat_response(const json& body)
{
    const auto choices = body.find("choices");
    if (choices == body.end() || !choices->is_array() || choices->empty()) {
        throw ContractError("chat response has no choices");
    }
    const json& first = choices->front();
    const auto message = first.find("message");
    if (message == first.end() || !message->is_object()) {
        throw ContractError("chat response choice has no message");
    }
    const auto content = message->find("content");
    if (content == message->end()) {
        throw ContractError("chat response message has no content");
    }
    if (content->is_null()) {
        return {};
    }
    if (!content->is_string()) {
        throw ContractError("chat response content is not a string");
    }
    return content->get<std::string>();
}

std::vector<std::vector<float>> parse_embedding_response(const json& body)
{
    const auto data = body.find("data");
    if (data == body.end() || !data->is_array()) {
        throw ContractError("embedding response has no data array");
    }
    std::vector<std::vector<float>> out;
    out.reserve(data->size());
    for (const json& item : *data) {
        const auto emb = item.find("embedding");
        if (emb == item.end() || !emb->is_array()) {
            throw ContractError("embedding item has no embedding array");
        }
        std::vector<float> v;
        v.reserve(emb->size());
        for (const json& x : *emb) {
            if (!x.is_number()) {
                throw ContractError("embedding contains a non-number");
            }
            v.push_back(x.get<float>());
        }
        out.push_back(std::move(v));
    }
    return out;
}

HttpTransport::HttpTransport(EndpointConfig cfg) : cfg_(std::move(cfg))
{
    cfg_.validate();
    const auto scheme_end = cfg_.base_url.find("://");
    const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_port_ = cfg_.base_url;
    } else {
        scheme_host_port_ = cfg_.base_url.substr(0, path_start);
        path_prefix_ = cfg_.base_url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') {
            path_prefix_.pop_back();
        }
    }
    in_flight_ = std::make_unique<std::counting_semaphore<>>(cfg_.max_in_flight);
}

HttpTransport::~HttpTransport() = default;

json HttpTransport::post_json(const std::string& path, const json& body,
                              const std::vector<std::pair<std::string, std::string>>& headers)
{
    const std::string payload = body.dump(-1, ' ', false, json::error_handler_t::replace);
    const std::string full_path = path_prefix_ + path;
    const auto delays = backoff_schedule(cfg_);
    const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);

    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) {
        hdrs.emplace(k, v);
    }
    if (cfg_.auth_token && !cfg_.auth_token->empty()) {
        hdrs.emplace("Authorization", "Bearer " + *cfg_.auth_token);
    }

    std::string last_failure;
    int last_status = 0;
    std::string last_body;
    const int max_attempts = cfg_.max_retries + 1;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(delays[static_cast<std::size_t>(attempt - 2)]);
        }
        httplib::Result res;
        {
            in_flight_->acquire();
            struct Release {
                std::counting_semaphore<>& sem;
                ~Release() { sem.release(); }
            } release{*in_flight_};
            ++attempts_;
            httplib::Client client(scheme_host_port_);
            client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
            client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
            client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
            res = client.Post(full_path, hdrs, payload, "application/json");
        }

        if (!res) {
            last_failure = "request to " + scheme_host_port_ + full_path + " failed: " + httplib::to_string(res.error());
            last_status = 0;
            spdlog::debug("{} (attempt {}/{})", last_failure, attempt, max_attempts);
            continue;
        }
        const int status = res->status;
        if (status >= 200 && status < 300) {
            try {
                return json::parse(res->body);
            } catch (const json::parse_error&) {
                throw ContractError("endpoint returned a non-JSON body");
            }
        }
        if (status == 429 || status >= 500) {
            last_status = status;
            last_body = res->body;
            spdlog::debug("endpoint status {} (attempt {}/{})", status, attempt, max_attempts);
            continue;
        }
        throw EndpointError(status, attempt, res->body);
    }
    if (last_status != 0) {
        throw EndpointError(last_status, max_attempts, last_body);
    }
    throw TransportError(max_attempts, last_failure);
}

std::string HttpGenerationClient::generate(const ChatRequest& req)
{
    std::vector<std::pair<std::string, std::string>> headers;
    if (req.config_id) {
        headers.emplace_back("X-Config-Id", std::to_string(*req.config_id));
    }
    const json body = transport_.post_json("/chat/completions", to_wire(req, transport_.config().model_name), headers);
    return parse_chat_response(body);
}

std::vector<std::vector<float>> HttpEmbeddingClient::embed_batch(const std::vector<std::string>& inputs)
{
    const json body = transport_.post_json("/embeddings", {{"model", transport_.config().model_name}, {"input", inputs}});
    auto vectors = parse_embedding_response(body);
    if (vectors.size() != inputs.size()) {
        throw ContractError("embedding endpoint returned " + std::to_string(vectors.size()) + " vectors for " +
                            std::to_string(inputs.size()) + " inputs");
    }
    return vectors;
}

}  // namespace docqa
