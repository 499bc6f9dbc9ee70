#include "docqa/config.hpp"

#include "docqa/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace docqa {

using nlohmann::json;

namespace {

/// Strict reader over one JSON object: every key must be consumed.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name))
    {
        if (!j_.is_object()) {
            throw ConfigError("config section '" + name_ + "' must be an object");
        }
    }

    /// Throws for keys nobody read.
    void finish() const
    {
        for (const auto& [key, value] : j_.items()) {
            if (used_.count(key) == 0) {
                throw ConfigError("unknown config key '" + qualified(key) + "'");
            }
        }
    }

    template <typename T>
    void read(const std::string& key, T& out)
    {
        used_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + qualified(key) + "' has the wrong type");
        }
    }

    void read_path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base)
    {
        std::string s;
        read(key, s);
        if (!s.empty()) {
            std::filesystem::path p(s);
            out = p.is_relative() && !base.empty() ? base / p : p;
        }
    }

    void read_ms(const std::string& key, std::chrono::milliseconds& out)
    {
        long long v = out.count();
        read(key, v);
        out = std::chrono::milliseconds(v);
    }

    std::optional<Section> sub(const std::string& key)
    {
        used_.insert(key);
        if (!j_.contains(key)) {
            return std::nullopt;
        }
        return std::optional<Section>(std::in_place, j_.at(key), qualified(key));
    }

private:
    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    const json& j_;
    std::string name_;
    std::set<std::string> used_;
};

void read_endpoint(Section& s, EndpointConfig& e)
{
    s.read("base_url", e.base_url);
    s.read("model", e.model_name);
    s.read("timeout_seconds", e.timeout_seconds);
    s.read("max_retries", e.max_retries);
    s.read("max_in_flight", e.max_in_flight);
    std::string token;
    s.read("auth_token", token);
    if (!token.empty()) {
        e.auth_token = token;
    }
    s.read_ms("backoff_initial_ms", e.backoff_initial);
    s.read_ms("backoff_max_ms", e.backoff_max);
    s.finish();
}

json endpoint_json(const EndpointConfig& e)
{
    json j = {
        {"base_url", e.base_url},
        {"model", e.model_name},
        {"timeout_seconds", e.timeout_seconds},
        {"max_retries", e.max_retries},
        {"max_in_flight", e.max_in_flight},
        {"backoff_initial_ms", e.backoff_initial.count()},
        {"backoff_max_ms", e.backoff_max.count()},
    };
    return j;
}

}  // namespace

void PipelineConfig::validate() const
{
    try {
        retrieval.weights.validate();
        retrieval.policy.validate();
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
    if (retrieval.candidate_k == 0) {
        throw ConfigError("retrieval.candidate_k must be positive");
    }
    if (lexical.n_min < 1 || lexical.n_max < lexical.n_min || lexical.max_features == 0) {
        throw ConfigError("lexical options require 1 <= n_min <= n_max and max_features > 0");
    }
    if (embedding.dim == 0 || embedding.batch_size == 0) {
        throw ConfigError("embedding dim and batch_size must be positive");
    }
    if (schedule_count < 2) {
        throw ConfigError("ensemble.count must be at least 2");
    }
    if (ensemble.stop.min_responses == 0 || ensemble.stop.min_responses > schedule_count) {
        throw ConfigError("ensemble.min_responses must lie in [1, count]");
    }
    if (!(ensemble.stop.confidence_threshold > 0.0 && ensemble.stop.confidence_threshold <= 1.0)) {
        throw ConfigError("ensemble.confidence_threshold must lie in (0, 1]");
    }
    if (ensemble.max_in_flight == 0 || context_pages == 0) {
        throw ConfigError("ensemble.max_in_flight and context_pages must be positive");
    }
    if (augment_quota == 0) {
        throw ConfigError("augmentation.quota must be positive");
    }
    if (augmentation.options_per_question != 4 && augmentation.options_per_question != 10) {
        throw ConfigError("augmentation.options_per_question must be 4 or 10");
    }
    generation_endpoint.validate();
    embedding_endpoint.validate();
    ocr_endpoint.validate();
}

PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir)
{
    PipelineConfig c;
    c.template_dir = default_template_dir();
    {
        Section root(j, "");
        root.read_path("corpus", c.corpus, base_dir);
        root.read_path("lexical_index", c.lexical_index, base_dir);
        root.read_path("semantic_index", c.semantic_index, base_dir);
        root.read_path("templates", c.template_dir, base_dir);

        if (auto s = root.sub("lexical")) {
            s->read("max_features", c.lexical.max_features);
            s->read("n_min", c.lexical.n_min);
            s->read("n_max", c.lexical.n_max);
            s->finish();
        }
        if (auto s = root.sub("embedding")) {
            s->read("dim", c.embedding.dim);
            s->read("batch_size", c.embedding.batch_size);
            s->read("query_prefix", c.retrieval.prefixes.query);
            s->read("passage_prefix", c.retrieval.prefixes.passage);
            s->finish();
        }
        if (auto s = root.sub("retrieval")) {
            s->read("alpha", c.retrieval.weights.alpha);
            s->read("beta", c.retrieval.weights.beta);
            s->read("top_m", c.retrieval.policy.top_m);
            s->read("top_n", c.retrieval.policy.top_n);
            s->read("threshold", c.retrieval.policy.threshold);
            s->read("candidate_k", c.retrieval.candidate_k);
            s->finish();
        }
        if (auto s = root.sub("ensemble")) {
            s->read("count", c.schedule_count);
            s->read("seed", c.schedule_seed);
            s->read("min_responses", c.ensemble.stop.min_responses);
            s->read("confidence_threshold", c.ensemble.stop.confidence_threshold);
            s->read("max_in_flight", c.ensemble.max_in_flight);
            s->read("max_tokens", c.ensemble.max_tokens);
            s->read("context_pages", c.context_pages);
            s->finish();
        }
        if (auto s = root.sub("endpoints")) {
            if (auto e = s->sub("generation")) read_endpoint(*e, c.generation_endpoint);
            if (auto e = s->sub("embedding")) read_endpoint(*e, c.embedding_endpoint);
            if (auto e = s->sub("ocr")) read_endpoint(*e, c.ocr_endpoint);
            s->finish();
        }
        if (auto s = root.sub("augmentation")) {
            AugmentOptions& a = c.augmentation;
            s->read("quota", c.augment_quota);
            s->read("seed", a.seed);
            s->read("options_per_question", a.options_per_question);
            s->read("max_in_flight", a.max_in_flight);
            s->read("lexical_feasibility", a.lexical_feasibility);
            s->read("temperature", a.temperature);
            s->read("max_tokens", a.max_tokens);
            std::vector<std::string> types;
            s->read("question_types", types);
            if (!types.empty()) {
                a.per_page_types.clear();
                try {
                    for (const auto& t : types) {
                        a.per_page_types.push_back(parse_question_type(t));
                    }
                } catch (const ArgumentError& e) {
                    throw ConfigError(e.what());
                }
            }
            if (auto g = s->sub("selection")) {
                g->read("min_chars", a.selection.min_chars);
                g->read("max_toc_density", a.selection.max_toc_density);
                g->read("numeric_weight", a.selection.numeric_weight);
                g->read("middle_depth", a.selection.middle_depth);
                g->read("seed", a.selection.seed);
                g->finish();
            }
            if (auto g = s->sub("gates")) {
                GateThresholds& t = a.gates;
                g->read("min_question_chars", t.min_question_chars);
                g->read("max_question_chars", t.max_question_chars);
                g->read("min_clauses", t.min_clauses);
                g->read("answer_support_overlap", t.answer_support_overlap);
                g->read("max_option_length_ratio", t.max_option_length_ratio);
                g->read("dedup_jaccard", t.dedup_jaccard);
                g->read("min_reasoning_chars", t.min_reasoning_chars);
                g->read("evidence_overlap", t.evidence_overlap);
                g->finish();
            }
            s->finish();
        }
        root.finish();
    }
    c.validate();
    return c;
}

json to_json(const PipelineConfig& c)
{
    const AugmentOptions& a = c.augmentation;
    json types = json::array();
    for (QuestionType t : a.per_page_types) {
        types.push_back(to_string(t));
    }
    return {
        {"corpus", c.corpus.string()},
        {"lexical_index", c.lexical_index.string()},
        {"semantic_index", c.semantic_index.string()},
        {"templates", c.template_dir.string()},
        {"lexical", {{"max_features", c.lexical.max_features}, {"n_min", c.lexical.n_min}, {"n_max", c.lexical.n_max}}},
        {"embedding",
         {{"dim", c.embedding.dim},
          {"batch_size", c.embedding.batch_size},
          {"query_prefix", c.retrieval.prefixes.query},
          {"passage_prefix", c.retrieval.prefixes.passage}}},
        {"retrieval",
         {{"alpha", c.retrieval.weights.alpha},
          {"beta", c.retrieval.weights.beta},
          {"top_m", c.retrieval.policy.top_m},
          {"top_n", c.retrieval.policy.top_n},
          {"threshold", c.retrieval.policy.threshold},
          {"candidate_k", c.retrieval.candidate_k}}},
        {"ensemble",
         {{"count", c.schedule_count},
          {"seed", c.schedule_seed},
          {"min_responses", c.ensemble.stop.min_responses},
          {"confidence_threshold", c.ensemble.stop.confidence_threshold},
          {"max_in_flight", c.ensemble.max_in_flight},
          {"max_tokens", c.ensemble.max_tokens},
          {"context_pages", c.context_pages}}},
        {"endpoints",
         {{"generation", endpoint_json(c.generation_endpoint)},
          {"embedding", endpoint_json(c.embedding_endpoint)},
          {"ocr", endpoint_json(c.ocr_endpoint)}}},
        {"augmentation",
         {{"quota", c.augment_quota},
          {"seed", a.seed},
          {"options_per_question", a.options_per_question},
          {"max_in_flight", a.max_in_flight},
          {"lexical_feasibility", a.lexical_feasibility},
          {"temperature", a.temperature},
          {"max_tokens", a.max_tokens},
          {"question_types", types},
          {"selection",
           {{"min_chars", a.selection.min_chars},
            {"max_toc_density", a.selection.max_toc_density},
            {"numeric_weight", a.selection.numeric_weight},
            {"middle_depth", a.selection.middle_depth},
            {"seed", a.selection.seed}}},
          {"gates",
           {{"min_question_chars", a.gates.min_question_chars},
            {"max_question_chars", a.gates.max_question_chars},
            {"min_clauses", a.gates.min_clauses},
            {"answer_support_overlap", a.gates.answer_support_overlap},
            {"max_option_length_ratio", a.gates.max_option_length_ratio},
            {"dedup_jaccard", a.gates.dedup_jaccard},
            {"min_reasoning_chars", a.gates.min_reasoning_chars},
            {"evidence_overlap", a.gates.evidence_overlap}}}}},
    };
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    const json j = json::parse(in, nullptr, false, true);
    if (j.is_discarded()) {
        throw ConfigError("config file " + path.string() + " is not valid JSON");
    }
    PipelineConfig c = config_from_json(j, path.parent_path());
    return c;
}

void apply_environment(PipelineConfig& config)
{
    const char* token = std::getenv("DOCQA_API_TOKEN");
    if (token == nullptr || *token == '\0') {
        return;
    }
    for (EndpointConfig* e : {&config.generation_endpoint, &config.embedding_endpoint, &config.ocr_endpoint}) {
        if (!e->auth_token) {
            e->auth_token = token;
        }
    }
}

}  // namespace docqa
