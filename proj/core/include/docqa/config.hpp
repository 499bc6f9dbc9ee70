#pragma once

#include "docqa/augmentation.hpp"
#include "docqa/ensemble.hpp"
#include "docqa/gateway.hpp"
#include "docqa/hybrid_retriever.hpp"
#include "docqa/lexical_index.hpp"
#include "docqa/semantic_index.hpp"

#include <json.hpp>

#include <filesystem>

namespace docqa {

/// Everything a pipeline command needs. Defaults reproduce the reference
/// setup: fusion 0.6 / 0.4, 3 to 7 pages above 0.3, 20 decoding configs,
/// stop after 10 responses at confidence 0.8.
struct PipelineConfig {
    std::filesystem::path corpus;
    std::filesystem::path lexical_index;
    std::filesystem::path semantic_index;
    std::filesystem::path template_dir;

    LexicalOptions lexical;
    EmbedOptions embedding;
    RetrievalOptions retrieval;

    std::size_t schedule_count = kDefaultScheduleSize;
    std::uint64_t schedule_seed = 0;
    EnsembleOptions ensemble;
    /// Pages given to the model when retrieval is disabled.
    std::size_t context_pages = 3;

    EndpointConfig generation_endpoint;
    EndpointConfig embedding_endpoint;
    EndpointConfig ocr_endpoint;

    AugmentOptions augmentation;
    std::size_t augment_quota = 10;

    /// Throws ConfigError when a value breaks a module invariant.
    void validate() const;
};

/// Reads the JSON object form. Unknown keys and wrong types are ConfigErrors;
/// relative paths resolve against `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const PipelineConfig& config);

/// Throws ConfigError when the file is missing or malformed.
PipelineConfig load_config(const std::filesystem::path& path);

/// DOCQA_API_TOKEN, when set, becomes the bearer token of every endpoint
/// that has none.
void apply_environment(PipelineConfig& config);

}  // namespace docqa
