#pragma once

#include <docqa/config.hpp>
#include <docqa/errors.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace docqa::app {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_config = 2,
    exit_io = 3,
    exit_transport = 4,
    exit_validation = 5,
    exit_internal = 70,
};

int exit_code_for(ErrorCategory category) noexcept;

struct IngestArgs {
    std::filesystem::path input;
    bool enhance_ocr = false;
};

struct BuildIndexArgs {
    bool semantic = true;
};

struct RetrieveArgs {
    std::vector<std::string> queries;
    std::optional<std::filesystem::path> queries_file;
    std::optional<std::string> doc_id;
    bool semantic = true;
};

struct AugmentArgs {
    std::filesystem::path output;
    std::filesystem::path audit;
};

struct InferArgs {
    std::filesystem::path questions;
    std::filesystem::path output;
    bool retrieval = true;
    bool semantic = true;
};

struct EvaluateArgs {
    std::filesystem::path questions;
    std::filesystem::path verdicts;
};

/// Page records -> corpus file at config.corpus.
void cmd_ingest(const PipelineConfig& config, const IngestArgs& args, std::ostream& out);
/// Corpus -> lexical index (and semantic index unless disabled).
void cmd_build_index(const PipelineConfig& config, const BuildIndexArgs& args, std::ostream& out);
/// One JSON line per query.
void cmd_retrieve(const PipelineConfig& config, const RetrieveArgs& args, std::ostream& out);
void cmd_augment(const PipelineConfig& config, const AugmentArgs& args, std::ostream& out);
void cmd_infer(const PipelineConfig& config, const InferArgs& args, std::ostream& out);
void cmd_evaluate(const PipelineConfig& config, const EvaluateArgs& args, std::ostream& out);

/// Parses argv and runs the command. Errors are reported on `err` and
/// mapped to the exit codes above.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace docqa::app
