#include "app.hpp"

#include <docqa/augmentation.hpp>
#include <docqa/corpus.hpp>
#include <docqa/records.hpp>
#include <docqa/text.hpp>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <fstream>
#include <iostream>
#include <thread>

namespace docqa::app {

using nlohmann::json;

namespace {

std::string dump_line(const json& j)
{
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

const std::filesystem::path& require_input(const std::filesystem::path& path, const std::string& what)
{
    if (path.empty()) {
        throw ConfigError("no " + what + " path configured");
    }
    if (!std::filesystem::exists(path)) {
        throw IoError(what + " not found: " + path.string());
    }
    return path;
}

void require_output(const std::filesystem::path& path, const std::string& what)
{
    if (path.empty()) {
        throw ConfigError("no " + what + " path configured");
    }
}

std::ifstream open_in(const std::filesystem::path& path, const std::string& what)
{
    require_input(path, what);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + what + " " + path.string());
    }
    return in;
}

void make_parent(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
}

std::ofstream open_out(const std::filesystem::path& path, const std::string& what)
{
    require_output(path, what);
    make_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + what + " " + path.string());
    }
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

}  // namespace

int exit_code_for(ErrorCategory category) noexcept
{
    switch (category) {
    case ErrorCategory::config:
        return exit_config;
    case ErrorCategory::io:
        return exit_io;
    case ErrorCategory::transport:
        return exit_transport;
    case ErrorCategory::validation:
        return exit_validation;
    }
    return exit_internal;
}

void cmd_ingest(const PipelineConfig& config, const IngestArgs& args, std::ostream& out)
{
    auto in = open_in(args.input, "page records");
    std::vector<PageRecord> records = read_page_records(in);
    if (args.enhance_ocr) {
        const PromptTemplates templates(config.template_dir);
        HttpGenerationClient client(config.ocr_endpoint);
        std::atomic<std::size_t> next{0};
        std::vector<std::string> enhanced(records.size());
        std::vector<std::exception_ptr> errors(records.size());
        {
            const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.ocr_endpoint.max_in_flight),
                                                       std::max<std::size_t>(records.size(), 1));
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (std::size_t i = next++; i < records.size(); i = next++) {
                        try {
                            enhanced[i] = enhance_ocr(records[i], client, templates);
                        } catch (...) {
                            errors[i] = std::current_exception();
                        }
                    }
                });
            }
        }
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (errors[i]) {
                std::rethrow_exception(errors[i]);
            }
            records[i].text = std::move(enhanced[i]);
        }
    }
    const Corpus corpus = build_corpus(records);
    require_output(config.corpus, "corpus");
    make_parent(config.corpus);
    save_corpus(corpus, config.corpus);
    out << dump_line({{"command", "ingest"},
                      {"documents", corpus.doc_count()},
                      {"pages", corpus.page_count()},
                      {"enhanced", args.enhance_ocr},
                      {"corpus", config.corpus.string()}})
        << '\n';
}

void cmd_build_index(const PipelineConfig& config, const BuildIndexArgs& args, std::ostream& out)
{
    const Corpus corpus = load_corpus(require_input(config.corpus, "corpus"));
    require_output(config.lexical_index, "lexical index");
    const LexicalIndex lexical = LexicalIndex::build(corpus, config.lexical);
    make_parent(config.lexical_index);
    save_lexical_index(lexical, config.lexical_index);
    json summary = {{"command", "build-index"},
                    {"pages", corpus.page_count()},
                    {"features", lexical.vocabulary().size()},
                    {"lexical_index", config.lexical_index.string()}};
    if (args.semantic) {
        require_output(config.semantic_index, "semantic index");
        HttpEmbeddingClient client(config.embedding_endpoint);
        const SemanticIndex semantic = SemanticIndex::build(corpus, client, config.embedding, config.retrieval.prefixes);
        make_parent(config.semantic_index);
        save_semantic_index(semantic, config.semantic_index);
        summary["semantic_index"] = config.semantic_index.string();
        summary["dim"] = semantic.dim();
    }
    out << dump_line(summary) << '\n';
}

void cmd_retrieve(const PipelineConfig& config, const RetrieveArgs& args, std::ostream& out)
{
    std::vector<std::string> queries = args.queries;
    if (args.queries_file) {
        auto in = open_in(*args.queries_file, "query file");
        std::string line;
        while (std::getline(in, line)) {
            const auto q = text::trim(line);
            if (!q.empty()) {
                queries.emplace_back(q);
            }
        }
    }
    if (queries.empty()) {
        throw ArgumentError("no queries given");
    }
    const LexicalIndex lexical = load_lexical_index(require_input(config.lexical_index, "lexical index"));
    std::optional<SemanticIndex> semantic;
    std::optional<HttpEmbeddingClient> client;
    if (args.semantic) {
        semantic = load_semantic_index(require_input(config.semantic_index, "semantic index"));
        client.emplace(config.embedding_endpoint);
    }
    const RetrievalIndexes indexes{&lexical, semantic ? &*semantic : nullptr};
    for (const auto& q : queries) {
        const RetrievalResult r = retrieve(q, indexes, config.retrieval, client ? &*client : nullptr, args.doc_id);
        out << dump_line(to_json(r, config.retrieval)) << '\n';
    }
}

void cmd_augment(const PipelineConfig& config, const AugmentArgs& args, std::ostream& out)
{
    const Corpus corpus = load_corpus(require_input(config.corpus, "corpus"));
    const PromptTemplates templates(config.template_dir);
    HttpGenerationClient client(config.generation_endpoint);
    auto qa_out = open_out(args.output, "QA output");
    auto audit_out = open_out(args.audit, "audit log");

    const AugmentResult result = augment(corpus, client, templates, config.augment_quota, config.augmentation);
    for (const auto& qa : result.accepted) {
        qa_out << dump_line(to_json(qa)) << '\n';
    }
    for (const auto& rec : result.audit) {
        audit_out << dump_line(to_json(rec)) << '\n';
    }
    finish(qa_out, args.output);
    finish(audit_out, args.audit);
    out << dump_line({{"command", "augment"},
                      {"generated", result.generated},
                      {"accepted", result.accepted.size()},
                      {"rejected", result.audit.size()}})
        << '\n';
}

void cmd_infer(const PipelineConfig& config, const InferArgs& args, std::ostream& out)
{
    auto qin = open_in(args.questions, "question file");
    const std::vector<QuestionRecord> questions = read_questions(qin);
    const Corpus corpus = load_corpus(require_input(config.corpus, "corpus"));

    std::optional<LexicalIndex> lexical;
    std::optional<SemanticIndex> semantic;
    std::optional<HttpEmbeddingClient> embed_client;
    if (args.retrieval) {
        lexical = load_lexical_index(require_input(config.lexical_index, "lexical index"));
        if (args.semantic) {
            semantic = load_semantic_index(require_input(config.semantic_index, "semantic index"));
            embed_client.emplace(config.embedding_endpoint);
        }
    }
    HttpGenerationClient client(config.generation_endpoint);

    InferenceOptions options;
    options.use_retrieval = args.retrieval;
    options.context_pages = config.context_pages;
    options.retrieval = config.retrieval;
    options.schedule = make_schedule(config.schedule_count, config.schedule_seed);
    options.ensemble = config.ensemble;
    const RetrievalIndexes indexes{lexical ? &*lexical : nullptr, semantic ? &*semantic : nullptr};

    auto vout = open_out(args.output, "verdict output");
    std::size_t abstained = 0;
    for (const auto& q : questions) {
        const VerdictRecord v =
            answer_question(q, corpus, indexes, embed_client ? &*embed_client : nullptr, client, options);
        abstained += v.chosen ? 0 : 1;
        vout << dump_line(to_json(v)) << '\n';
    }
    finish(vout, args.output);
    out << dump_line({{"command", "infer"},
                      {"questions", questions.size()},
                      {"abstained", abstained},
                      {"retrieval", args.retrieval}})
        << '\n';
}

void cmd_evaluate(const PipelineConfig&, const EvaluateArgs& args, std::ostream& out)
{
    auto qin = open_in(args.questions, "question file");
    auto vin = open_in(args.verdicts, "verdict file");
    const EvaluationReport report = evaluate(read_questions(qin), read_verdicts(vin));
    out << to_json(report).dump(2) << '\n';
}

// ---------------------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App cli{"Retrieval-augmented multiple-choice question answering over document pages"};
    cli.require_subcommand(1);

    std::string config_path;
    std::string log_level = "warn";
    std::optional<std::string> corpus_path, lexical_path, semantic_path, template_dir;
    std::optional<std::string> generation_url, embedding_url, ocr_url, model;
    cli.add_option("-c,--config", config_path, "JSON configuration file");
    cli.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
    cli.add_option("--corpus", corpus_path, "Corpus file");
    cli.add_option("--lexical-index", lexical_path, "Lexical index file");
    cli.add_option("--semantic-index", semantic_path, "Semantic index file");
    cli.add_option("--templates", template_dir, "Prompt template directory");
    cli.add_option("--generation-url", generation_url, "Chat completion endpoint base URL");
    cli.add_option("--embedding-url", embedding_url, "Embedding endpoint base URL");
    cli.add_option("--ocr-url", ocr_url, "OCR enhancement endpoint base URL");
    cli.add_option("--model", model, "Generation model name");

    IngestArgs ingest;
    auto* c_ingest = cli.add_subcommand("ingest", "Build a corpus from page records");
    c_ingest->add_option("-i,--input", ingest.input, "Page records (JSONL)")->required();
    c_ingest->add_flag("--enhance-ocr", ingest.enhance_ocr, "Rewrite page text with the OCR endpoint");

    BuildIndexArgs build;
    bool build_no_semantic = false;
    auto* c_build = cli.add_subcommand("build-index", "Build the lexical and semantic indexes");
    c_build->add_flag("--no-semantic", build_no_semantic, "Skip the embedding index");

    RetrieveArgs retrieve_args;
    bool retrieve_no_semantic = false;
    std::optional<std::string> queries_file, doc_id;
    std::optional<double> alpha, beta, threshold;
    std::optional<std::size_t> top_m, top_n;
    auto* c_retrieve = cli.add_subcommand("retrieve", "Rank pages for queries");
    c_retrieve->add_option("-q,--query", retrieve_args.queries, "Query text (repeatable)");
    c_retrieve->add_option("--queries", queries_file, "File with one query per line");
    c_retrieve->add_option("--doc-id", doc_id, "Restrict to one document");
    c_retrieve->add_flag("--no-semantic", retrieve_no_semantic, "Lexical retrieval only");
    c_retrieve->add_option("--alpha", alpha, "Lexical weight");
    c_retrieve->add_option("--beta", beta, "Semantic weight");
    c_retrieve->add_option("--top-m", top_m, "Minimum pages returned");
    c_retrieve->add_option("--top-n", top_n, "Maximum pages returned");
    c_retrieve->add_option("--threshold", threshold, "Fused-score threshold");

    AugmentArgs augment_args;
    std::optional<std::size_t> quota;
    std::optional<std::uint64_t> augment_seed;
    bool lexical_feasibility = false;
    auto* c_augment = cli.add_subcommand("augment", "Generate and filter QA pairs");
    c_augment->add_option("-o,--output", augment_args.output, "Accepted QA pairs (JSONL)")->required();
    c_augment->add_option("--audit", augment_args.audit, "Rejection log (JSONL)")->required();
    c_augment->add_option("--quota", quota, "Number of pages to generate from");
    c_augment->add_option("--seed", augment_seed, "Selection and sampling seed");
    c_augment->add_flag("--lexical-feasibility", lexical_feasibility, "Check feasibility without the model");

    InferArgs infer_args;
    bool no_retrieval = false;
    bool infer_no_semantic = false;
    std::optional<std::size_t> context_pages, schedule_count;
    std::optional<std::uint64_t> infer_seed;
    auto* c_infer = cli.add_subcommand("infer", "Answer multiple-choice questions");
    c_infer->add_option("--questions", infer_args.questions, "Question records (JSONL)")->required();
    c_infer->add_option("-o,--output", infer_args.output, "Verdict records (JSONL)")->required();
    c_infer->add_flag("--no-retrieval", no_retrieval, "Use the leading pages instead of retrieval");
    c_infer->add_option("--context-pages", context_pages, "Pages given when retrieval is off");
    c_infer->add_flag("--no-semantic", infer_no_semantic, "Lexical retrieval only");
    c_infer->add_option("--configs", schedule_count, "Number of decoding configurations");
    c_infer->add_option("--seed", infer_seed, "Decoding schedule seed");

    EvaluateArgs eval_args;
    auto* c_eval = cli.add_subcommand("evaluate", "Score verdicts against gold answers");
    c_eval->add_option("--questions", eval_args.questions, "Question records with answers (JSONL)")->required();
    c_eval->add_option("--verdicts", eval_args.verdicts, "Verdict records (JSONL)")->required();

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        spdlog::set_level(spdlog::level::from_str(log_level));
        PipelineConfig config = config_path.empty() ? config_from_json(json::object()) : load_config(config_path);
        apply_environment(config);
        if (corpus_path) config.corpus = *corpus_path;
        if (lexical_path) config.lexical_index = *lexical_path;
        if (semantic_path) config.semantic_index = *semantic_path;
        if (template_dir) config.template_dir = *template_dir;
        if (generation_url) config.generation_endpoint.base_url = *generation_url;
        if (embedding_url) config.embedding_endpoint.base_url = *embedding_url;
        if (ocr_url) config.ocr_endpoint.base_url = *ocr_url;
        if (model) config.generation_endpoint.model_name = *model;
        if (alpha) {
            config.retrieval.weights.alpha = *alpha;
            config.retrieval.weights.beta = beta ? *beta : 1.0 - *alpha;
        } else if (beta) {
            config.retrieval.weights.beta = *beta;
            config.retrieval.weights.alpha = 1.0 - *beta;
        }
        if (top_m) config.retrieval.policy.top_m = *top_m;
        if (top_n) config.retrieval.policy.top_n = *top_n;
        if (threshold) config.retrieval.policy.threshold = *threshold;
        if (quota) config.augment_quota = *quota;
        if (augment_seed) {
            config.augmentation.seed = *augment_seed;
            config.augmentation.selection.seed = *augment_seed;
        }
        if (lexical_feasibility) config.augmentation.lexical_feasibility = true;
        if (context_pages) config.context_pages = *context_pages;
        if (schedule_count) config.schedule_count = *schedule_count;
        if (infer_seed) config.schedule_seed = *infer_seed;
        config.validate();

        if (*c_ingest) {
            cmd_ingest(config, ingest, out);
        } else if (*c_build) {
            build.semantic = !build_no_semantic;
            cmd_build_index(config, build, out);
        } else if (*c_retrieve) {
            if (queries_file) retrieve_args.queries_file = *queries_file;
            retrieve_args.doc_id = doc_id;
            retrieve_args.semantic = !retrieve_no_semantic;
            cmd_retrieve(config, retrieve_args, out);
        } else if (*c_augment) {
            cmd_augment(config, augment_args, out);
        } else if (*c_infer) {
            infer_args.retrieval = !no_retrieval;
            infer_args.semantic = !infer_no_semantic;
            cmd_infer(config, infer_args, out);
        } else if (*c_eval) {
            cmd_evaluate(config, eval_args, out);
        }
        return exit_ok;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.category());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_io;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return exit_internal;
    }
}

}  // namespace docqa::app
