#include "app.hpp"
#include "fixtures.hpp"

#include <docqa/mock_server.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace docqa;
using namespace docqa::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "docqa");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = app::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s)
{
    std::ofstream(p, std::ios::binary) << s;
}

std::vector<json> json_lines(const std::string& s)
{
    std::vector<json> out;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            out.push_back(json::parse(line));
        }
    }
    return out;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("docqa_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        planted_ = make_planted_corpus(21, 5, 8, 10);
        server_.set_chat_responder(planted_answer_responder(planted_.questions));
        spit(dir_ / "pages.jsonl", jsonl_records(planted_.records));
        std::string qs;
        for (const auto& q : planted_.questions) {
            qs += to_json(to_question_record(q)).dump() + "\n";
        }
        spit(dir_ / "questions.jsonl", qs);
        write_config(server_.base_url());
    }

    void TearDown() override { fs::remove_all(dir_); }

    static std::string jsonl_records(const std::vector<PageRecord>& records)
    {
        std::string out;
        for (const auto& r : records) {
            out += json{{"doc_id", r.doc_id}, {"page_index", r.page_index}, {"text", r.text}}.dump() + "\n";
        }
        return out;
    }

    void write_config(const std::string& url)
    {
        const json endpoint = {{"base_url", url}, {"model", "mock"}, {"max_retries", 0}, {"timeout_seconds", 5}};
        const json cfg = {
            {"corpus", "corpus.jsonl"},
            {"lexical_index", "lexical.bin"},
            {"semantic_index", "semantic.bin"},
            {"templates", DOCQA_TEST_TEMPLATE_DIR},
            {"endpoints", {{"generation", endpoint}, {"embedding", endpoint}, {"ocr", endpoint}}},
        };
        spit(dir_ / "config.json", cfg.dump(2));
    }

    std::string config() const { return (dir_ / "config.json").string(); }
    fs::path path(const std::string& name) const { return dir_ / name; }

    fs::path dir_;
    MockServer server_;
    PlantedCorpus planted_;
};

}  // namespace

TEST_F(CliTest, EndToEnd)
{
    ASSERT_EQ(cli({"-c", config(), "--log-level", "off", "ingest", "-i", path("pages.jsonl").string()}).code, 0);
    const std::string first = slurp(path("corpus.jsonl"));
    ASSERT_EQ(cli({"-c", config(), "--log-level", "off", "ingest", "-i", path("pages.jsonl").string()}).code, 0);
    EXPECT_EQ(slurp(path("corpus.jsonl")), first);

    ASSERT_EQ(cli({"-c", config(), "--log-level", "off", "build-index"}).code, 0);
    EXPECT_TRUE(fs::exists(path("lexical.bin")));
    EXPECT_TRUE(fs::exists(path("semantic.bin")));

    const auto& q0 = planted_.questions[0];
    const auto r = cli({"-c", config(), "--log-level", "off", "retrieve", "-q", q0.query});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto lines = json_lines(r.out);
    ASSERT_EQ(lines.size(), 1u);
    const auto& pages = lines[0]["pages"];
    EXPECT_GE(pages.size(), 3u);
    EXPECT_LE(pages.size(), 7u);
    EXPECT_EQ(pages[0]["doc_id"], q0.page.doc_id);
    EXPECT_EQ(pages[0]["page_index"], q0.page.page_index);

    const auto inf = cli({"-c", config(), "--log-level", "off", "infer", "--questions", path("questions.jsonl").string(),
                          "-o", path("verdicts.jsonl").string()});
    ASSERT_EQ(inf.code, 0) << inf.err;
    EXPECT_EQ(json_lines(slurp(path("verdicts.jsonl"))).size(), planted_.questions.size());

    const auto ev = cli({"-c", config(), "evaluate", "--questions", path("questions.jsonl").string(), "--verdicts",
                         path("verdicts.jsonl").string()});
    ASSERT_EQ(ev.code, 0) << ev.err;
    const json report = json::parse(ev.out);
    EXPECT_DOUBLE_EQ(report["overall"]["accuracy"].get<double>(), 1.0);
    EXPECT_EQ(report["overall"]["total"], planted_.questions.size());
}

TEST_F(CliTest, AugmentWritesAcceptedAndAudit)
{
    const auto s = make_gate_scenario(5);
    server_.set_chat_responder(gate_scenario_responder(s));
    spit(path("pages.jsonl"), jsonl_records(s.records));
    ASSERT_EQ(cli({"-c", config(), "--log-level", "off", "ingest", "-i", path("pages.jsonl").string()}).code, 0);
    const auto r = cli({"-c", config(), "--log-level", "off", "augment", "--quota", "12", "-o",
                        path("qa.jsonl").string(), "--audit", path("audit.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json_lines(slurp(path("qa.jsonl"))).size(), 50u);
    EXPECT_EQ(json_lines(slurp(path("audit.jsonl"))).size(), 10u);
}

TEST_F(CliTest, UsageErrors)
{
    EXPECT_EQ(cli({}).code, app::exit_usage);
    EXPECT_EQ(cli({"frobnicate"}).code, app::exit_usage);
    EXPECT_EQ(cli({"infer"}).code, app::exit_usage);
    EXPECT_EQ(cli({"--help"}).code, app::exit_ok);
}

TEST_F(CliTest, ConfigErrors)
{
    EXPECT_EQ(cli({"-c", path("nope.json").string(), "build-index"}).code, app::exit_config);
    spit(path("bad.json"), R"({"retrieval": {"alpha": 2}})");
    EXPECT_EQ(cli({"-c", path("bad.json").string(), "build-index"}).code, app::exit_config);
    // no corpus path configured at all
    EXPECT_EQ(cli({"--log-level", "off", "build-index"}).code, app::exit_config);
}

TEST_F(CliTest, IoErrors)
{
    EXPECT_EQ(cli({"-c", config(), "ingest", "-i", path("missing.jsonl").string()}).code, app::exit_io);
    EXPECT_EQ(cli({"-c", config(), "build-index"}).code, app::exit_io);
    spit(path("corpus.jsonl"), "garbage\n");
    EXPECT_EQ(cli({"-c", config(), "build-index"}).code, app::exit_io);
}

TEST_F(CliTest, TransportErrors)
{
    ASSERT_EQ(cli({"-c", config(), "--log-level", "off", "ingest", "-i", path("pages.jsonl").string()}).code, 0);
    const auto r = cli({"-c", config(), "--log-level", "off", "--embedding-url", "http://127.0.0.1:1/v1",
                        "build-index"});
    EXPECT_EQ(r.code, app::exit_transport) << r.err;
}

TEST_F(CliTest, ValidationErrors)
{
    spit(path("pages.jsonl"), "{\"doc_id\": \"a\", \"page_index\": 1, \"text\": \"gap\"}\n");
    EXPECT_EQ(cli({"-c", config(), "--log-level", "off", "ingest", "-i", path("pages.jsonl").string()}).code,
              app::exit_validation);
    spit(path("pages.jsonl"), "{\"doc_id\": \"a\"}\n");
    EXPECT_EQ(cli({"-c", config(), "--log-level", "off", "ingest", "-i", path("pages.jsonl").string()}).code,
              app::exit_validation);
}
