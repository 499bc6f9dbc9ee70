#pragma once

#include "docqa/corpus.hpp"
#include "docqa/gateway.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace docqa {

struct DecodingConfig {
    int id = 0;
    bool greedy = false;
    double temperature = 1.0;
    double top_p = 1.0;
    int top_k = 1;
    std::uint64_t seed = 0;

    friend bool operator==(const DecodingConfig&, const DecodingConfig&) = default;
};

inline constexpr std::size_t kDefaultScheduleSize = 20;
inline constexpr double kMinSamplingTemperature = 0.1;
inline constexpr double kMaxSamplingTemperature = 1.5;

/// Config 0 is greedy; configs 1..count-1 sample with temperatures evenly
/// spaced over [0.1, 1.5], top_p cycling {0.7, 0.8, 0.9, 0.95} and top_k
/// cycling {20, 40, 50}. Seeds derive from `seed`. Throws ArgumentError when
/// count < 2.
std::vector<DecodingConfig> make_schedule(std::size_t count = kDefaultScheduleSize, std::uint64_t seed = 0);

/// 'A', 'B', ... for `count` options (at most 26).
std::vector<char> option_labels(std::size_t count);

/// Answer letter from free-form model output, trying in order: an explicit
/// marker ("Answer: X", "answer is X", "答え: X", ...; the last one wins), a
/// line holding only a label or a first line starting with "X." / "X)",
/// and finally a unique option-text match when `option_texts` is given.
std::optional<char> extract_option(std::string_view raw, std::span<const char> labels,
                                   std::span<const std::string> option_texts = {});

/// True when the output contains an explicit answer marker naming one of `labels`.
bool has_answer_marker(std::string_view raw, std::span<const char> labels);

struct EnsembleResponse {
    int config_id = 0;
    std::string raw_text;
    std::optional<char> option;
    bool failed = false;  // transport failure after retries
};

struct StopRule {
    std::size_t min_responses = 10;
    double confidence_threshold = 0.8;
};

/// Votes over completed responses; only extractable responses vote.
class EnsembleState {
public:
    void add(EnsembleResponse response);

    const std::vector<EnsembleResponse>& completed() const noexcept { return completed_; }
    const std::map<char, std::size_t>& vote_counts() const noexcept { return votes_; }
    std::size_t voting_responses() const noexcept { return voters_; }
    /// Leading option's share of voting responses, 0 when nobody voted.
    double confidence() const noexcept;
    bool should_stop(const StopRule& rule) const noexcept;

private:
    std::vector<EnsembleResponse> completed_;
    std::map<char, std::size_t> votes_;
    std::size_t voters_ = 0;
};

struct EnsembleVerdict {
    /// Empty when every response was unextractable (abstention).
    std::optional<char> chosen_option;
    double confidence = 0.0;
    std::map<char, std::size_t> votes;
    std::size_t responses_used = 0;
    bool stopped_early = false;
    bool tie_broken = false;
    /// Requests sent; dispatched - responses_used were cancelled after the stop.
    std::size_t dispatched = 0;
    std::vector<EnsembleResponse> responses;

    bool abstained() const noexcept { return !chosen_option.has_value(); }
};

/// Resolves a vote tie: each response backing a tied option scores
/// 2 * (explicit answer marker) + 1 * (>= 50 characters) + 1 * (quotes its
/// option's text); the highest mean wins, then the alphabetically first.
char tiebreak_structural(std::span<const char> tied_options, std::span<const EnsembleResponse> responses,
                         std::span<const char> labels, std::span<const std::string> option_texts = {});

struct MultipleChoiceQuestion {
    std::string question;
    std::vector<std::string> options;
};

struct ContextPage {
    PageRef ref;
    std::string text;
    std::string image;
};

/// User message with the context pages, the question, labelled options and
/// the expected answer format.
ChatRequest build_mc_request(const MultipleChoiceQuestion& question, const std::vector<ContextPage>& context);

struct EnsembleOptions {
    StopRule stop;
    std::size_t max_in_flight = 4;
    int max_tokens = 256;
};

/// Fans `request` out over `schedule` (greedy first) with at most
/// max_in_flight concurrent calls. Responses are folded into the vote in
/// schedule order, so the verdict does not depend on completion timing.
/// Once at least min_responses are folded and confidence >= threshold no
/// further requests are issued and results still in flight are discarded.
/// Client errors count as unextractable responses.
EnsembleVerdict run_ensemble(const ChatRequest& request, const MultipleChoiceQuestion& question,
                             std::span<const DecodingConfig> schedule, GenerationClient& client,
                             const EnsembleOptions& options = {});

nlohmann::json to_json(const EnsembleVerdict& verdict);

}  // namespace docqa
