#include "docqa/ensemble.hpp"

#include "docqa/errors.hpp"
#include "docqa/hashing.hpp"
#include "docqa/text.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

namespace docqa {

using nlohmann::json;

std::vector<DecodingConfig> make_schedule(std::size_t count, std::uint64_t seed)
{
    if (count < 2) {
        throw ArgumentError("schedule needs at least 2 configurations");
    }
    static constexpr double kTopP[] = {0.7, 0.8, 0.9, 0.95};
    static constexpr int kTopK[] = {20, 40, 50};

    std::vector<DecodingConfig> schedule;
    schedule.reserve(count);
    DecodingConfig greedy;
    greedy.id = 0;
    greedy.greedy = true;
    greedy.temperature = 1.0;
    greedy.top_p = 1.0;
    greedy.top_k = 1;
    greedy.seed = splitmix64(seed);
    schedule.push_back(greedy);

    const std::size_t samplers = count - 1;
    const double span = kMaxSamplingTemperature - kMinSamplingTemperature;
    for (std::size_t i = 1; i < count; ++i) {
        DecodingConfig c;
        c.id = static_cast<int>(i);
        c.greedy = false;
        c.temperature = samplers == 1
                            ? kMinSamplingTemperature
                            : std::min(kMaxSamplingTemperature,
                                       kMinSamplingTemperature +
                                           static_cast<double>(i - 1) * span / static_cast<double>(samplers - 1));
        c.top_p = kTopP[(i - 1) % 4];
        c.top_k = kTopK[(i - 1) % 3];
        c.seed = splitmix64(seed + i);
        schedule.push_back(c);
    }
    return schedule;
}

std::vector<char> option_labels(std::size_t count)
{
    if (count > 26) {
        throw ArgumentError("at most 26 options are supported");
    }
    std::vector<char> labels;
    for (std::size_t i = 0; i < count; ++i) {
        labels.push_back(static_cast<char>('A' + i));
    }
    return labels;
}

namespace {

const std::regex& english_marker()
{
    static const std::regex re(
        R"((?:^|[^A-Za-z])(?:[Ff]inal [Aa]nswer|[Aa]nswer|ANSWER|[Cc]orrect (?:[Oo]ption|[Cc]hoice|[Aa]nswer)))"
        R"( ?(?:is|was|would be|:|=|-)? ?(?:[Oo]ption )?:? ?(?:\(|\[|\*|"|')* ?([A-Z])(?![A-Za-z0-9]))");
    return re;
}

const std::regex& japanese_marker()
{
    static const std::regex re(
        "(?:答え|回答|正解|解答)(?: ?(?:は|:))? ?:? ?(?:\\(|\\[|「|\\*|【)* ?([A-Z])(?![A-Za-z0-9])");
    return re;
}

const std::regex& standalone_line()
{
    static const std::regex re(R"(^(?:\(|\[|\*)* ?([A-Z]) ?(?:\)|\]|\*|\.|:)*$)");
    return re;
}

const std::regex& leading_label()
{
    static const std::regex re(R"(^(?:\(|\[)?([A-Z])(?:\)|\]|\.|:)(?: |$))");
    return re;
}

std::vector<std::string> normalized_lines(std::string_view raw)
{
    std::vector<std::string> lines;
    for (std::string_view line : text::split_lines(raw)) {
        lines.push_back(normalize_text(line));
    }
    return lines;
}

bool is_label(char c, std::span<const char> labels)
{
    return std::find(labels.begin(), labels.end(), c) != labels.end();
}

std::optional<char> last_marker(const std::vector<std::string>& lines, std::span<const char> labels)
{
    std::optional<char> found;
    for (const std::string& line : lines) {
        for (const std::regex* re : {&english_marker(), &japanese_marker()}) {
            for (auto it = std::sregex_iterator(line.begin(), line.end(), *re); it != std::sregex_iterator(); ++it) {
                const char c = (*it)[1].str().front();
                if (is_label(c, labels)) {
                    found = c;
                }
            }
        }
    }
    return found;
}

std::string fold_case(std::string_view s)
{
    std::string out;
    for (char32_t cp : text::decode_utf8(s)) {
        text::append_utf8(out, text::to_lower(cp));
    }
    return out;
}

bool mentions_text(const std::string& folded_response, const std::string& option_text)
{
    const std::string opt = fold_case(normalize_text(option_text));
    if (opt.empty()) {
        return false;
    }
    if (text::code_point_length(opt) < 2) {
        return folded_response == opt;
    }
    return folded_response.find(opt) != std::string::npos;
}

}  // namespace

bool has_answer_marker(std::string_view raw, std::span<const char> labels)
{
    return last_marker(normalized_lines(raw), labels).has_value();
}

std::optional<char> extract_option(std::string_view raw, std::span<const char> labels,
                                   std::span<const std::string> option_texts)
{
    const std::vector<std::string> lines = normalized_lines(raw);

    if (const auto m = last_marker(lines, labels)) {
        return m;
    }

    for (const std::string& line : lines) {
        std::smatch m;
        if (std::regex_match(line, m, standalone_line())) {
            const char c = m[1].str().front();
            if (is_label(c, labels)) {
                return c;
            }
        }
    }
    for (const std::string& line : lines) {
        if (line.empty()) {
            continue;
        }
        std::smatch m;
        if (std::regex_search(line, m, leading_label())) {
            const char c = m[1].str().front();
            if (is_label(c, labels)) {
                return c;
            }
        }
        break;
    }

    if (!option_texts.empty()) {
        const std::string folded = fold_case(normalize_text(raw));
        std::optional<char> hit;
        for (std::size_t i = 0; i < option_texts.size() && i < labels.size(); ++i) {
            if (mentions_text(folded, option_texts[i])) {
                if (hit) {
                    return std::nullopt;
                }
                hit = labels[i];
            }
        }
        return hit;
    }
    return std::nullopt;
}

void EnsembleState::add(EnsembleResponse response)
{
    if (response.option) {
        ++votes_[*response.option];
        ++voters_;
    }
    completed_.push_back(std::move(response));
}

double EnsembleState::confidence() const noexcept
{
    if (voters_ == 0) {
        return 0.0;
    }
    std::size_t best = 0;
    for (const auto& [opt, n] : votes_) {
        best = std::max(best, n);
    }
    return static_cast<double>(best) / static_cast<double>(voters_);
}

bool EnsembleState::should_stop(const StopRule& rule) const noexcept
{
    return completed_.size() >= rule.min_responses && confidence() >= rule.confidence_threshold;
}

char tiebreak_structural(std::span<const char> tied_options, std::span<const EnsembleResponse> responses,
                         std::span<const char> labels, std::span<const std::string> option_texts)
{
    if (tied_options.empty()) {
        throw ArgumentError("tiebreak needs at least one option");
    }
    std::vector<char> tied(tied_options.begin(), tied_options.end());
    std::sort(tied.begin(), tied.end());
    if (tied.size() == 1) {
        return tied.front();
    }

    char best = tied.front();
    double best_mean = -1.0;
    for (char opt : tied) {
        double total = 0.0;
        std::size_t n = 0;
        const auto label_pos = std::find(labels.begin(), labels.end(), opt);
        for (const EnsembleResponse& r : responses) {
            if (r.option != opt) {
                continue;
            }
            int score = 0;
            if (has_answer_marker(r.raw_text, labels)) {
                score += 2;
            }
            if (text::code_point_length(r.raw_text) >= 50) {
                score += 1;
            }
            if (label_pos != labels.end()) {
                const auto idx = static_cast<std::size_t>(label_pos - labels.begin());
                if (idx < option_texts.size() &&
                    mentions_text(fold_case(normalize_text(r.raw_text)), option_texts[idx])) {
                    score += 1;
                }
            }
            total += score;
            ++n;
        }
        const double mean = n == 0 ? 0.0 : total / static_cast<double>(n);
        if (mean > best_mean) {
            best_mean = mean;
            best = opt;
        }
    }
    return best;
}

ChatRequest build_mc_request(const MultipleChoiceQuestion& question, const std::vector<ContextPage>& context)
{
    const auto labels = option_labels(question.options.size());
    std::ostringstream prompt;
    if (!context.empty()) {
        prompt << "Read the following document pages and answer the multiple-choice question.\n\n";
        for (const ContextPage& page : context) {
            prompt << "[Page " << page.ref.doc_id << " p." << page.ref.page_index << "]\n" << page.text << "\n\n";
        }
    } else {
        prompt << "Answer the multiple-choice question.\n\n";
    }
    prompt << "Question: " << question.question << "\n";
    prompt << "Options:\n";
    for (std::size_t i = 0; i < question.options.size(); ++i) {
        prompt << labels[i] << ". " << question.options[i] << "\n";
    }
    prompt << "\nThink briefly, then finish with a line of the form \"Answer: X\" where X is one of ";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        prompt << (i == 0 ? "" : ", ") << labels[i];
    }
    prompt << ".";

    ChatRequest req;
    ChatMessage msg;
    msg.role = "user";
    msg.content.push_back(ContentPart::text(prompt.str()));
    for (const ContextPage& page : context) {
        if (!page.image.empty()) {
            msg.content.push_back(ContentPart::image(page.image));
        }
    }
    req.messages.push_back(std::move(msg));
    return req;
}

EnsembleVerdict run_ensemble(const ChatRequest& request, const MultipleChoiceQuestion& question,
                             std::span<const DecodingConfig> schedule, GenerationClient& client,
                             const EnsembleOptions& options)
{
    if (schedule.empty()) {
        throw ArgumentError("run_ensemble needs a non-empty schedule");
    }
    const std::vector<char> labels = option_labels(question.options.size());
    const std::size_t n = schedule.size();

    std::mutex mu;
    std::condition_variable cv;
    std::vector<std::optional<EnsembleResponse>> slots(n);
    std::size_t next = 0;
    std::size_t dispatched = 0;
    bool stop = false;

    const auto call = [&](const DecodingConfig& cfg) {
        ChatRequest req = request;
        req.temperature = cfg.greedy ? 0.0 : cfg.temperature;
        req.top_p = cfg.top_p;
        req.top_k = cfg.top_k;
        req.seed = cfg.seed;
        req.max_tokens = options.max_tokens;
        req.config_id = cfg.id;
        EnsembleResponse r;
        r.config_id = cfg.id;
        try {
            r.raw_text = client.generate(req);
            r.option = extract_option(r.raw_text, labels, question.options);
        } catch (const Error&) {
            r.failed = true;
        }
        return r;
    };

    const std::size_t workers = std::clamp<std::size_t>(options.max_in_flight, 1, n);
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = 0;
                {
                    std::lock_guard lock(mu);
                    if (stop || next >= n) {
                        return;
                    }
                    i = next++;
                    ++dispatched;
                }
                EnsembleResponse r = call(schedule[i]);
                {
                    std::lock_guard lock(mu);
                    if (!stop) {
                        slots[i] = std::move(r);
                    }
                }
                cv.notify_all();
            }
        });
    }

    EnsembleState state;
    bool fired = false;
    for (std::size_t i = 0; i < n; ++i) {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return slots[i].has_value(); });
        EnsembleResponse r = std::move(*slots[i]);
        lock.unlock();
        state.add(std::move(r));
        if (state.should_stop(options.stop)) {
            fired = true;
            break;
        }
    }
    {
        std::lock_guard lock(mu);
        stop = true;
    }
    pool.clear();

    EnsembleVerdict verdict;
    verdict.votes = state.vote_counts();
    verdict.confidence = state.confidence();
    verdict.responses_used = state.completed().size();
    verdict.stopped_early = fired && verdict.responses_used < n;
    verdict.dispatched = dispatched;
    verdict.responses = state.completed();

    if (state.voting_responses() > 0) {
        std::size_t best = 0;
        for (const auto& [opt, count] : verdict.votes) {
            best = std::max(best, count);
        }
        std::vector<char> tied;
        for (const auto& [opt, count] : verdict.votes) {
            if (count == best) {
                tied.push_back(opt);
            }
        }
        verdict.tie_broken = tied.size() > 1;
        verdict.chosen_option = tied.size() == 1
                                    ? tied.front()
                                    : tiebreak_structural(tied, verdict.responses, labels, question.options);
    }
    return verdict;
}

json to_json(const EnsembleVerdict& verdict)
{
    json votes = json::object();
    for (const auto& [opt, count] : verdict.votes) {
        votes[std::string(1, opt)] = count;
    }
    return {
        {"answer", verdict.chosen_option ? json(std::string(1, *verdict.chosen_option)) : json(nullptr)},
        {"abstained", verdict.abstained()},
        {"confidence", verdict.confidence},
        {"votes", std::move(votes)},
        {"responses_used", verdict.responses_used},
        {"stopped_early", verdict.stopped_early},
        {"tie_broken", verdict.tie_broken},
    };
}

}  // namespace docqa
