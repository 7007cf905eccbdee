#include "vac/synthetic_backend.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <set>
#include <thread>

#include "vac/prompts.hpp"
#include "vac/scripted_backend.hpp"

namespace vac {

namespace {

std::vector<std::string> example_keywords(const UserExample& example) {
    std::set<std::string> kws;
    for (const auto& aspect : example.aspects) {
        for (const auto& kw : aspect.oracle_keywords) kws.insert(to_lower(kw));
    }
    return {kws.begin(), kws.end()};
}

std::set<std::string> token_set(const std::string& text) {
    std::set<std::string> out;
    for (auto& t : tokenize(text)) out.insert(std::move(t));
    return out;
}

// Keywords the feedback asks for, marked as "... mentions: a, b, c." so the
// refiner can parse them back out.
std::string feedback_sentence(const std::vector<std::string>& kws) {
    std::string s = "To improve personalization, revise the answer so it mentions: ";
    s += join(kws, ", ");
    s += ". Keep the parts that already work.";
    return s;
}

std::vector<std::string> parse_requested_keywords(const std::string& feedback) {
    const auto pos = feedback.find("mentions:");
    if (pos == std::string::npos) return {};
    const auto start = pos + std::string("mentions:").size();
    const auto end = feedback.find('.', start);
    const std::string list =
        end == std::string::npos ? feedback.substr(start) : feedback.substr(start, end - start);
    return tokenize(list);
}

std::string answer_from_keywords(const std::vector<std::string>& kws) {
    std::string text = "Here is my suggestion for your question.";
    for (const auto& kw : kws) {
        text += " It helps to keep " + kw + " in mind.";
    }
    text += " I hope this works out for you.";
    return text;
}

}  // namespace

SyntheticBackend::SyntheticBackend(const std::vector<Dataset>& datasets, Options options)
    : options_(options) {
    for (const auto& ds : datasets) {
        for (const auto& ex : ds.examples) {
            by_query_.emplace(ex.query_text, ex);
        }
    }
}

int SyntheticBackend::skill_level(const ModelHandle& handle) {
    if (!handle.adapter_ref) return 0;
    const std::string& ref = *handle.adapter_ref;
    const auto pos = ref.find("iter");
    if (pos == std::string::npos) return 0;
    int value = 0;
    std::size_t i = pos + 4;
    while (i < ref.size() && ref[i] >= '0' && ref[i] <= '9') {
        value = value * 10 + (ref[i] - '0');
        ++i;
    }
    return value;
}

const UserExample* SyntheticBackend::find_by_query(const std::string& query) const {
    auto it = by_query_.find(query);
    return it == by_query_.end() ? nullptr : &it->second;
}

std::string SyntheticBackend::respond_text(const GenerationRequest& request,
                                           const std::string& prompt, int sample_index,
                                           bool with_plan) const {
    const std::string query = extract_section(prompt, markers::kQuestion);
    const UserExample* example = find_by_query(query);
    if (example == nullptr) {
        return "I do not have enough context about you, but here is a general suggestion: take "
               "it one step at a time and revisit what worked before.";
    }

    const auto prompt_tokens = token_set(prompt);
    std::vector<std::string> visible;
    std::vector<std::string> hidden;
    for (const auto& kw : example_keywords(*example)) {
        if (prompt_tokens.count(kw) > 0) {
            visible.push_back(kw);
        } else {
            hidden.push_back(kw);
        }
    }
    if (with_plan) {
        // Keywords the plan names count as visible guidance.
        const auto plan_tokens = token_set(extract_section(prompt, markers::kPlan));
        std::vector<std::string> still_hidden;
        for (const auto& kw : hidden) {
            if (plan_tokens.count(kw) > 0) {
                visible.push_back(kw);
            } else {
                still_hidden.push_back(kw);
            }
        }
        hidden = std::move(still_hidden);
        std::sort(visible.begin(), visible.end());
    }

    // Training internalizes part of what feedback used to add: skill s covers
    // an extra s/(s+1) share of the keywords retrieval alone misses.
    const int skill = skill_level(request.handle);
    const std::size_t extras =
        static_cast<std::size_t>(hidden.size() * (static_cast<double>(skill) / (skill + 1.0)) + 1e-9);
    std::vector<std::string> covered = visible;
    covered.insert(covered.end(), hidden.begin(), hidden.begin() + extras);
    std::sort(covered.begin(), covered.end());

    if (request.temperature >= 0.5) {
        // Hot sampling: each candidate keeps a random keyword subset.
        std::mt19937_64 rng(derive_seed(request.seed.value_or(0),
                                        "respond-sample-" + std::to_string(sample_index)));
        std::vector<std::string> kept;
        for (const auto& kw : covered) {
            if (rng() % 100 < static_cast<std::uint64_t>(options_.hot_response_keep_prob * 100)) {
                kept.push_back(kw);
            }
        }
        return answer_from_keywords(kept);
    }
    return answer_from_keywords(covered);
}

std::string SyntheticBackend::feedback_text(const GenerationRequest& request,
                                            const std::string& prompt, int sample_index) const {
    const std::string narrative = extract_section(prompt, markers::kNarrative);
    const std::string response = extract_section(prompt, markers::kPreviousResponse);
    const std::string query = extract_section(prompt, markers::kQuestion);
    const UserExample* example = find_by_query(query);
    if (example == nullptr || narrative.empty()) {
        return "The answer reads well; make it more specific to this user's situation.";
    }

    // Only what the prompt shows: expected keywords are read off the
    // narrative, not the rubric.
    const auto narrative_tokens = token_set(narrative);
    const auto response_tokens = token_set(response);
    std::vector<std::string> missing;
    for (const auto& kw : example_keywords(*example)) {
        if (narrative_tokens.count(kw) > 0 && response_tokens.count(kw) == 0) {
            missing.push_back(kw);
        }
    }
    if (missing.empty()) {
        return "The response already addresses every expected aspect. Keep the structure and "
               "level of detail as they are.";
    }

    if (request.temperature >= 0.5) {
        std::mt19937_64 rng(derive_seed(request.seed.value_or(0),
                                        "feedback-sample-" + std::to_string(sample_index)));
        std::vector<std::string> named;
        for (const auto& kw : missing) {
            if (rng() % 100 < static_cast<std::uint64_t>(options_.hot_keyword_prob * 100)) {
                named.push_back(kw);
            }
        }
        if (named.empty()) named.push_back(missing[rng() % missing.size()]);
        return feedback_sentence(named);
    }

    const int skill = skill_level(request.handle);
    if (skill >= 1) return feedback_sentence(missing);
    // Untrained feedback model: names only part of what is missing.
    const std::size_t count = std::max<std::size_t>(
        1, static_cast<std::size_t>(missing.size() * options_.untrained_cold_fraction));
    return feedback_sentence({missing.begin(), missing.begin() + count});
}

std::string SyntheticBackend::refine_text(const std::string& prompt) const {
    const std::string feedback = extract_section(prompt, markers::kFeedback);
    const std::string previous = extract_section(prompt, markers::kPreviousResponse);
    const std::string query = extract_section(prompt, markers::kQuestion);

    const auto requested = parse_requested_keywords(feedback);
    if (requested.empty()) return previous;

    const auto already = token_set(previous);
    std::string revised = previous;
    for (const auto& kw : requested) {
        if (already.count(kw) > 0) continue;
        // Fixed per-(keyword, question) reliability; replays are stable.
        const auto h = fnv1a64(kw + "|" + query);
        if (h % 100 < static_cast<std::uint64_t>(options_.refine_reliability * 100)) {
            revised += " It also helps to think about " + kw + ".";
        }
    }
    return revised;
}

std::string SyntheticBackend::judge_text(const std::string& prompt) const {
    const std::string aspect = extract_section(prompt, markers::kAspect);
    const std::string response = extract_section(prompt, markers::kResponse);
    const std::string query = extract_section(prompt, markers::kQuestion);
    const UserExample* example = find_by_query(query);

    std::vector<std::string> expected;
    if (example != nullptr) {
        const auto aspect_tokens = token_set(aspect);
        for (const auto& kw : example_keywords(*example)) {
            if (aspect_tokens.count(kw) > 0) expected.push_back(kw);
        }
    }
    if (expected.empty()) {
        return "I cannot map this aspect to anything concrete.\nScore: 1";
    }
    const auto response_tokens = token_set(response);
    int present = 0;
    for (const auto& kw : expected) {
        if (response_tokens.count(kw) > 0) ++present;
    }
    int raw = 0;
    if (present == static_cast<int>(expected.size())) {
        raw = 2;
    } else if (present * 2 >= static_cast<int>(expected.size())) {
        raw = 1;
    }
    return "The response covers " + std::to_string(present) + " of " +
           std::to_string(expected.size()) + " expected items.\nScore: " + std::to_string(raw);
}

std::string SyntheticBackend::plan_text(const std::string& prompt) const {
    const std::string query = extract_section(prompt, markers::kQuestion);
    const UserExample* example = find_by_query(query);
    std::string plan = "1. Restate the user's situation.\n";
    if (example != nullptr) {
        const auto prompt_tokens = token_set(prompt);
        std::vector<std::string> visible;
        for (const auto& kw : example_keywords(*example)) {
            if (prompt_tokens.count(kw) > 0) visible.push_back(kw);
        }
        if (!visible.empty()) {
            plan += "2. Cover the recurring topics: " + join(visible, ", ") + ".\n";
        }
    }
    plan += "3. Close with practical next steps.";
    return plan;
}

GenerationResult SyntheticBackend::generate(const GenerationRequest& request) {
    if (options_.simulated_latency_seconds > 0.0) {
        std::this_thread::sleep_for(
            std::chrono::duration<double>(options_.simulated_latency_seconds));
    }
    const std::string& prompt = request.prompt;
    GenerationResult result;
    result.texts.reserve(request.n);

    enum class Kind { respond, feedback, refine, judge, plan, plan_respond };
    Kind kind = Kind::respond;
    if (prompt.find(markers::kAspect) != std::string::npos) {
        kind = Kind::judge;
    } else if (prompt.find(markers::kFeedback) != std::string::npos) {
        kind = Kind::refine;
    } else if (prompt.find(markers::kNarrative) != std::string::npos &&
               prompt.find(markers::kPreviousResponse) != std::string::npos) {
        kind = Kind::feedback;
    } else if (prompt.find(markers::kPlanRequest) != std::string::npos) {
        kind = Kind::plan;
    } else if (prompt.find(markers::kPlan) != std::string::npos) {
        kind = Kind::plan_respond;
    }

    for (int i = 0; i < request.n; ++i) {
        switch (kind) {
            case Kind::respond:
                result.texts.push_back(respond_text(request, prompt, i, false));
                break;
            case Kind::plan_respond:
                result.texts.push_back(respond_text(request, prompt, i, true));
                break;
            case Kind::feedback:
                result.texts.push_back(feedback_text(request, prompt, i));
                break;
            case Kind::refine:
                result.texts.push_back(refine_text(prompt));
                break;
            case Kind::judge:
                result.texts.push_back(judge_text(prompt));
                break;
            case Kind::plan:
                result.texts.push_back(plan_text(prompt));
                break;
        }
    }
    result.prompt_tokens = heuristic_token_count(prompt);
    for (const auto& t : result.texts) result.completion_tokens += heuristic_token_count(t);
    result.latency_seconds = options_.simulated_latency_seconds;
    return result;
}

std::vector<std::vector<double>> SyntheticBackend::embed(const EmbeddingRequest& request) {
    std::vector<std::vector<double>> out;
    out.reserve(request.texts.size());
    for (const auto& text : request.texts) {
        out.push_back(hash_embedding(text, options_.embedding_dim));
    }
    return out;
}

}  // namespace vac
