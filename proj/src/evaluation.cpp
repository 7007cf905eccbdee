#include "vac/evaluation.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace vac {

ResponseScore ResponseScore::from_raw(
    const std::string& example_id,
    const std::vector<std::pair<std::string, int>>& raw_scores) {
    ResponseScore score;
    score.example_id = example_id;
    double sum = 0.0;
    for (const auto& [aspect_id, raw] : raw_scores) {
        AspectScore a;
        a.aspect_id = aspect_id;
        a.raw = raw;
        a.normalized = raw / 2.0;
        sum += a.normalized;
        score.aspect_scores.push_back(std::move(a));
    }
    score.mean = raw_scores.empty() ? 0.0 : sum / raw_scores.size();
    return score;
}

json report_to_json(const EvalReport& report) {
    json j;
    j["system_name"] = report.system_name;
    j["dataset_name"] = report.dataset_name;
    j["macro_mean"] = report.macro_mean;
    j["runtime_per_query_seconds"] = report.runtime_per_query_seconds;
    j["failure_count"] = report.failure_count;
    json per_example = json::array();
    for (const auto& score : report.per_example) {
        json s;
        s["example_id"] = score.example_id;
        s["mean"] = score.mean;
        s["valid"] = score.valid;
        if (!score.error.empty()) s["error"] = score.error;
        json aspects = json::array();
        for (const auto& a : score.aspect_scores) {
            aspects.push_back({{"aspect_id", a.aspect_id}, {"raw", a.raw}, {"normalized", a.normalized}});
        }
        s["aspect_scores"] = std::move(aspects);
        per_example.push_back(std::move(s));
    }
    j["per_example"] = std::move(per_example);
    json comparisons = json::array();
    for (const auto& c : report.comparisons) {
        comparisons.push_back({{"other_system", c.other_system}, {"p_value", c.p_value}});
    }
    j["comparisons"] = std::move(comparisons);
    return j;
}

EvalReport report_from_json(const json& value) {
    EvalReport report;
    report.system_name = value.at("system_name").get<std::string>();
    report.dataset_name = value.value("dataset_name", "");
    report.macro_mean = value.at("macro_mean").get<double>();
    report.runtime_per_query_seconds = value.value("runtime_per_query_seconds", 0.0);
    report.failure_count = value.value("failure_count", 0);
    for (const auto& s : value.value("per_example", json::array())) {
        ResponseScore score;
        score.example_id = s.at("example_id").get<std::string>();
        score.mean = s.at("mean").get<double>();
        score.valid = s.value("valid", true);
        score.error = s.value("error", "");
        for (const auto& a : s.value("aspect_scores", json::array())) {
            score.aspect_scores.push_back({a.at("aspect_id").get<std::string>(),
                                           a.at("raw").get<int>(),
                                           a.at("normalized").get<double>()});
        }
        report.per_example.push_back(std::move(score));
    }
    for (const auto& c : value.value("comparisons", json::array())) {
        report.comparisons.push_back(
            {c.at("other_system").get<std::string>(), c.at("p_value").get<double>()});
    }
    return report;
}

std::optional<int> parse_judge_verdict(const std::string& reply) {
    // Last non-empty line must be "Score: <n>" modulo surrounding whitespace.
    std::string_view text = reply;
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ' ||
                             text.back() == '\t')) {
        text.remove_suffix(1);
    }
    const auto nl = text.find_last_of('\n');
    std::string_view line = nl == std::string_view::npos ? text : text.substr(nl + 1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t' || line.front() == '\r')) {
        line.remove_prefix(1);
    }
    constexpr std::string_view prefix = "Score:";
    if (line.substr(0, prefix.size()) != prefix) return std::nullopt;
    line.remove_prefix(prefix.size());
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) {
        line.remove_suffix(1);
    }
    if (line.size() != 1) return std::nullopt;
    if (line[0] < '0' || line[0] > '2') return std::nullopt;
    return line[0] - '0';
}

AspectScore judge_aspect(Gateway& gateway, const Renderer& renderer, const JudgeOptions& options,
                         const std::string& query, const std::string& response,
                         const RubricAspect& aspect, const std::string& narrative) {
    if (response.empty()) throw VacError("judge_aspect: response must be non-empty");

    const RenderedPrompt prompt = renderer.render_judge(query, response, {aspect}, narrative,
                                                        options.include_narrative);
    log_prompt(options.prompt_log, options.example_id, prompt);

    std::string last_reply;
    for (int attempt = 0; attempt < 3; ++attempt) {  // initial ask plus 2 re-asks
        GenerationRequest request;
        request.handle = options.judge;
        request.prompt = prompt.text;
        request.temperature = 0.0;
        request.max_tokens = options.max_tokens;
        request.n = 1;
        request.seed = derive_seed(options.seed, "judge-attempt-" + std::to_string(attempt));
        const GenerationResult result = gateway.generate(request);
        last_reply = result.texts.at(0);
        if (auto verdict = parse_judge_verdict(last_reply)) {
            AspectScore score;
            score.aspect_id = aspect.aspect_id;
            score.raw = *verdict;
            score.normalized = *verdict / 2.0;
            return score;
        }
    }
    throw VacError("judge verdict unparsable after 2 re-asks (aspect '" + aspect.aspect_id +
                   "'), last reply: \"" + last_reply.substr(0, 80) + "\"");
}

ResponseScore score_response(Gateway& gateway, const Renderer& renderer,
                             const JudgeOptions& options, const UserExample& example,
                             const std::string& response) {
    if (example.aspects.empty()) throw VacError("score_response: example has no aspects");
    ResponseScore score;
    score.example_id = example.example_id;
    double sum = 0.0;
    for (const auto& aspect : example.aspects) {
        try {
            AspectScore a = judge_aspect(gateway, renderer, options, example.query_text, response,
                                         aspect, example.narrative);
            sum += a.normalized;
            score.aspect_scores.push_back(std::move(a));
        } catch (const std::exception& e) {
            score.valid = false;
            score.error = e.what();
            return score;
        }
    }
    score.mean = sum / example.aspects.size();
    return score;
}

ResponseScore oracle_score(const UserExample& example, const std::string& response) {
    std::vector<std::pair<std::string, int>> raw_scores;
    // Token-set lookup once; keyword matches are whole-token, case-insensitive.
    std::set<std::string> tokens;
    for (auto& t : tokenize(response)) tokens.insert(std::move(t));

    for (const auto& aspect : example.aspects) {
        if (aspect.oracle_keywords.empty()) {
            throw VacError("oracle_score: aspect '" + aspect.aspect_id +
                           "' has no oracle keywords");
        }
        int present = 0;
        for (const auto& kw : aspect.oracle_keywords) {
            if (tokens.count(to_lower(kw)) > 0) ++present;
        }
        const std::size_t total = aspect.oracle_keywords.size();
        int raw = 0;
        if (present == static_cast<int>(total)) {
            raw = 2;
        } else if (present * 2 >= static_cast<int>(total)) {
            raw = 1;
        }
        raw_scores.emplace_back(aspect.aspect_id, raw);
    }
    return ResponseScore::from_raw(example.example_id, raw_scores);
}

double paired_t_test(const std::vector<double>& scores_a, const std::vector<double>& scores_b) {
    if (scores_a.size() != scores_b.size()) {
        throw VacError("paired_t_test: input lengths differ (" + std::to_string(scores_a.size()) +
                       " vs " + std::to_string(scores_b.size()) + ")");
    }
    const std::size_t n = scores_a.size();
    if (n < 2) throw VacError("paired_t_test: need at least 2 pairs");

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += scores_a[i] - scores_b[i];
    mean /= static_cast<double>(n);

    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = scores_a[i] - scores_b[i] - mean;
        ss += d * d;
    }
    const double variance = ss / static_cast<double>(n - 1);
    if (variance <= 0.0) {
        log_warn("paired_t_test: zero variance of differences; degenerate p-value");
        return mean == 0.0 ? 1.0 : 0.0;
    }
    const double t = mean / std::sqrt(variance / static_cast<double>(n));
    boost::math::students_t dist(static_cast<double>(n - 1));
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    return std::min(1.0, std::max(0.0, p));
}

Scorer make_oracle_scorer() {
    return [](const UserExample& example, const std::string& response) {
        return oracle_score(example, response);
    };
}

Scorer make_judge_scorer(Gateway& gateway, const Renderer& renderer, JudgeOptions options) {
    return [&gateway, &renderer, options](const UserExample& example,
                                          const std::string& response) mutable {
        options.example_id = example.example_id;
        options.seed = derive_seed(options.seed, "judge/" + example.example_id);
        return score_response(gateway, renderer, options, example, response);
    };
}

EvalReport evaluate_system(const SystemUnderTest& system, const Dataset& dataset,
                           const Scorer& scorer, int parallelism) {
    if (dataset.examples.empty()) throw VacError("evaluate_system: dataset is empty");

    EvalReport report;
    report.system_name = system.name;
    report.dataset_name = dataset.name;
    report.per_example.resize(dataset.examples.size());
    std::vector<double> latencies(dataset.examples.size(), 0.0);

    parallel_for(dataset.examples.size(), parallelism, [&](std::size_t i) {
        const UserExample& example = dataset.examples[i];
        ResponseScore score;
        score.example_id = example.example_id;
        try {
            const double start = now_seconds();
            const std::string answer = system.answer(example);
            latencies[i] = now_seconds() - start;
            score = scorer(example, answer);
        } catch (const std::exception& e) {
            score.valid = false;
            score.error = e.what();
        }
        report.per_example[i] = std::move(score);
    });

    double sum = 0.0;
    double latency_sum = 0.0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < report.per_example.size(); ++i) {
        if (report.per_example[i].valid) {
            sum += report.per_example[i].mean;
            latency_sum += latencies[i];
            ++valid;
        } else {
            ++report.failure_count;
        }
    }
    report.macro_mean = valid == 0 ? 0.0 : sum / static_cast<double>(valid);
    report.runtime_per_query_seconds = valid == 0 ? 0.0 : latency_sum / static_cast<double>(valid);
    return report;
}

void add_comparison(EvalReport& report, const EvalReport& other) {
    std::map<std::string, double> other_means;
    for (const auto& s : other.per_example) {
        if (s.valid) other_means[s.example_id] = s.mean;
    }
    std::vector<double> a, b;
    for (const auto& s : report.per_example) {
        if (!s.valid) continue;
        auto it = other_means.find(s.example_id);
        if (it == other_means.end()) continue;
        a.push_back(s.mean);
        b.push_back(it->second);
    }
    SystemComparison cmp;
    cmp.other_system = other.system_name;
    cmp.p_value = a.size() >= 2 ? paired_t_test(a, b) : 1.0;
    report.comparisons.push_back(std::move(cmp));
}

}  // namespace vac
