#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vac/data_model.hpp"
#include "vac/gateway.hpp"
#include "vac/prompts.hpp"

namespace vac {

struct AspectScore {
    std::string aspect_id;
    int raw = 0;               // in {0, 1, 2}
    double normalized = 0.0;   // raw / 2
};

struct ResponseScore {
    std::string example_id;
    std::vector<AspectScore> aspect_scores;
    double mean = 0.0;  // arithmetic mean of normalized scores
    bool valid = true;  // false when any aspect judgment failed
    std::string error;

    static ResponseScore from_raw(const std::string& example_id,
                                  const std::vector<std::pair<std::string, int>>& raw_scores);
};

struct SystemComparison {
    std::string other_system;
    double p_value = 1.0;
};

struct EvalReport {
    std::string system_name;
    std::string dataset_name;
    std::vector<ResponseScore> per_example;
    double macro_mean = 0.0;
    double runtime_per_query_seconds = 0.0;
    int failure_count = 0;
    std::vector<SystemComparison> comparisons;
};

json report_to_json(const EvalReport& report);
EvalReport report_from_json(const json& value);

// Parses the judge's final verdict line "Score: <0|1|2>"; accepts surrounding
// whitespace only.
std::optional<int> parse_judge_verdict(const std::string& reply);

struct JudgeOptions {
    ModelHandle judge;
    bool include_narrative = true;
    int max_tokens = 512;
    std::uint64_t seed = 0;
    PromptLogger* prompt_log = nullptr;
    std::string example_id;  // for prompt logging
};

// One aspect per call; re-asks twice on unparsable verdicts, then throws.
AspectScore judge_aspect(Gateway& gateway, const Renderer& renderer, const JudgeOptions& options,
                         const std::string& query, const std::string& response,
                         const RubricAspect& aspect, const std::string& narrative);

// mu(x, y, E, r) with an LLM judge: one AspectScore per aspect, arithmetic
// mean of normalized scores. A failed judgment flags the score invalid
// instead of silently zeroing it.
ResponseScore score_response(Gateway& gateway, const Renderer& renderer,
                             const JudgeOptions& options, const UserExample& example,
                             const std::string& response);

// Deterministic stand-in for mu: per aspect, raw = 2 if all oracle keywords
// appear as case-insensitive token matches, 1 if at least half, else 0.
ResponseScore oracle_score(const UserExample& example, const std::string& response);

// Two-sided paired t-test p-value. Zero variance of the differences
// degenerates to 1.0 (equal means) or 0.0 (otherwise) with a warning.
double paired_t_test(const std::vector<double>& scores_a, const std::vector<double>& scores_b);

// Scores one response for an example; either oracle_score or the judge path.
using Scorer = std::function<ResponseScore(const UserExample&, const std::string&)>;

Scorer make_oracle_scorer();
Scorer make_judge_scorer(Gateway& gateway, const Renderer& renderer, JudgeOptions options);

struct SystemUnderTest {
    std::string name;
    std::function<std::string(const UserExample&)> answer;
};

// Runs the system over every example and scores the answers. Runtime
// accounting covers answer generation (retrieval included) and excludes
// judging. Per-example failures are recorded, not fatal.
EvalReport evaluate_system(const SystemUnderTest& system, const Dataset& dataset,
                           const Scorer& scorer, int parallelism = 1);

// Pairs two reports by example_id and appends the paired t-test result to
// `report`. Examples missing from either side are skipped.
void add_comparison(EvalReport& report, const EvalReport& other);

}  // namespace vac
