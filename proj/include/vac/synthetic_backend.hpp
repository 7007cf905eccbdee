#pragma once

#include <map>
#include <string>
#include <vector>

#include "vac/data_model.hpp"
#include "vac/gateway.hpp"

namespace vac {

// Desk-scale simulation backend for end-to-end runs without real models.
//
// It classifies each prompt by the default template section markers and
// behaves per role:
//   respond       answer covers the rubric keywords visible in the prompt
//                 (retrieved docs + question) plus a share of the remaining
//                 ones that grows with the handle's training iteration
//                 ("iterN-..." adapter tags); hot temperatures sample keyword
//                 subsets per candidate.
//   feedback      compares the narrative section against the previous
//                 response and names the missing keywords; hot temperatures
//                 name random subsets, cold untrained models name only part.
//   refine        appends the keywords the feedback names, each with a fixed
//                 deterministic reliability.
//   judge         replies "Score: <0|1|2>" from keyword coverage.
//   plan/plan_respond  two-step variant of respond.
//
// Lookups go through the examples it was constructed with, keyed by query
// text; behavior is a pure function of (prompt, handle, seed).
class SyntheticBackend : public Backend {
public:
    struct Options {
        double refine_reliability = 0.9;       // chance a named keyword is incorporated
        double hot_keyword_prob = 0.6;         // per-keyword pick rate at temperature >= 0.5
        double untrained_cold_fraction = 0.6;  // share of missing keywords named at skill 0
        double hot_response_keep_prob = 0.75;  // per-keyword keep rate for hot candidates
        int embedding_dim = 32;
        double simulated_latency_seconds = 0.0;
    };

    SyntheticBackend(const std::vector<Dataset>& datasets, Options options);
    explicit SyntheticBackend(const std::vector<Dataset>& datasets)
        : SyntheticBackend(datasets, Options()) {}

    GenerationResult generate(const GenerationRequest& request) override;
    std::vector<std::vector<double>> embed(const EmbeddingRequest& request) override;

    // Training iteration encoded in an adapter tag like "iter2-policy"; 0 for
    // the base model.
    static int skill_level(const ModelHandle& handle);

private:
    const UserExample* find_by_query(const std::string& query) const;

    std::string respond_text(const GenerationRequest& request, const std::string& prompt,
                             int sample_index, bool with_plan) const;
    std::string feedback_text(const GenerationRequest& request, const std::string& prompt,
                              int sample_index) const;
    std::string refine_text(const std::string& prompt) const;
    std::string judge_text(const std::string& prompt) const;
    std::string plan_text(const std::string& prompt) const;

    std::map<std::string, UserExample> by_query_;
    Options options_;
};

}  // namespace vac
