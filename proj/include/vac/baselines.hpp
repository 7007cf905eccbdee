#pragma once

#include <string>
#include <vector>

#include "vac/vac_loop.hpp"

namespace vac {

// Comparison systems sharing the retrieval/gateway/prompt stack. All run
// under the same token budget, k, and temperatures as the main loop.

// Question only, no user context of any kind.
std::string answer_no_personalization(const PipelineContext& ctx, const ModelHandle& policy,
                                      const UserExample& example);

// Standard RAG over the user's own profile.
std::string answer_rag(const PipelineContext& ctx, const ModelHandle& policy,
                       const UserExample& example);

// RAG over a uniformly sampled other user's profile.
std::string answer_rag_random_profile(const PipelineContext& ctx, const ModelHandle& policy,
                                      const UserExample& example, const Dataset& pool,
                                      std::uint64_t seed);

// Two-step plan-then-respond baseline; a failed plan generation falls back to
// plain RAG (logged).
std::string answer_planpers(const PipelineContext& ctx, const ModelHandle& policy,
                            const UserExample& example);

// Expectation-maximization self-training with the scalar metric as reward:
// per iteration, sample candidate responses hot, keep the metric argmax as
// the SFT target, fine-tune, repeat. Same persistence/resume contract as the
// main loop. Candidates per example come from config N; sampling temperature
// is fixed at 1.0.
IterationState run_offline_rl_em(const PipelineContext& ctx, Trainer& trainer,
                                 const Dataset& train, const Dataset& validation,
                                 const ModelHandle& base_policy, const RunOptions& options);

inline constexpr double kOfflineRlSamplingTemperature = 1.0;

// Baseline registry for the CLI; unknown names get an error listing these.
const std::vector<std::string>& baseline_names();

}  // namespace vac
