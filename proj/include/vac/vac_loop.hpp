#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vac/data_model.hpp"
#include "vac/evaluation.hpp"
#include "vac/gateway.hpp"
#include "vac/manifest.hpp"
#include "vac/prompts.hpp"
#include "vac/retrieval.hpp"
#include "vac/trainer.hpp"

namespace vac {

// One sampled feedback with the response it produced and that response's
// metric score.
struct FeedbackCandidate {
    std::string feedback_text;
    std::string refined_text;
    double score = 0.0;  // metric mean in [0,1]
    int sample_index = 0;
};

struct SFTRecord {
    std::string record_id;
    std::string prompt;
    std::string target;
    std::string kind;  // "feedback_model" | "policy_model"
    std::string example_id;
};

struct PreferencePair {
    std::string prompt;
    std::string chosen;    // updated response y_t
    std::string rejected;  // initial response y_{t-1}
    std::string example_id;
};

void write_sft_records(const std::vector<SFTRecord>& records, const fs::path& path);
std::vector<SFTRecord> read_sft_records(const fs::path& path);
void write_preference_pairs(const std::vector<PreferencePair>& pairs, const fs::path& path);
std::vector<PreferencePair> read_preference_pairs(const fs::path& path);

struct TrainConfig {
    int T = 3;   // training iterations
    int N = 16;  // feedback samples per output
    int K = 10;  // retrieved documents
    double gen_temperature = 0.1;
    double feedback_temperature = 1.0;
    int token_budget = 8192;  // combined input+output limit
    int max_output_tokens = 1024;
    std::string policy_objective = "sft";  // sft | dpo
    bool frozen_feedback = false;
    bool require_improvement = false;
    json trainer_hyperparams = default_trainer_hyperparams();

    void validate() const;
    json to_json() const;
    static TrainConfig from_json(const json& j);
};

struct IterationState {
    int t = 0;
    ModelHandle policy;
    ModelHandle feedback;
    std::vector<std::string> built_datasets;  // run-relative paths
    std::vector<double> validation_metric_history;  // [0] is the base policy
    std::uint64_t rng_seed = 0;

    json to_json() const;
    static IterationState from_json(const json& j);
};

enum class RetrieverKind { lexical, dense };

// Everything a pipeline stage needs. Owned by the caller; stages only read
// it (apart from the gateway and prompt log, which are internally
// synchronized).
struct PipelineContext {
    Gateway& gateway;
    const Renderer& renderer;
    Scorer scorer;
    TrainConfig train;
    RetrieverKind retriever = RetrieverKind::lexical;
    ModelHandle embedder;  // dense retrieval only
    std::uint64_t seed = 0;
    int parallelism = 1;
    PromptLogger* prompt_log = nullptr;
};

std::vector<RankedDoc> retrieve_for(const PipelineContext& ctx, const UserExample& example);
std::vector<RankedDoc> retrieve_over(const PipelineContext& ctx,
                                     const std::vector<ProfileDocument>& profile,
                                     const std::string& query, const std::string& user_id);

// y_{t-1}: one sample at gen_temperature through the respond template.
std::string generate_initial(const PipelineContext& ctx, const ModelHandle& policy,
                             const UserExample& example);

// N hot samples through the feedback template (narrative included). Empty
// samples are replaced by one resampling round; fewer than N usable samples
// are tolerated with a warning.
std::vector<std::string> sample_feedbacks(const PipelineContext& ctx,
                                          const ModelHandle& feedback_model,
                                          const UserExample& example, const std::string& initial,
                                          int n);

// y_t: one sample at gen_temperature through the refine template.
std::string refine(const PipelineContext& ctx, const ModelHandle& policy,
                   const UserExample& example, const std::string& initial,
                   const std::string& feedback_text);

// Argmax by score; ties break toward the lowest sample_index.
const FeedbackCandidate& select_best_feedback(const std::vector<FeedbackCandidate>& candidates);

// Feedback-model self-training data: per example, the sampled feedback whose
// refinement scores highest becomes the target. candidate_rows, when given,
// receives one JSON row per example with every candidate and its score.
std::vector<SFTRecord> build_feedback_sft_dataset(const PipelineContext& ctx,
                                                  const ModelHandle& policy_prev,
                                                  const ModelHandle& feedback_prev,
                                                  const Dataset& train,
                                                  std::vector<json>* candidate_rows = nullptr);

struct PolicyBuildResult {
    std::vector<SFTRecord> records;
    std::vector<PreferencePair> pairs;
};

// Policy training data: refine each initial response with a single feedback
// from the freshly trained feedback model; the respond prompt (no feedback,
// no narrative) paired with the refined response is the SFT row, and
// (initial, refined) the preference pair when they differ.
PolicyBuildResult build_policy_sft_dataset(const PipelineContext& ctx,
                                           const ModelHandle& policy_prev,
                                           const ModelHandle& feedback_cur, const Dataset& train);

// Writes the records to dataset_path and delegates to the trainer backend.
ModelHandle fine_tune(Trainer& trainer, const ModelHandle& base,
                      const std::vector<SFTRecord>& records, const json& hyperparams,
                      const fs::path& dataset_path, const std::string& tag);
ModelHandle fine_tune_dpo(Trainer& trainer, const ModelHandle& base,
                          const std::vector<PreferencePair>& pairs, const json& hyperparams,
                          const fs::path& dataset_path, const std::string& tag);

// Inference: retrieval + respond prompt + one sample. Narrative and aspects
// are never consulted.
std::string answer(const PipelineContext& ctx, const ModelHandle& policy,
                   const UserExample& example);

struct RunOptions {
    fs::path run_dir;
    std::string config_digest;  // folded into stage input digests
    std::optional<std::string> abort_after_stage;  // debug crash hook
};

// One full iteration t: feedback dataset -> feedback train -> policy dataset
// -> policy train -> validation eval, every stage manifest-checked so an
// interrupted run resumes exactly where it stopped.
IterationState run_iteration(const PipelineContext& ctx, Trainer& trainer, StageRunner& runner,
                             const IterationState& state, const Dataset& train,
                             const Dataset& validation);

// T iterations plus the base-policy validation point; carries forward the
// best-scoring policy checkpoint between iterations.
IterationState run_training(const PipelineContext& ctx, Trainer& trainer, const Dataset& train,
                            const Dataset& validation, const ModelHandle& base_policy,
                            const ModelHandle& base_feedback, const RunOptions& options);

IterationState load_iteration_state(const fs::path& run_dir);

}  // namespace vac
