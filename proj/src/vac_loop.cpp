#include "vac/vac_loop.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

namespace vac {

// ---------------------------------------------------------------------------
// Records and config
// ---------------------------------------------------------------------------

namespace {

json sft_record_to_json(const SFTRecord& r) {
    json j;
    j["record_id"] = r.record_id;
    j["prompt"] = r.prompt;
    j["target"] = r.target;
    j["kind"] = r.kind;
    j["example_id"] = r.example_id;
    return j;
}

json pair_to_json(const PreferencePair& p) {
    json j;
    j["prompt"] = p.prompt;
    j["chosen"] = p.chosen;
    j["rejected"] = p.rejected;
    j["example_id"] = p.example_id;
    return j;
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::vector<json> rows;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) rows.push_back(json::parse(line));
    }
    return rows;
}

void write_jsonl(const std::vector<json>& rows, const fs::path& path) {
    std::string out;
    for (const auto& row : rows) {
        out += row.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

}  // namespace

void write_sft_records(const std::vector<SFTRecord>& records, const fs::path& path) {
    std::vector<json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(sft_record_to_json(r));
    write_jsonl(rows, path);
}

std::vector<SFTRecord> read_sft_records(const fs::path& path) {
    std::vector<SFTRecord> records;
    for (const auto& j : read_jsonl(path)) {
        records.push_back({j.at("record_id").get<std::string>(), j.at("prompt").get<std::string>(),
                           j.at("target").get<std::string>(), j.at("kind").get<std::string>(),
                           j.at("example_id").get<std::string>()});
    }
    return records;
}

void write_preference_pairs(const std::vector<PreferencePair>& pairs, const fs::path& path) {
    std::vector<json> rows;
    rows.reserve(pairs.size());
    for (const auto& p : pairs) rows.push_back(pair_to_json(p));
    write_jsonl(rows, path);
}

std::vector<PreferencePair> read_preference_pairs(const fs::path& path) {
    std::vector<PreferencePair> pairs;
    for (const auto& j : read_jsonl(path)) {
        pairs.push_back({j.at("prompt").get<std::string>(), j.at("chosen").get<std::string>(),
                         j.at("rejected").get<std::string>(), j.at("example_id").get<std::string>()});
    }
    return pairs;
}

void TrainConfig::validate() const {
    if (T < 1) throw ConfigError("train.T must be >= 1");
    if (N < 1) throw ConfigError("train.N must be >= 1");
    if (K < 0) throw ConfigError("train.K must be >= 0");
    if (gen_temperature < 0.0 || feedback_temperature < 0.0) {
        throw ConfigError("train temperatures must be >= 0");
    }
    if (token_budget <= max_output_tokens) {
        throw ConfigError("train.token_budget must exceed max_output_tokens");
    }
    if (policy_objective != "sft" && policy_objective != "dpo") {
        throw ConfigError("train.policy_objective must be 'sft' or 'dpo'");
    }
}

json TrainConfig::to_json() const {
    json j;
    j["T"] = T;
    j["N"] = N;
    j["K"] = K;
    j["gen_temperature"] = gen_temperature;
    j["feedback_temperature"] = feedback_temperature;
    j["token_budget"] = token_budget;
    j["max_output_tokens"] = max_output_tokens;
    j["policy_objective"] = policy_objective;
    j["frozen_feedback"] = frozen_feedback;
    j["require_improvement"] = require_improvement;
    j["trainer_hyperparams"] = trainer_hyperparams;
    return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    c.T = j.value("T", c.T);
    c.N = j.value("N", c.N);
    c.K = j.value("K", c.K);
    c.gen_temperature = j.value("gen_temperature", c.gen_temperature);
    c.feedback_temperature = j.value("feedback_temperature", c.feedback_temperature);
    c.token_budget = j.value("token_budget", c.token_budget);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.policy_objective = j.value("policy_objective", c.policy_objective);
    c.frozen_feedback = j.value("frozen_feedback", c.frozen_feedback);
    c.require_improvement = j.value("require_improvement", c.require_improvement);
    if (j.contains("trainer_hyperparams")) {
        json hp = c.trainer_hyperparams;
        hp.update(j["trainer_hyperparams"]);
        c.trainer_hyperparams = hp;
    }
    c.validate();
    return c;
}

json IterationState::to_json() const {
    json j;
    j["t"] = t;
    j["policy"] = handle_to_json(policy);
    j["feedback"] = handle_to_json(feedback);
    j["built_datasets"] = built_datasets;
    j["validation_metric_history"] = validation_metric_history;
    j["rng_seed"] = rng_seed;
    return j;
}

IterationState IterationState::from_json(const json& j) {
    IterationState s;
    s.t = j.at("t").get<int>();
    s.policy = handle_from_json(j.at("policy"));
    s.feedback = handle_from_json(j.at("feedback"));
    s.built_datasets = j.value("built_datasets", std::vector<std::string>{});
    s.validation_metric_history = j.value("validation_metric_history", std::vector<double>{});
    s.rng_seed = j.value("rng_seed", std::uint64_t{0});
    return s;
}

// ---------------------------------------------------------------------------
// Pipeline primitives
// ---------------------------------------------------------------------------

std::vector<RankedDoc> retrieve_over(const PipelineContext& ctx,
                                     const std::vector<ProfileDocument>& profile,
                                     const std::string& query, const std::string& user_id) {
    if (ctx.train.K == 0 || profile.empty()) return {};
    if (ctx.retriever == RetrieverKind::dense) {
        const auto retrieved =
            retrieve_dense(ctx.gateway, ctx.embedder, profile, query, ctx.train.K, user_id);
        return materialize(profile, retrieved);
    }
    const ProfileIndex index = build_index(profile);
    return materialize(profile, retrieve(index, query, ctx.train.K));
}

std::vector<RankedDoc> retrieve_for(const PipelineContext& ctx, const UserExample& example) {
    return retrieve_over(ctx, example.profile, example.query_text, example.user_id);
}

namespace {

std::string generate_one(const PipelineContext& ctx, const ModelHandle& handle,
                         const RenderedPrompt& prompt, double temperature,
                         const std::string& seed_label) {
    GenerationRequest request;
    request.handle = handle;
    request.prompt = prompt.text;
    request.temperature = temperature;
    request.max_tokens = ctx.train.max_output_tokens;
    request.n = 1;
    request.seed = derive_seed(ctx.seed, seed_label);
    return ctx.gateway.generate(request).texts.at(0);
}

}  // namespace

std::string generate_initial(const PipelineContext& ctx, const ModelHandle& policy,
                             const UserExample& example) {
    const auto docs = retrieve_for(ctx, example);
    const RenderedPrompt prompt = ctx.renderer.render_respond(example.query_text, docs);
    log_prompt(ctx.prompt_log, example.example_id, prompt);
    return generate_one(ctx, policy, prompt, ctx.train.gen_temperature,
                        "respond/" + example.example_id);
}

std::string answer(const PipelineContext& ctx, const ModelHandle& policy,
                   const UserExample& example) {
    // Inference is the same RAG path the loop trains toward.
    return generate_initial(ctx, policy, example);
}

std::vector<std::string> sample_feedbacks(const PipelineContext& ctx,
                                          const ModelHandle& feedback_model,
                                          const UserExample& example, const std::string& initial,
                                          int n) {
    if (n < 1) throw VacError("sample_feedbacks: n must be >= 1");
    const auto docs = retrieve_for(ctx, example);
    const RenderedPrompt prompt =
        ctx.renderer.render_feedback(example.query_text, docs, example.narrative, initial);
    log_prompt(ctx.prompt_log, example.example_id, prompt);

    auto sample = [&](const std::string& label, int count) {
        GenerationRequest request;
        request.handle = feedback_model;
        request.prompt = prompt.text;
        request.temperature = ctx.train.feedback_temperature;
        request.max_tokens = ctx.train.max_output_tokens;
        request.n = count;
        request.seed = derive_seed(ctx.seed, label);
        return ctx.gateway.generate(request).texts;
    };

    std::vector<std::string> usable;
    for (auto& text : sample("feedback-sample/" + example.example_id, n)) {
        if (!text.empty()) usable.push_back(std::move(text));
    }
    if (static_cast<int>(usable.size()) < n) {
        // One resampling round to backfill empty samples; duplicates are fine.
        for (auto& text : sample("feedback-sample/" + example.example_id + "/resample",
                                 n - static_cast<int>(usable.size()))) {
            if (!text.empty()) usable.push_back(std::move(text));
        }
    }
    if (static_cast<int>(usable.size()) < n) {
        log_warn("example " + example.example_id + ": only " + std::to_string(usable.size()) +
                 " of " + std::to_string(n) + " feedback samples were usable");
    }
    return usable;
}

std::string refine(const PipelineContext& ctx, const ModelHandle& policy,
                   const UserExample& example, const std::string& initial,
                   const std::string& feedback_text) {
    if (feedback_text.empty()) throw VacError("refine: feedback must be non-empty");
    const auto docs = retrieve_for(ctx, example);
    const RenderedPrompt prompt =
        ctx.renderer.render_refine(example.query_text, docs, initial, feedback_text);
    log_prompt(ctx.prompt_log, example.example_id, prompt);
    return generate_one(ctx, policy, prompt, ctx.train.gen_temperature,
                        "refine/" + example.example_id + "/" + sha256_hex(feedback_text).substr(0, 16));
}

const FeedbackCandidate& select_best_feedback(const std::vector<FeedbackCandidate>& candidates) {
    if (candidates.empty()) throw VacError("select_best_feedback: empty candidate list");
    const FeedbackCandidate* best = &candidates.front();
    for (const auto& candidate : candidates) {
        if (candidate.score > best->score) best = &candidate;  // strict: ties keep earlier index
    }
    return *best;
}

// ---------------------------------------------------------------------------
// Dataset builders
// ---------------------------------------------------------------------------

std::vector<SFTRecord> build_feedback_sft_dataset(const PipelineContext& ctx,
                                                  const ModelHandle& policy_prev,
                                                  const ModelHandle& feedback_prev,
                                                  const Dataset& train,
                                                  std::vector<json>* candidate_rows) {
    struct PerExample {
        bool kept = false;
        SFTRecord record;
        json row;
    };
    std::vector<PerExample> results(train.examples.size());

    parallel_for(train.examples.size(), ctx.parallelism, [&](std::size_t i) {
        const UserExample& example = train.examples[i];
        PerExample& out = results[i];
        try {
            const std::string initial = generate_initial(ctx, policy_prev, example);
            if (initial.empty()) {
                log_warn("example " + example.example_id + ": empty initial response, skipped");
                return;
            }
            const auto feedbacks =
                sample_feedbacks(ctx, feedback_prev, example, initial, ctx.train.N);
            if (feedbacks.empty()) {
                log_warn("example " + example.example_id + ": no usable feedback samples");
                return;
            }

            std::vector<FeedbackCandidate> candidates;
            for (std::size_t j = 0; j < feedbacks.size(); ++j) {
                try {
                    FeedbackCandidate candidate;
                    candidate.feedback_text = feedbacks[j];
                    candidate.sample_index = static_cast<int>(j);
                    candidate.refined_text =
                        refine(ctx, policy_prev, example, initial, feedbacks[j]);
                    const ResponseScore score = ctx.scorer(example, candidate.refined_text);
                    if (!score.valid) continue;
                    candidate.score = score.mean;
                    candidates.push_back(std::move(candidate));
                } catch (const std::exception& e) {
                    log_warn("example " + example.example_id + " candidate " + std::to_string(j) +
                             " dropped: " + e.what());
                }
            }
            if (candidates.empty()) {
                log_warn("example " + example.example_id + ": all candidates failed, skipped");
                return;
            }

            const FeedbackCandidate& best = select_best_feedback(candidates);
            const ResponseScore initial_score = ctx.scorer(example, initial);
            if (ctx.train.require_improvement && initial_score.valid &&
                best.score <= initial_score.mean) {
                return;  // documented variant: drop non-improving feedback
            }

            const auto docs = retrieve_for(ctx, example);
            const RenderedPrompt prompt = ctx.renderer.render_feedback(
                example.query_text, docs, example.narrative, initial);

            out.record = SFTRecord{"fb-" + example.example_id, prompt.text, best.feedback_text,
                                   "feedback_model", example.example_id};
            out.kept = true;

            if (candidate_rows != nullptr) {
                json row;
                row["example_id"] = example.example_id;
                row["initial"] = initial;
                row["initial_score"] = initial_score.valid ? json(initial_score.mean) : json(nullptr);
                json cands = json::array();
                int selected_index = -1;
                for (const auto& c : candidates) {
                    if (&c == &best) selected_index = c.sample_index;
                    cands.push_back({{"sample_index", c.sample_index},
                                     {"feedback", c.feedback_text},
                                     {"refined", c.refined_text},
                                     {"score", c.score}});
                }
                row["candidates"] = std::move(cands);
                row["selected_sample_index"] = selected_index;
                out.row = std::move(row);
            }
        } catch (const std::exception& e) {
            log_warn("example " + example.example_id + " skipped in feedback stage: " + e.what());
        }
    });

    std::vector<SFTRecord> records;
    for (auto& r : results) {
        if (!r.kept) continue;
        records.push_back(std::move(r.record));
        if (candidate_rows != nullptr) candidate_rows->push_back(std::move(r.row));
    }
    return records;
}

PolicyBuildResult build_policy_sft_dataset(const PipelineContext& ctx,
                                           const ModelHandle& policy_prev,
                                           const ModelHandle& feedback_cur, const Dataset& train) {
    struct PerExample {
        bool kept = false;
        SFTRecord record;
        std::optional<PreferencePair> pair;
    };
    std::vector<PerExample> results(train.examples.size());

    parallel_for(train.examples.size(), ctx.parallelism, [&](std::size_t i) {
        const UserExample& example = train.examples[i];
        PerExample& out = results[i];
        try {
            const std::string initial = generate_initial(ctx, policy_prev, example);
            if (initial.empty()) return;
            const auto docs = retrieve_for(ctx, example);

            // A single near-greedy feedback from the freshly trained model.
            const RenderedPrompt feedback_prompt = ctx.renderer.render_feedback(
                example.query_text, docs, example.narrative, initial);
            log_prompt(ctx.prompt_log, example.example_id, feedback_prompt);
            const std::string feedback_text =
                generate_one(ctx, feedback_cur, feedback_prompt, ctx.train.gen_temperature,
                             "policy-feedback/" + example.example_id);
            if (feedback_text.empty()) {
                log_warn("example " + example.example_id + ": empty policy-stage feedback");
                return;
            }

            const std::string refined = refine(ctx, policy_prev, example, initial, feedback_text);
            if (refined.empty()) return;

            const RenderedPrompt respond_prompt =
                ctx.renderer.render_respond(example.query_text, docs);
            log_prompt(ctx.prompt_log, example.example_id, respond_prompt);

            out.record = SFTRecord{"pol-" + example.example_id, respond_prompt.text, refined,
                                   "policy_model", example.example_id};
            if (refined != initial) {
                out.pair = PreferencePair{respond_prompt.text, refined, initial,
                                          example.example_id};
            }
            out.kept = true;
        } catch (const std::exception& e) {
            log_warn("example " + example.example_id + " skipped in policy stage: " + e.what());
        }
    });

    PolicyBuildResult result;
    for (auto& r : results) {
        if (!r.kept) continue;
        result.records.push_back(std::move(r.record));
        if (r.pair) result.pairs.push_back(std::move(*r.pair));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Trainer delegation
// ---------------------------------------------------------------------------

ModelHandle fine_tune(Trainer& trainer, const ModelHandle& base,
                      const std::vector<SFTRecord>& records, const json& hyperparams,
                      const fs::path& dataset_path, const std::string& tag) {
    if (records.empty()) throw TrainerError("fine_tune: records must be non-empty");
    const std::string& kind = records.front().kind;
    for (const auto& r : records) {
        if (r.kind != kind) {
            throw TrainerError("fine_tune: mixed record kinds ('" + kind + "' vs '" + r.kind +
                               "')");
        }
        if (r.target.empty()) {
            throw TrainerError("fine_tune: record '" + r.record_id + "' has an empty target");
        }
    }
    write_sft_records(records, dataset_path);

    TrainerJob job;
    job.base = base;
    job.objective = "sft";
    job.kind = kind == "feedback_model" ? "feedback" : "policy";
    job.dataset_path = dataset_path;
    job.hyperparams = hyperparams;
    job.tag = tag;
    return trainer.train(job);
}

ModelHandle fine_tune_dpo(Trainer& trainer, const ModelHandle& base,
                          const std::vector<PreferencePair>& pairs, const json& hyperparams,
                          const fs::path& dataset_path, const std::string& tag) {
    if (pairs.empty()) throw TrainerError("fine_tune_dpo: pairs must be non-empty");
    for (const auto& p : pairs) {
        if (p.chosen.empty() || p.rejected.empty()) {
            throw TrainerError("fine_tune_dpo: pair for example '" + p.example_id +
                               "' has an empty side");
        }
        if (p.chosen == p.rejected) {
            throw TrainerError("fine_tune_dpo: pair for example '" + p.example_id +
                               "' has chosen == rejected");
        }
    }
    write_preference_pairs(pairs, dataset_path);

    TrainerJob job;
    job.base = base;
    job.objective = "dpo";
    job.kind = "policy";
    job.dataset_path = dataset_path;
    job.hyperparams = hyperparams;
    job.tag = tag;
    return trainer.train(job);
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

namespace {

std::string stage_digest(const PipelineContext& ctx, const std::string& config_digest,
                         const IterationState& state, const Dataset& train,
                         const Dataset& validation, const std::string& stage) {
    json j;
    j["config_digest"] = config_digest;
    j["train_config"] = ctx.train.to_json();
    j["seed"] = ctx.seed;
    j["retriever"] = ctx.retriever == RetrieverKind::dense ? "dense" : "lexical";
    j["state"] = state.to_json();
    j["train_data"] = sha256_hex(serialize_dataset(train));
    j["validation_data"] = sha256_hex(serialize_dataset(validation));
    j["stage"] = stage;
    return sha256_hex(j.dump());
}

json eval_policy_stage(const PipelineContext& ctx, StageRunner& runner,
                       const ModelHandle& policy, const Dataset& validation,
                       const std::string& stage, const std::string& digest,
                       const std::string& system_name, const std::string& scores_rel) {
    return runner.run_stage(stage, digest, [&]() -> StageOutput {
        SystemUnderTest system{system_name,
                               [&](const UserExample& ex) { return answer(ctx, policy, ex); }};
        const EvalReport report = evaluate_system(system, validation, ctx.scorer, ctx.parallelism);

        // Deterministic scores go into the digested artifact; wall-clock
        // timing goes next to it, outside the manifest.
        json scores = report_to_json(report);
        scores.erase("runtime_per_query_seconds");
        const fs::path scores_path = runner.root() / scores_rel;
        save_json_file(scores_path, scores);
        json timing;
        timing["runtime_per_query_seconds"] = report.runtime_per_query_seconds;
        save_json_file(runner.root() / (scores_rel + ".timing.json"), timing);

        StageOutput out;
        out.payload = json{{"macro_mean", report.macro_mean},
                           {"failure_count", report.failure_count}};
        out.artifacts = {scores_rel};
        return out;
    });
}

}  // namespace

IterationState run_iteration(const PipelineContext& ctx, Trainer& trainer, StageRunner& runner,
                             const IterationState& state, const Dataset& train,
                             const Dataset& validation) {
    ctx.train.validate();
    const int t = state.t + 1;
    const std::string iter = "iter" + std::to_string(t);
    const fs::path iter_dir = runner.root() / iter;
    fs::create_directories(iter_dir);

    auto digest = [&](const std::string& stage) {
        return stage_digest(ctx, "", state, train, validation, iter + "/" + stage);
    };

    IterationState next = state;
    next.t = t;

    // Stage 1+2: feedback model self-training (skipped entirely when frozen).
    if (!ctx.train.frozen_feedback) {
        const json fb_data = runner.run_stage(
            iter + "/feedback_dataset", digest("feedback_dataset"), [&]() -> StageOutput {
                std::vector<json> candidate_rows;
                const auto records = build_feedback_sft_dataset(ctx, state.policy, state.feedback,
                                                                train, &candidate_rows);
                if (records.empty()) {
                    throw VacError(iter + ": feedback dataset is empty; cannot train");
                }
                write_sft_records(records, iter_dir / "feedback_sft.jsonl");
                std::string cand_text;
                for (const auto& row : candidate_rows) cand_text += row.dump() + "\n";
                write_file_atomic(iter_dir / "feedback_candidates.jsonl", cand_text);
                StageOutput out;
                out.payload = json{{"count", records.size()}};
                out.artifacts = {iter + "/feedback_sft.jsonl", iter + "/feedback_candidates.jsonl"};
                return out;
            });
        (void)fb_data;

        const json fb_train = runner.run_stage(
            iter + "/feedback_train", digest("feedback_train"), [&]() -> StageOutput {
                const auto records = read_sft_records(iter_dir / "feedback_sft.jsonl");
                const ModelHandle handle =
                    fine_tune(trainer, state.feedback, records, ctx.train.trainer_hyperparams,
                              iter_dir / "feedback_sft.jsonl", iter + "-feedback");
                StageOutput out;
                out.payload = json{{"handle", handle_to_json(handle)}};
                return out;
            });
        next.feedback = handle_from_json(fb_train.at("handle"));
        next.built_datasets.push_back(iter + "/feedback_sft.jsonl");
    }

    // Stage 3: policy SFT/preference data built with the iteration-t feedback.
    const json pol_data = runner.run_stage(
        iter + "/policy_dataset", digest("policy_dataset/" + next.feedback.describe()),
        [&]() -> StageOutput {
            const PolicyBuildResult built =
                build_policy_sft_dataset(ctx, state.policy, next.feedback, train);
            if (built.records.empty()) {
                throw VacError(iter + ": policy dataset is empty; cannot train");
            }
            write_sft_records(built.records, iter_dir / "policy_sft.jsonl");
            write_preference_pairs(built.pairs, iter_dir / "preference_pairs.jsonl");
            StageOutput out;
            out.payload = json{{"sft_count", built.records.size()},
                               {"pair_count", built.pairs.size()}};
            out.artifacts = {iter + "/policy_sft.jsonl", iter + "/preference_pairs.jsonl"};
            return out;
        });
    (void)pol_data;
    next.built_datasets.push_back(iter + "/policy_sft.jsonl");
    next.built_datasets.push_back(iter + "/preference_pairs.jsonl");

    // Stage 4: policy training under the configured objective.
    const json pol_train = runner.run_stage(
        iter + "/policy_train",
        digest("policy_train/" + ctx.train.policy_objective + "/" + next.feedback.describe()),
        [&]() -> StageOutput {
            ModelHandle handle;
            if (ctx.train.policy_objective == "dpo") {
                const auto pairs = read_preference_pairs(iter_dir / "preference_pairs.jsonl");
                handle = fine_tune_dpo(trainer, state.policy, pairs, ctx.train.trainer_hyperparams,
                                       iter_dir / "preference_pairs.jsonl", iter + "-policy");
            } else {
                const auto records = read_sft_records(iter_dir / "policy_sft.jsonl");
                handle = fine_tune(trainer, state.policy, records, ctx.train.trainer_hyperparams,
                                   iter_dir / "policy_sft.jsonl", iter + "-policy");
            }
            StageOutput out;
            out.payload = json{{"handle", handle_to_json(handle)}};
            return out;
        });
    const ModelHandle policy_new = handle_from_json(pol_train.at("handle"));

    // Stage 5: validation metric for the new policy.
    const json eval = eval_policy_stage(ctx, runner, policy_new, validation, iter + "/eval",
                                        digest("eval/" + policy_new.describe()),
                                        "vac-" + iter, iter + "/validation_scores.json");
    const double new_score = eval.at("macro_mean").get<double>();
    next.validation_metric_history.push_back(new_score);

    // Best-checkpoint carry-forward: the handle with the highest validation
    // score so far seeds the next iteration.
    const double previous_best =
        state.validation_metric_history.empty()
            ? -1.0
            : *std::max_element(state.validation_metric_history.begin(),
                                state.validation_metric_history.end());
    const bool keep_new = new_score >= previous_best;
    next.policy = keep_new ? policy_new : state.policy;

    json selection;
    selection["iteration"] = t;
    selection["new_policy"] = handle_to_json(policy_new);
    selection["new_score"] = new_score;
    selection["previous_best_score"] = previous_best;
    selection["selected"] = keep_new ? "new" : "carried";
    save_json_file(iter_dir / "checkpoint_selection.json", selection);

    save_json_file(iter_dir / "state.json", next.to_json());
    save_json_file(runner.root() / "state.json", next.to_json());
    return next;
}

IterationState run_training(const PipelineContext& ctx, Trainer& trainer, const Dataset& train,
                            const Dataset& validation, const ModelHandle& base_policy,
                            const ModelHandle& base_feedback, const RunOptions& options) {
    ctx.train.validate();
    fs::create_directories(options.run_dir);
    StageRunner runner(options.run_dir);
    runner.set_abort_after(options.abort_after_stage);

    IterationState state;
    state.t = 0;
    state.policy = base_policy;
    state.feedback = base_feedback;
    state.rng_seed = ctx.seed;

    const json base_eval = eval_policy_stage(
        ctx, runner, base_policy, validation, "base_eval",
        stage_digest(ctx, options.config_digest, state, train, validation, "base_eval"),
        "vac-base", "base/validation_scores.json");
    state.validation_metric_history.push_back(base_eval.at("macro_mean").get<double>());
    save_json_file(options.run_dir / "state.json", state.to_json());

    for (int t = 1; t <= ctx.train.T; ++t) {
        state = run_iteration(ctx, trainer, runner, state, train, validation);
    }
    return state;
}

IterationState load_iteration_state(const fs::path& run_dir) {
    return IterationState::from_json(load_json_file(run_dir / "state.json"));
}

}  // namespace vac
