#include "vac/baselines.hpp"

#include <algorithm>

namespace vac {

namespace {

std::string generate_once(const PipelineContext& ctx, const ModelHandle& handle,
                          const RenderedPrompt& prompt, const std::string& seed_label) {
    GenerationRequest request;
    request.handle = handle;
    request.prompt = prompt.text;
    request.temperature = ctx.train.gen_temperature;
    request.max_tokens = ctx.train.max_output_tokens;
    request.n = 1;
    request.seed = derive_seed(ctx.seed, seed_label);
    return ctx.gateway.generate(request).texts.at(0);
}

}  // namespace

std::string answer_no_personalization(const PipelineContext& ctx, const ModelHandle& policy,
                                      const UserExample& example) {
    const RenderedPrompt prompt = ctx.renderer.render_respond(example.query_text, {});
    log_prompt(ctx.prompt_log, example.example_id, prompt);
    return generate_once(ctx, policy, prompt, "nopers/" + example.example_id);
}

std::string answer_rag(const PipelineContext& ctx, const ModelHandle& policy,
                       const UserExample& example) {
    return answer(ctx, policy, example);
}

std::string answer_rag_random_profile(const PipelineContext& ctx, const ModelHandle& policy,
                                      const UserExample& example, const Dataset& pool,
                                      std::uint64_t seed) {
    const auto profile = sample_random_profile(
        pool, example.user_id, derive_seed(seed, "random-profile/" + example.example_id));
    const auto docs = retrieve_over(ctx, profile, example.query_text, example.user_id);
    const RenderedPrompt prompt = ctx.renderer.render_respond(example.query_text, docs);
    log_prompt(ctx.prompt_log, example.example_id, prompt);
    return generate_once(ctx, policy, prompt, "ragrand/" + example.example_id);
}

std::string answer_planpers(const PipelineContext& ctx, const ModelHandle& policy,
                            const UserExample& example) {
    const auto docs = retrieve_for(ctx, example);

    std::string plan;
    try {
        const RenderedPrompt plan_prompt = ctx.renderer.render_plan(example.query_text, docs);
        log_prompt(ctx.prompt_log, example.example_id, plan_prompt);
        plan = generate_once(ctx, policy, plan_prompt, "plan/" + example.example_id);
    } catch (const std::exception& e) {
        log_warn("planpers: plan generation failed for " + example.example_id +
                 ", falling back to rag: " + e.what());
        return answer_rag(ctx, policy, example);
    }
    if (plan.empty()) {
        log_warn("planpers: empty plan for " + example.example_id + ", falling back to rag");
        return answer_rag(ctx, policy, example);
    }

    const RenderedPrompt respond_prompt =
        ctx.renderer.render_plan_respond(example.query_text, docs, plan);
    log_prompt(ctx.prompt_log, example.example_id, respond_prompt);
    return generate_once(ctx, policy, respond_prompt, "planrespond/" + example.example_id);
}

namespace {

struct RlBuild {
    std::vector<SFTRecord> records;
    std::vector<json> candidate_rows;
};

RlBuild build_rl_candidates(const PipelineContext& ctx, const ModelHandle& policy,
                            const Dataset& train, int iteration) {
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
            const auto docs = retrieve_for(ctx, example);
            const RenderedPrompt prompt = ctx.renderer.render_respond(example.query_text, docs);
            log_prompt(ctx.prompt_log, example.example_id, prompt);

            GenerationRequest request;
            request.handle = policy;
            request.prompt = prompt.text;
            request.temperature = kOfflineRlSamplingTemperature;
            request.max_tokens = ctx.train.max_output_tokens;
            request.n = ctx.train.N;
            request.seed = derive_seed(ctx.seed, "rl-candidates/iter" + std::to_string(iteration) +
                                                     "/" + example.example_id);
            const auto texts = ctx.gateway.generate(request).texts;

            int best_index = -1;
            double best_score = -1.0;
            json cands = json::array();
            for (std::size_t j = 0; j < texts.size(); ++j) {
                if (texts[j].empty()) continue;
                const ResponseScore score = ctx.scorer(example, texts[j]);
                if (!score.valid) continue;
                cands.push_back({{"sample_index", j}, {"text", texts[j]}, {"score", score.mean}});
                if (score.mean > best_score) {  // strict: ties keep the lowest index
                    best_score = score.mean;
                    best_index = static_cast<int>(j);
                }
            }
            if (best_index < 0) {
                log_warn("offline-rl: no scorable candidate for " + example.example_id);
                return;
            }
            out.record = SFTRecord{"rl-" + example.example_id, prompt.text, texts[best_index],
                                   "policy_model", example.example_id};
            json row;
            row["example_id"] = example.example_id;
            row["candidates"] = std::move(cands);
            row["selected_sample_index"] = best_index;
            row["selected_score"] = best_score;
            out.row = std::move(row);
            out.kept = true;
        } catch (const std::exception& e) {
            log_warn("offline-rl: example " + example.example_id + " skipped: " + e.what());
        }
    });

    RlBuild build;
    for (auto& r : results) {
        if (!r.kept) continue;
        build.records.push_back(std::move(r.record));
        build.candidate_rows.push_back(std::move(r.row));
    }
    return build;
}

}  // namespace

IterationState run_offline_rl_em(const PipelineContext& ctx, Trainer& trainer,
                                 const Dataset& train, const Dataset& validation,
                                 const ModelHandle& base_policy, const RunOptions& options) {
    ctx.train.validate();
    fs::create_directories(options.run_dir);
    StageRunner runner(options.run_dir);
    runner.set_abort_after(options.abort_after_stage);

    IterationState state;
    state.t = 0;
    state.policy = base_policy;
    state.feedback = base_policy;  // unused; kept so state serialization is uniform
    state.rng_seed = ctx.seed;

    auto digest = [&](const IterationState& s, const std::string& stage) {
        json j;
        j["config_digest"] = options.config_digest;
        j["train_config"] = ctx.train.to_json();
        j["seed"] = ctx.seed;
        j["state"] = s.to_json();
        j["train_data"] = sha256_hex(serialize_dataset(train));
        j["validation_data"] = sha256_hex(serialize_dataset(validation));
        j["stage"] = stage;
        j["algorithm"] = "offline_rl_em";
        return sha256_hex(j.dump());
    };

    auto eval_stage = [&](const IterationState& s, const ModelHandle& policy,
                          const std::string& stage, const std::string& scores_rel,
                          const std::string& name) {
        return runner.run_stage(stage, digest(s, stage), [&]() -> StageOutput {
            SystemUnderTest system{name,
                                   [&](const UserExample& ex) { return answer(ctx, policy, ex); }};
            const EvalReport report =
                evaluate_system(system, validation, ctx.scorer, ctx.parallelism);
            json scores = report_to_json(report);
            scores.erase("runtime_per_query_seconds");
            save_json_file(runner.root() / scores_rel, scores);
            StageOutput out;
            out.payload = json{{"macro_mean", report.macro_mean}};
            out.artifacts = {scores_rel};
            return out;
        });
    };

    const json base_eval =
        eval_stage(state, base_policy, "base_eval", "base/validation_scores.json", "offline-rl-base");
    state.validation_metric_history.push_back(base_eval.at("macro_mean").get<double>());
    save_json_file(options.run_dir / "state.json", state.to_json());

    for (int t = 1; t <= ctx.train.T; ++t) {
        const std::string iter = "iter" + std::to_string(t);
        const fs::path iter_dir = options.run_dir / iter;
        fs::create_directories(iter_dir);

        const json data = runner.run_stage(
            iter + "/candidates", digest(state, iter + "/candidates"), [&]() -> StageOutput {
                RlBuild build = build_rl_candidates(ctx, state.policy, train, t);
                if (build.records.empty()) {
                    throw VacError("offline-rl " + iter + ": no candidates to train on");
                }
                write_sft_records(build.records, iter_dir / "rl_sft.jsonl");
                std::string cand_text;
                for (const auto& row : build.candidate_rows) cand_text += row.dump() + "\n";
                write_file_atomic(iter_dir / "candidates.jsonl", cand_text);
                StageOutput out;
                out.payload = json{{"count", build.records.size()}};
                out.artifacts = {iter + "/rl_sft.jsonl", iter + "/candidates.jsonl"};
                return out;
            });
        (void)data;

        const json trained = runner.run_stage(
            iter + "/train", digest(state, iter + "/train"), [&]() -> StageOutput {
                const auto records = read_sft_records(iter_dir / "rl_sft.jsonl");
                const ModelHandle handle =
                    fine_tune(trainer, state.policy, records, ctx.train.trainer_hyperparams,
                              iter_dir / "rl_sft.jsonl", iter + "-policy");
                StageOutput out;
                out.payload = json{{"handle", handle_to_json(handle)}};
                return out;
            });
        const ModelHandle policy_new = handle_from_json(trained.at("handle"));

        IterationState next = state;
        next.t = t;
        const json eval = eval_stage(state, policy_new, iter + "/eval",
                                     iter + "/validation_scores.json", "offline-rl-" + iter);
        const double new_score = eval.at("macro_mean").get<double>();
        next.validation_metric_history.push_back(new_score);

        const double previous_best = *std::max_element(state.validation_metric_history.begin(),
                                                       state.validation_metric_history.end());
        next.policy = new_score >= previous_best ? policy_new : state.policy;
        next.built_datasets.push_back(iter + "/rl_sft.jsonl");
        save_json_file(iter_dir / "state.json", next.to_json());
        save_json_file(options.run_dir / "state.json", next.to_json());
        state = std::move(next);
    }
    return state;
}

const std::vector<std::string>& baseline_names() {
    static const std::vector<std::string> names = {
        "no_personalization", "rag", "rag_random_profile", "planpers", "offline_rl", "vac"};
    return names;
}

}  // namespace vac
