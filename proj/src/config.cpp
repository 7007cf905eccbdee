#include "vac/config.hpp"

#include <algorithm>
#include <set>

#include "vac/http_backend.hpp"
#include "vac/scripted_backend.hpp"
#include "vac/synthetic_backend.hpp"

namespace vac {

namespace {

json range_to_json(const IntRange& r) { return json{{"lo", r.lo}, {"hi", r.hi}}; }

IntRange range_from_json(const json& j, IntRange fallback) {
    if (j.is_null()) return fallback;
    if (j.is_array() && j.size() == 2) return {j[0].get<int>(), j[1].get<int>()};
    return {j.value("lo", fallback.lo), j.value("hi", fallback.hi)};
}

json synth_to_json(const SyntheticWorldConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["num_users"] = c.num_users;
    j["aspects_per_query"] = range_to_json(c.aspects_per_query);
    j["profile_size"] = range_to_json(c.profile_size);
    j["vocabulary_size"] = c.vocabulary_size;
    j["train_examples_per_user"] = c.train_examples_per_user;
    j["validation_examples_per_user"] = c.validation_examples_per_user;
    j["test_examples_per_user"] = c.test_examples_per_user;
    j["keywords_per_aspect"] = c.keywords_per_aspect;
    j["planted_keyword_fraction"] = c.planted_keyword_fraction;
    return j;
}

SyntheticWorldConfig synth_from_json(const json& j) {
    SyntheticWorldConfig c;
    c.seed = j.value("seed", c.seed);
    c.num_users = j.value("num_users", c.num_users);
    c.aspects_per_query = range_from_json(j.value("aspects_per_query", json()), c.aspects_per_query);
    c.profile_size = range_from_json(j.value("profile_size", json()), c.profile_size);
    c.vocabulary_size = j.value("vocabulary_size", c.vocabulary_size);
    c.train_examples_per_user = j.value("train_examples_per_user", c.train_examples_per_user);
    c.validation_examples_per_user =
        j.value("validation_examples_per_user", c.validation_examples_per_user);
    c.test_examples_per_user = j.value("test_examples_per_user", c.test_examples_per_user);
    c.keywords_per_aspect = j.value("keywords_per_aspect", c.keywords_per_aspect);
    c.planted_keyword_fraction = j.value("planted_keyword_fraction", c.planted_keyword_fraction);
    return c;
}

ModelHandle model_from_json(const json& j, const ModelHandle& fallback) {
    if (j.is_null()) return fallback;
    ModelHandle h = fallback;
    h.backend_id = j.value("backend_id", h.backend_id);
    h.model_name = j.value("model_name", h.model_name);
    if (j.contains("adapter_ref") && !j["adapter_ref"].is_null()) {
        h.adapter_ref = j["adapter_ref"].get<std::string>();
    }
    return h;
}

fs::path resolve_path(const fs::path& base, const fs::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    return base / p;
}

}  // namespace

void RunConfig::validate() const {
    if (algorithm != "vac" && algorithm != "offline_rl") {
        throw ConfigError("algorithm must be 'vac' or 'offline_rl' (got '" + algorithm + "')");
    }
    if (retriever != "lexical" && retriever != "dense") {
        throw ConfigError("retriever must be 'lexical' or 'dense' (got '" + retriever + "')");
    }
    if (metric != "oracle" && metric != "judge") {
        throw ConfigError("metric must be 'oracle' or 'judge' (got '" + metric + "')");
    }
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (trainer.type != "recording" && trainer.type != "subprocess" && trainer.type != "http") {
        throw ConfigError("trainer.type must be recording, subprocess, or http");
    }
    if (trainer.type == "subprocess" && trainer.command.empty()) {
        throw ConfigError("trainer.type subprocess needs trainer.command");
    }
    if (trainer.type == "http" && trainer.base_url.empty()) {
        throw ConfigError("trainer.type http needs trainer.base_url");
    }
    std::set<std::string> backend_ids;
    for (const auto& b : backends) {
        if (b.type != "synthetic" && b.type != "scripted" && b.type != "http") {
            throw ConfigError("backend '" + b.id + "': type must be synthetic, scripted, or http");
        }
        if (!backend_ids.insert(b.id).second) {
            throw ConfigError("duplicate backend id '" + b.id + "'");
        }
        if (b.type == "scripted" && b.script_path.empty()) {
            throw ConfigError("backend '" + b.id + "': scripted backend needs script_path");
        }
    }
    for (const ModelHandle* h : {&policy, &feedback, &judge, &embedder}) {
        if (backend_ids.count(h->backend_id) == 0) {
            throw ConfigError("model '" + h->model_name + "' references unknown backend '" +
                              h->backend_id + "'");
        }
    }
    std::set<std::string> dataset_names;
    for (const auto& d : datasets) {
        if (d.name.empty()) throw ConfigError("dataset entries need a name");
        if (!dataset_names.insert(d.name).second) {
            throw ConfigError("duplicate dataset name '" + d.name + "'");
        }
    }
    train.validate();
}

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["algorithm"] = algorithm;
    j["runs_dir"] = runs_dir.string();
    j["cache_dir"] = cache_dir ? json(cache_dir->string()) : json(nullptr);
    j["no_cache"] = no_cache;
    j["parallelism"] = parallelism;
    j["retriever"] = retriever;
    j["metric"] = metric;
    j["judge_includes_narrative"] = judge_includes_narrative;
    j["templates_dir"] = templates_dir ? json(templates_dir->string()) : json(nullptr);
    j["models"] = json{{"policy", handle_to_json(policy)},
                       {"feedback", handle_to_json(feedback)},
                       {"judge", handle_to_json(judge)},
                       {"embedder", handle_to_json(embedder)}};
    json bs = json::array();
    for (const auto& b : backends) {
        json bj;
        bj["id"] = b.id;
        bj["type"] = b.type;
        if (!b.script_path.empty()) bj["script_path"] = b.script_path.string();
        if (!b.base_url.empty()) bj["base_url"] = b.base_url;
        if (!b.api_token.empty()) bj["api_token"] = b.api_token;
        if (b.simulated_latency_seconds > 0.0) {
            bj["simulated_latency_seconds"] = b.simulated_latency_seconds;
        }
        bs.push_back(std::move(bj));
    }
    j["backends"] = std::move(bs);
    json tj;
    tj["type"] = trainer.type;
    if (!trainer.command.empty()) tj["command"] = trainer.command;
    if (!trainer.base_url.empty()) tj["base_url"] = trainer.base_url;
    j["trainer"] = std::move(tj);
    json ds = json::array();
    for (const auto& d : datasets) {
        ds.push_back(json{{"name", d.name}, {"dir", d.dir.string()}});
    }
    j["datasets"] = std::move(ds);
    j["train"] = train.to_json();
    j["synth"] = synth_to_json(synth);
    if (abort_after_stage) j["abort_after_stage"] = *abort_after_stage;
    return j;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.algorithm = j.value("algorithm", c.algorithm);
    c.runs_dir = resolve_path(base_dir, j.value("runs_dir", c.runs_dir.string()));
    if (j.contains("cache_dir") && !j["cache_dir"].is_null()) {
        c.cache_dir = resolve_path(base_dir, j["cache_dir"].get<std::string>());
    }
    c.no_cache = j.value("no_cache", false);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.retriever = j.value("retriever", c.retriever);
    c.metric = j.value("metric", c.metric);
    c.judge_includes_narrative = j.value("judge_includes_narrative", c.judge_includes_narrative);
    if (j.contains("templates_dir") && !j["templates_dir"].is_null()) {
        c.templates_dir = resolve_path(base_dir, j["templates_dir"].get<std::string>());
    }
    if (j.contains("models")) {
        const json& m = j["models"];
        c.policy = model_from_json(m.value("policy", json()), c.policy);
        c.feedback = model_from_json(m.value("feedback", json()), c.feedback);
        c.judge = model_from_json(m.value("judge", json()), c.judge);
        c.embedder = model_from_json(m.value("embedder", json()), c.embedder);
    }
    if (j.contains("backends")) {
        for (const auto& bj : j["backends"]) {
            BackendEntry b;
            b.id = bj.value("id", "");
            b.type = bj.value("type", "");
            if (bj.contains("script_path")) {
                b.script_path = resolve_path(base_dir, bj["script_path"].get<std::string>());
            }
            b.base_url = bj.value("base_url", "");
            b.api_token = bj.value("api_token", "");
            b.simulated_latency_seconds = bj.value("simulated_latency_seconds", 0.0);
            c.backends.push_back(std::move(b));
        }
    } else {
        c.backends.push_back(BackendEntry{"synthetic", "synthetic", {}, "", "", 0.0});
    }
    if (j.contains("trainer")) {
        c.trainer.type = j["trainer"].value("type", c.trainer.type);
        c.trainer.command = j["trainer"].value("command", "");
        c.trainer.base_url = j["trainer"].value("base_url", "");
    }
    if (j.contains("datasets")) {
        for (const auto& dj : j["datasets"]) {
            DatasetEntry d;
            d.name = dj.value("name", "");
            d.dir = resolve_path(base_dir, dj.value("dir", ""));
            c.datasets.push_back(std::move(d));
        }
    }
    if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
    if (j.contains("synth")) c.synth = synth_from_json(j["synth"]);
    if (j.contains("abort_after_stage") && !j["abort_after_stage"].is_null()) {
        c.abort_after_stage = j["abort_after_stage"].get<std::string>();
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    return RunConfig::from_json(load_json_file(path), path.parent_path());
}

Engine::Engine(RunConfig config) : config_(std::move(config)) {
    config_.validate();
    config_digest_ = sha256_hex(config_.to_json().dump());

    GatewayOptions gw;
    gw.cache_dir = config_.cache_dir;
    gw.cache_reads_enabled = !config_.no_cache;
    gw.max_parallel_requests = std::max(config_.parallelism, 2);
    gateway_ = std::make_unique<Gateway>(gw);

    TemplateSet templates = config_.templates_dir ? TemplateSet::load(*config_.templates_dir)
                                                  : TemplateSet::builtin_defaults();
    PromptBudget budget;
    budget.token_budget = config_.train.token_budget;
    budget.max_output_tokens = config_.train.max_output_tokens;
    renderer_ = std::make_unique<Renderer>(std::move(templates), budget);

    worlds_.resize(config_.datasets.size());
    build_backends();

    if (config_.trainer.type == "recording") {
        trainer_ = std::make_unique<RecordingTrainer>();
    } else if (config_.trainer.type == "subprocess") {
        trainer_ = std::make_unique<SubprocessTrainer>(config_.trainer.command);
    } else {
        HttpTrainer::Config tc;
        tc.base_url = config_.trainer.base_url;
        trainer_ = std::make_unique<HttpTrainer>(tc);
    }

    if (config_.metric == "oracle") {
        scorer_ = make_oracle_scorer();
    } else {
        JudgeOptions options;
        options.judge = config_.judge;
        options.include_narrative = config_.judge_includes_narrative;
        options.seed = config_.seed;
        scorer_ = make_judge_scorer(*gateway_, *renderer_, options);
    }
}

void Engine::build_backends() {
    for (const auto& entry : config_.backends) {
        if (entry.type == "scripted") {
            gateway_->register_backend(entry.id, std::make_shared<ScriptedBackend>(
                                                     ScriptedBackend::from_file(entry.script_path)));
        } else if (entry.type == "http") {
            HttpBackend::Config hc;
            hc.base_url = entry.base_url;
            hc.api_token = entry.api_token;
            gateway_->register_backend(entry.id,
                                       std::make_shared<HttpBackend>(HttpBackend::config_from_env(hc)));
        } else {  // synthetic: needs every dataset it may be asked about
            std::vector<Dataset> all;
            for (std::size_t i = 0; i < config_.datasets.size(); ++i) {
                if (!fs::exists(config_.datasets[i].dir / "train.jsonl")) continue;
                const SyntheticWorld& w = world(i);
                all.push_back(w.train);
                all.push_back(w.validation);
                all.push_back(w.test);
            }
            SyntheticBackend::Options options;
            options.simulated_latency_seconds = entry.simulated_latency_seconds;
            gateway_->register_backend(entry.id,
                                       std::make_shared<SyntheticBackend>(all, options));
        }
    }
}

RecordingTrainer* Engine::recording_trainer() {
    return dynamic_cast<RecordingTrainer*>(trainer_.get());
}

const SyntheticWorld& Engine::world(std::size_t dataset_index) {
    if (dataset_index >= config_.datasets.size()) {
        throw ConfigError("config lists no dataset at index " + std::to_string(dataset_index));
    }
    auto& slot = worlds_[dataset_index];
    if (!slot) {
        const fs::path& dir = config_.datasets[dataset_index].dir;
        if (!fs::exists(dir / "train.jsonl")) {
            throw ConfigError("dataset '" + config_.datasets[dataset_index].name +
                              "' not found under " + dir.string() +
                              " (run `vac data synth` or `vac data convert` first)");
        }
        slot = load_world(dir);
    }
    return *slot;
}

const Dataset& Engine::split(std::size_t dataset_index, const std::string& split_name) {
    const SyntheticWorld& w = world(dataset_index);
    if (split_name == "train") return w.train;
    if (split_name == "validation") return w.validation;
    if (split_name == "test") return w.test;
    throw ConfigError("unknown split '" + split_name + "' (expected train|validation|test)");
}

PipelineContext Engine::make_context(PromptLogger* prompt_log) {
    return PipelineContext{*gateway_,
                           *renderer_,
                           scorer_,
                           config_.train,
                           config_.retriever == "dense" ? RetrieverKind::dense
                                                        : RetrieverKind::lexical,
                           config_.embedder,
                           config_.seed,
                           config_.parallelism,
                           prompt_log};
}

}  // namespace vac
