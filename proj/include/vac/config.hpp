#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vac/data_model.hpp"
#include "vac/evaluation.hpp"
#include "vac/gateway.hpp"
#include "vac/prompts.hpp"
#include "vac/trainer.hpp"
#include "vac/vac_loop.hpp"

namespace vac {

struct BackendEntry {
    std::string id;
    std::string type;  // synthetic | scripted | http
    fs::path script_path;
    std::string base_url;
    std::string api_token;
    double simulated_latency_seconds = 0.0;
};

struct TrainerEntry {
    std::string type = "recording";  // recording | subprocess | http
    std::string command;
    std::string base_url;
};

struct DatasetEntry {
    std::string name;
    fs::path dir;  // holds train.jsonl / validation.jsonl / test.jsonl
};

struct RunConfig {
    std::uint64_t seed = 7;
    std::string algorithm = "vac";  // vac | offline_rl
    fs::path runs_dir = "runs";
    std::optional<fs::path> cache_dir;
    bool no_cache = false;
    int parallelism = 1;
    std::string retriever = "lexical";  // lexical | dense
    std::string metric = "oracle";      // oracle | judge
    bool judge_includes_narrative = true;
    std::optional<fs::path> templates_dir;
    ModelHandle policy{"synthetic", "synthetic-policy", std::nullopt};
    ModelHandle feedback{"synthetic", "synthetic-feedback", std::nullopt};
    ModelHandle judge{"synthetic", "synthetic-judge", std::nullopt};
    ModelHandle embedder{"synthetic", "synthetic-embed", std::nullopt};
    std::vector<BackendEntry> backends;
    TrainerEntry trainer;
    std::vector<DatasetEntry> datasets;
    TrainConfig train;
    SyntheticWorldConfig synth;
    std::optional<std::string> abort_after_stage;  // debug hook, not documented

    void validate() const;
    json to_json() const;  // canonical resolved form
    static RunConfig from_json(const json& j, const fs::path& base_dir = ".");
};

RunConfig load_run_config(const fs::path& path);

// Everything a CLI command needs, built from a resolved config. Owns the
// gateway, renderer, trainer, scorer, and loaded datasets; contexts returned
// by make_context reference the engine and must not outlive it.
class Engine {
public:
    explicit Engine(RunConfig config);

    PipelineContext make_context(PromptLogger* prompt_log = nullptr);

    const RunConfig& config() const { return config_; }
    const std::string& config_digest() const { return config_digest_; }
    Gateway& gateway() { return *gateway_; }
    const Renderer& renderer() const { return *renderer_; }
    Trainer& trainer() { return *trainer_; }
    RecordingTrainer* recording_trainer();  // null unless trainer.type == recording

    // Loaded lazily; throws if the dataset dir is missing.
    const SyntheticWorld& world(std::size_t dataset_index = 0);
    const Dataset& split(std::size_t dataset_index, const std::string& split_name);

private:
    void build_backends();

    RunConfig config_;
    std::string config_digest_;
    std::unique_ptr<Gateway> gateway_;
    std::unique_ptr<Renderer> renderer_;
    std::unique_ptr<Trainer> trainer_;
    Scorer scorer_;
    std::vector<std::optional<SyntheticWorld>> worlds_;
};

}  // namespace vac
