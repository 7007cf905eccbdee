#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vac/gateway.hpp"
#include "vac/util.hpp"

namespace vac {

// Fine-tuning is delegated: the loop submits a dataset file plus
// hyperparameters and gets back a handle with a fresh adapter_ref. Gradient
// descent itself lives behind this interface.
struct TrainerJob {
    ModelHandle base;
    std::string objective;  // "sft" | "dpo"
    std::string kind;       // "policy" | "feedback"
    fs::path dataset_path;  // JSONL of SFT records or preference pairs
    json hyperparams;
    std::string tag;  // requested adapter tag, e.g. "iter1-policy"
};

struct TrainerStatus {
    std::string state;  // queued | running | done | failed
    std::string message;
    std::optional<ModelHandle> result;
};

class Trainer {
public:
    virtual ~Trainer() = default;
    virtual std::string submit(const TrainerJob& job) = 0;
    virtual TrainerStatus poll(const std::string& job_id) = 0;

    // submit + poll until done; throws TrainerError on failure.
    ModelHandle train(const TrainerJob& job);

protected:
    virtual double poll_interval_seconds() const { return 0.0; }
};

json trainer_job_to_json(const TrainerJob& job);

// Paper-default optimizer/LoRA settings, shipped as config defaults and
// passed through to whichever trainer backend runs the job.
json default_trainer_hyperparams();

// In-process mock: records every job (with the exact dataset), returns the
// base handle tagged with a fresh adapter_ref. Used by tests and synthetic
// desk-scale runs.
class RecordingTrainer : public Trainer {
public:
    struct RecordedJob {
        TrainerJob job;
        std::size_t record_count = 0;
        ModelHandle result;
    };

    std::string submit(const TrainerJob& job) override;
    TrainerStatus poll(const std::string& job_id) override;

    const std::vector<RecordedJob>& jobs() const { return jobs_; }

private:
    std::mutex mu_;
    std::vector<RecordedJob> jobs_;
    std::map<std::string, int> kind_counters_;
    std::map<std::string, int> tag_uses_;
};

// Invokes an external command as `command <job.json>`; the command must write
// the result file named in the job ({"state": "done", "adapter_ref": ...}).
class SubprocessTrainer : public Trainer {
public:
    explicit SubprocessTrainer(std::string command) : command_(std::move(command)) {}
    std::string submit(const TrainerJob& job) override;
    TrainerStatus poll(const std::string& job_id) override;

private:
    std::string command_;
    std::map<std::string, fs::path> result_paths_;
    std::map<std::string, ModelHandle> bases_;
    std::mutex mu_;
};

// JSON-over-HTTP client: POST /train/submit -> {job_id},
// GET /train/jobs/<id> -> {state, adapter_ref?}.
class HttpTrainer : public Trainer {
public:
    struct Config {
        std::string base_url;
        std::string submit_path = "/train/submit";
        std::string poll_path = "/train/jobs/";
        double poll_interval_seconds = 0.2;
        double timeout_seconds = 600.0;
    };
    explicit HttpTrainer(Config config) : config_(std::move(config)) {}
    std::string submit(const TrainerJob& job) override;
    TrainerStatus poll(const std::string& job_id) override;

protected:
    double poll_interval_seconds() const override { return config_.poll_interval_seconds; }

private:
    Config config_;
    std::map<std::string, ModelHandle> bases_;
    std::mutex mu_;
};

}  // namespace vac
