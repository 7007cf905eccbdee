#include "vac/trainer.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace vac {

json default_trainer_hyperparams() {
    json hp;
    hp["learning_rate"] = 5e-5;
    hp["batch_size"] = 32;
    hp["max_steps"] = 5000;
    hp["warmup_ratio"] = 0.1;
    hp["lr_schedule"] = "linear_decay";
    hp["eval_every_steps"] = 250;
    hp["max_grad_norm"] = 1.0;
    hp["lora_rank"] = 16;
    hp["lora_alpha"] = 16;
    hp["lora_dropout"] = 0.05;
    return hp;
}

json trainer_job_to_json(const TrainerJob& job) {
    json j;
    j["base"] = handle_to_json(job.base);
    j["objective"] = job.objective;
    j["kind"] = job.kind;
    j["dataset_path"] = job.dataset_path.string();
    j["hyperparams"] = job.hyperparams;
    j["tag"] = job.tag;
    return j;
}

ModelHandle Trainer::train(const TrainerJob& job) {
    const std::string job_id = submit(job);
    for (;;) {
        const TrainerStatus status = poll(job_id);
        if (status.state == "done") {
            if (!status.result) throw TrainerError("trainer job " + job_id + " done without result");
            return *status.result;
        }
        if (status.state == "failed") {
            throw TrainerError("trainer job " + job_id + " failed: " + status.message);
        }
        const double interval = poll_interval_seconds();
        if (interval > 0.0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(interval));
        }
    }
}

namespace {

std::size_t count_dataset_records(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++count;
    }
    return count;
}

void validate_job(const TrainerJob& job) {
    if (job.objective != "sft" && job.objective != "dpo") {
        throw TrainerError("unknown training objective '" + job.objective + "'");
    }
    if (!fs::exists(job.dataset_path)) {
        throw TrainerError("training dataset not found: " + job.dataset_path.string());
    }
    if (count_dataset_records(job.dataset_path) == 0) {
        throw TrainerError("training dataset is empty: " + job.dataset_path.string());
    }
}

}  // namespace

std::string RecordingTrainer::submit(const TrainerJob& job) {
    validate_job(job);
    std::lock_guard<std::mutex> lock(mu_);

    std::string adapter;
    if (!job.tag.empty()) {
        const int uses = tag_uses_[job.tag]++;
        adapter = uses == 0 ? job.tag : job.tag + "-r" + std::to_string(uses);
    } else {
        const int counter = ++kind_counters_[job.kind];
        adapter = "iter" + std::to_string(counter) + "-" + job.kind;
    }

    RecordedJob recorded;
    recorded.job = job;
    recorded.record_count = count_dataset_records(job.dataset_path);
    recorded.result = job.base;
    recorded.result.adapter_ref = adapter;
    jobs_.push_back(recorded);
    return "job-" + std::to_string(jobs_.size() - 1);
}

TrainerStatus RecordingTrainer::poll(const std::string& job_id) {
    std::lock_guard<std::mutex> lock(mu_);
    const std::size_t index = std::stoul(job_id.substr(4));
    if (index >= jobs_.size()) return {"failed", "unknown job id " + job_id, std::nullopt};
    return {"done", "", jobs_[index].result};
}

std::string SubprocessTrainer::submit(const TrainerJob& job) {
    validate_job(job);
    std::lock_guard<std::mutex> lock(mu_);

    const std::string job_id = "subproc-" + std::to_string(result_paths_.size());
    const fs::path dir = job.dataset_path.parent_path();
    const fs::path job_file = dir / (job_id + ".job.json");
    const fs::path result_file = dir / (job_id + ".result.json");

    json job_json = trainer_job_to_json(job);
    job_json["result_path"] = result_file.string();
    save_json_file(job_file, job_json);

    const std::string cmdline = command_ + " " + job_file.string();
    const int rc = std::system(cmdline.c_str());
    if (rc != 0) {
        throw TrainerError("trainer command exited with status " + std::to_string(rc) + ": " +
                           cmdline);
    }
    result_paths_[job_id] = result_file;
    bases_[job_id] = job.base;
    return job_id;
}

TrainerStatus SubprocessTrainer::poll(const std::string& job_id) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = result_paths_.find(job_id);
    if (it == result_paths_.end()) return {"failed", "unknown job id " + job_id, std::nullopt};
    if (!fs::exists(it->second)) {
        return {"failed", "trainer command wrote no result file: " + it->second.string(),
                std::nullopt};
    }
    const json result = load_json_file(it->second);
    const std::string state = result.value("state", "failed");
    if (state != "done") return {state, result.value("message", ""), std::nullopt};
    ModelHandle handle = bases_[job_id];
    handle.adapter_ref = result.at("adapter_ref").get<std::string>();
    return {"done", "", handle};
}

std::string HttpTrainer::submit(const TrainerJob& job) {
    validate_job(job);
    httplib::Client client(config_.base_url);
    client.set_read_timeout(static_cast<int>(config_.timeout_seconds), 0);
    const auto res = client.Post(config_.submit_path, trainer_job_to_json(job).dump(),
                                 "application/json");
    if (!res || res->status != 200) {
        throw TrainerError("trainer submit failed: " +
                           (res ? "HTTP " + std::to_string(res->status) : "no response") +
                           " from " + config_.base_url);
    }
    const json body = json::parse(res->body);
    const std::string job_id = body.at("job_id").get<std::string>();
    std::lock_guard<std::mutex> lock(mu_);
    bases_[job_id] = job.base;
    return job_id;
}

TrainerStatus HttpTrainer::poll(const std::string& job_id) {
    httplib::Client client(config_.base_url);
    const auto res = client.Get(config_.poll_path + job_id);
    if (!res || res->status != 200) {
        return {"failed",
                "trainer poll failed: " +
                    (res ? "HTTP " + std::to_string(res->status) : "no response"),
                std::nullopt};
    }
    const json body = json::parse(res->body);
    const std::string state = body.value("state", "failed");
    if (state != "done") return {state, body.value("message", ""), std::nullopt};
    ModelHandle handle;
    {
        std::lock_guard<std::mutex> lock(mu_);
        handle = bases_[job_id];
    }
    handle.adapter_ref = body.at("adapter_ref").get<std::string>();
    return {"done", "", handle};
}

}  // namespace vac
