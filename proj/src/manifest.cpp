#include "vac/manifest.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>

namespace vac {

fs::path StageRunner::manifest_path(const std::string& stage) const {
    std::string name = stage;
    std::replace(name.begin(), name.end(), '/', '_');
    return run_root_ / "manifests" / (name + ".manifest.json");
}

namespace {

bool artifacts_verify(const fs::path& root, const json& outputs) {
    for (const auto& entry : outputs) {
        const fs::path path = root / entry.at("path").get<std::string>();
        if (!fs::exists(path)) return false;
        if (sha256_hex(read_file(path)) != entry.at("sha256").get<std::string>()) return false;
    }
    return true;
}

}  // namespace

bool StageRunner::stage_complete(const std::string& stage, const std::string& inputs_digest) const {
    const fs::path path = manifest_path(stage);
    if (!fs::exists(path)) return false;
    const json manifest = load_json_file(path);
    if (manifest.value("inputs_digest", "") != inputs_digest) return false;
    return artifacts_verify(run_root_, manifest.value("outputs", json::array()));
}

json StageRunner::run_stage(const std::string& stage, const std::string& inputs_digest,
                            const std::function<StageOutput()>& produce) {
    const fs::path path = manifest_path(stage);
    if (fs::exists(path)) {
        const json manifest = load_json_file(path);
        if (manifest.value("inputs_digest", "") == inputs_digest &&
            artifacts_verify(run_root_, manifest.value("outputs", json::array()))) {
            return manifest.at("payload");
        }
        // Stale or corrupted: fall through and recompute.
        log_info("stage '" + stage + "' manifest stale; recomputing");
    }

    StageOutput output = produce();

    json manifest;
    manifest["stage"] = stage;
    manifest["inputs_digest"] = inputs_digest;
    manifest["payload"] = output.payload;
    json outputs = json::array();
    for (const auto& rel : output.artifacts) {
        const fs::path artifact = run_root_ / rel;
        if (!fs::exists(artifact)) {
            throw VacError("stage '" + stage + "' declared missing artifact: " + rel);
        }
        outputs.push_back({{"path", rel}, {"sha256", sha256_hex(read_file(artifact))}});
    }
    manifest["outputs"] = std::move(outputs);
    save_json_file(path, manifest);

    if (abort_after_ && *abort_after_ == stage) {
        throw AbortedForTest("aborted after stage '" + stage + "' (debug hook)");
    }
    return manifest.at("payload");
}

RunLock::RunLock(const fs::path& run_dir) {
    fs::create_directories(run_dir);
    lock_path_ = run_dir / ".lock";
    const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw VacError("run directory is locked by another process: " + run_dir.string() +
                       " (remove " + lock_path_.string() + " if that process is gone)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] ssize_t n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
    held_ = true;
}

RunLock::~RunLock() {
    if (held_) {
        std::error_code ec;
        fs::remove(lock_path_, ec);
    }
}

RunManifest::RunManifest(fs::path run_dir, std::string run_id, std::string config_digest)
    : path_(std::move(run_dir) / "run_manifest.json"),
      run_id_(std::move(run_id)),
      config_digest_(std::move(config_digest)) {}

RunManifest RunManifest::load_or_create(const fs::path& run_dir, const std::string& run_id,
                                        const std::string& config_digest) {
    RunManifest manifest(run_dir, run_id, config_digest);
    if (fs::exists(manifest.path_)) {
        const json j = load_json_file(manifest.path_);
        if (j.value("config_digest", "") != config_digest) {
            throw ConfigError("run '" + run_id + "' was created with a different config (digest " +
                              j.value("config_digest", "").substr(0, 12) + " != " +
                              config_digest.substr(0, 12) + ")");
        }
        manifest.stages_ = j.value("stages", json::object());
        manifest.wall_clock_ = j.value("wall_clock_seconds", json::object());
        manifest.artifacts_ = j.value("artifacts", std::vector<std::string>{});
    }
    return manifest;
}

void RunManifest::mark_stage_done(const std::string& stage, double wall_clock_seconds) {
    stages_[stage] = true;  // flags only ever flip to true
    wall_clock_[stage] = wall_clock_seconds;
    save();
}

bool RunManifest::stage_done(const std::string& stage) const {
    return stages_.value(stage, false);
}

void RunManifest::add_artifact(const std::string& rel_path) {
    if (std::find(artifacts_.begin(), artifacts_.end(), rel_path) == artifacts_.end()) {
        artifacts_.push_back(rel_path);
    }
}

void RunManifest::save() const {
    json j;
    j["run_id"] = run_id_;
    j["config_digest"] = config_digest_;
    j["stages"] = stages_;
    j["wall_clock_seconds"] = wall_clock_;
    j["artifacts"] = artifacts_;
    save_json_file(path_, j);
}

}  // namespace vac
