#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vac/util.hpp"

namespace vac {

// Thrown by the debug abort hook that simulates an interrupted run.
struct AbortedForTest : VacError {
    using VacError::VacError;
};

// What a stage produced: a small JSON payload (handles, counts) plus the
// run-relative paths of artifact files it wrote.
struct StageOutput {
    json payload;
    std::vector<std::string> artifacts;  // paths relative to the run root
};

// Executes pipeline stages exactly once. Each completed stage persists an
// immutable manifest (inputs digest + artifact digests); re-running a stage
// whose manifest and artifacts still verify returns the stored payload
// without recomputing. Manifests contain no timestamps or absolute paths so
// identically-seeded runs produce byte-identical files.
class StageRunner {
public:
    explicit StageRunner(fs::path run_root) : run_root_(std::move(run_root)) {}

    json run_stage(const std::string& stage, const std::string& inputs_digest,
                   const std::function<StageOutput()>& produce);

    bool stage_complete(const std::string& stage, const std::string& inputs_digest) const;

    const fs::path& root() const { return run_root_; }
    fs::path manifest_path(const std::string& stage) const;

    // Debug hook: after this stage completes, throw AbortedForTest. Simulates
    // a crash between stages for resume tests.
    void set_abort_after(std::optional<std::string> stage) { abort_after_ = std::move(stage); }

private:
    fs::path run_root_;
    std::optional<std::string> abort_after_;
};

// Exclusive ownership of a run directory (one writer per run).
class RunLock {
public:
    explicit RunLock(const fs::path& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    fs::path lock_path_;
    bool held_ = false;
};

// Top-level command manifest: stage completion flags (monotone), artifact
// paths, and wall-clock per stage. Timing lives here, never in stage
// manifests, so those stay deterministic.
class RunManifest {
public:
    RunManifest(fs::path run_dir, std::string run_id, std::string config_digest);
    static RunManifest load_or_create(const fs::path& run_dir, const std::string& run_id,
                                      const std::string& config_digest);

    void mark_stage_done(const std::string& stage, double wall_clock_seconds);
    bool stage_done(const std::string& stage) const;
    void add_artifact(const std::string& rel_path);
    void save() const;

    const std::string& run_id() const { return run_id_; }
    const std::string& config_digest() const { return config_digest_; }

private:
    fs::path path_;
    std::string run_id_;
    std::string config_digest_;
    json stages_ = json::object();
    json wall_clock_ = json::object();
    std::vector<std::string> artifacts_;
};

}  // namespace vac
