#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vac/data_model.hpp"
#include "vac/util.hpp"

namespace vac::cli {

// Flags shared by every subcommand; optional fields override the config file.
struct CommonFlags {
    fs::path config_path;
    bool no_cache = false;
    std::optional<std::string> metric;
    std::optional<std::uint64_t> seed;
};

// Maps a trained-system name ("vac", "offline_rl") to the run id holding its
// final checkpoint.
using TrainedRuns = std::map<std::string, std::string>;

int cmd_data_synth(const CommonFlags& flags, const std::optional<fs::path>& out_dir);

int cmd_data_convert(const fs::path& input, const fs::path& output, const std::string& split,
                     const ConvertFieldMap& fields);

int cmd_train(const CommonFlags& flags, const std::optional<std::string>& run_id,
              const std::optional<std::string>& resume_id);

int cmd_evaluate(const CommonFlags& flags, const std::vector<std::string>& systems,
                 const std::string& split, const TrainedRuns& trained_runs);

int cmd_compare(const CommonFlags& flags, std::vector<std::string> systems,
                const std::string& split, const TrainedRuns& trained_runs,
                const std::optional<std::string>& run_id);

int cmd_report(const CommonFlags& flags, const std::vector<std::string>& run_ids, bool markdown);

int cmd_prompts_show(const CommonFlags& flags, const std::string& template_name);

}  // namespace vac::cli
