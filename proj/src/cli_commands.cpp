#include "vac/cli_commands.hpp"

#include <algorithm>
#include <iostream>

#include "vac/baselines.hpp"
#include "vac/config.hpp"
#include "vac/manifest.hpp"
#include "vac/report.hpp"

namespace vac::cli {

namespace {

json load_config_json(const CommonFlags& flags) {
    if (!fs::exists(flags.config_path)) {
        throw ConfigError("config file not found: " + flags.config_path.string());
    }
    json cfg = load_json_file(flags.config_path);
    if (flags.no_cache) cfg["no_cache"] = true;
    if (flags.metric) cfg["metric"] = *flags.metric;
    if (flags.seed) cfg["seed"] = *flags.seed;
    return cfg;
}

RunConfig config_from_flags(const CommonFlags& flags) {
    return RunConfig::from_json(load_config_json(flags), flags.config_path.parent_path());
}

int report_error(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
}

// Answerer factory shared by evaluate and compare. `trained` carries the
// final policy for vac / offline_rl systems.
std::function<std::string(const UserExample&)> make_answerer(
    const PipelineContext& ctx, const RunConfig& config, const std::string& system,
    const Dataset& pool, const std::optional<ModelHandle>& trained) {
    const ModelHandle policy = config.policy;
    if (system == "no_personalization") {
        return [&ctx, policy](const UserExample& ex) {
            return answer_no_personalization(ctx, policy, ex);
        };
    }
    if (system == "rag") {
        return [&ctx, policy](const UserExample& ex) { return answer_rag(ctx, policy, ex); };
    }
    if (system == "rag_random_profile") {
        const std::uint64_t seed = ctx.seed;
        return [&ctx, policy, &pool, seed](const UserExample& ex) {
            return answer_rag_random_profile(ctx, policy, ex, pool, seed);
        };
    }
    if (system == "planpers") {
        return [&ctx, policy](const UserExample& ex) { return answer_planpers(ctx, policy, ex); };
    }
    if (system == "vac" || system == "offline_rl") {
        if (!trained) {
            throw ConfigError("system '" + system + "' needs a completed training run (pass --" +
                              (system == "vac" ? std::string("vac-run") : std::string("rl-run")) +
                              " <run_id>)");
        }
        const ModelHandle handle = *trained;
        return [&ctx, handle](const UserExample& ex) { return answer(ctx, handle, ex); };
    }
    throw ConfigError("unknown system '" + system + "'; valid names: " +
                      join(baseline_names(), ", "));
}

std::optional<ModelHandle> trained_policy_for(const RunConfig& config, const TrainedRuns& runs,
                                              const std::string& system) {
    auto it = runs.find(system);
    if (it == runs.end()) return std::nullopt;
    const fs::path run_dir = config.runs_dir / it->second;
    if (!fs::exists(run_dir / "state.json")) {
        throw ConfigError("run '" + it->second + "' has no state.json under " + run_dir.string());
    }
    return load_iteration_state(run_dir).policy;
}

}  // namespace

int cmd_data_synth(const CommonFlags& flags, const std::optional<fs::path>& out_dir) {
    try {
        RunConfig config = config_from_flags(flags);
        if (flags.seed) config.synth.seed = *flags.seed;
        fs::path out = out_dir.value_or(
            config.datasets.empty() ? fs::path("data/synthetic") : config.datasets[0].dir);
        const SyntheticWorld world = synth_generate(config.synth);
        save_world(world, out);
        std::cout << "wrote synthetic world to " << out.string() << " (train "
                  << world.train.examples.size() << ", validation "
                  << world.validation.examples.size() << ", test " << world.test.examples.size()
                  << ")\n";
        return 0;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

int cmd_data_convert(const fs::path& input, const fs::path& output, const std::string& split,
                     const ConvertFieldMap& fields) {
    try {
        const Dataset dataset = convert_external_dataset(input, split, fields);
        save_dataset(dataset, output);
        std::cout << "converted " << dataset.examples.size() << " records to " << output.string()
                  << "\n";
        return 0;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

int cmd_train(const CommonFlags& flags, const std::optional<std::string>& run_id,
              const std::optional<std::string>& resume_id) {
    try {
        RunConfig config = config_from_flags(flags);
        const std::string id =
            resume_id.value_or(run_id.value_or(
                config.algorithm + "-" +
                sha256_hex(config.to_json().dump()).substr(0, 12)));
        const fs::path run_dir = config.runs_dir / id;

        if (resume_id) {
            const fs::path snapshot = run_dir / "config.json";
            if (!fs::exists(snapshot)) {
                throw ConfigError("cannot resume '" + id + "': no config snapshot at " +
                                  snapshot.string());
            }
            // The frozen snapshot wins over the (possibly edited) source file.
            config = RunConfig::from_json(load_json_file(snapshot), ".");
        }

        Engine engine(config);
        RunLock lock(run_dir);
        if (!resume_id) {
            const fs::path snapshot = run_dir / "config.json";
            if (!fs::exists(snapshot)) save_json_file(snapshot, config.to_json());
        }
        RunManifest manifest =
            RunManifest::load_or_create(run_dir, id, engine.config_digest());

        if (config.datasets.empty()) {
            throw ConfigError("config lists no datasets; add one or run `vac data synth`");
        }
        const Dataset& train = engine.split(0, "train");
        const Dataset& validation = engine.split(0, "validation");

        PromptLogger prompt_log(run_dir / "prompts.jsonl");
        PipelineContext ctx = engine.make_context(&prompt_log);
        RunOptions options{run_dir, engine.config_digest(), config.abort_after_stage};

        const double start = now_seconds();
        IterationState state;
        try {
            if (config.algorithm == "offline_rl") {
                state = run_offline_rl_em(ctx, engine.trainer(), train, validation, config.policy,
                                          options);
            } else {
                state = run_training(ctx, engine.trainer(), train, validation, config.policy,
                                     config.feedback, options);
            }
        } catch (const AbortedForTest& e) {
            std::cerr << "run interrupted: " << e.what() << "\n";
            return 3;
        }
        manifest.mark_stage_done("train", now_seconds() - start);

        // Final row for `vac report`.
        const double best = *std::max_element(state.validation_metric_history.begin(),
                                              state.validation_metric_history.end());
        double runtime = 0.0;
        const fs::path timing = run_dir / ("iter" + std::to_string(state.t)) /
                                "validation_scores.json.timing.json";
        if (fs::exists(timing)) {
            runtime = load_json_file(timing).value("runtime_per_query_seconds", 0.0);
        }
        json row;
        row["system"] = config.algorithm;
        row["runtime_per_query_seconds"] = runtime;
        row["per_dataset"] = json{{config.datasets[0].name + " (validation)", best}};
        row["macro"] = best;
        json report;
        report["rows"] = json::array({row});
        save_json_file(run_dir / "report.json", report);
        manifest.add_artifact("report.json");
        manifest.save();

        std::cout << "run " << id << " complete after " << state.t << " iterations\n";
        std::cout << "validation metric history:";
        for (double v : state.validation_metric_history) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), " %.4f", v);
            std::cout << buf;
        }
        std::cout << "\nfinal policy: " << state.policy.describe() << "\n";
        return 0;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

namespace {

struct SystemReports {
    std::vector<std::string> systems;
    std::vector<std::vector<EvalReport>> reports;  // [system][dataset]
};

SystemReports evaluate_systems(Engine& engine, const PipelineContext& ctx,
                               const std::vector<std::string>& systems, const std::string& split,
                               const TrainedRuns& trained_runs,
                               const std::vector<std::size_t>& dataset_indices) {
    SystemReports out;
    out.systems = systems;
    for (const auto& system : systems) {
        const auto trained = trained_policy_for(engine.config(), trained_runs, system);
        std::vector<EvalReport> per_dataset;
        for (std::size_t d : dataset_indices) {
            const Dataset& data = engine.split(d, split);
            const auto answerer = make_answerer(ctx, engine.config(), system, data, trained);
            EvalReport report = evaluate_system({system, answerer}, data, ctx.scorer,
                                                engine.config().parallelism);
            report.dataset_name = engine.config().datasets[d].name;
            per_dataset.push_back(std::move(report));
        }
        out.reports.push_back(std::move(per_dataset));
    }
    return out;
}

}  // namespace

int cmd_evaluate(const CommonFlags& flags, const std::vector<std::string>& systems,
                 const std::string& split, const TrainedRuns& trained_runs) {
    try {
        if (systems.empty()) {
            throw ConfigError("evaluate needs at least one --system; valid names: " +
                              join(baseline_names(), ", "));
        }
        RunConfig config = config_from_flags(flags);
        Engine engine(std::move(config));
        PipelineContext ctx = engine.make_context();

        SystemReports results = evaluate_systems(engine, ctx, systems, split, trained_runs, {0});

        // Pairwise significance against the first listed system.
        for (std::size_t i = 1; i < results.reports.size(); ++i) {
            add_comparison(results.reports[i][0], results.reports[0][0]);
        }

        const CompareTable table = build_compare_table(
            {engine.config().datasets[0].name + " (" + split + ")"}, results.reports);
        std::cout << render_table_plain(table);
        for (std::size_t i = 1; i < results.reports.size(); ++i) {
            const auto& cmp = results.reports[i][0].comparisons.back();
            char buf[64];
            std::snprintf(buf, sizeof(buf), "p=%.6f%s", cmp.p_value,
                          cmp.p_value < 0.05 ? " (significant, p < 0.05)" : "");
            std::cout << results.systems[i] << " vs " << results.systems[0] << ": " << buf << "\n";
        }

        const std::string eval_id =
            "eval-" + sha256_hex(engine.config_digest() + join(systems, ",") + split).substr(0, 12);
        const fs::path out_dir = engine.config().runs_dir / eval_id;
        fs::create_directories(out_dir);
        json machine;
        machine["table"] = compare_table_to_json(table);
        json reports = json::array();
        for (const auto& per_dataset : results.reports) {
            for (const auto& r : per_dataset) reports.push_back(report_to_json(r));
        }
        machine["reports"] = std::move(reports);
        save_json_file(out_dir / "eval_report.json", machine);
        write_file_atomic(out_dir / "report.txt", render_table_plain(table));
        std::cout << "wrote " << (out_dir / "eval_report.json").string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

int cmd_compare(const CommonFlags& flags, std::vector<std::string> systems,
                const std::string& split, const TrainedRuns& trained_runs,
                const std::optional<std::string>& run_id) {
    try {
        RunConfig config = config_from_flags(flags);
        Engine engine(std::move(config));
        PipelineContext ctx = engine.make_context();

        if (systems.empty()) {
            systems = {"no_personalization", "rag", "rag_random_profile", "planpers"};
            if (trained_runs.count("offline_rl")) systems.push_back("offline_rl");
            if (trained_runs.count("vac")) systems.push_back("vac");
        }
        for (const auto& s : systems) {
            if (std::find(baseline_names().begin(), baseline_names().end(), s) ==
                baseline_names().end()) {
                throw ConfigError("unknown system '" + s + "'; valid names: " +
                                  join(baseline_names(), ", "));
            }
        }
        if (engine.config().datasets.empty()) {
            throw ConfigError("config lists no datasets to compare on");
        }

        std::vector<std::size_t> dataset_indices;
        std::vector<std::string> dataset_names;
        for (std::size_t d = 0; d < engine.config().datasets.size(); ++d) {
            dataset_indices.push_back(d);
            dataset_names.push_back(engine.config().datasets[d].name);
        }

        SystemReports results =
            evaluate_systems(engine, ctx, systems, split, trained_runs, dataset_indices);
        const CompareTable table = build_compare_table(dataset_names, results.reports);

        const std::string id = run_id.value_or(
            "compare-" +
            sha256_hex(engine.config_digest() + join(systems, ",") + split).substr(0, 12));
        const fs::path out_dir = engine.config().runs_dir / id;
        fs::create_directories(out_dir);

        const std::string plain = render_table_plain(table);
        const std::string markdown = render_table_markdown(table);
        std::cout << plain;

        json machine;
        machine["split"] = split;
        machine["table"] = compare_table_to_json(table);
        save_json_file(out_dir / "compare_report.json", machine);
        write_file_atomic(out_dir / "table.txt", plain);
        write_file_atomic(out_dir / "table.md", markdown);

        // Rows for `vac report`.
        json rows = json::array();
        for (const auto& row : table.rows) {
            json r;
            r["system"] = row.system;
            r["runtime_per_query_seconds"] = row.runtime_per_query_seconds;
            json per_dataset;
            for (std::size_t d = 0; d < table.dataset_names.size(); ++d) {
                per_dataset[table.dataset_names[d]] = row.per_dataset[d];
            }
            r["per_dataset"] = std::move(per_dataset);
            r["macro"] = row.macro;
            rows.push_back(std::move(r));
        }
        save_json_file(out_dir / "report.json", json{{"rows", rows}});
        std::cout << "wrote " << (out_dir / "compare_report.json").string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

int cmd_report(const CommonFlags& flags, const std::vector<std::string>& run_ids, bool markdown) {
    try {
        const RunConfig config = config_from_flags(flags);
        if (run_ids.empty()) throw ConfigError("report needs at least one run id");

        // Union of dataset columns in first-seen order.
        std::vector<std::string> dataset_names;
        struct Row {
            std::string run_id;
            std::string system;
            double runtime = 0.0;
            std::map<std::string, double> per_dataset;
            double macro = 0.0;
        };
        std::vector<Row> rows;
        for (const auto& id : run_ids) {
            const fs::path path = config.runs_dir / id / "report.json";
            if (!fs::exists(path)) {
                throw ConfigError("run '" + id + "' has no report.json under " +
                                  (config.runs_dir / id).string());
            }
            for (const auto& rj : load_json_file(path).value("rows", json::array())) {
                Row row;
                row.run_id = id;
                row.system = rj.value("system", "");
                row.runtime = rj.value("runtime_per_query_seconds", 0.0);
                row.macro = rj.value("macro", 0.0);
                for (const auto& [name, score] : rj.value("per_dataset", json::object()).items()) {
                    row.per_dataset[name] = score.get<double>();
                    if (std::find(dataset_names.begin(), dataset_names.end(), name) ==
                        dataset_names.end()) {
                        dataset_names.push_back(name);
                    }
                }
                rows.push_back(std::move(row));
            }
        }

        std::vector<std::vector<std::string>> cells;
        std::vector<std::string> header = {"Run", "Method", "Runtime (second / query)"};
        for (const auto& name : dataset_names) header.push_back(name);
        header.push_back("Average (macro)");
        cells.push_back(header);
        for (const auto& row : rows) {
            std::vector<std::string> line = {row.run_id, row.system};
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.2f", row.runtime);
            line.push_back(buf);
            for (const auto& name : dataset_names) {
                auto it = row.per_dataset.find(name);
                if (it == row.per_dataset.end()) {
                    line.push_back("-");
                } else {
                    std::snprintf(buf, sizeof(buf), "%.4f", it->second);
                    line.push_back(buf);
                }
            }
            std::snprintf(buf, sizeof(buf), "%.4f", row.macro);
            line.push_back(buf);
            cells.push_back(std::move(line));
        }

        std::string out;
        if (markdown) {
            for (std::size_t r = 0; r < cells.size(); ++r) {
                out += "|";
                for (const auto& cell : cells[r]) out += " " + cell + " |";
                out += "\n";
                if (r == 0) {
                    out += "|";
                    for (std::size_t c = 0; c < cells[0].size(); ++c) out += " --- |";
                    out += "\n";
                }
            }
        } else {
            std::vector<std::size_t> widths(cells[0].size(), 0);
            for (const auto& row : cells) {
                for (std::size_t c = 0; c < row.size(); ++c) {
                    widths[c] = std::max(widths[c], row[c].size());
                }
            }
            for (std::size_t r = 0; r < cells.size(); ++r) {
                for (std::size_t c = 0; c < cells[r].size(); ++c) {
                    std::string cell = cells[r][c];
                    cell.resize(widths[c], ' ');
                    out += cell;
                    if (c + 1 < cells[r].size()) out += "  ";
                }
                out += "\n";
                if (r == 0) {
                    for (std::size_t c = 0; c < widths.size(); ++c) {
                        out += std::string(widths[c], '-');
                        if (c + 1 < widths.size()) out += "  ";
                    }
                    out += "\n";
                }
            }
        }
        std::cout << out;
        return 0;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

int cmd_prompts_show(const CommonFlags& flags, const std::string& template_name) {
    try {
        TemplateSet templates = TemplateSet::builtin_defaults();
        if (fs::exists(flags.config_path)) {
            const RunConfig config = config_from_flags(flags);
            if (config.templates_dir) templates = TemplateSet::load(*config.templates_dir);
        }
        std::vector<std::string> names;
        if (template_name.empty() || template_name == "all") {
            names = {"respond", "refine", "feedback", "plan", "plan_respond", "judge"};
        } else {
            names = {template_name};
        }
        for (const auto& name : names) {
            const auto id = template_id_from_name(name);
            if (!id) {
                throw ConfigError("unknown template '" + name +
                                  "' (respond|refine|feedback|plan|plan_respond|judge)");
            }
            std::cout << "=== " << name << " ===\n" << templates.get(*id).body << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

}  // namespace vac::cli
