#include <CLI11.hpp>

#include "vac/cli_commands.hpp"

using namespace vac;

int main(int argc, char** argv) {
    CLI::App app{"VAC: natural-language-feedback training for personalized question answering"};
    app.require_subcommand(1);

    cli::CommonFlags flags;
    std::string metric_flag;
    std::uint64_t seed_flag = 0;
    bool metric_set = false, seed_set = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", flags.config_path, "run config file (JSON)");
        cmd->add_flag("--no-cache", flags.no_cache, "bypass gateway cache reads");
        cmd->add_option("--metric", metric_flag, "metric override: judge|oracle")
            ->each([&](const std::string&) { metric_set = true; });
        cmd->add_option("--seed", seed_flag, "top-level seed override")
            ->each([&](const std::string&) { seed_set = true; });
    };

    // --- data ---
    auto* data = app.add_subcommand("data", "dataset utilities");
    data->require_subcommand(1);

    auto* synth = data->add_subcommand("synth", "generate a seeded synthetic world");
    std::string synth_out;
    add_common(synth);
    synth->add_option("--out", synth_out, "output directory (default: first dataset dir)");

    auto* convert = data->add_subcommand("convert", "convert published benchmark files");
    std::string conv_input, conv_output, conv_split = "test";
    ConvertFieldMap fields;
    convert->add_option("--input", conv_input, "published file (JSON array or JSONL)")
        ->required();
    convert->add_option("--output", conv_output, "output path (canonical JSONL)")->required();
    convert->add_option("--split", conv_split, "split tag: train|validation|test");
    convert->add_option("--field-id", fields.example_id, "record id field name");
    convert->add_option("--field-query", fields.query, "query field name");
    convert->add_option("--field-narrative", fields.narrative, "narrative field name");
    convert->add_option("--field-user", fields.user_id, "user id field name");
    convert->add_option("--field-aspects", fields.aspects, "aspects list field name");
    convert->add_option("--field-aspect-text", fields.aspect_description,
                        "description key inside aspect objects");
    convert->add_option("--field-profile", fields.profile, "profile list field name");

    // --- train ---
    auto* train = app.add_subcommand("train", "run the iterative training loop");
    std::string train_run_id, resume_id;
    add_common(train);
    train->add_option("--run-id", train_run_id, "explicit run id (default: derived from config)");
    train->add_option("--resume", resume_id, "resume an interrupted run by id");

    // --- evaluate ---
    auto* evaluate = app.add_subcommand("evaluate", "evaluate systems on a split");
    std::vector<std::string> eval_systems;
    std::string eval_split = "test", vac_run, rl_run;
    add_common(evaluate);
    evaluate->add_option("--system", eval_systems, "system name (repeatable)")->required();
    evaluate->add_option("--split", eval_split, "split: train|validation|test");
    evaluate->add_option("--vac-run", vac_run, "run id holding the trained vac policy");
    evaluate->add_option("--rl-run", rl_run, "run id holding the trained offline-rl policy");

    // --- compare ---
    auto* compare = app.add_subcommand("compare", "run baselines and emit a comparison table");
    std::vector<std::string> cmp_systems;
    std::string cmp_split = "test", cmp_run_id, cmp_vac_run, cmp_rl_run;
    add_common(compare);
    compare->add_option("--systems", cmp_systems, "subset of systems (default: all baselines)")
        ->delimiter(',');
    compare->add_option("--split", cmp_split, "split: train|validation|test");
    compare->add_option("--run-id", cmp_run_id, "output run id");
    compare->add_option("--vac-run", cmp_vac_run, "run id holding the trained vac policy");
    compare->add_option("--rl-run", cmp_rl_run, "run id holding the trained offline-rl policy");

    // --- report ---
    auto* report = app.add_subcommand("report", "render a table from completed runs");
    std::vector<std::string> report_runs;
    bool report_markdown = false;
    add_common(report);
    report->add_option("runs", report_runs, "run ids")->required();
    report->add_flag("--markdown", report_markdown, "render markdown instead of plain text");

    // --- prompts ---
    auto* prompts = app.add_subcommand("prompts", "prompt template utilities");
    prompts->require_subcommand(1);
    auto* show = prompts->add_subcommand("show", "print resolved templates");
    std::string template_name = "all";
    add_common(show);
    show->add_option("template", template_name, "template id or 'all'");

    CLI11_PARSE(app, argc, argv);

    if (metric_set) flags.metric = metric_flag;
    if (seed_set) flags.seed = seed_flag;

    if (synth->parsed()) {
        return cli::cmd_data_synth(flags, synth_out.empty()
                                              ? std::nullopt
                                              : std::optional<fs::path>(synth_out));
    }
    if (convert->parsed()) {
        return cli::cmd_data_convert(conv_input, conv_output, conv_split, fields);
    }
    if (train->parsed()) {
        return cli::cmd_train(flags,
                              train_run_id.empty() ? std::nullopt
                                                   : std::optional<std::string>(train_run_id),
                              resume_id.empty() ? std::nullopt
                                                : std::optional<std::string>(resume_id));
    }
    if (evaluate->parsed()) {
        cli::TrainedRuns runs;
        if (!vac_run.empty()) runs["vac"] = vac_run;
        if (!rl_run.empty()) runs["offline_rl"] = rl_run;
        return cli::cmd_evaluate(flags, eval_systems, eval_split, runs);
    }
    if (compare->parsed()) {
        cli::TrainedRuns runs;
        if (!cmp_vac_run.empty()) runs["vac"] = cmp_vac_run;
        if (!cmp_rl_run.empty()) runs["offline_rl"] = cmp_rl_run;
        return cli::cmd_compare(flags, cmp_systems, cmp_split, runs,
                                cmp_run_id.empty() ? std::nullopt
                                                   : std::optional<std::string>(cmp_run_id));
    }
    if (report->parsed()) {
        return cli::cmd_report(flags, report_runs, report_markdown);
    }
    if (show->parsed()) {
        return cli::cmd_prompts_show(flags, template_name);
    }
    return 0;
}
