#include <iostream>

#include <CLI11.hpp>

#include "mvmt/commands.hpp"
#include "mvmt/errors.hpp"

using namespace mvmt;

int main(int argc, char** argv) {
    CLI::App app{"multi-view multi-task complication risk profiling"};
    app.require_subcommand(1);

    GenerateOptions gen;
    CLI::App* generate = app.add_subcommand("generate", "generate a synthetic claims bundle");
    generate->add_option("--config", gen.config_path, "run configuration JSON")->required();
    generate->add_option("--out", gen.out_dir, "output bundle directory")->required();
    generate->add_flag("--force", gen.force, "overwrite a non-empty output directory");

    ValidateOptions val;
    CLI::App* validate = app.add_subcommand("validate", "validate a bundle directory");
    validate->add_option("--bundle", val.bundle_dir, "bundle directory")->required();

    TrainOptions train;
    std::string train_variant;
    long long train_epochs = -1, train_seed = -1, train_jobs = -1, train_folds = -1;
    bool train_single = false;
    CLI::App* train_cmd = app.add_subcommand("train", "train and evaluate on a bundle");
    train_cmd->add_option("--bundle", train.bundle_dir, "bundle directory")->required();
    train_cmd->add_option("--config", train.config_path, "run configuration JSON")->required();
    train_cmd->add_option("--out", train.out_dir, "output directory")->required();
    train_cmd->add_option("--variant", train_variant,
                          "full, -feature-view, -visit-view, -task-specific, -unlabeled");
    train_cmd->add_option("--epochs", train_epochs, "override epoch count");
    train_cmd->add_option("--seed", train_seed, "override seed");
    train_cmd->add_option("--jobs", train_jobs, "fold-level parallelism");
    train_cmd->add_option("--folds", train_folds, "override fold count");
    train_cmd->add_flag("--single-split", train_single, "one stratified holdout instead of k-fold CV");
    train_cmd->add_flag("--resume", train.resume, "resume an interrupted run");
    train_cmd->add_flag("--force", train.force, "overwrite a non-empty output directory");

    EvaluateOptions eval;
    std::string eval_out;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score checkpoints against a bundle");
    evaluate->add_option("--checkpoint", eval.checkpoints, "checkpoint file(s)")->required();
    evaluate->add_option("--bundle", eval.bundle_dir, "bundle directory")->required();
    evaluate->add_option("--out", eval_out, "write the result JSON here instead of stdout");

    ExplainOptions explain;
    std::string explain_patient_id, explain_ablate, explain_out;
    CLI::App* explain_cmd = app.add_subcommand("explain", "attention-based interpretability reports");
    explain_cmd->add_option("--checkpoint", explain.checkpoint, "checkpoint file")->required();
    explain_cmd->add_option("--bundle", explain.bundle_dir, "bundle directory")->required();
    explain_cmd->add_option("--task", explain.task, "task name")->required();
    explain_cmd->add_flag("--global", explain.global, "global feature-importance ranking");
    explain_cmd->add_option("--patient", explain_patient_id, "patient id for a case study");
    explain_cmd->add_option("--top", explain.top_k, "rows/entries to report");
    explain_cmd->add_option("--ablate", explain_ablate, "removals, e.g. visits=3,9;codes=D0002");
    explain_cmd->add_option("--out", explain_out, "report output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) {
            cmd_generate(gen);
            std::cout << "bundle written to " << gen.out_dir.string() << "\n";
        } else if (*validate) {
            std::cout << cmd_validate(val) << "\n";
        } else if (*train_cmd) {
            if (!train_variant.empty()) train.variant = train_variant;
            if (train_epochs >= 0) train.epochs = static_cast<std::size_t>(train_epochs);
            if (train_seed >= 0) train.seed = static_cast<std::uint64_t>(train_seed);
            if (train_jobs >= 0) train.jobs = static_cast<std::size_t>(train_jobs);
            if (train_folds >= 0) train.folds = static_cast<std::size_t>(train_folds);
            if (train_single) train.single_split = true;
            cmd_train(train);
            std::cout << "training outputs written to " << train.out_dir.string() << "\n";
        } else if (*evaluate) {
            if (!eval_out.empty()) eval.out_file = eval_out;
            nlohmann::json result = cmd_evaluate(eval);
            if (!eval.out_file) std::cout << result.dump(2) << "\n";
        } else if (*explain_cmd) {
            if (!explain_patient_id.empty()) explain.patient_id = explain_patient_id;
            if (!explain_ablate.empty()) explain.ablate = explain_ablate;
            if (!explain_out.empty()) explain.out_dir = explain_out;
            nlohmann::json result = cmd_explain(explain);
            if (!explain.out_dir) std::cout << result.dump(2) << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
