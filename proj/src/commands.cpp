#include "mvmt/commands.hpp"

#include <fstream>
#include <thread>
#include <iostream>
#include <set>
#include <sstream>

#include "mvmt/checkpoint.hpp"
#include "mvmt/errors.hpp"
#include "mvmt/interpret.hpp"

namespace mvmt {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json parse_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) raise(ErrorKind::Io, "failed writing " + path.string());
}

void check_known_keys(const json& section, const std::set<std::string>& known, const char* where) {
    for (const auto& [key, _] : section.items()) {
        if (!known.count(key)) {
            raise(ErrorKind::Config, std::string(where) + ": unknown field \"" + key + "\"");
        }
    }
}

std::pair<std::size_t, std::size_t> parse_range(const json& j, const char* field) {
    if (!j.is_array() || j.size() != 2) {
        raise(ErrorKind::Config, std::string(field) + " must be a [lo, hi] pair");
    }
    return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

bool dir_is_nonempty(const fs::path& dir) {
    return fs::exists(dir) && fs::is_directory(dir) && fs::directory_iterator(dir) != fs::directory_iterator();
}

} // namespace

json synthetic_spec_to_json(const SyntheticSpec& spec) {
    return {{"vocabulary_size", spec.vocabulary_size},
            {"num_patients_per_task", spec.num_patients_per_task},
            {"positive_rate", spec.positive_rate},
            {"negative_to_positive_ratio", spec.negative_to_positive_ratio},
            {"visit_count_range", {spec.visit_count_range.first, spec.visit_count_range.second}},
            {"codes_per_visit_range", {spec.codes_per_visit_range.first, spec.codes_per_visit_range.second}},
            {"planted_risk_codes", spec.planted_risk_codes},
            {"seed", spec.seed},
            {"signal_strength", spec.signal_strength},
            {"recency_weight", spec.recency_weight}};
}

json trainer_config_to_json(const TrainerConfig& config) {
    return {{"hidden_dim", config.hidden_dim},
            {"epochs", config.epochs},
            {"labeled_batch", config.labeled_batch},
            {"unlabeled_batch", config.unlabeled_batch},
            {"learning_rate", config.learning_rate},
            {"seed", config.seed},
            {"variant", variant_name(config.variant)},
            {"folds", config.folds},
            {"single_split", config.single_split},
            {"validation_fraction", config.validation_fraction},
            {"test_fraction", config.test_fraction},
            {"kernel_width", config.kernel_width},
            {"projection_dim", config.projection_dim},
            {"contrastive_temperature", config.contrastive_temperature},
            {"jobs", config.jobs}};
}

RunConfig load_run_config(const fs::path& path) {
    json root = parse_file(path);
    if (!root.is_object()) raise(ErrorKind::Config, path.string() + ": config must be a JSON object");
    check_known_keys(root, {"data", "trainer"}, "config");
    RunConfig out;
    try {
        if (root.contains("data")) {
            const json& d = root.at("data");
            check_known_keys(d,
                             {"vocabulary_size", "num_patients_per_task", "positive_rate",
                              "negative_to_positive_ratio", "visit_count_range", "codes_per_visit_range",
                              "planted_risk_codes", "seed", "signal_strength", "recency_weight"},
                             "config.data");
            out.has_data = true;
            SyntheticSpec& s = out.data;
            if (!d.contains("planted_risk_codes")) {
                raise(ErrorKind::Config, "config.data is missing required field \"planted_risk_codes\"");
            }
            s.planted_risk_codes = d.at("planted_risk_codes").get<std::vector<std::vector<std::size_t>>>();
            s.vocabulary_size = d.value("vocabulary_size", s.vocabulary_size);
            s.num_patients_per_task = d.value("num_patients_per_task", s.num_patients_per_task);
            s.positive_rate = d.value("positive_rate", s.positive_rate);
            s.negative_to_positive_ratio = d.value("negative_to_positive_ratio", s.negative_to_positive_ratio);
            if (d.contains("visit_count_range")) {
                s.visit_count_range = parse_range(d.at("visit_count_range"), "visit_count_range");
            }
            if (d.contains("codes_per_visit_range")) {
                s.codes_per_visit_range = parse_range(d.at("codes_per_visit_range"), "codes_per_visit_range");
            }
            s.seed = d.value("seed", s.seed);
            s.signal_strength = d.value("signal_strength", s.signal_strength);
            s.recency_weight = d.value("recency_weight", s.recency_weight);
        }
        if (root.contains("trainer")) {
            const json& t = root.at("trainer");
            check_known_keys(t,
                             {"hidden_dim", "epochs", "labeled_batch", "unlabeled_batch", "learning_rate",
                              "seed", "variant", "folds", "single_split", "validation_fraction",
                              "test_fraction", "kernel_width", "projection_dim",
                              "contrastive_temperature", "jobs"},
                             "config.trainer");
            TrainerConfig& c = out.trainer;
            c.hidden_dim = t.value("hidden_dim", c.hidden_dim);
            c.epochs = t.value("epochs", c.epochs);
            c.labeled_batch = t.value("labeled_batch", c.labeled_batch);
            c.unlabeled_batch = t.value("unlabeled_batch", c.unlabeled_batch);
            c.learning_rate = t.value("learning_rate", c.learning_rate);
            c.seed = t.value("seed", c.seed);
            if (t.contains("variant")) c.variant = variant_from_name(t.at("variant").get<std::string>());
            c.folds = t.value("folds", c.folds);
            c.single_split = t.value("single_split", c.single_split);
            c.validation_fraction = t.value("validation_fraction", c.validation_fraction);
            c.test_fraction = t.value("test_fraction", c.test_fraction);
            c.kernel_width = t.value("kernel_width", c.kernel_width);
            c.projection_dim = t.value("projection_dim", c.projection_dim);
            c.contrastive_temperature = t.value("contrastive_temperature", c.contrastive_temperature);
            c.jobs = t.value("jobs", c.jobs);
        }
    } catch (const json::exception& e) {
        raise(ErrorKind::Config, path.string() + ": " + e.what());
    }
    return out;
}

void cmd_generate(const GenerateOptions& options) {
    RunConfig config = load_run_config(options.config_path);
    if (!config.has_data) {
        raise(ErrorKind::Config, "config is missing required section \"data\"");
    }
    if (dir_is_nonempty(options.out_dir) && !options.force) {
        raise(ErrorKind::Config, "output directory " + options.out_dir.string() +
                                     " is not empty; pass --force to overwrite");
    }
    TaskBundle bundle = generate_synthetic_bundle(config.data);
    save_bundle(bundle, options.out_dir);
    write_file(options.out_dir / "provenance.json",
               json{{"command", "generate"}, {"spec", synthetic_spec_to_json(config.data)}}.dump(2) + "\n");
}

std::string cmd_validate(const ValidateOptions& options) {
    TaskBundle bundle = load_bundle(options.bundle_dir);
    std::size_t records = bundle.unlabeled.size();
    std::size_t positives = 0;
    for (const LabeledDataset& d : bundle.labeled) {
        records += d.size();
        positives += d.positive_count();
    }
    std::ostringstream os;
    os << "ok: " << bundle.labeled.size() << " tasks, " << records << " records (" << positives
       << " positive), vocabulary " << bundle.vocabulary.size() << ", unlabeled pool "
       << bundle.unlabeled.size();
    return os.str();
}

namespace {

fs::path state_path(const fs::path& out, std::size_t fold) {
    return out / ("state_fold" + std::to_string(fold) + ".json");
}
fs::path progress_path(const fs::path& out, std::size_t fold) {
    return out / ("progress_fold" + std::to_string(fold) + ".json");
}
fs::path checkpoint_path(const fs::path& out, std::size_t fold) {
    return out / ("checkpoint_fold" + std::to_string(fold) + ".json");
}

} // namespace

void cmd_train(const TrainOptions& options) {
    RunConfig run = load_run_config(options.config_path);
    TrainerConfig config = run.trainer;
    if (options.variant) config.variant = variant_from_name(*options.variant);
    if (options.epochs) config.epochs = *options.epochs;
    if (options.seed) config.seed = *options.seed;
    if (options.jobs) config.jobs = *options.jobs;
    if (options.folds) config.folds = *options.folds;
    if (options.single_split) config.single_split = *options.single_split;
    config.validate();

    TaskBundle bundle = load_bundle(options.bundle_dir);
    const std::uint64_t vocab_hash = bundle.vocabulary.content_hash();

    if (dir_is_nonempty(options.out_dir) && !options.force && !options.resume) {
        raise(ErrorKind::Config, "output directory " + options.out_dir.string() +
                                     " is not empty; pass --force or --resume");
    }
    fs::create_directories(options.out_dir);

    const json resolved = {{"trainer", trainer_config_to_json(config)},
                           {"bundle_vocab_hash", (std::ostringstream() << std::hex << vocab_hash).str()}};
    const fs::path resolved_path = options.out_dir / "resolved_config.json";
    if (options.resume && fs::exists(resolved_path)) {
        json previous = parse_file(resolved_path);
        if (previous != resolved) {
            raise(ErrorKind::Config, "resume requested but the configuration differs from the original run");
        }
    } else {
        write_file(resolved_path, resolved.dump(2) + "\n");
    }

    const std::vector<FoldData> folds = make_folds(bundle, config);
    std::vector<json> progress(folds.size());

    auto run_fold = [&](std::size_t f) {
        if (options.resume && fs::exists(progress_path(options.out_dir, f))) {
            progress[f] = parse_file(progress_path(options.out_dir, f));
            return;
        }
        std::unique_ptr<FoldTrainer> trainer = make_fold_trainer(bundle, folds[f], config, f);
        if (options.resume && fs::exists(state_path(options.out_dir, f))) {
            std::ifstream in(state_path(options.out_dir, f), std::ios::binary);
            std::stringstream buffer;
            buffer << in.rdbuf();
            trainer->restore(buffer.str());
        }
        while (!trainer->done()) {
            trainer->run_epoch();
            if (!trainer->done()) write_file(state_path(options.out_dir, f), trainer->state());
        }
        FoldOutcome outcome = trainer->outcome();
        save_checkpoint(*outcome.model, vocab_hash,
                        json{{"fold", f},
                             {"best_epoch", outcome.best_epoch},
                             {"validation_auc", outcome.validation_auc},
                             {"test_auc", outcome.test_auc}},
                        checkpoint_path(options.out_dir, f));
        json p = {{"fold", f},
                  {"test_auc", outcome.test_auc},
                  {"validation_auc", outcome.validation_auc},
                  {"best_epoch", outcome.best_epoch},
                  {"metric_lines", outcome.metric_lines}};
        write_file(progress_path(options.out_dir, f), p.dump() + "\n");
        std::error_code ec;
        fs::remove(state_path(options.out_dir, f), ec);
        progress[f] = std::move(p);
    };

    const std::size_t jobs = std::min<std::size_t>(config.jobs, folds.size());
    if (jobs <= 1) {
        for (std::size_t f = 0; f < folds.size(); ++f) run_fold(f);
    } else {
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(jobs);
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (std::size_t f = w; f < folds.size(); f += jobs) run_fold(f);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (std::thread& t : workers) t.join();
        for (const std::exception_ptr& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    // assemble metrics.jsonl and eval.json in fold order
    std::ostringstream metrics;
    std::vector<std::vector<double>> per_fold_auc;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        for (const auto& line : progress[f].at("metric_lines")) {
            metrics << line.get<std::string>() << "\n";
        }
        per_fold_auc.push_back(progress[f].at("test_auc").get<std::vector<double>>());
    }
    write_file(options.out_dir / "metrics.jsonl", metrics.str());

    std::vector<std::string> task_names;
    for (const LabeledDataset& d : bundle.labeled) task_names.push_back(d.task_name);
    EvalResult eval = aggregate_eval(task_names, per_fold_auc);
    json eval_json = {{"tasks", eval.task_names},
                      {"fold_auc", eval.fold_auc},
                      {"mean_auc", eval.mean_auc},
                      {"std_auc", eval.std_auc},
                      {"overall_mean", eval.overall_mean}};
    write_file(options.out_dir / "eval.json", eval_json.dump(2) + "\n");
}

json cmd_evaluate(const EvaluateOptions& options) {
    if (options.checkpoints.empty()) raise(ErrorKind::Config, "evaluate needs at least one checkpoint");
    TaskBundle bundle = load_bundle(options.bundle_dir);
    const std::uint64_t vocab_hash = bundle.vocabulary.content_hash();

    std::vector<std::string> task_names;
    for (const LabeledDataset& d : bundle.labeled) task_names.push_back(d.task_name);

    json rows = json::array();
    std::vector<std::vector<double>> per_fold_auc;
    for (std::size_t c = 0; c < options.checkpoints.size(); ++c) {
        LoadedModel loaded = load_checkpoint(options.checkpoints[c]);
        if (loaded.vocab_hash != vocab_hash) {
            raise(ErrorKind::Compatibility, "checkpoint " + options.checkpoints[c].string() +
                                                " was trained against a different vocabulary");
        }
        std::vector<double> task_auc;
        for (std::size_t t = 0; t < bundle.labeled.size(); ++t) {
            const LabeledDataset& data = bundle.labeled[t];
            const std::size_t task = loaded.model.task_index(data.task_name);
            std::vector<double> scores;
            scores.reserve(data.size());
            for (const PatientRecord& record : data.records) {
                scores.push_back(loaded.model.predict_value(record, bundle.vocabulary, task));
            }
            double auc;
            try {
                auc = auroc(scores, data.labels);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::UndefinedMetric) {
                    raise(ErrorKind::UndefinedMetric, "task " + data.task_name + ": " + e.what());
                }
                throw;
            }
            task_auc.push_back(auc);
            rows.push_back({{"task", data.task_name}, {"fold", c}, {"auroc", auc}});
        }
        per_fold_auc.push_back(std::move(task_auc));
    }
    EvalResult eval = aggregate_eval(task_names, per_fold_auc);
    json out = {{"tasks", eval.task_names},
                {"rows", rows},
                {"mean_auc", eval.mean_auc},
                {"std_auc", eval.std_auc},
                {"overall_mean", eval.overall_mean}};
    if (options.out_file) write_file(*options.out_file, out.dump(2) + "\n");
    return out;
}

namespace {

RemovalSpec parse_ablate_spec(const std::string& text) {
    RemovalSpec removal;
    std::stringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        if (group.empty()) continue;
        const auto eq = group.find('=');
        if (eq == std::string::npos) {
            raise(ErrorKind::Config, "ablate spec entries look like visits=3,9 or codes=D0002; got " + group);
        }
        const std::string key = group.substr(0, eq);
        std::stringstream values(group.substr(eq + 1));
        std::string item;
        while (std::getline(values, item, ',')) {
            if (item.empty()) continue;
            if (key == "visits") {
                try {
                    removal.visit_indices.push_back(std::stoul(item));
                } catch (const std::exception&) {
                    raise(ErrorKind::Config, "ablate spec: visit index expected, got " + item);
                }
            } else if (key == "codes") {
                removal.code_ids.push_back(item);
            } else {
                raise(ErrorKind::Config, "ablate spec: unknown group \"" + key + "\"");
            }
        }
    }
    return removal;
}

} // namespace

json cmd_explain(const ExplainOptions& options) {
    if (options.global == options.patient_id.has_value()) {
        raise(ErrorKind::Config, "explain needs exactly one of --global or --patient");
    }
    TaskBundle bundle = load_bundle(options.bundle_dir);
    LoadedModel loaded = load_checkpoint(options.checkpoint);
    if (loaded.vocab_hash != bundle.vocabulary.content_hash()) {
        raise(ErrorKind::Compatibility, "checkpoint was trained against a different vocabulary");
    }
    const std::size_t task = loaded.model.task_index(options.task);
    const LabeledDataset* dataset = nullptr;
    for (const LabeledDataset& d : bundle.labeled) {
        if (d.task_name == options.task) dataset = &d;
    }
    if (!dataset) raise(ErrorKind::Lookup, "bundle has no task named " + options.task);

    if (options.out_dir) fs::create_directories(*options.out_dir);

    if (options.global) {
        FeatureImportanceTable table =
            rank_features(loaded.model, *dataset, bundle.vocabulary, task, true, options.top_k);
        json out = importance_to_json(table);
        if (options.out_dir) {
            write_file(*options.out_dir / "importance.json", out.dump(2) + "\n");
            write_file(*options.out_dir / "importance.csv", importance_to_csv(table));
        }
        return out;
    }

    const PatientRecord* record = nullptr;
    for (const PatientRecord& r : dataset->records) {
        if (r.id == *options.patient_id) record = &r;
    }
    if (!record) {
        for (const PatientRecord& r : bundle.unlabeled) {
            if (r.id == *options.patient_id) record = &r;
        }
    }
    if (!record) raise(ErrorKind::Lookup, "unknown patient id: " + *options.patient_id);

    CaseStudyReport report = explain_patient(loaded.model, *record, bundle.vocabulary, task, options.top_k);
    if (options.ablate) {
        RemovalSpec removal = parse_ablate_spec(*options.ablate);
        std::vector<double> predictions =
            ablate_and_repredict(loaded.model, *record, bundle.vocabulary, task, {removal});
        report.ablations.push_back({removal.description(), predictions[0]});
    }
    json out = case_study_to_json(report);
    if (options.out_dir) {
        write_file(*options.out_dir / "case_study.json", out.dump(2) + "\n");
        write_file(*options.out_dir / "case_study.txt", case_study_to_text(report));
    }
    return out;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::Spec:
            return 2;
        case ErrorKind::Parse:
        case ErrorKind::Vocabulary:
        case ErrorKind::Io:
        case ErrorKind::Domain:
        case ErrorKind::Ordering:
        case ErrorKind::Stratification:
        case ErrorKind::Lookup:
        case ErrorKind::DegenerateRecord:
        case ErrorKind::DegenerateVector:
        case ErrorKind::Compatibility:
            return 3;
        case ErrorKind::Divergence:
            return 4;
        case ErrorKind::UndefinedMetric:
            return 5;
        default:
            return 1;
    }
}

} // namespace mvmt
