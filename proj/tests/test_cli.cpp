#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mvmt/commands.hpp"
#include "mvmt/errors.hpp"

using namespace mvmt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return MVMT_CLI_PATH; }

int run_cli(const std::string& args) {
    const std::string command = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("mvmt_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_config(const fs::path& path, std::size_t epochs = 2, std::uint64_t seed = 5) {
    json config = {
        {"data",
         {{"vocabulary_size", 14},
          {"num_patients_per_task", 60},
          {"positive_rate", 0.2},
          {"visit_count_range", {2, 5}},
          {"codes_per_visit_range", {1, 4}},
          {"planted_risk_codes", {{2, 3}, {3, 4}}},
          {"signal_strength", 2.0},
          {"seed", seed}}},
        {"trainer",
         {{"hidden_dim", 4},
          {"epochs", epochs},
          {"labeled_batch", 8},
          {"unlabeled_batch", 16},
          {"learning_rate", 0.001},
          {"seed", seed},
          {"folds", 2}}},
    };
    std::ofstream out(path);
    out << config.dump(2);
}

std::map<std::string, std::string> read_dir_bytes(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::stringstream buffer;
        buffer << in.rdbuf();
        files[fs::relative(entry.path(), dir).string()] = buffer.str();
    }
    return files;
}

} // namespace

TEST_CASE("generate is byte-deterministic and validates") {
    fs::path work = fresh_dir("gen");
    write_config(work / "config.json");
    const std::string cfg = (work / "config.json").string();

    REQUIRE(run_cli("generate --config " + cfg + " --out " + (work / "a").string()) == 0);
    REQUIRE(run_cli("generate --config " + cfg + " --out " + (work / "b").string()) == 0);
    CHECK(read_dir_bytes(work / "a") == read_dir_bytes(work / "b"));

    CHECK(run_cli("validate --bundle " + (work / "a").string()) == 0);

    // refusing to clobber without --force
    CHECK(run_cli("generate --config " + cfg + " --out " + (work / "a").string()) == 2);
    CHECK(run_cli("generate --config " + cfg + " --out " + (work / "a").string() + " --force") == 0);
    fs::remove_all(work);
}

TEST_CASE("generate reports missing config fields by name") {
    fs::path work = fresh_dir("missing_field");
    {
        std::ofstream out(work / "config.json");
        out << R"({"data": {"vocabulary_size": 10}})";
    }
    try {
        cmd_generate({work / "config.json", work / "bundle", false});
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        CHECK(std::string(e.what()).find("planted_risk_codes") != std::string::npos);
    }
    // unknown keys are named too
    {
        std::ofstream out(work / "config.json");
        out << R"({"data": {"planted_risk_codes": [[0]], "vocab_sz": 10}})";
    }
    try {
        cmd_generate({work / "config.json", work / "bundle", false});
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("vocab_sz") != std::string::npos);
    }
    fs::remove_all(work);
}

TEST_CASE("train writes checkpoints, metrics, eval, and supports variants") {
    fs::path work = fresh_dir("train");
    write_config(work / "config.json");
    const std::string cfg = (work / "config.json").string();
    const std::string bundle = (work / "bundle").string();
    REQUIRE(run_cli("generate --config " + cfg + " --out " + bundle) == 0);

    REQUIRE(run_cli("train --bundle " + bundle + " --config " + cfg + " --out " + (work / "run").string() +
                    " --variant -unlabeled") == 0);
    CHECK(fs::exists(work / "run" / "metrics.jsonl"));
    CHECK(fs::exists(work / "run" / "eval.json"));
    CHECK(fs::exists(work / "run" / "checkpoint_fold0.json"));
    CHECK(fs::exists(work / "run" / "checkpoint_fold1.json"));
    json resolved = json::parse(std::ifstream(work / "run" / "resolved_config.json"));
    CHECK(resolved.at("trainer").at("variant") == "-unlabeled");

    // metrics lines parse and never mention a contrastive task in this variant
    std::ifstream metrics(work / "run" / "metrics.jsonl");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(metrics, line)) {
        json j = json::parse(line);
        CHECK(j.at("task") != "unlabeled");
        ++lines;
    }
    CHECK(lines > 0);
    fs::remove_all(work);
}

TEST_CASE("repeat training runs are byte-identical; resume reuses progress") {
    fs::path work = fresh_dir("determinism");
    write_config(work / "config.json");
    const std::string cfg = (work / "config.json").string();
    const std::string bundle = (work / "bundle").string();
    REQUIRE(run_cli("generate --config " + cfg + " --out " + bundle) == 0);

    REQUIRE(run_cli("train --bundle " + bundle + " --config " + cfg + " --out " + (work / "r1").string()) == 0);
    REQUIRE(run_cli("train --bundle " + bundle + " --config " + cfg + " --out " + (work / "r2").string()) == 0);
    auto r1 = read_dir_bytes(work / "r1");
    auto r2 = read_dir_bytes(work / "r2");
    CHECK(r1 == r2);

    // a completed run resumed again reproduces the same outputs
    REQUIRE(run_cli("train --bundle " + bundle + " --config " + cfg + " --out " + (work / "r1").string() +
                    " --resume") == 0);
    CHECK(read_dir_bytes(work / "r1") == r2);
    fs::remove_all(work);
}

TEST_CASE("epochs zero evaluates an untrained model") {
    fs::path work = fresh_dir("zero_epochs");
    write_config(work / "config.json");
    const std::string cfg = (work / "config.json").string();
    const std::string bundle = (work / "bundle").string();
    REQUIRE(run_cli("generate --config " + cfg + " --out " + bundle) == 0);
    REQUIRE(run_cli("train --bundle " + bundle + " --config " + cfg + " --out " + (work / "run").string() +
                    " --epochs 0 --single-split") == 0);
    json eval = json::parse(std::ifstream(work / "run" / "eval.json"));
    for (const auto& task_aucs : eval.at("fold_auc")) {
        for (const auto& auc : task_aucs) {
            CHECK(auc.get<double>() >= 0.0);
            CHECK(auc.get<double>() <= 1.0);
        }
    }
    CHECK(fs::exists(work / "run" / "checkpoint_fold0.json"));
    fs::remove_all(work);
}

TEST_CASE("evaluate emits one row per task and fold and ignores record order") {
    fs::path work = fresh_dir("evaluate");
    write_config(work / "config.json");
    const std::string cfg = (work / "config.json").string();
    const std::string bundle = (work / "bundle").string();
    REQUIRE(run_cli("generate --config " + cfg + " --out " + bundle) == 0);
    REQUIRE(run_cli("train --bundle " + bundle + " --config " + cfg + " --out " + (work / "run").string()) == 0);

    EvaluateOptions options;
    options.checkpoints = {work / "run" / "checkpoint_fold0.json", work / "run" / "checkpoint_fold1.json"};
    options.bundle_dir = work / "bundle";
    json result = cmd_evaluate(options);
    CHECK(result.at("rows").size() == 4); // 2 tasks x 2 checkpoints

    // shuffle one task file's record order; AUC must not move
    const fs::path task_file = work / "bundle" / "task_atrial_fibrillation.jsonl";
    std::vector<std::string> lines;
    {
        std::ifstream in(task_file);
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }
    std::reverse(lines.begin(), lines.end());
    {
        std::ofstream out(task_file, std::ios::binary);
        for (const auto& line : lines) out << line << "\n";
    }
    json shuffled = cmd_evaluate(options);
    CHECK(shuffled.at("mean_auc") == result.at("mean_auc"));
    fs::remove_all(work);
}

TEST_CASE("evaluate on single-class labels exits with the metric code") {
    fs::path work = fresh_dir("single_class");
    write_config(work / "config.json");
    const std::string cfg = (work / "config.json").string();
    const std::string bundle = (work / "bundle").string();
    REQUIRE(run_cli("generate --config " + cfg + " --out " + bundle) == 0);
    REQUIRE(run_cli("train --bundle " + bundle + " --config " + cfg + " --out " + (work / "run").string()) == 0);

    // force every label of one task to zero
    const fs::path task_file = work / "bundle" / "task_atrial_fibrillation.jsonl";
    std::vector<json> records;
    {
        std::ifstream in(task_file);
        std::string line;
        while (std::getline(in, line)) records.push_back(json::parse(line));
    }
    {
        std::ofstream out(task_file, std::ios::binary);
        for (auto& r : records) {
            r["label"] = 0;
            out << r.dump() << "\n";
        }
    }
    CHECK(run_cli("evaluate --checkpoint " + (work / "run" / "checkpoint_fold0.json").string() +
                  " --bundle " + bundle) == 5);
    fs::remove_all(work);
}

TEST_CASE("explain produces report files that round-trip") {
    fs::path work = fresh_dir("explain");
    write_config(work / "config.json");
    const std::string cfg = (work / "config.json").string();
    const std::string bundle = (work / "bundle").string();
    REQUIRE(run_cli("generate --config " + cfg + " --out " + bundle) == 0);
    REQUIRE(run_cli("train --bundle " + bundle + " --config " + cfg + " --out " + (work / "run").string()) == 0);
    const std::string ckpt = (work / "run" / "checkpoint_fold0.json").string();

    REQUIRE(run_cli("explain --checkpoint " + ckpt + " --bundle " + bundle +
                    " --task atrial_fibrillation --global --top 10 --out " + (work / "global").string()) == 0);
    json importance = json::parse(std::ifstream(work / "global" / "importance.json"));
    CHECK(importance.at("rows").size() == 10);
    CHECK(json::parse(importance.dump()) == importance);
    CHECK(fs::exists(work / "global" / "importance.csv"));

    REQUIRE(run_cli("explain --checkpoint " + ckpt + " --bundle " + bundle +
                    " --task atrial_fibrillation --patient t0-p000000 --top 3 --ablate visits=0 --out " +
                    (work / "case").string()) == 0);
    json case_study = json::parse(std::ifstream(work / "case" / "case_study.json"));
    CHECK(case_study.at("patient") == "t0-p000000");
    CHECK(case_study.at("ablations").size() == 1);
    CHECK(json::parse(case_study.dump()) == case_study);

    // unknown patient id is a lookup (data) error
    CHECK(run_cli("explain --checkpoint " + ckpt + " --bundle " + bundle +
                  " --task atrial_fibrillation --patient nobody") == 3);
    // unknown variant/task
    CHECK(run_cli("explain --checkpoint " + ckpt + " --bundle " + bundle + " --task nope --global") == 3);
    fs::remove_all(work);
}

TEST_CASE("checkpoints refuse mismatched vocabularies") {
    fs::path work = fresh_dir("hash");
    write_config(work / "config.json");
    const std::string cfg = (work / "config.json").string();
    REQUIRE(run_cli("generate --config " + cfg + " --out " + (work / "bundle").string()) == 0);
    REQUIRE(run_cli("train --bundle " + (work / "bundle").string() + " --config " + cfg + " --out " +
                    (work / "run").string()) == 0);

    write_config(work / "config2.json", 2, 99);
    {
        // different vocabulary size -> different hash
        json config = json::parse(std::ifstream(work / "config2.json"));
        config["data"]["vocabulary_size"] = 17;
        std::ofstream out(work / "config2.json");
        out << config.dump(2);
    }
    REQUIRE(run_cli("generate --config " + (work / "config2.json").string() + " --out " +
                    (work / "bundle2").string()) == 0);
    CHECK(run_cli("evaluate --checkpoint " + (work / "run" / "checkpoint_fold0.json").string() +
                  " --bundle " + (work / "bundle2").string()) == 3);
    fs::remove_all(work);
}
