#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "sca/experiment.hpp"

using namespace sca;
using namespace sca::exp;

namespace {

ExperimentConfig small_config(Task task) {
    ExperimentConfig config;
    config.task = task;
    config.trials_per_class = 10;
    config.repeats = 2;
    config.sigma_current = 1e-4;
    config.gain_drift = 0.0;
    return config;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("sca_exp_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("each task enumerates its label space") {
    auto coarse = class_specs(small_config(Task::coarse6));
    CHECK(coarse.size() == 6);
    for (const auto& spec : coarse) CHECK(spec.scale == 1.0);

    auto fine = class_specs(small_config(Task::finetune24));
    CHECK(fine.size() == 24);

    auto sparsity = class_specs(small_config(Task::sparsity16));
    CHECK(sparsity.size() == 16);
    int alexnet = 0;
    for (const auto& spec : sparsity) {
        CHECK(spec.label.sparsity == spec.scale);
        if (spec.model == "Alexnet") ++alexnet;
    }
    CHECK(alexnet == 4);
    CHECK(task_mode(Task::sparsity16) == learn::TaskMode::fine);
    CHECK(task_mode(Task::coarse6) == learn::TaskMode::coarse);
}

TEST_CASE("config validation rejects inconsistent settings") {
    auto config = small_config(Task::coarse6);
    config.trials_per_class = 3;  // below split_train + split_test
    CHECK_THROWS_AS(config.validate(), ValidationError);

    config = small_config(Task::sparsity16);
    config.sparsity_scales = {1.0, 1.5};
    CHECK_THROWS_AS(config.validate(), ValidationError);

    config = small_config(Task::coarse6);
    config.repeats = 0;
    CHECK_THROWS_AS(config.validate(), ValidationError);
}

TEST_CASE("task and classifier names round trip") {
    for (auto task : {Task::coarse6, Task::finetune24, Task::sparsity16})
        CHECK(task_from_name(task_name(task)) == task);
    CHECK_THROWS_AS(task_from_name("bogus"), ValidationError);
}

TEST_CASE("stock configs pick the per-task classifier") {
    CHECK(default_config(Task::coarse6).classifier.kind ==
          learn::ClassifierKind::max_margin_linear);
    CHECK(default_config(Task::finetune24).classifier.kind ==
          learn::ClassifierKind::max_margin_linear);
    CHECK(default_config(Task::sparsity16).classifier.kind ==
          learn::ClassifierKind::nearest_neighbor);
    CHECK(default_config(Task::sparsity16).task == Task::sparsity16);
}

TEST_CASE("a fixed gain drift flows through to the result") {
    auto config = small_config(Task::sparsity16);
    config.classifier.kind = learn::ClassifierKind::nearest_neighbor;
    config.gain_drift = 0.03;
    auto result = run_experiment(config);
    CHECK(result.drift_used == 0.03);
    CHECK(result.aggregate.classes.size() == 16);

    auto again = run_experiment(config);
    CHECK(again.per_seed_accuracy == result.per_seed_accuracy);
}

TEST_CASE("gap calibration returns a positive noise level") {
    auto config = small_config(Task::coarse6);
    double sigma = calibrate_sigma_from_gap(config);
    CHECK(sigma > 0.0);
    CHECK(sigma < 10.0);
}

TEST_CASE("a small experiment runs end to end, deterministically") {
    auto config = small_config(Task::coarse6);
    auto result = run_experiment(config);

    CHECK(result.sigma_used == config.sigma_current);
    CHECK(result.drift_used == 0.0);
    REQUIRE(result.per_seed_accuracy.size() == 2);
    for (double a : result.per_seed_accuracy) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
    // 10 trials per class at 4:1 -> 2 test rows per class per repeat
    CHECK(result.aggregate.total() == 2 * 6 * 2);
    CHECK(result.aggregate.classes.size() == 6);
    // near-noiseless traces separate cleanly
    CHECK(result.mean_accuracy >= 0.9);
    CHECK(result.mean_superclass_accuracy >= result.mean_accuracy - 1e-12);

    auto again = run_experiment(config);
    CHECK(again.per_seed_accuracy == result.per_seed_accuracy);
    CHECK(again.aggregate.counts == result.aggregate.counts);
}

TEST_CASE("experiment config JSON round trip") {
    auto config = small_config(Task::sparsity16);
    config.master_seed = 77;
    config.group_size = 3;
    config.sparsity_scales = {1.0, 0.5};
    config.gain_drift = 0.25;
    config.classifier.kind = learn::ClassifierKind::nearest_neighbor;
    config.classifier.k = 3;

    auto restored = config_from_json(config_to_json(config));
    CHECK(restored.task == config.task);
    CHECK(restored.trials_per_class == config.trials_per_class);
    CHECK(restored.repeats == config.repeats);
    CHECK(restored.sigma_current == config.sigma_current);
    CHECK(restored.gain_drift == 0.25);
    CHECK(restored.master_seed == 77);
    CHECK(restored.group_size == 3);
    CHECK(restored.sparsity_scales == config.sparsity_scales);
    CHECK(restored.classifier.kind == learn::ClassifierKind::nearest_neighbor);
    CHECK(restored.classifier.k == 3);
    CHECK(restored.profile.throughput == config.profile.throughput);
}

TEST_CASE("report bundle contains every artifact") {
    TempDir tmp;
    auto config = small_config(Task::coarse6);
    auto result = run_experiment(config);
    auto out = tmp.path / "report";
    write_report(config, result, out);

    for (const char* name :
         {"config.json", "confusion.csv", "per_class.csv", "summary.txt",
          "confusion.svg"})
        CHECK(std::filesystem::exists(out / name));

    auto matrix = learn::read_confusion_csv(out / "confusion.csv");
    CHECK(matrix.classes == result.aggregate.classes);
    CHECK(matrix.counts == result.aggregate.counts);

    std::ifstream svg(out / "confusion.svg");
    std::string text((std::istreambuf_iterator<char>(svg)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("<svg") != std::string::npos);

    std::ifstream cfg(out / "config.json");
    nlohmann::json doc;
    cfg >> doc;
    CHECK(doc.at("task") == "coarse6");
    CHECK(doc.at("sigma_used").get<double>() == result.sigma_used);
}
