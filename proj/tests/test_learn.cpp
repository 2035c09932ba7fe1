#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "sca/learn.hpp"

using namespace sca;
using namespace sca::learn;

namespace {

LabeledRow row(double a, double b, double c, const std::string& arch,
               double sparsity = 1.0) {
    return LabeledRow{dsp::FeatureVector{a, b, c}, ClassLabel{arch, sparsity}};
}

// Three well-separated Gaussian blobs in feature space.
LabeledDataset blobs(int per_class, std::uint64_t seed, double spread = 0.05) {
    LabeledDataset dataset;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spread);
    struct Center {
        const char* arch;
        double a, b, c;
    };
    const Center centers[] = {{"alpha", 0, 0, 0}, {"beta", 2, 2, 0}, {"gamma", 4, 0, 2}};
    for (const auto& center : centers)
        for (int i = 0; i < per_class; ++i)
            dataset.rows.push_back(row(center.a + noise(rng), center.b + noise(rng),
                                       center.c + noise(rng), center.arch));
    return dataset;
}

std::multiset<std::string> keys_of(const LabeledDataset& dataset) {
    std::multiset<std::string> keys;
    for (const auto& r : dataset.rows) keys.insert(r.label.key(dataset.mode));
    return keys;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("sca_learn_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("class keys encode the task mode") {
    ClassLabel label{"Resnet50", 0.6};
    CHECK(label.key(TaskMode::coarse) == "Resnet50");
    CHECK(label.key(TaskMode::fine) == "Resnet50@0.6");
    CHECK(ClassLabel{"Alexnet", 1.0}.key(TaskMode::fine) == "Alexnet@1");

    auto parsed = ClassLabel::from_key("Resnet50@0.6", TaskMode::fine);
    CHECK(parsed.arch == "Resnet50");
    CHECK(parsed.sparsity == 0.6);
    auto coarse = ClassLabel::from_key("Resnet50", TaskMode::coarse);
    CHECK(coarse.arch == "Resnet50");
    CHECK(coarse.sparsity == 1.0);
    CHECK_THROWS_AS(ClassLabel::from_key("Resnet50", TaskMode::fine), ValidationError);
}

TEST_CASE("stratified split puts the right share of each class aside") {
    auto dataset = blobs(50, 1);
    SUBCASE("4:1 gives 40 train / 10 test per class") {
        auto [train_set, test_set] = split(dataset, 4, 1, 7);
        CHECK(train_set.rows.size() == 120);
        CHECK(test_set.rows.size() == 30);
        auto keys = keys_of(test_set);
        for (const auto& key : dataset.class_space())
            CHECK(keys.count(key) == 10);
    }
    SUBCASE("1:1 halves every class") {
        auto [train_set, test_set] = split(dataset, 1, 1, 7);
        CHECK(train_set.rows.size() == 75);
        CHECK(test_set.rows.size() == 75);
    }
    SUBCASE("same seed reproduces the same membership") {
        auto [train_a, test_a] = split(dataset, 4, 1, 7);
        auto [train_b, test_b] = split(dataset, 4, 1, 7);
        CHECK(keys_of(test_a) == keys_of(test_b));
        REQUIRE(test_a.rows.size() == test_b.rows.size());
        for (std::size_t i = 0; i < test_a.rows.size(); ++i)
            CHECK(test_a.rows[i].features.p_mea == test_b.rows[i].features.p_mea);
    }
    SUBCASE("different seeds shuffle differently") {
        auto [train_a, test_a] = split(dataset, 4, 1, 7);
        auto [train_b, test_b] = split(dataset, 4, 1, 8);
        bool any_diff = false;
        for (std::size_t i = 0; i < test_a.rows.size(); ++i)
            any_diff |= test_a.rows[i].features.p_mea != test_b.rows[i].features.p_mea;
        CHECK(any_diff);
    }
    SUBCASE("a class with too few rows is an error") {
        LabeledDataset tiny;
        tiny.rows = {row(0, 0, 0, "a"), row(1, 1, 1, "a"), row(2, 2, 2, "b")};
        CHECK_THROWS_AS(split(tiny, 4, 1, 0), ValidationError);
    }
}

TEST_CASE("scaler standardizes with training statistics") {
    std::vector<LabeledRow> rows{row(1, 2, 3, "a"), row(3, 6, 9, "b")};
    auto scaler = fit_scaler(rows);
    CHECK(scaler.mean == std::array<double, 3>{2, 4, 6});
    CHECK(scaler.stddev == std::array<double, 3>{1, 2, 3});
    auto z = scaler.apply(dsp::FeatureVector{1, 2, 3});
    CHECK(z == std::array<double, 3>{-1, -1, -1});
    auto zero = scaler.apply(dsp::FeatureVector{2, 4, 6});
    CHECK(zero == std::array<double, 3>{0, 0, 0});

    std::vector<LabeledRow> flat{row(1, 2, 3, "a"), row(1, 5, 6, "b")};
    CHECK_THROWS_AS(fit_scaler(flat), ValidationError);
}

TEST_CASE("both classifiers separate clean clusters") {
    auto dataset = blobs(40, 3);
    auto [train_set, test_set] = split(dataset, 4, 1, 5);

    TrainConfig svm;
    svm.kind = ClassifierKind::max_margin_linear;
    auto svm_model = train(train_set, svm);
    CHECK(evaluate(svm_model, test_set).accuracy() == 1.0);

    TrainConfig knn;
    knn.kind = ClassifierKind::nearest_neighbor;
    knn.k = 5;
    auto knn_model = train(train_set, knn);
    CHECK(evaluate(knn_model, test_set).accuracy() == 1.0);
}

TEST_CASE("1-nearest-neighbor memorizes its training set") {
    auto dataset = blobs(10, 4, 0.3);
    TrainConfig config;
    config.kind = ClassifierKind::nearest_neighbor;
    config.k = 1;
    auto model = train(dataset, config);
    CHECK(evaluate(model, dataset).accuracy() == 1.0);
}

TEST_CASE("nearest-neighbor ties break toward the first sorted class") {
    LabeledDataset dataset;
    dataset.rows = {row(0, 0, 0, "bravo"), row(2, 0, 0, "alpha")};
    TrainConfig config;
    config.kind = ClassifierKind::nearest_neighbor;
    config.k = 2;
    config.standardize = false;
    auto model = train(dataset, config);
    // both neighbors vote once; the sorted-first class wins
    CHECK(predict(model, dsp::FeatureVector{1, 0, 0}).arch == "alpha");
}

TEST_CASE("longer training budgets do not worsen the hinge objective") {
    auto dataset = blobs(30, 6, 0.2);
    TrainConfig config;
    config.kind = ClassifierKind::max_margin_linear;
    double prev = std::numeric_limits<double>::infinity();
    for (int iterations : {50, 200, 800, 3200}) {
        config.iterations = iterations;
        auto model = train(dataset, config);
        double objective = hinge_objective(model, dataset, config.regularization);
        CHECK(objective <= prev + 1e-3);
        prev = std::min(prev, objective);
    }
}

TEST_CASE("training is deterministic") {
    auto dataset = blobs(20, 8);
    TrainConfig config;
    auto a = train(dataset, config);
    auto b = train(dataset, config);
    REQUIRE(a.weights.size() == b.weights.size());
    for (std::size_t i = 0; i < a.weights.size(); ++i)
        CHECK(a.weights[i] == b.weights[i]);
}

TEST_CASE("confusion matrix accuracy and superclass collapse") {
    ConfusionMatrix fine;
    fine.classes = {"A@0.4", "A@1", "B@0.4", "B@1"};
    fine.counts = {
        {6, 4, 0, 0},
        {3, 7, 0, 0},
        {0, 0, 8, 2},
        {0, 1, 1, 8},
    };
    CHECK(fine.total() == 40);
    CHECK(fine.accuracy() == doctest::Approx(29.0 / 40.0));

    auto coarse = fine.collapse_to_arch(TaskMode::fine);
    REQUIRE(coarse.classes == std::vector<std::string>{"A", "B"});
    CHECK(coarse.total() == 40);
    // within-arch confusion folds onto the diagonal
    CHECK(coarse.counts[0][0] == 20);
    CHECK(coarse.counts[1][0] == 1);
    CHECK(coarse.counts[1][1] == 19);
    CHECK(coarse.accuracy() >= fine.accuracy());
}

TEST_CASE("evaluating an unknown class label is an error") {
    auto dataset = blobs(10, 9);
    auto model = train(dataset, TrainConfig{});
    LabeledDataset rogue;
    rogue.rows = {row(0, 0, 0, "delta")};
    CHECK_THROWS_AS(evaluate(model, rogue), ValidationError);
}

TEST_CASE("confusion CSV round trip") {
    TempDir tmp;
    ConfusionMatrix matrix;
    matrix.classes = {"a", "b", "c"};
    matrix.counts = {{5, 1, 0}, {0, 6, 0}, {2, 0, 4}};
    auto path = tmp.path / "confusion.csv";
    {
        std::ofstream out(path);
        write_confusion_csv(matrix, out);
    }
    auto restored = read_confusion_csv(path);
    CHECK(restored.classes == matrix.classes);
    CHECK(restored.counts == matrix.counts);
}

TEST_CASE("model JSON round trips preserve predictions") {
    TempDir tmp;
    auto dataset = blobs(20, 10);
    std::vector<dsp::FeatureVector> probes{
        {0.1, -0.1, 0.05}, {2.1, 1.9, 0.0}, {3.9, 0.2, 2.1}, {1.0, 1.0, 1.0}};

    for (auto kind : {ClassifierKind::max_margin_linear,
                      ClassifierKind::nearest_neighbor}) {
        TrainConfig config;
        config.kind = kind;
        auto model = train(dataset, config);
        model.group_size = 7;
        auto path = tmp.path / "model.json";
        save_model(model, path);
        auto restored = load_model(path);
        CHECK(restored.classes == model.classes);
        CHECK(restored.group_size == 7);
        for (const auto& probe : probes)
            CHECK(predict(restored, probe).arch == predict(model, probe).arch);
    }
}

TEST_CASE("dataset_from_rows carries labels and rejects unlabeled rows") {
    std::vector<dsp::FeatureRow> rows{
        {{1, 1, 0.1}, "Alexnet", std::nullopt},
        {{2, 2, 0.2}, "Resnet50", 0.6},
    };
    auto coarse = dataset_from_rows(rows, TaskMode::coarse);
    CHECK(coarse.rows[0].label.sparsity == 1.0);
    auto fine = dataset_from_rows(rows, TaskMode::fine);
    CHECK(fine.rows[1].label.key(TaskMode::fine) == "Resnet50@0.6");

    rows.push_back({{3, 3, 0.3}, "", std::nullopt});
    CHECK_THROWS_AS(dataset_from_rows(rows, TaskMode::coarse), ValidationError);
}
