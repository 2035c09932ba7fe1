#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sca/dsp.hpp"

namespace sca::learn {

/// coarse: classes are architectures; fine: classes are
/// (architecture, sparsity) pairs.
enum class TaskMode { coarse, fine };

const char* task_mode_name(TaskMode mode);
TaskMode task_mode_from_name(const std::string& name);

struct ClassLabel {
    std::string arch;
    double sparsity = 1.0;

    std::string key(TaskMode mode) const;
    static ClassLabel from_key(const std::string& key, TaskMode mode);
    friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

struct LabeledRow {
    dsp::FeatureVector features;
    ClassLabel label;
};

struct LabeledDataset {
    TaskMode mode = TaskMode::coarse;
    std::vector<LabeledRow> rows;

    /// Distinct class keys, sorted (the fixed class ordering used for
    /// tie-breaking everywhere).
    std::vector<std::string> class_space() const;
    void validate() const;
};

/// Per-feature standardization fitted on training rows only.
struct Scaler {
    std::array<double, 3> mean{};
    std::array<double, 3> stddev{};

    std::array<double, 3> apply(const dsp::FeatureVector& f) const;
};

Scaler fit_scaler(const std::vector<LabeledRow>& rows);

enum class ClassifierKind { max_margin_linear, nearest_neighbor };

struct TrainConfig {
    ClassifierKind kind = ClassifierKind::max_margin_linear;
    double regularization = 1e-3;
    int iterations = 2000;
    int k = 5;  // nearest-neighbor only
    std::uint64_t seed = 0;
    bool standardize = true;
};

struct ClassifierModel {
    ClassifierKind kind = ClassifierKind::max_margin_linear;
    TaskMode mode = TaskMode::coarse;
    bool standardize = true;
    Scaler scaler;
    std::vector<std::string> classes;  // sorted
    // max-margin: one (w0,w1,w2,b) row per class, one-vs-rest
    std::vector<std::array<double, 4>> weights;
    // nearest-neighbor: scaled training rows with class indices
    int k = 5;
    std::vector<std::array<double, 3>> train_points;
    std::vector<std::size_t> train_classes;
    // featurization metadata carried along for the attack CLI
    std::size_t group_size = 5;
};

/// Stratified split at train:test; deterministic under seed; every class
/// needs at least train+test rows.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset,
                                                int train_ratio, int test_ratio,
                                                std::uint64_t seed);

ClassifierModel train(const LabeledDataset& train_set, const TrainConfig& config);

/// Predicted (architecture, sparsity); coarse-mode models report
/// sparsity 1.0 by convention.
ClassLabel predict(const ClassifierModel& model, const dsp::FeatureVector& features);

/// Regularized hinge objective of a max-margin model on a dataset
/// (used to check training convergence behavior).
double hinge_objective(const ClassifierModel& model, const LabeledDataset& dataset,
                       double regularization);

struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<std::int64_t>> counts;  // [true][predicted]

    std::int64_t total() const;
    double accuracy() const;
    /// Collapses fine classes to their architecture superclass.
    ConfusionMatrix collapse_to_arch(TaskMode mode) const;
};

ConfusionMatrix evaluate(const ClassifierModel& model, const LabeledDataset& test_set);

void write_confusion_csv(const ConfusionMatrix& matrix, std::ostream& out);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& path);

nlohmann::json to_json(const ClassifierModel& model);
ClassifierModel model_from_json(const nlohmann::json& doc);
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

/// Converts labeled feature rows (as read from feature CSV files) into a
/// dataset; rows without labels are rejected.
LabeledDataset dataset_from_rows(const std::vector<dsp::FeatureRow>& rows,
                                 TaskMode mode);

}  // namespace sca::learn
