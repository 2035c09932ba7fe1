#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sca/learn.hpp"
#include "sca/synth.hpp"
#include "sca/zoo.hpp"

namespace sca::exp {

enum class Task { coarse6, finetune24, sparsity16 };

const char* task_name(Task task);
Task task_from_name(const std::string& name);

struct ExperimentConfig {
    Task task = Task::coarse6;
    int trials_per_class = 125;
    int repeats = 10;            // independent split seeds
    double sigma_current = -1.0; // < 0 selects automatic calibration
    double gain_drift = -1.0;    // < 0 selects automatic calibration
    int split_train = 4;
    int split_test = 1;
    std::size_t group_size = 5;
    std::uint64_t master_seed = 42;
    std::vector<double> sparsity_scales{1.0, 0.8, 0.6, 0.4};
    power::DevicePowerProfile profile;
    synth::EpochPlan plan;
    learn::TrainConfig classifier;
    std::filesystem::path zoo_dir;  // empty selects the default zoo

    void validate() const;
};

/// One class of the experiment's label space: a zoo entry plus a
/// sparsity scale, mapped to its training label.
struct ClassSpec {
    std::string model;
    std::string variant;
    double scale = 1.0;
    learn::ClassLabel label;
};

std::vector<ClassSpec> class_specs(const ExperimentConfig& config);
learn::TaskMode task_mode(Task task);

/// Stock configuration for a task. sparsity16 defaults to the
/// nearest-neighbor classifier; the coarse tasks keep the linear one.
ExperimentConfig default_config(Task task);

struct ExperimentResult {
    double sigma_used = 0.0;
    double drift_used = 0.0;
    std::vector<double> per_seed_accuracy;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double mean_superclass_accuracy = 0.0;
    learn::ConfusionMatrix aggregate;  // summed over split seeds
};

/// Full synth -> dsp -> learn pipeline dataset for the configured task.
learn::LabeledDataset generate_dataset(const ExperimentConfig& config,
                                       double sigma_current,
                                       double gain_drift = 0.0);

/// Per-sample current noise giving a power-noise std of 5% of the
/// minimum inter-class gap in noiseless mean window power.
double calibrate_sigma_from_gap(const ExperimentConfig& config);

/// Searches for a per-image gain-drift level whose mean held-out fine
/// accuracy falls inside [lo, hi]; used by the sparsity task. Sample
/// noise stays at the gap-calibrated sigma during the search.
double calibrate_drift_for_accuracy(const ExperimentConfig& config, double lo,
                                    double hi);

ExperimentResult run_experiment(const ExperimentConfig& config);

nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& doc);

/// Report bundle: config.json, confusion.csv, summary.txt,
/// per_class.csv, confusion.svg.
void write_report(const ExperimentConfig& config, const ExperimentResult& result,
                  const std::filesystem::path& out_dir);

std::string confusion_svg(const learn::ConfusionMatrix& matrix);

}  // namespace sca::exp
