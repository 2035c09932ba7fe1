// Command line front end for the power side-channel toolkit:
// model zoo inspection, trace synthesis, feature extraction, classifier
// training, single-trace attacks, and full experiment runs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sca/dsp.hpp"
#include "sca/experiment.hpp"
#include "sca/learn.hpp"
#include "sca/power.hpp"
#include "sca/synth.hpp"
#include "sca/zoo.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path zoo_dir_or_default(const std::string& flag) {
    return flag.empty() ? sca::zoo::default_dir() : fs::path(flag);
}

sca::power::DevicePowerProfile profile_from_flag(const std::string& flag) {
    if (flag.empty()) return sca::power::DevicePowerProfile{};
    return sca::power::load_profile(flag);
}

int cmd_zoo_list(const std::string& zoo_flag, const std::string& filter) {
    auto entries = sca::zoo::list_entries(zoo_dir_or_default(zoo_flag));
    std::printf("%-14s %-18s %8s %16s\n", "name", "variant", "layers", "total_ops");
    int shown = 0;
    for (const auto& entry : entries) {
        if (!filter.empty() && entry.name != filter) continue;
        auto spec = sca::zoo::load_file(entry.path);
        auto counts = sca::arch::arch_op_counts(spec);
        std::printf("%-14s %-18s %8zu %16lld\n", entry.name.c_str(),
                    entry.variant.c_str(), spec.layers.size(),
                    static_cast<long long>(counts.totals.total()));
        ++shown;
    }
    if (shown == 0 && !filter.empty())
        throw sca::IoError("no zoo entries match filter: " + filter);
    return kExitOk;
}

int cmd_synth(const std::string& zoo_flag, const std::string& profile_flag,
              const std::string& name, const std::string& variant, double sparsity,
              int epochs, std::uint64_t seed, double sigma, double drift,
              int images, double gap, const std::string& out_dir) {
    auto arch = sca::zoo::build(name, variant, zoo_dir_or_default(zoo_flag));
    auto profile = profile_from_flag(profile_flag);
    sca::power::SparsityConfig scale{sparsity, sparsity};
    sca::synth::EpochPlan plan;
    plan.n_images = images;
    plan.inter_image_gap_s = gap;
    fs::create_directories(out_dir);
    for (int e = 0; e < epochs; ++e) {
        sca::synth::NoiseModel noise{sigma, 0.0,
                                     sca::synth::derive_seed(seed, 0, e), drift};
        auto trace = sca::synth::synthesize_epoch(arch, profile, scale, noise, plan);
        char filename[64];
        std::snprintf(filename, sizeof filename, "epoch_%03d.csv", e);
        sca::synth::write_trace_csv(trace, fs::path(out_dir) / filename);
    }
    std::printf("wrote %d epoch trace(s) to %s\n", epochs, out_dir.c_str());
    return kExitOk;
}

int cmd_featurize(const std::vector<std::string>& traces, std::size_t group_size,
                  bool peaks_only, bool subtract_baseline,
                  const std::string& out_path) {
    std::vector<sca::dsp::FeatureRow> rows;
    int skipped = 0;
    for (const auto& path : traces) {
        auto trace = sca::synth::read_trace_csv(path);
        auto series = sca::dsp::compute_power(trace);
        auto peaks = sca::dsp::detect_peaks(series);
        if (peaks.empty()) {
            std::fprintf(stderr, "warning: no active region in %s, skipped\n",
                         path.c_str());
            ++skipped;
            continue;
        }
        double idle = subtract_baseline ? sca::dsp::estimate_idle(series) : 0.0;
        auto windows = sca::dsp::group_windows(series, peaks, group_size, !peaks_only);
        if (windows.empty())
            std::fprintf(stderr, "warning: %s has fewer than %zu peaks\n",
                         path.c_str(), group_size);
        for (auto& window : windows) {
            if (idle != 0.0)
                for (double& p : window.power) p -= idle;
            sca::dsp::FeatureRow row;
            row.features = sca::dsp::extract_features(window);
            if (trace.meta.source == "synthetic") {
                row.arch_label = trace.meta.arch_name;
                row.sparsity_label = trace.meta.lambda1;
            }
            rows.push_back(std::move(row));
        }
    }
    std::ofstream out(out_path);
    if (!out) throw sca::IoError("cannot write feature file: " + out_path);
    sca::dsp::write_feature_csv(rows, out);
    std::printf("%zu feature row(s) from %zu trace(s), %d skipped\n", rows.size(),
                traces.size(), skipped);
    return skipped == 0 ? kExitOk : kExitData;
}

int cmd_train(const std::string& features_path, const std::string& task,
              const std::string& kind, double reg, int iters, int k,
              std::uint64_t seed, bool no_standardize, std::size_t group_size,
              const std::string& out_path) {
    auto rows = sca::dsp::read_feature_csv(features_path);
    auto dataset =
        sca::learn::dataset_from_rows(rows, sca::learn::task_mode_from_name(task));
    sca::learn::TrainConfig config;
    if (kind == "svm") {
        config.kind = sca::learn::ClassifierKind::max_margin_linear;
    } else if (kind == "knn") {
        config.kind = sca::learn::ClassifierKind::nearest_neighbor;
    } else {
        throw UsageError("unknown classifier kind: " + kind);
    }
    config.regularization = reg;
    config.iterations = iters;
    config.k = k;
    config.seed = seed;
    config.standardize = !no_standardize;
    auto model = sca::learn::train(dataset, config);
    model.group_size = group_size;
    sca::learn::save_model(model, out_path);
    std::printf("trained %s on %zu rows, %zu classes -> %s\n", kind.c_str(),
                dataset.rows.size(), model.classes.size(), out_path.c_str());
    return kExitOk;
}

int cmd_attack(const std::string& model_path, const std::string& trace_path,
               std::optional<std::size_t> group_size_flag) {
    auto model = sca::learn::load_model(model_path);
    std::size_t group_size = model.group_size;
    if (group_size_flag && *group_size_flag != model.group_size) {
        std::fprintf(stderr,
                     "warning: requested group size %zu differs from the model's "
                     "%zu; using the model's\n",
                     *group_size_flag, model.group_size);
    }
    auto trace = sca::synth::read_trace_csv(trace_path);
    auto series = sca::dsp::compute_power(trace);
    auto peaks = sca::dsp::detect_peaks(series);
    if (peaks.empty()) throw sca::IoError("no inference activity found");
    auto windows = sca::dsp::group_windows(series, peaks, group_size);
    if (windows.empty()) throw sca::IoError("no inference activity found");

    std::map<std::string, int> votes;
    for (const auto& window : windows) {
        auto features = sca::dsp::extract_features(window);
        auto label = sca::learn::predict(model, features);
        ++votes[label.key(model.mode)];
    }
    std::string majority;
    int best = 0;
    for (const auto& [key, count] : votes) {
        std::printf("window votes: %s x%d\n", key.c_str(), count);
        if (count > best) {
            best = count;
            majority = key;
        }
    }
    auto label = sca::learn::ClassLabel::from_key(majority, model.mode);
    std::printf("prediction: arch=%s sparsity=%g\n", label.arch.c_str(),
                label.sparsity);
    return kExitOk;
}

int cmd_run_experiment(const std::string& config_path, const std::string& task,
                       int trials, int repeats, double sigma, double drift,
                       std::uint64_t seed, std::size_t group_size,
                       const std::string& profile_flag, const std::string& zoo_flag,
                       const std::string& out_dir) {
    sca::exp::ExperimentConfig config =
        task.empty() ? sca::exp::ExperimentConfig{}
                     : sca::exp::default_config(sca::exp::task_from_name(task));
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw sca::IoError("cannot open config file: " + config_path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw sca::IoError("corrupt config file: " + std::string(e.what()));
        }
        config = sca::exp::config_from_json(doc);
    }
    // CLI flags override file values
    if (!task.empty()) config.task = sca::exp::task_from_name(task);
    if (trials > 0) config.trials_per_class = trials;
    if (repeats > 0) config.repeats = repeats;
    if (sigma >= 0) config.sigma_current = sigma;
    if (drift >= 0) config.gain_drift = drift;
    if (seed != 0) config.master_seed = seed;
    if (group_size > 0) config.group_size = group_size;
    if (!profile_flag.empty()) config.profile = profile_from_flag(profile_flag);
    if (!zoo_flag.empty()) config.zoo_dir = zoo_flag;

    try {
        config.validate();
    } catch (const sca::ValidationError& e) {
        throw UsageError(e.what());
    }

    auto result = sca::exp::run_experiment(config);
    sca::exp::write_report(config, result, out_dir);
    std::printf(
        "task=%s sigma=%.6g drift=%.6g accuracy=%.4f +/- %.4f superclass=%.4f\n",
        sca::exp::task_name(config.task), result.sigma_used, result.drift_used,
        result.mean_accuracy, result.std_accuracy,
        result.mean_superclass_accuracy);
    std::printf("report bundle written to %s\n", out_dir.c_str());
    return kExitOk;
}

int cmd_report(const std::string& confusion_path, const std::string& out_dir) {
    auto matrix = sca::learn::read_confusion_csv(confusion_path);
    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "summary.txt");
        if (!out) throw sca::IoError("cannot write summary.txt");
        char buf[128];
        std::snprintf(buf, sizeof buf, "accuracy: %.4f\n", matrix.accuracy());
        out << buf << "classes: " << matrix.classes.size() << '\n';
    }
    {
        std::ofstream out(fs::path(out_dir) / "confusion.svg");
        if (!out) throw sca::IoError("cannot write confusion.svg");
        out << sca::exp::confusion_svg(matrix);
    }
    std::printf("report written to %s\n", out_dir.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Power side-channel simulator and attack toolkit for DNN "
                 "architecture fingerprinting"};
    app.require_subcommand(1);

    std::string zoo_flag, profile_flag;
    app.add_option("--zoo", zoo_flag, "Zoo directory (overrides SCA_ZOO_DIR)");
    app.add_option("--profile", profile_flag, "Device power profile JSON");

    // zoo list
    auto* zoo_cmd = app.add_subcommand("zoo", "Model zoo operations");
    auto* zoo_list = zoo_cmd->add_subcommand("list", "List zoo entries");
    std::string filter;
    zoo_list->add_option("--filter", filter, "Only show entries for one model");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Synthesize epoch traces");
    std::string synth_arch, synth_variant, synth_out = "traces";
    double synth_sparsity = 1.0, synth_sigma = 0.05, synth_drift = 0.0,
           synth_gap = 0.5;
    int synth_epochs = 1, synth_images = 24;
    std::uint64_t synth_seed = 0;
    synth_cmd->add_option("--arch", synth_arch, "Model name")->required();
    synth_cmd->add_option("--variant", synth_variant, "Model variant")->required();
    synth_cmd->add_option("--sparsity", synth_sparsity, "Sparsity coefficient");
    synth_cmd->add_option("--epochs", synth_epochs, "Epoch count");
    synth_cmd->add_option("--seed", synth_seed, "Master seed");
    synth_cmd->add_option("--sigma", synth_sigma, "Current noise std (A)");
    synth_cmd->add_option("--drift", synth_drift,
                          "Per-image gain drift (random-walk step)");
    synth_cmd->add_option("--images", synth_images, "Images per epoch");
    synth_cmd->add_option("--gap", synth_gap, "Inter-image gap (s)");
    synth_cmd->add_option("--out", synth_out, "Output directory");

    // featurize
    auto* feat_cmd = app.add_subcommand("featurize", "Extract window features");
    std::vector<std::string> feat_traces;
    std::size_t feat_group = 5;
    bool feat_peaks_only = false, feat_subtract = false;
    std::string feat_out = "features.csv";
    feat_cmd->add_option("traces", feat_traces, "Trace CSV files")->required();
    feat_cmd->add_option("--group-size", feat_group, "Images per window");
    feat_cmd->add_flag("--peaks-only", feat_peaks_only,
                       "Drop inter-peak valley samples from windows");
    feat_cmd->add_flag("--subtract-baseline", feat_subtract,
                       "Subtract the idle estimate before computing features");
    feat_cmd->add_option("--out", feat_out, "Output feature CSV");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the attack classifier");
    std::string train_features, train_task = "coarse", train_kind = "svm";
    std::string train_out = "model.json";
    double train_reg = 1e-3;
    int train_iters = 2000, train_k = 5;
    std::uint64_t train_seed = 0;
    std::size_t train_group = 5;
    bool train_no_std = false;
    train_cmd->add_option("--features", train_features, "Feature CSV")->required();
    train_cmd->add_option("--task", train_task, "coarse or fine");
    train_cmd->add_option("--kind", train_kind, "svm or knn");
    train_cmd->add_option("--reg", train_reg, "Regularization constant");
    train_cmd->add_option("--iters", train_iters, "Subgradient iterations");
    train_cmd->add_option("--k", train_k, "Neighbor count for knn");
    train_cmd->add_option("--seed", train_seed, "Training seed");
    train_cmd->add_option("--group-size", train_group,
                          "Featurization group size recorded in the model");
    train_cmd->add_flag("--no-standardize", train_no_std,
                        "Skip feature standardization");
    train_cmd->add_option("--out", train_out, "Output model JSON");

    // attack
    auto* attack_cmd = app.add_subcommand("attack", "Classify a captured trace");
    std::string attack_model, attack_trace;
    std::size_t attack_group = 0;
    attack_cmd->add_option("--model", attack_model, "Trained model JSON")->required();
    attack_cmd->add_option("--trace", attack_trace, "Trace CSV")->required();
    attack_cmd->add_option("--group-size", attack_group, "Requested group size");

    // run-experiment
    auto* run_cmd = app.add_subcommand("run-experiment", "Run a full experiment");
    std::string run_config, run_task, run_out = "report";
    int run_trials = 0, run_repeats = 0;
    double run_sigma = -1.0, run_drift = -1.0;
    std::uint64_t run_seed = 0;
    std::size_t run_group = 0;
    run_cmd->add_option("--config", run_config, "Experiment config JSON");
    run_cmd->add_option("--task", run_task, "coarse6, finetune24 or sparsity16");
    run_cmd->add_option("--trials", run_trials, "Windows per class");
    run_cmd->add_option("--repeats", run_repeats, "Split seed count");
    run_cmd->add_option("--sigma", run_sigma, "Current noise std (A)");
    run_cmd->add_option("--drift", run_drift,
                        "Per-image gain drift (random-walk step)");
    run_cmd->add_option("--seed", run_seed, "Master seed");
    run_cmd->add_option("--group-size", run_group, "Images per window");
    run_cmd->add_option("--out", run_out, "Report output directory");

    // report
    auto* report_cmd = app.add_subcommand("report", "Re-render a report");
    std::string report_confusion, report_out = "report";
    report_cmd->add_option("--confusion", report_confusion, "Confusion matrix CSV")
        ->required();
    report_cmd->add_option("--out", report_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (zoo_list->parsed()) return cmd_zoo_list(zoo_flag, filter);
        if (synth_cmd->parsed())
            return cmd_synth(zoo_flag, profile_flag, synth_arch, synth_variant,
                             synth_sparsity, synth_epochs, synth_seed, synth_sigma,
                             synth_drift, synth_images, synth_gap, synth_out);
        if (feat_cmd->parsed())
            return cmd_featurize(feat_traces, feat_group, feat_peaks_only,
                                 feat_subtract, feat_out);
        if (train_cmd->parsed())
            return cmd_train(train_features, train_task, train_kind, train_reg,
                             train_iters, train_k, train_seed, train_no_std,
                             train_group, train_out);
        if (attack_cmd->parsed())
            return cmd_attack(attack_model, attack_trace,
                              attack_group > 0
                                  ? std::optional<std::size_t>(attack_group)
                                  : std::nullopt);
        if (run_cmd->parsed())
            return cmd_run_experiment(run_config, run_task, run_trials, run_repeats,
                                      run_sigma, run_drift, run_seed, run_group,
                                      profile_flag, zoo_flag, run_out);
        if (report_cmd->parsed()) return cmd_report(report_confusion, report_out);
        std::fprintf(stderr, "error: no subcommand selected\n");
        return kExitUsage;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const sca::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const sca::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kExitInternal;
    }
}
