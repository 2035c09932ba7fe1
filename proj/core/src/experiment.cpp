#include "sca/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sca/dsp.hpp"

namespace sca::exp {

namespace fs = std::filesystem;

const char* task_name(Task task) {
    switch (task) {
    case Task::coarse6: return "coarse6";
    case Task::finetune24: return "finetune24";
    case Task::sparsity16: return "sparsity16";
    }
    return "unknown";
}

Task task_from_name(const std::string& name) {
    if (name == "coarse6") return Task::coarse6;
    if (name == "finetune24") return Task::finetune24;
    if (name == "sparsity16") return Task::sparsity16;
    throw ValidationError("unknown task: " + name);
}

learn::TaskMode task_mode(Task task) {
    return task == Task::sparsity16 ? learn::TaskMode::fine : learn::TaskMode::coarse;
}

void ExperimentConfig::validate() const {
    if (trials_per_class < split_train + split_test)
        throw ValidationError("trials_per_class below split ratio total");
    if (repeats < 1) throw ValidationError("repeats must be >= 1");
    if (split_train < 1 || split_test < 1)
        throw ValidationError("split ratio parts must be positive");
    if (group_size < 1) throw ValidationError("group_size must be >= 1");
    if (task == Task::sparsity16) {
        if (sparsity_scales.empty())
            throw ValidationError("sparsity16 requires sparsity scales");
        for (double s : sparsity_scales)
            if (!(s > 0 && s <= 1))
                throw ValidationError("sparsity scales must be in (0, 1]");
    }
    profile.validate();
}

namespace {

const std::vector<std::pair<std::string, std::string>>& base_models() {
    static const std::vector<std::pair<std::string, std::string>> models = {
        {"Alexnet", "4096*4096*1000"},
        {"InceptionV3", "1000"},
        {"Resnet50", "1000,(3,4,6,3)"},
        {"Resnet101", "1000,(3,4,23,3)"},
        {"MobilenetV1", "1000"},
        {"MobilenetV2", "1000"},
    };
    return models;
}

const std::vector<std::string>& sparsity_models() {
    static const std::vector<std::string> models = {"Alexnet", "InceptionV3",
                                                    "Resnet50", "Resnet101"};
    return models;
}

fs::path resolve_zoo(const ExperimentConfig& config) {
    return config.zoo_dir.empty() ? zoo::default_dir() : config.zoo_dir;
}

}  // namespace

ExperimentConfig default_config(Task task) {
    ExperimentConfig config;
    config.task = task;
    // 16 ordered sparsity classes on 3 features defeat the one-vs-rest
    // linear separators; the sparsity task uses nearest-neighbor.
    if (task == Task::sparsity16)
        config.classifier.kind = learn::ClassifierKind::nearest_neighbor;
    return config;
}

std::vector<ClassSpec> class_specs(const ExperimentConfig& config) {
    std::vector<ClassSpec> specs;
    switch (config.task) {
    case Task::coarse6:
        for (const auto& [model, variant] : base_models())
            specs.push_back({model, variant, 1.0, learn::ClassLabel{model, 1.0}});
        break;
    case Task::finetune24: {
        auto entries = zoo::list_entries(resolve_zoo(config));
        for (const auto& entry : entries)
            specs.push_back(
                {entry.name, entry.variant, 1.0, learn::ClassLabel{entry.name, 1.0}});
        break;
    }
    case Task::sparsity16:
        for (const auto& model : sparsity_models()) {
            std::string variant;
            for (const auto& [name, v] : base_models())
                if (name == model) variant = v;
            for (double scale : config.sparsity_scales)
                specs.push_back(
                    {model, variant, scale, learn::ClassLabel{model, scale}});
        }
        break;
    }
    return specs;
}

namespace {

struct Generator {
    explicit Generator(const ExperimentConfig& config) : config_(config) {
        for (const auto& spec : class_specs(config)) {
            auto key = spec.model + "/" + spec.variant;
            if (!archs_.count(key))
                archs_.emplace(key, zoo::build(spec.model, spec.variant,
                                               resolve_zoo(config)));
        }
    }

    // Feature windows of one synthesized epoch, in trace order.
    std::vector<dsp::FeatureVector> epoch_windows(const ClassSpec& spec,
                                                  double sigma, double drift,
                                                  std::uint64_t seed) const {
        const auto& arch = archs_.at(spec.model + "/" + spec.variant);
        power::SparsityConfig sparsity{spec.scale, spec.scale};
        synth::NoiseModel noise{sigma, 0.0, seed, drift};
        auto trace =
            synth::synthesize_epoch(arch, config_.profile, sparsity, noise,
                                    config_.plan);
        auto series = dsp::compute_power(trace);
        auto peaks = dsp::detect_peaks(series);
        auto windows = dsp::group_windows(series, peaks, config_.group_size);
        std::vector<dsp::FeatureVector> features;
        features.reserve(windows.size());
        for (const auto& window : windows)
            features.push_back(dsp::extract_features(window));
        return features;
    }

    const ExperimentConfig& config_;
    std::map<std::string, arch::ArchitectureSpec> archs_;
};

learn::LabeledDataset generate(const Generator& gen, const ExperimentConfig& config,
                               double sigma, double drift, int trials) {
    auto specs = class_specs(config);
    learn::LabeledDataset dataset{task_mode(config.task), {}};
    int windows_per_epoch =
        std::max(1, config.plan.n_images / static_cast<int>(config.group_size));
    int needed_epochs = (trials + windows_per_epoch - 1) / windows_per_epoch;
    int max_epochs = needed_epochs * 3 + 10;
    for (std::size_t c = 0; c < specs.size(); ++c) {
        int have = 0;
        for (int e = 0; e < max_epochs && have < trials; ++e) {
            auto seed = synth::derive_seed(config.master_seed, c,
                                           static_cast<std::uint64_t>(e));
            auto features = gen.epoch_windows(specs[c], sigma, drift, seed);
            for (const auto& f : features) {
                if (have >= trials) break;
                dataset.rows.push_back(learn::LabeledRow{f, specs[c].label});
                ++have;
            }
        }
    }
    return dataset;
}

double accuracy_over_seeds(const learn::LabeledDataset& dataset,
                           const ExperimentConfig& config, int repeats) {
    double total = 0.0;
    for (int r = 0; r < repeats; ++r) {
        auto [train_set, test_set] =
            learn::split(dataset, config.split_train, config.split_test,
                         config.master_seed + static_cast<std::uint64_t>(r));
        auto model = learn::train(train_set, config.classifier);
        total += learn::evaluate(model, test_set).accuracy();
    }
    return total / repeats;
}

}  // namespace

learn::LabeledDataset generate_dataset(const ExperimentConfig& config,
                                       double sigma_current, double gain_drift) {
    config.validate();
    Generator gen(config);
    return generate(gen, config, sigma_current, gain_drift,
                    config.trials_per_class);
}

double calibrate_sigma_from_gap(const ExperimentConfig& config) {
    config.validate();
    Generator gen(config);
    auto specs = class_specs(config);

    // Noiseless mean window power per label (classes sharing a label are
    // averaged, which folds fine-tuned variants into their superclass).
    std::map<std::string, std::pair<double, int>> by_label;
    for (std::size_t c = 0; c < specs.size(); ++c) {
        auto features = gen.epoch_windows(specs[c], 0.0, 0.0, 0);
        if (features.empty())
            throw ValidationError("noiseless epoch produced no windows for " +
                                  specs[c].model);
        double mean = 0.0;
        for (const auto& f : features) mean += f.p_mea;
        mean /= static_cast<double>(features.size());
        auto& slot = by_label[specs[c].label.key(task_mode(config.task))];
        slot.first += mean;
        slot.second += 1;
    }
    std::vector<double> means;
    means.reserve(by_label.size());
    for (auto& [label, slot] : by_label) means.push_back(slot.first / slot.second);
    std::sort(means.begin(), means.end());
    if (means.size() < 2) throw ValidationError("need at least two classes");
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < means.size(); ++i)
        min_gap = std::min(min_gap, means[i + 1] - means[i]);
    if (!(min_gap > 0))
        throw ValidationError("classes have identical noiseless mean power");
    return 0.05 * min_gap / config.profile.supply_voltage;
}

double calibrate_drift_for_accuracy(const ExperimentConfig& config, double lo,
                                    double hi) {
    config.validate();
    ExperimentConfig probe = config;
    probe.trials_per_class = std::min(config.trials_per_class, 40);
    probe.repeats = 3;
    Generator gen(probe);
    double sigma = calibrate_sigma_from_gap(probe);

    auto eval = [&](double drift) -> double {
        try {
            auto dataset =
                generate(gen, probe, sigma, drift, probe.trials_per_class);
            return accuracy_over_seeds(dataset, probe, probe.repeats);
        } catch (const ValidationError&) {
            return 0.0;  // pipeline broke down; drift is too high
        }
    };

    // Bracket the band (accuracy falls as drift grows), then bisect in
    // log space. drift_lo stays above the band, drift_hi below it.
    double drift_lo = 0.05, drift_hi = 0.05;
    double acc = eval(drift_lo);
    if (acc >= lo && acc <= hi) return drift_lo;
    if (acc > hi) {
        for (int step = 0; step < 24; ++step) {
            drift_hi *= 2.0;
            double a = eval(drift_hi);
            if (a >= lo && a <= hi) return drift_hi;
            if (a < lo) break;
            drift_lo = drift_hi;
        }
    } else {
        for (int step = 0; step < 24; ++step) {
            drift_lo *= 0.5;
            double a = eval(drift_lo);
            if (a >= lo && a <= hi) return drift_lo;
            if (a > hi) break;
            drift_hi = drift_lo;
        }
    }
    for (int iter = 0; iter < 24; ++iter) {
        double mid = std::sqrt(drift_lo * drift_hi);
        double mid_acc = eval(mid);
        if (mid_acc >= lo && mid_acc <= hi) return mid;
        if (mid_acc > hi) {
            drift_lo = mid;
        } else {
            drift_hi = mid;
        }
    }
    throw ValidationError("could not calibrate noise into the requested accuracy band");
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentResult result;
    result.sigma_used = config.sigma_current >= 0 ? config.sigma_current
                                                  : calibrate_sigma_from_gap(config);
    if (config.gain_drift >= 0) {
        result.drift_used = config.gain_drift;
    } else if (config.task == Task::sparsity16) {
        result.drift_used = calibrate_drift_for_accuracy(config, 0.72, 0.88);
    }

    auto dataset = generate_dataset(config, result.sigma_used, result.drift_used);
    double superclass_total = 0.0;
    for (int r = 0; r < config.repeats; ++r) {
        auto [train_set, test_set] =
            learn::split(dataset, config.split_train, config.split_test,
                         config.master_seed + static_cast<std::uint64_t>(r));
        auto model = learn::train(train_set, config.classifier);
        auto matrix = learn::evaluate(model, test_set);
        result.per_seed_accuracy.push_back(matrix.accuracy());
        superclass_total += matrix.collapse_to_arch(model.mode).accuracy();
        if (result.aggregate.classes.empty()) {
            result.aggregate = matrix;
        } else {
            for (std::size_t i = 0; i < matrix.counts.size(); ++i)
                for (std::size_t j = 0; j < matrix.counts.size(); ++j)
                    result.aggregate.counts[i][j] += matrix.counts[i][j];
        }
    }
    double n = static_cast<double>(config.repeats);
    for (double a : result.per_seed_accuracy) result.mean_accuracy += a;
    result.mean_accuracy /= n;
    for (double a : result.per_seed_accuracy)
        result.std_accuracy += (a - result.mean_accuracy) * (a - result.mean_accuracy);
    result.std_accuracy = std::sqrt(result.std_accuracy / n);
    result.mean_superclass_accuracy = superclass_total / n;
    return result;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    return nlohmann::json{
        {"schema_version", 1},
        {"task", task_name(config.task)},
        {"trials_per_class", config.trials_per_class},
        {"repeats", config.repeats},
        {"sigma_current", config.sigma_current},
        {"gain_drift", config.gain_drift},
        {"split", {{"train", config.split_train}, {"test", config.split_test}}},
        {"group_size", config.group_size},
        {"master_seed", config.master_seed},
        {"sparsity_scales", config.sparsity_scales},
        {"profile", power::to_json(config.profile)},
        {"plan",
         {{"n_images", config.plan.n_images},
          {"startup_s", config.plan.startup_s},
          {"cooldown_s", config.plan.cooldown_s},
          {"inter_image_gap_s", config.plan.inter_image_gap_s}}},
        {"classifier",
         {{"kind", config.classifier.kind == learn::ClassifierKind::max_margin_linear
                       ? "max-margin-linear"
                       : "nearest-neighbor"},
          {"regularization", config.classifier.regularization},
          {"iterations", config.classifier.iterations},
          {"k", config.classifier.k},
          {"standardize", config.classifier.standardize}}},
        {"zoo_dir", config.zoo_dir.string()}};
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
    ExperimentConfig config;
    try {
        if (doc.value("schema_version", 1) != 1)
            throw ValidationError("unsupported config schema version");
        config.task = task_from_name(doc.at("task").get<std::string>());
        config.trials_per_class = doc.value("trials_per_class", 125);
        config.repeats = doc.value("repeats", 10);
        config.sigma_current = doc.value("sigma_current", -1.0);
        config.gain_drift = doc.value("gain_drift", -1.0);
        if (doc.contains("split")) {
            config.split_train = doc.at("split").value("train", 4);
            config.split_test = doc.at("split").value("test", 1);
        }
        config.group_size = doc.value("group_size", std::size_t{5});
        config.master_seed = doc.value("master_seed", std::uint64_t{42});
        if (doc.contains("sparsity_scales"))
            config.sparsity_scales = doc.at("sparsity_scales").get<std::vector<double>>();
        if (doc.contains("profile"))
            config.profile = power::profile_from_json(doc.at("profile"));
        if (doc.contains("plan")) {
            const auto& plan = doc.at("plan");
            config.plan.n_images = plan.value("n_images", 24);
            config.plan.startup_s = plan.value("startup_s", 2.0);
            config.plan.cooldown_s = plan.value("cooldown_s", 2.0);
            config.plan.inter_image_gap_s = plan.value("inter_image_gap_s", 0.5);
        }
        if (doc.contains("classifier")) {
            const auto& cls = doc.at("classifier");
            std::string kind = cls.value("kind", "max-margin-linear");
            if (kind == "max-margin-linear") {
                config.classifier.kind = learn::ClassifierKind::max_margin_linear;
            } else if (kind == "nearest-neighbor") {
                config.classifier.kind = learn::ClassifierKind::nearest_neighbor;
            } else {
                throw ValidationError("unknown classifier kind: " + kind);
            }
            config.classifier.regularization = cls.value("regularization", 1e-3);
            config.classifier.iterations = cls.value("iterations", 2000);
            config.classifier.k = cls.value("k", 5);
            config.classifier.standardize = cls.value("standardize", true);
        }
        config.zoo_dir = doc.value("zoo_dir", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed experiment config: ") + e.what());
    }
    return config;
}

std::string confusion_svg(const learn::ConfusionMatrix& matrix) {
    std::size_t n = matrix.classes.size();
    int cell = 36, left = 150, top = 40;
    int width = left + cell * static_cast<int>(n) + 20;
    int height = top + cell * static_cast<int>(n) + 120;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" font-family=\"monospace\" font-size=\"10\">\n";
    std::int64_t peak = 1;
    for (const auto& row : matrix.counts)
        for (std::int64_t v : row) peak = std::max(peak, v);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double frac = static_cast<double>(matrix.counts[i][j]) /
                          static_cast<double>(peak);
            int shade = static_cast<int>(255.0 * (1.0 - frac));
            char color[16];
            std::snprintf(color, sizeof color, "#%02x%02xff", shade, shade);
            svg << "<rect x=\"" << left + cell * static_cast<int>(j) << "\" y=\""
                << top + cell * static_cast<int>(i) << "\" width=\"" << cell
                << "\" height=\"" << cell << "\" fill=\"" << color
                << "\" stroke=\"#888\"/>\n";
            if (matrix.counts[i][j] > 0) {
                svg << "<text x=\"" << left + cell * static_cast<int>(j) + cell / 2
                    << "\" y=\"" << top + cell * static_cast<int>(i) + cell / 2 + 4
                    << "\" text-anchor=\"middle\">" << matrix.counts[i][j]
                    << "</text>\n";
            }
        }
        svg << "<text x=\"" << left - 6 << "\" y=\""
            << top + cell * static_cast<int>(i) + cell / 2 + 4
            << "\" text-anchor=\"end\">" << matrix.classes[i] << "</text>\n";
        svg << "<text x=\"" << left + cell * static_cast<int>(i) + cell / 2
            << "\" y=\"" << top + cell * static_cast<int>(n) + 10
            << "\" text-anchor=\"start\" transform=\"rotate(60 "
            << left + cell * static_cast<int>(i) + cell / 2 << ' '
            << top + cell * static_cast<int>(n) + 10 << ")\">" << matrix.classes[i]
            << "</text>\n";
    }
    svg << "<text x=\"" << left << "\" y=\"20\">rows: true class, columns: predicted"
        << "</text>\n</svg>\n";
    return svg.str();
}

void write_report(const ExperimentConfig& config, const ExperimentResult& result,
                  const fs::path& out_dir) {
    fs::create_directories(out_dir);

    {
        nlohmann::json doc = config_to_json(config);
        doc["sigma_used"] = result.sigma_used;
        doc["drift_used"] = result.drift_used;
        std::ofstream out(out_dir / "config.json");
        if (!out) throw IoError("cannot write config.json");
        out << doc.dump(1) << '\n';
    }
    {
        std::ofstream out(out_dir / "confusion.csv");
        if (!out) throw IoError("cannot write confusion.csv");
        learn::write_confusion_csv(result.aggregate, out);
    }
    {
        std::ofstream out(out_dir / "per_class.csv");
        if (!out) throw IoError("cannot write per_class.csv");
        out << "class,correct,total,accuracy\n";
        char buf[32];
        for (std::size_t i = 0; i < result.aggregate.classes.size(); ++i) {
            std::int64_t total = 0;
            for (std::int64_t v : result.aggregate.counts[i]) total += v;
            std::int64_t correct = result.aggregate.counts[i][i];
            double acc = total == 0 ? 0.0
                                    : static_cast<double>(correct) /
                                          static_cast<double>(total);
            std::snprintf(buf, sizeof buf, "%.4f", acc);
            out << result.aggregate.classes[i] << ',' << correct << ',' << total
                << ',' << buf << '\n';
        }
    }
    {
        std::ofstream out(out_dir / "summary.txt");
        if (!out) throw IoError("cannot write summary.txt");
        char buf[256];
        out << "task: " << task_name(config.task) << '\n';
        std::snprintf(buf, sizeof buf, "sigma_current: %.6g A\n", result.sigma_used);
        out << buf;
        std::snprintf(buf, sizeof buf, "gain_drift: %.6g\n", result.drift_used);
        out << buf;
        std::snprintf(buf, sizeof buf,
                      "accuracy: %.4f +/- %.4f over %d split seeds\n",
                      result.mean_accuracy, result.std_accuracy, config.repeats);
        out << buf;
        std::snprintf(buf, sizeof buf, "superclass_accuracy: %.4f\n",
                      result.mean_superclass_accuracy);
        out << buf;
        out << "classes: " << result.aggregate.classes.size() << '\n';
    }
    {
        std::ofstream out(out_dir / "confusion.svg");
        if (!out) throw IoError("cannot write confusion.svg");
        out << confusion_svg(result.aggregate);
    }
}

}  // namespace sca::exp
