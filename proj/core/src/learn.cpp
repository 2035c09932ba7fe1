#include "sca/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sca::learn {

const char* task_mode_name(TaskMode mode) {
    return mode == TaskMode::coarse ? "coarse" : "fine";
}

TaskMode task_mode_from_name(const std::string& name) {
    if (name == "coarse") return TaskMode::coarse;
    if (name == "fine") return TaskMode::fine;
    throw ValidationError("unknown task mode: " + name);
}

std::string ClassLabel::key(TaskMode mode) const {
    if (mode == TaskMode::coarse) return arch;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", sparsity);
    return arch + "@" + buf;
}

ClassLabel ClassLabel::from_key(const std::string& key, TaskMode mode) {
    ClassLabel label;
    if (mode == TaskMode::coarse) {
        label.arch = key;
        label.sparsity = 1.0;
        return label;
    }
    auto at = key.rfind('@');
    if (at == std::string::npos)
        throw ValidationError("fine class key lacks sparsity part: " + key);
    label.arch = key.substr(0, at);
    label.sparsity = std::stod(key.substr(at + 1));
    return label;
}

std::vector<std::string> LabeledDataset::class_space() const {
    std::vector<std::string> keys;
    keys.reserve(rows.size());
    for (const auto& row : rows) keys.push_back(row.label.key(mode));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

void LabeledDataset::validate() const {
    if (rows.empty()) throw ValidationError("dataset is empty");
    for (const auto& row : rows) {
        if (row.label.arch.empty()) throw ValidationError("row without arch label");
        if (!(row.label.sparsity > 0 && row.label.sparsity <= 1))
            throw ValidationError("sparsity label outside (0, 1]");
    }
}

Scaler fit_scaler(const std::vector<LabeledRow>& rows) {
    if (rows.empty()) throw ValidationError("cannot fit scaler on empty data");
    Scaler scaler;
    double n = static_cast<double>(rows.size());
    for (const auto& row : rows) {
        scaler.mean[0] += row.features.p_mea;
        scaler.mean[1] += row.features.p_mid;
        scaler.mean[2] += row.features.p_std;
    }
    for (double& m : scaler.mean) m /= n;
    for (const auto& row : rows) {
        std::array<double, 3> x{row.features.p_mea, row.features.p_mid,
                                row.features.p_std};
        for (int j = 0; j < 3; ++j)
            scaler.stddev[j] += (x[j] - scaler.mean[j]) * (x[j] - scaler.mean[j]);
    }
    for (int j = 0; j < 3; ++j) {
        scaler.stddev[j] = std::sqrt(scaler.stddev[j] / n);
        if (!(scaler.stddev[j] > 0))
            throw ValidationError("zero-variance feature column " + std::to_string(j));
    }
    return scaler;
}

std::array<double, 3> Scaler::apply(const dsp::FeatureVector& f) const {
    return {(f.p_mea - mean[0]) / stddev[0], (f.p_mid - mean[1]) / stddev[1],
            (f.p_std - mean[2]) / stddev[2]};
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

Scaler identity_scaler() {
    Scaler s;
    s.mean = {0, 0, 0};
    s.stddev = {1, 1, 1};
    return s;
}

std::array<double, 3> model_features(const ClassifierModel& model,
                                     const dsp::FeatureVector& f) {
    return model.scaler.apply(f);
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset,
                                                int train_ratio, int test_ratio,
                                                std::uint64_t seed) {
    dataset.validate();
    if (train_ratio < 1 || test_ratio < 1)
        throw ValidationError("split ratio parts must be positive integers");

    auto classes = dataset.class_space();
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < dataset.rows.size(); ++i)
        by_class[dataset.rows[i].label.key(dataset.mode)].push_back(i);

    LabeledDataset train_set{dataset.mode, {}};
    LabeledDataset test_set{dataset.mode, {}};
    std::size_t min_rows = static_cast<std::size_t>(train_ratio + test_ratio);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        auto& indices = by_class[classes[c]];
        if (indices.size() < min_rows)
            throw ValidationError("class " + classes[c] + " has only " +
                                  std::to_string(indices.size()) + " rows; needs >= " +
                                  std::to_string(min_rows));
        std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + fnv1a(classes[c]));
        std::shuffle(indices.begin(), indices.end(), rng);
        std::size_t n_test = indices.size() * static_cast<std::size_t>(test_ratio) /
                             min_rows;
        n_test = std::max<std::size_t>(n_test, 1);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            auto& dst = i < n_test ? test_set : train_set;
            dst.rows.push_back(dataset.rows[indices[i]]);
        }
    }
    return {std::move(train_set), std::move(test_set)};
}

namespace {

// One-vs-rest linear soft-margin training: full-batch subgradient
// descent on the regularized hinge objective with 1/(lambda*t) steps and
// suffix averaging over the last half of the iterates.
std::array<double, 4> train_binary(const std::vector<std::array<double, 3>>& x,
                                   const std::vector<double>& y, double reg,
                                   int iterations) {
    std::array<double, 4> wb{0, 0, 0, 0};
    std::array<double, 4> avg{0, 0, 0, 0};
    int averaged = 0;
    double n = static_cast<double>(x.size());
    double radius = 1.0 / std::sqrt(reg);
    for (int t = 1; t <= iterations; ++t) {
        std::array<double, 4> grad{reg * wb[0], reg * wb[1], reg * wb[2], 0.0};
        for (std::size_t i = 0; i < x.size(); ++i) {
            double margin =
                y[i] * (wb[0] * x[i][0] + wb[1] * x[i][1] + wb[2] * x[i][2] + wb[3]);
            if (margin < 1.0) {
                grad[0] -= y[i] * x[i][0] / n;
                grad[1] -= y[i] * x[i][1] / n;
                grad[2] -= y[i] * x[i][2] / n;
                grad[3] -= y[i] / n;
            }
        }
        double eta = 1.0 / (reg * (static_cast<double>(t) + 1.0 / reg));
        for (int j = 0; j < 4; ++j) wb[j] -= eta * grad[j];
        double norm = std::sqrt(wb[0] * wb[0] + wb[1] * wb[1] + wb[2] * wb[2]);
        if (norm > radius)
            for (int j = 0; j < 3; ++j) wb[j] *= radius / norm;
        if (t > iterations / 2) {
            for (int j = 0; j < 4; ++j) avg[j] += wb[j];
            ++averaged;
        }
    }
    for (int j = 0; j < 4; ++j) avg[j] /= static_cast<double>(averaged);
    return avg;
}

}  // namespace

ClassifierModel train(const LabeledDataset& train_set, const TrainConfig& config) {
    train_set.validate();
    auto classes = train_set.class_space();
    if (classes.size() < 2)
        throw ValidationError("training requires at least two classes");

    ClassifierModel model;
    model.kind = config.kind;
    model.mode = train_set.mode;
    model.standardize = config.standardize;
    model.scaler =
        config.standardize ? fit_scaler(train_set.rows) : identity_scaler();
    model.classes = classes;
    model.k = config.k;

    std::vector<std::array<double, 3>> x;
    std::vector<std::size_t> class_index;
    x.reserve(train_set.rows.size());
    for (const auto& row : train_set.rows) {
        x.push_back(model.scaler.apply(row.features));
        auto it = std::lower_bound(classes.begin(), classes.end(),
                                   row.label.key(train_set.mode));
        class_index.push_back(static_cast<std::size_t>(it - classes.begin()));
    }

    if (config.kind == ClassifierKind::nearest_neighbor) {
        if (config.k < 1) throw ValidationError("k must be >= 1");
        model.train_points = std::move(x);
        model.train_classes = std::move(class_index);
        return model;
    }

    if (config.iterations < 1) throw ValidationError("iterations must be >= 1");
    model.weights.reserve(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c) {
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            y[i] = class_index[i] == c ? 1.0 : -1.0;
        model.weights.push_back(
            train_binary(x, y, config.regularization, config.iterations));
    }
    return model;
}

ClassLabel predict(const ClassifierModel& model, const dsp::FeatureVector& features) {
    auto x = model_features(model, features);
    std::size_t best = 0;
    if (model.kind == ClassifierKind::max_margin_linear) {
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < model.classes.size(); ++c) {
            const auto& wb = model.weights[c];
            double score = wb[0] * x[0] + wb[1] * x[1] + wb[2] * x[2] + wb[3];
            if (score > best_score) {
                best_score = score;
                best = c;
            }
        }
    } else {
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(model.train_points.size());
        for (std::size_t i = 0; i < model.train_points.size(); ++i) {
            const auto& p = model.train_points[i];
            double d = 0;
            for (int j = 0; j < 3; ++j) d += (p[j] - x[j]) * (p[j] - x[j]);
            dist.emplace_back(d, i);
        }
        std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(model.k),
                                              dist.size());
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        std::vector<std::size_t> votes(model.classes.size(), 0);
        for (std::size_t i = 0; i < k; ++i)
            ++votes[model.train_classes[dist[i].second]];
        std::size_t best_votes = 0;
        for (std::size_t c = 0; c < votes.size(); ++c) {
            if (votes[c] > best_votes) {
                best_votes = votes[c];
                best = c;
            }
        }
    }
    ClassLabel label = ClassLabel::from_key(model.classes[best], model.mode);
    if (model.mode == TaskMode::coarse) label.sparsity = 1.0;
    return label;
}

double hinge_objective(const ClassifierModel& model, const LabeledDataset& dataset,
                       double regularization) {
    if (model.kind != ClassifierKind::max_margin_linear)
        throw ValidationError("hinge objective requires a max-margin model");
    double total = 0.0;
    double n = static_cast<double>(dataset.rows.size());
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
        const auto& wb = model.weights[c];
        total += 0.5 * regularization *
                 (wb[0] * wb[0] + wb[1] * wb[1] + wb[2] * wb[2]);
        double hinge = 0.0;
        for (const auto& row : dataset.rows) {
            auto x = model.scaler.apply(row.features);
            double y = row.label.key(dataset.mode) == model.classes[c] ? 1.0 : -1.0;
            double margin = y * (wb[0] * x[0] + wb[1] * x[1] + wb[2] * x[2] + wb[3]);
            hinge += std::max(0.0, 1.0 - margin);
        }
        total += hinge / n;
    }
    return total;
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t sum = 0;
    for (const auto& row : counts)
        for (std::int64_t v : row) sum += v;
    return sum;
}

double ConfusionMatrix::accuracy() const {
    std::int64_t diag = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) diag += counts[i][i];
    std::int64_t all = total();
    return all == 0 ? 0.0 : static_cast<double>(diag) / static_cast<double>(all);
}

ConfusionMatrix ConfusionMatrix::collapse_to_arch(TaskMode mode) const {
    std::vector<std::string> archs;
    archs.reserve(classes.size());
    for (const auto& key : classes) archs.push_back(ClassLabel::from_key(key, mode).arch);
    std::vector<std::string> unique_archs = archs;
    std::sort(unique_archs.begin(), unique_archs.end());
    unique_archs.erase(std::unique(unique_archs.begin(), unique_archs.end()),
                       unique_archs.end());
    auto index_of = [&](const std::string& a) {
        return static_cast<std::size_t>(
            std::lower_bound(unique_archs.begin(), unique_archs.end(), a) -
            unique_archs.begin());
    };
    ConfusionMatrix out;
    out.classes = unique_archs;
    out.counts.assign(unique_archs.size(),
                      std::vector<std::int64_t>(unique_archs.size(), 0));
    for (std::size_t i = 0; i < classes.size(); ++i)
        for (std::size_t j = 0; j < classes.size(); ++j)
            out.counts[index_of(archs[i])][index_of(archs[j])] += counts[i][j];
    return out;
}

ConfusionMatrix evaluate(const ClassifierModel& model, const LabeledDataset& test_set) {
    test_set.validate();
    ConfusionMatrix matrix;
    matrix.classes = model.classes;
    matrix.counts.assign(model.classes.size(),
                         std::vector<std::int64_t>(model.classes.size(), 0));
    for (const auto& row : test_set.rows) {
        std::string true_key = row.label.key(model.mode);
        auto it = std::lower_bound(model.classes.begin(), model.classes.end(), true_key);
        if (it == model.classes.end() || *it != true_key)
            throw ValidationError("test label not in model class space: " + true_key);
        auto truth = static_cast<std::size_t>(it - model.classes.begin());
        ClassLabel predicted = predict(model, row.features);
        std::string pred_key = predicted.key(model.mode);
        auto pit = std::lower_bound(model.classes.begin(), model.classes.end(), pred_key);
        ++matrix.counts[truth][static_cast<std::size_t>(pit - model.classes.begin())];
    }
    return matrix;
}

void write_confusion_csv(const ConfusionMatrix& matrix, std::ostream& out) {
    out << "class";
    for (const auto& c : matrix.classes) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < matrix.classes.size(); ++i) {
        out << matrix.classes[i];
        for (std::int64_t v : matrix.counts[i]) out << ',' << v;
        out << '\n';
    }
}

ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open confusion file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("class", 0) != 0)
        throw IoError("bad confusion header in " + path.string());
    ConfusionMatrix matrix;
    {
        std::istringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        while (std::getline(ss, field, ',')) matrix.classes.push_back(field);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        std::vector<std::int64_t> row;
        while (std::getline(ss, field, ',')) row.push_back(std::stoll(field));
        if (row.size() != matrix.classes.size())
            throw IoError("ragged confusion row in " + path.string());
        matrix.counts.push_back(std::move(row));
    }
    if (matrix.counts.size() != matrix.classes.size())
        throw IoError("confusion matrix is not square in " + path.string());
    return matrix;
}

nlohmann::json to_json(const ClassifierModel& model) {
    nlohmann::json doc{
        {"kind", model.kind == ClassifierKind::max_margin_linear ? "max-margin-linear"
                                                                 : "nearest-neighbor"},
        {"mode", task_mode_name(model.mode)},
        {"standardize", model.standardize},
        {"scaler", {{"mean", model.scaler.mean}, {"stddev", model.scaler.stddev}}},
        {"classes", model.classes},
        {"group_size", model.group_size}};
    if (model.kind == ClassifierKind::max_margin_linear) {
        doc["weights"] = model.weights;
    } else {
        doc["k"] = model.k;
        doc["train_points"] = model.train_points;
        doc["train_classes"] = model.train_classes;
    }
    return doc;
}

ClassifierModel model_from_json(const nlohmann::json& doc) {
    ClassifierModel model;
    try {
        std::string kind = doc.at("kind").get<std::string>();
        if (kind == "max-margin-linear") {
            model.kind = ClassifierKind::max_margin_linear;
        } else if (kind == "nearest-neighbor") {
            model.kind = ClassifierKind::nearest_neighbor;
        } else {
            throw ValidationError("unknown classifier kind: " + kind);
        }
        model.mode = task_mode_from_name(doc.at("mode").get<std::string>());
        model.standardize = doc.value("standardize", true);
        model.scaler.mean = doc.at("scaler").at("mean").get<std::array<double, 3>>();
        model.scaler.stddev = doc.at("scaler").at("stddev").get<std::array<double, 3>>();
        model.classes = doc.at("classes").get<std::vector<std::string>>();
        model.group_size = doc.value("group_size", std::size_t{5});
        if (model.kind == ClassifierKind::max_margin_linear) {
            model.weights =
                doc.at("weights").get<std::vector<std::array<double, 4>>>();
        } else {
            model.k = doc.at("k").get<int>();
            model.train_points =
                doc.at("train_points").get<std::vector<std::array<double, 3>>>();
            model.train_classes =
                doc.at("train_classes").get<std::vector<std::size_t>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model document: ") + e.what());
    }
    return model;
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path.string());
    out << to_json(model).dump(1) << '\n';
}

ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt model file " + path.string() + ": " + e.what());
    }
    return model_from_json(doc);
}

LabeledDataset dataset_from_rows(const std::vector<dsp::FeatureRow>& rows,
                                 TaskMode mode) {
    LabeledDataset dataset{mode, {}};
    for (const auto& row : rows) {
        if (row.arch_label.empty())
            throw ValidationError("feature row without arch label cannot join a dataset");
        LabeledRow out;
        out.features = row.features;
        out.label.arch = row.arch_label;
        out.label.sparsity = row.sparsity_label.value_or(1.0);
        dataset.rows.push_back(std::move(out));
    }
    dataset.validate();
    return dataset;
}

}  // namespace sca::learn
