#include "sca/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sca::synth {

namespace fs = std::filesystem;

void PowerTrace::validate() const {
    if (voltage.empty()) throw ValidationError("trace is empty");
    if (voltage.size() != current.size())
        throw ValidationError("voltage and current arrays differ in length");
    if (!(sample_rate > 0)) throw ValidationError("sample_rate must be positive");
    for (double u : voltage) {
        if (!(u > 0)) throw ValidationError("voltage samples must be positive");
        if (!std::isfinite(u)) throw ValidationError("non-finite voltage sample");
    }
    for (double i : current)
        if (!std::isfinite(i)) throw ValidationError("non-finite current sample");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    // splitmix64 over the packed coordinates
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (a + 1) +
                      0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

struct Step {
    double duration;     // s
    double above_idle;   // W above idle during the step
};

// Accumulates above-idle energy of a piecewise-constant power profile
// into fixed-width sample bins.
class BinAccumulator {
  public:
    BinAccumulator(std::size_t n_bins, double dt) : energy_(n_bins, 0.0), dt_(dt) {}

    void add(double t0, double t1, double above_idle) {
        if (above_idle == 0.0 || t1 <= t0) return;
        std::size_t first = static_cast<std::size_t>(std::max(0.0, t0 / dt_));
        for (std::size_t bin = first; bin < energy_.size(); ++bin) {
            double lo = std::max(t0, static_cast<double>(bin) * dt_);
            double hi = std::min(t1, static_cast<double>(bin + 1) * dt_);
            if (hi <= lo) {
                if (lo >= t1) break;
                continue;
            }
            energy_[bin] += above_idle * (hi - lo);
        }
    }

    const std::vector<double>& energy() const { return energy_; }

  private:
    std::vector<double> energy_;
    double dt_;
};

}  // namespace

PowerTrace synthesize_epoch(const arch::ArchitectureSpec& arch,
                            const power::DevicePowerProfile& profile,
                            const power::SparsityConfig& sparsity,
                            const NoiseModel& noise, const EpochPlan& plan) {
    arch::throw_if_invalid(arch);
    profile.validate();
    sparsity.validate();
    if (plan.n_images < 1) throw ValidationError("plan.n_images must be >= 1");
    if (plan.startup_s < 0 || plan.cooldown_s < 0 || plan.inter_image_gap_s < 0)
        throw ValidationError("plan durations must be >= 0");
    if (!(noise.sigma_current >= 0 && noise.sigma_voltage >= 0))
        throw ValidationError("noise sigmas must be >= 0");
    if (!(noise.gain_drift >= 0))
        throw ValidationError("noise gain_drift must be >= 0");

    auto counts = arch::arch_op_counts(arch);
    auto energy = power::arch_energy(arch, profile, sparsity);

    std::vector<Step> image_steps;
    image_steps.reserve(counts.per_layer.size());
    double image_duration = 0.0;
    for (std::size_t i = 0; i < counts.per_layer.size(); ++i) {
        double ops = static_cast<double>(counts.per_layer[i].second.total());
        double duration = ops / profile.throughput;
        double above = duration > 0 ? energy.per_layer[i].joules / duration : 0.0;
        image_steps.push_back(Step{duration, above});
        image_duration += duration;
    }

    double dt = 1.0 / profile.sample_rate;
    if (image_duration < dt) {
        std::ostringstream msg;
        msg << "trace unresolvable at sample rate: image inference lasts "
            << image_duration << " s but the sample period is " << dt << " s";
        throw ValidationError(msg.str());
    }

    double total = plan.startup_s + plan.cooldown_s +
                   plan.n_images * image_duration +
                   (plan.n_images - 1) * plan.inter_image_gap_s;
    auto n = static_cast<std::size_t>(std::ceil(total / dt - 1e-9));
    n = std::max<std::size_t>(n, 1);

    std::mt19937_64 rng(noise.seed);
    std::vector<double> gains(static_cast<std::size_t>(plan.n_images), 1.0);
    if (noise.gain_drift > 0) {
        std::normal_distribution<double> step(0.0, noise.gain_drift);
        double g = 1.0;
        for (double& gain : gains) {
            g += step(rng);
            gain = std::max(0.0, g);
        }
    }

    BinAccumulator bins(n, dt);
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    double t = plan.startup_s;
    for (int img = 0; img < plan.n_images; ++img) {
        double start = t;
        for (const Step& step : image_steps) {
            bins.add(t, t + step.duration, gains[img] * step.above_idle);
            t += step.duration;
        }
        auto first = static_cast<std::size_t>(std::floor(start / dt + 1e-9));
        auto last = static_cast<std::size_t>(std::ceil(t / dt - 1e-9));
        spans.emplace_back(first, std::min(last, n));
        t += plan.inter_image_gap_s;
    }

    PowerTrace trace;
    trace.sample_rate = profile.sample_rate;
    trace.voltage.assign(n, profile.supply_voltage);
    trace.current.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double watts = profile.idle_power + bins.energy()[i] / dt;
        trace.current[i] = watts / profile.supply_voltage;
    }

    if (noise.sigma_current > 0) {
        std::normal_distribution<double> dist(0.0, noise.sigma_current);
        for (double& i : trace.current) i += dist(rng);
    }
    if (noise.sigma_voltage > 0) {
        std::normal_distribution<double> dist(0.0, noise.sigma_voltage);
        for (double& u : trace.voltage) u = std::max(1e-6, u + dist(rng));
    }

    trace.meta.source = "synthetic";
    trace.meta.arch_name = arch.name;
    trace.meta.variant = arch.variant;
    trace.meta.lambda1 = sparsity.lambda1;
    trace.meta.lambda2 = sparsity.lambda2;
    trace.meta.seed = noise.seed;
    trace.meta.sigma_current = noise.sigma_current;
    trace.meta.sigma_voltage = noise.sigma_voltage;
    trace.meta.gain_drift = noise.gain_drift;
    trace.meta.plan = plan;
    trace.meta.image_spans = std::move(spans);
    return trace;
}

PowerTrace synthesize_image_inference(const arch::ArchitectureSpec& arch,
                                      const power::DevicePowerProfile& profile,
                                      const power::SparsityConfig& sparsity,
                                      const NoiseModel& noise) {
    return synthesize_epoch(arch, profile, sparsity, noise, EpochPlan{1, 0.0, 0.0, 0.0});
}

double trace_energy(const PowerTrace& trace, double idle_power) {
    trace.validate();
    double dt = 1.0 / trace.sample_rate;
    double joules = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i)
        joules += std::max(trace.voltage[i] * trace.current[i] - idle_power, 0.0) * dt;
    return joules;
}

nlohmann::json meta_to_json(const TraceMeta& meta) {
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& [start, end] : meta.image_spans)
        spans.push_back({{"start", start}, {"end", end}});
    return nlohmann::json{
        {"source", meta.source},
        {"arch", meta.arch_name},
        {"variant", meta.variant},
        {"lambda1", meta.lambda1},
        {"lambda2", meta.lambda2},
        {"seed", meta.seed},
        {"sigma_current", meta.sigma_current},
        {"sigma_voltage", meta.sigma_voltage},
        {"gain_drift", meta.gain_drift},
        {"plan",
         {{"n_images", meta.plan.n_images},
          {"startup_s", meta.plan.startup_s},
          {"cooldown_s", meta.plan.cooldown_s},
          {"inter_image_gap_s", meta.plan.inter_image_gap_s}}},
        {"images", std::move(spans)}};
}

TraceMeta meta_from_json(const nlohmann::json& doc) {
    TraceMeta meta;
    try {
        meta.source = doc.value("source", "synthetic");
        meta.arch_name = doc.value("arch", "");
        meta.variant = doc.value("variant", "");
        meta.lambda1 = doc.value("lambda1", 1.0);
        meta.lambda2 = doc.value("lambda2", 1.0);
        meta.seed = doc.value("seed", std::uint64_t{0});
        meta.sigma_current = doc.value("sigma_current", 0.0);
        meta.sigma_voltage = doc.value("sigma_voltage", 0.0);
        meta.gain_drift = doc.value("gain_drift", 0.0);
        if (doc.contains("plan")) {
            const auto& plan = doc.at("plan");
            meta.plan.n_images = plan.value("n_images", 24);
            meta.plan.startup_s = plan.value("startup_s", 2.0);
            meta.plan.cooldown_s = plan.value("cooldown_s", 2.0);
            meta.plan.inter_image_gap_s = plan.value("inter_image_gap_s", 0.5);
        }
        if (doc.contains("images")) {
            for (const auto& span : doc.at("images"))
                meta.image_spans.emplace_back(span.at("start").get<std::size_t>(),
                                              span.at("end").get<std::size_t>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed trace meta: ") + e.what());
    }
    return meta;
}

fs::path meta_path_for(const fs::path& csv_path) {
    fs::path meta = csv_path;
    meta.replace_extension(".meta.json");
    return meta;
}

void write_trace_csv(const PowerTrace& trace, const fs::path& csv_path) {
    trace.validate();
    std::ofstream out(csv_path);
    if (!out) throw IoError("cannot write trace file: " + csv_path.string());
    out << "sample_index,voltage_v,current_a\n";
    char buf[128];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, trace.voltage[i],
                      trace.current[i]);
        out << buf;
    }
    if (!out) throw IoError("failed writing trace file: " + csv_path.string());

    nlohmann::json meta = meta_to_json(trace.meta);
    meta["sample_rate"] = trace.sample_rate;
    std::ofstream meta_out(meta_path_for(csv_path));
    if (!meta_out) throw IoError("cannot write meta file");
    meta_out << meta.dump(1) << '\n';
}

PowerTrace read_trace_csv(const fs::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open trace file: " + csv_path.string());
    PowerTrace trace;
    std::string line;
    if (!std::getline(in, line) || line.rfind("sample_index", 0) != 0)
        throw IoError("bad trace header in " + csv_path.string());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t idx = 0;
        double u = 0, i = 0;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf", &idx, &u, &i) != 3)
            throw IoError("bad trace row in " + csv_path.string() + ": " + line);
        trace.voltage.push_back(u);
        trace.current.push_back(i);
    }

    fs::path meta_path = meta_path_for(csv_path);
    if (fs::exists(meta_path)) {
        std::ifstream meta_in(meta_path);
        nlohmann::json doc;
        try {
            meta_in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("corrupt meta file " + meta_path.string() + ": " + e.what());
        }
        trace.meta = meta_from_json(doc);
        trace.sample_rate = doc.value("sample_rate", 400.0);
    } else {
        trace.meta = TraceMeta{};
        trace.meta.source = "hardware";
        trace.sample_rate = 400.0;
    }
    trace.validate();
    return trace;
}

}  // namespace sca::synth
