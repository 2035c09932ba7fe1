#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sca/arch.hpp"
#include "sca/power.hpp"

namespace sca::synth {

/// Additive i.i.d. Gaussian noise on the sampled channels, plus an
/// optional slow component: a gain factor scaling each image's
/// above-idle power performs a Gaussian random walk across the epoch
/// (step std gain_drift, start 1.0), modeling supply/thermal drift
/// between inferences. Identical seeds produce identical traces.
struct NoiseModel {
    double sigma_current = 0.05;  // A
    double sigma_voltage = 0.0;   // V
    std::uint64_t seed = 0;
    double gain_drift = 0.0;      // relative, walk step per image
};

/// Timing layout of one acquisition epoch: idle lead-in, n_images
/// inferences separated by idle gaps, idle tail.
struct EpochPlan {
    int n_images = 24;
    double startup_s = 2.0;
    double cooldown_s = 2.0;
    double inter_image_gap_s = 0.5;
};

struct TraceMeta {
    std::string source = "synthetic";  // "synthetic" or "hardware"
    std::string arch_name;
    std::string variant;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    std::uint64_t seed = 0;
    double sigma_current = 0.0;
    double sigma_voltage = 0.0;
    double gain_drift = 0.0;
    EpochPlan plan;
    // Ground-truth [start, end) sample spans of each image inference.
    std::vector<std::pair<std::size_t, std::size_t>> image_spans;
};

struct PowerTrace {
    std::vector<double> voltage;  // V
    std::vector<double> current;  // A
    double sample_rate = 400.0;   // Hz
    TraceMeta meta;

    std::size_t size() const { return voltage.size(); }
    void validate() const;
};

/// Epoch trace per the plan. Each layer of each inference holds a
/// constant power level of idle + energy/duration for ops/throughput
/// seconds; samples integrate the staircase over their sample interval,
/// so the above-idle trace energy matches arch_energy up to rounding.
PowerTrace synthesize_epoch(const arch::ArchitectureSpec& arch,
                            const power::DevicePowerProfile& profile,
                            const power::SparsityConfig& sparsity,
                            const NoiseModel& noise, const EpochPlan& plan);

/// Single inference with no idle framing (an epoch of one image with
/// zero startup, cooldown, and gap).
PowerTrace synthesize_image_inference(const arch::ArchitectureSpec& arch,
                                      const power::DevicePowerProfile& profile,
                                      const power::SparsityConfig& sparsity,
                                      const NoiseModel& noise);

/// Above-idle energy of a sampled trace: sum of max(u*i - idle, 0) / rate.
double trace_energy(const PowerTrace& trace, double idle_power);

nlohmann::json meta_to_json(const TraceMeta& meta);
TraceMeta meta_from_json(const nlohmann::json& doc);

/// CSV format: header "sample_index,voltage_v,current_a" plus a sidecar
/// <stem>.meta.json. Hardware captures may omit the sidecar.
void write_trace_csv(const PowerTrace& trace, const std::filesystem::path& csv_path);
PowerTrace read_trace_csv(const std::filesystem::path& csv_path);

std::filesystem::path meta_path_for(const std::filesystem::path& csv_path);

/// Deterministic per-task seed stream: mixes a master seed with task
/// coordinates so parallel and serial generation agree.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

}  // namespace sca::synth
