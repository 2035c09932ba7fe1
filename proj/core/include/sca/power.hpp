#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sca/arch.hpp"

namespace sca::power {

/// Per-operation energy costs and device characteristics. The energy
/// numbers are calibration defaults, not measured hardware data.
struct DevicePowerProfile {
    double p_m = 2e-9;    // J per multiplication
    double p_a = 1e-9;    // J per addition
    double p_c = 1e-9;    // J per comparison
    double p_ac = 1e-9;   // J per activation operation
    double idle_power = 2.0;      // W
    double supply_voltage = 5.0;  // V
    double throughput = 4.6e9;    // ops/s
    double sample_rate = 400.0;   // Hz

    void validate() const;
};

/// Conv (lambda1) and FC (lambda2) sparsity coefficients in (0, 1].
struct SparsityConfig {
    double lambda1 = 1.0;
    double lambda2 = 1.0;

    void validate() const;
};

struct EnergyBreakdown {
    struct Entry {
        std::size_t layer_index;
        std::string kind;
        double joules;
    };
    std::vector<Entry> per_layer;
    double total = 0.0;
};

double conv_energy(const arch::ConvLayer& layer, const DevicePowerProfile& profile,
                   const SparsityConfig& sparsity);
double pool_energy(const arch::PoolLayer& layer, const DevicePowerProfile& profile);
double fc_energy(const arch::FcLayer& layer, const DevicePowerProfile& profile,
                 const SparsityConfig& sparsity);
double act_energy(const arch::ActivationLayer& layer, const DevicePowerProfile& profile);
double layer_energy(const arch::Layer& layer, const DevicePowerProfile& profile,
                    const SparsityConfig& sparsity);

/// Energy of one inference pass, per layer and total.
EnergyBreakdown arch_energy(const arch::ArchitectureSpec& arch,
                            const DevicePowerProfile& profile,
                            const SparsityConfig& sparsity);

nlohmann::json to_json(const DevicePowerProfile& profile);
DevicePowerProfile profile_from_json(const nlohmann::json& doc);
DevicePowerProfile load_profile(const std::filesystem::path& path);

nlohmann::json to_json(const SparsityConfig& sparsity);
SparsityConfig sparsity_from_json(const nlohmann::json& doc);

/// CSV export: layer_index,kind,energy_joules
void write_breakdown_csv(const EnergyBreakdown& breakdown, std::ostream& out);

}  // namespace sca::power
