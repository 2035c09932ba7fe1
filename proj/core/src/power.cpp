#include "sca/power.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace sca::power {

void DevicePowerProfile::validate() const {
    if (!(p_m > 0 && p_a > 0 && p_c > 0 && p_ac > 0))
        throw ValidationError("per-operation energies must be positive");
    if (idle_power < 0) throw ValidationError("idle_power must be >= 0");
    if (!(supply_voltage > 0)) throw ValidationError("supply_voltage must be positive");
    if (!(throughput > 0)) throw ValidationError("throughput must be positive");
    if (!(sample_rate > 0)) throw ValidationError("sample_rate must be positive");
}

void SparsityConfig::validate() const {
    if (!(lambda1 > 0 && lambda1 <= 1))
        throw ValidationError("lambda1 must be in (0, 1]");
    if (!(lambda2 > 0 && lambda2 <= 1))
        throw ValidationError("lambda2 must be in (0, 1]");
}

double conv_energy(const arch::ConvLayer& layer, const DevicePowerProfile& profile,
                   const SparsityConfig& sparsity) {
    auto count = arch::conv_op_count(layer);
    return sparsity.lambda1 * (profile.p_m * static_cast<double>(count.mul) +
                               profile.p_a * static_cast<double>(count.add));
}

double pool_energy(const arch::PoolLayer& layer, const DevicePowerProfile& profile) {
    auto count = arch::pool_op_count(layer);
    return profile.p_c * static_cast<double>(count.cmp);
}

double fc_energy(const arch::FcLayer& layer, const DevicePowerProfile& profile,
                 const SparsityConfig& sparsity) {
    auto count = arch::fc_op_count(layer);
    return sparsity.lambda2 * (profile.p_m * static_cast<double>(count.mul) +
                               profile.p_a * static_cast<double>(count.add));
}

double act_energy(const arch::ActivationLayer& layer, const DevicePowerProfile& profile) {
    auto count = arch::act_op_count(layer);
    return profile.p_ac * static_cast<double>(count.act);
}

double layer_energy(const arch::Layer& layer, const DevicePowerProfile& profile,
                    const SparsityConfig& sparsity) {
    struct Visitor {
        const DevicePowerProfile& profile;
        const SparsityConfig& sparsity;
        double operator()(const arch::ConvLayer& y) const {
            return conv_energy(y, profile, sparsity);
        }
        double operator()(const arch::PoolLayer& y) const {
            return pool_energy(y, profile);
        }
        double operator()(const arch::FcLayer& y) const {
            return fc_energy(y, profile, sparsity);
        }
        double operator()(const arch::ActivationLayer& y) const {
            return act_energy(y, profile);
        }
    };
    return std::visit(Visitor{profile, sparsity}, layer);
}

EnergyBreakdown arch_energy(const arch::ArchitectureSpec& arch,
                            const DevicePowerProfile& profile,
                            const SparsityConfig& sparsity) {
    profile.validate();
    sparsity.validate();
    EnergyBreakdown out;
    out.per_layer.reserve(arch.layers.size());
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        try {
            double joules = layer_energy(arch.layers[i], profile, sparsity);
            out.per_layer.push_back(
                {i, arch::layer_kind_name(arch.layers[i]), joules});
            out.total += joules;
        } catch (const std::runtime_error& e) {
            throw ValidationError("layer " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

nlohmann::json to_json(const DevicePowerProfile& p) {
    return nlohmann::json{{"p_m", p.p_m},
                          {"p_a", p.p_a},
                          {"p_c", p.p_c},
                          {"p_ac", p.p_ac},
                          {"idle_power", p.idle_power},
                          {"supply_voltage", p.supply_voltage},
                          {"throughput", p.throughput},
                          {"sample_rate", p.sample_rate}};
}

DevicePowerProfile profile_from_json(const nlohmann::json& doc) {
    DevicePowerProfile p;
    try {
        p.p_m = doc.at("p_m").get<double>();
        p.p_a = doc.at("p_a").get<double>();
        p.p_c = doc.at("p_c").get<double>();
        p.p_ac = doc.at("p_ac").get<double>();
        p.idle_power = doc.at("idle_power").get<double>();
        p.supply_voltage = doc.at("supply_voltage").get<double>();
        p.throughput = doc.at("throughput").get<double>();
        p.sample_rate = doc.value("sample_rate", 400.0);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed profile document: ") + e.what());
    }
    p.validate();
    return p;
}

DevicePowerProfile load_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profile file: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt profile file " + path.string() + ": " + e.what());
    }
    return profile_from_json(doc);
}

nlohmann::json to_json(const SparsityConfig& s) {
    return nlohmann::json{{"lambda1", s.lambda1}, {"lambda2", s.lambda2}};
}

SparsityConfig sparsity_from_json(const nlohmann::json& doc) {
    SparsityConfig s;
    try {
        s.lambda1 = doc.at("lambda1").get<double>();
        s.lambda2 = doc.at("lambda2").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed sparsity document: ") + e.what());
    }
    s.validate();
    return s;
}

void write_breakdown_csv(const EnergyBreakdown& breakdown, std::ostream& out) {
    out << "layer_index,kind,energy_joules\n";
    char buf[64];
    for (const auto& entry : breakdown.per_layer) {
        std::snprintf(buf, sizeof buf, "%.17g", entry.joules);
        out << entry.layer_index << ',' << entry.kind << ',' << buf << '\n';
    }
}

}  // namespace sca::power
