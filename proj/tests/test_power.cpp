#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "sca/power.hpp"

using namespace sca;
using namespace sca::power;

namespace {

const DevicePowerProfile kProfile;  // library defaults
const SparsityConfig kDense;

}  // namespace

TEST_CASE("per-layer energies with the default profile") {
    CHECK(conv_energy(arch::ConvLayer{3, 8, 8, 2, 4, 3}, kProfile, kDense) ==
          doctest::Approx(5.184e-6).epsilon(1e-12));
    CHECK(fc_energy(arch::FcLayer{4096, 1000}, kProfile, kDense) ==
          doctest::Approx(0.012288).epsilon(1e-12));
    CHECK(pool_energy(arch::PoolLayer{96, 56, 56, 2, 3}, kProfile) ==
          doctest::Approx(6.77376e-4).epsilon(1e-12));
    CHECK(act_energy(arch::ActivationLayer{96, 56, 56, 1.0, arch::ActKind::relu},
                     kProfile) == doctest::Approx(3.01056e-4).epsilon(1e-12));
}

TEST_CASE("energy is linear in the per-operation costs") {
    oracle::LayerGen gen(23);
    for (int i = 0; i < 100; ++i) {
        auto conv = gen.conv();
        DevicePowerProfile doubled = kProfile;
        doubled.p_m *= 2;
        doubled.p_a *= 2;
        CHECK(conv_energy(conv, doubled, kDense) ==
              doctest::Approx(2 * conv_energy(conv, kProfile, kDense)).epsilon(1e-12));
        auto pool = gen.pool();
        DevicePowerProfile cmp3 = kProfile;
        cmp3.p_c *= 3;
        CHECK(pool_energy(pool, cmp3) ==
              doctest::Approx(3 * pool_energy(pool, kProfile)).epsilon(1e-12));
    }
}

TEST_CASE("sparsity scales conv and fc energy linearly, nothing else") {
    oracle::LayerGen gen(29);
    for (int i = 0; i < 100; ++i) {
        auto conv = gen.conv();
        auto fc = gen.fc();
        auto pool = gen.pool();
        SparsityConfig sparse{0.4, 0.7};
        CHECK(conv_energy(conv, kProfile, sparse) ==
              doctest::Approx(0.4 * conv_energy(conv, kProfile, kDense)).epsilon(1e-12));
        CHECK(fc_energy(fc, kProfile, sparse) ==
              doctest::Approx(0.7 * fc_energy(fc, kProfile, kDense)).epsilon(1e-12));
        CHECK(pool_energy(pool, kProfile) == pool_energy(pool, kProfile));
    }
}

TEST_CASE("arch_energy decomposes affinely in (lambda1, lambda2)") {
    oracle::LayerGen gen(31);
    arch::ArchitectureSpec spec{"t", "v", {}};
    for (int i = 0; i < 5; ++i) {
        spec.layers.push_back(gen.conv());
        spec.layers.push_back(gen.pool());
        spec.layers.push_back(gen.fc());
        spec.layers.push_back(gen.activation());
    }
    double dense = arch_energy(spec, kProfile, kDense).total;

    // e(l1, l2) = fixed + l1*conv + l2*fc; recover the parts from probes.
    double e10 = arch_energy(spec, kProfile, SparsityConfig{0.5, 1.0}).total;
    double e01 = arch_energy(spec, kProfile, SparsityConfig{1.0, 0.5}).total;
    double conv_part = 2 * (dense - e10);
    double fc_part = 2 * (dense - e01);
    double fixed = dense - conv_part - fc_part;
    for (double l1 : {0.2, 0.6, 0.9})
        for (double l2 : {0.3, 0.8, 1.0}) {
            double got = arch_energy(spec, kProfile, SparsityConfig{l1, l2}).total;
            CHECK(got == doctest::Approx(fixed + l1 * conv_part + l2 * fc_part)
                             .epsilon(1e-10));
        }
}

TEST_CASE("energy decreases monotonically with sparsity") {
    arch::ArchitectureSpec spec{
        "t", "v",
        {arch::ConvLayer{3, 8, 8, 2, 4, 3}, arch::FcLayer{64, 10},
         arch::PoolLayer{2, 4, 4, 2, 2}}};
    double prev = 0.0;
    for (double lam : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        double total = arch_energy(spec, kProfile, SparsityConfig{lam, lam}).total;
        CHECK(total > prev);
        prev = total;
    }
}

TEST_CASE("invalid sparsity and profile values are rejected") {
    CHECK_THROWS_AS((SparsityConfig{0.0, 1.0}.validate()), ValidationError);
    CHECK_THROWS_AS((SparsityConfig{1.0, 1.2}.validate()), ValidationError);
    CHECK_THROWS_AS((SparsityConfig{-0.5, 1.0}.validate()), ValidationError);
    CHECK_NOTHROW((SparsityConfig{1.0, 1.0}.validate()));
    DevicePowerProfile bad = kProfile;
    bad.p_m = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = kProfile;
    bad.throughput = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("profile and sparsity JSON round trips") {
    DevicePowerProfile p = kProfile;
    p.p_m = 3.25e-9;
    p.sample_rate = 250.0;
    auto restored = profile_from_json(to_json(p));
    CHECK(restored.p_m == p.p_m);
    CHECK(restored.sample_rate == p.sample_rate);
    CHECK(restored.throughput == p.throughput);

    SparsityConfig s{0.6, 0.8};
    auto sr = sparsity_from_json(to_json(s));
    CHECK(sr.lambda1 == s.lambda1);
    CHECK(sr.lambda2 == s.lambda2);
}

TEST_CASE("breakdown CSV lists one row per layer") {
    arch::ArchitectureSpec spec{
        "t", "v", {arch::ConvLayer{3, 8, 8, 2, 4, 3}, arch::FcLayer{64, 10}}};
    auto breakdown = arch_energy(spec, kProfile, kDense);
    std::ostringstream out;
    write_breakdown_csv(breakdown, out);
    std::istringstream in(out.str());
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "layer_index,kind,energy_joules");
    REQUIRE(std::getline(in, line));
    CHECK(line.rfind("0,conv,", 0) == 0);
    REQUIRE(std::getline(in, line));
    CHECK(line.rfind("1,fc,", 0) == 0);
    CHECK_FALSE(std::getline(in, line));
}
