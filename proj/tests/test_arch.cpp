#include <doctest.h>

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "sca/arch.hpp"
#include "sca/zoo.hpp"

using namespace sca::arch;

TEST_CASE("conv op count matches the spec examples") {
    CHECK(conv_op_count(ConvLayer{1, 1, 1, 1, 1, 1}) == OpCount{1, 1, 0, 0});
    CHECK(conv_op_count(ConvLayer{3, 8, 8, 2, 4, 3}) == OpCount{1728, 1728, 0, 0});
    CHECK(conv_op_count(ConvLayer{3, 224, 224, 4, 96, 11}) ==
          OpCount{109283328, 109283328, 0, 0});
}

TEST_CASE("pool op count matches the spec examples") {
    CHECK(pool_op_count(PoolLayer{1, 1, 1, 1, 1}) == OpCount{0, 0, 1, 0});
    CHECK(pool_op_count(PoolLayer{2, 4, 4, 2, 2}) == OpCount{0, 0, 32, 0});
    CHECK(pool_op_count(PoolLayer{96, 56, 56, 2, 3}) == OpCount{0, 0, 677376, 0});
}

TEST_CASE("fc op count") {
    CHECK(fc_op_count(FcLayer{1, 1}) == OpCount{1, 1, 0, 0});
    CHECK(fc_op_count(FcLayer{3, 5}) == OpCount{15, 15, 0, 0});
    CHECK(fc_op_count(FcLayer{4096, 1000}) == OpCount{4096000, 4096000, 0, 0});
}

TEST_CASE("activation op count") {
    CHECK(act_op_count(ActivationLayer{1, 1, 1, 1.0, ActKind::other}) ==
          OpCount{0, 0, 0, 1});
    CHECK(act_op_count(ActivationLayer{4, 8, 8, 2.0, ActKind::other}) ==
          OpCount{0, 0, 0, 512});
    CHECK(act_op_count(ActivationLayer{96, 56, 56, 1.0, ActKind::relu}) ==
          OpCount{0, 0, 0, 301056});
    CHECK_THROWS_AS(
        act_op_count(ActivationLayer{1, 1, 3, 1.0 / 7.0, ActKind::other}),
        sca::ValidationError);
}

TEST_CASE("overflow is an explicit error") {
    CHECK_THROWS_AS(fc_op_count(FcLayer{std::int64_t{1} << 40, std::int64_t{1} << 40}),
                    sca::OverflowError);
}

TEST_CASE("brute-force oracle equivalence on random layers") {
    oracle::LayerGen gen(7);
    for (int i = 0; i < 300; ++i) {
        auto conv = gen.conv();
        CAPTURE(conv.c);
        CHECK(conv_op_count(conv) == oracle::conv_count(conv));
        auto pool = gen.pool();
        CHECK(pool_op_count(pool) == oracle::pool_count(pool));
        auto fc = gen.fc();
        CHECK(fc_op_count(fc) == oracle::fc_count(fc));
        auto act = gen.activation();
        CHECK(act_op_count(act) == oracle::act_count(act));
    }
}

TEST_CASE("op counts are monotone in size fields and antitone in stride") {
    oracle::LayerGen gen(11);
    for (int i = 0; i < 200; ++i) {
        auto conv = gen.conv();
        auto base = conv_op_count(conv).total();
        auto bigger = conv;
        bigger.n += 1;
        CHECK(conv_op_count(bigger).total() >= base);
        bigger = conv;
        bigger.c += 1;
        CHECK(conv_op_count(bigger).total() >= base);
        if (conv.f < std::min(conv.l, conv.w)) {
            bigger = conv;
            bigger.f += 1;
            CHECK(conv_op_count(bigger).total() >= base);
        }
        if (conv.l % (2 * conv.s) == 0 && conv.w % (2 * conv.s) == 0 &&
            conv.f <= std::min(conv.l, conv.w)) {
            auto strided = conv;
            strided.s *= 2;
            CHECK(conv_op_count(strided).total() <= base);
        }
        auto fc = gen.fc();
        auto fc_bigger = fc;
        fc_bigger.x += 1;
        CHECK(fc_op_count(fc_bigger).total() >= fc_op_count(fc).total());
        fc_bigger = fc;
        fc_bigger.y += 1;
        CHECK(fc_op_count(fc_bigger).total() >= fc_op_count(fc).total());
    }
}

TEST_CASE("arch_op_counts aggregates per-layer counts") {
    ArchitectureSpec single{"t", "v", {FcLayer{1, 1}}};
    auto counts = arch_op_counts(single);
    REQUIRE(counts.per_layer.size() == 1);
    CHECK(counts.totals == OpCount{1, 1, 0, 0});

    ArchitectureSpec pair{"t", "v", {ConvLayer{3, 8, 8, 2, 4, 3}, FcLayer{3, 5}}};
    CHECK(arch_op_counts(pair).totals == OpCount{1743, 1743, 0, 0});

    ArchitectureSpec mixed{
        "t", "v",
        {PoolLayer{2, 4, 4, 2, 2}, ActivationLayer{1, 1, 1, 1.0, ActKind::other}}};
    CHECK(arch_op_counts(mixed).totals == OpCount{0, 0, 32, 1});
}

TEST_CASE("totals are permutation invariant") {
    oracle::LayerGen gen(13);
    ArchitectureSpec spec{"t", "v", {}};
    for (int i = 0; i < 6; ++i) {
        spec.layers.push_back(gen.conv());
        spec.layers.push_back(gen.fc());
    }
    auto totals = arch_op_counts(spec).totals;
    std::mt19937_64 rng(3);
    std::shuffle(spec.layers.begin(), spec.layers.end(), rng);
    CHECK(arch_op_counts(spec).totals == totals);
}

TEST_CASE("validate_arch reports every violation") {
    SUBCASE("empty architecture") {
        auto issues = validate_arch(ArchitectureSpec{"t", "v", {}});
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].message == "empty architecture");
    }
    SUBCASE("non-divisible stride in strict mode only") {
        ArchitectureSpec spec{"t", "v", {ConvLayer{1, 8, 8, 3, 1, 1}}};
        auto issues = validate_arch(spec);
        REQUIRE(issues.size() == 2);  // stride divides neither l nor w
        CHECK(issues[0].layer_index == 0);
        CHECK(issues[0].field == "s");
        CHECK(validate_arch(spec, ValidationMode::permissive).empty());
    }
    SUBCASE("multiple violations are all returned") {
        ArchitectureSpec spec{"t", "v", {FcLayer{0, 1}, FcLayer{1, 0}}};
        auto issues = validate_arch(spec);
        REQUIRE(issues.size() == 2);
        CHECK(issues[0].layer_index == 0);
        CHECK(issues[0].field == "x");
        CHECK(issues[1].layer_index == 1);
        CHECK(issues[1].field == "y");
    }
    SUBCASE("spatial chain mismatch") {
        ArchitectureSpec spec{
            "t", "v",
            {ConvLayer{3, 8, 8, 2, 4, 3}, ActivationLayer{4, 8, 8, 1.0, ActKind::relu}}};
        auto issues = validate_arch(spec);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].layer_index == 1);
        CHECK(issues[0].field == "shape");
    }
    SUBCASE("chain-exempt layers skip the shape check") {
        ArchitectureSpec spec{
            "t", "v",
            {ConvLayer{3, 8, 8, 2, 4, 3},
             ActivationLayer{4, 8, 8, 1.0, ActKind::relu, false}}};
        CHECK(validate_arch(spec).empty());
    }
}

TEST_CASE("architecture JSON round trip") {
    oracle::LayerGen gen(17);
    ArchitectureSpec spec{"model", "var*1", {}};
    for (int i = 0; i < 4; ++i) {
        spec.layers.push_back(gen.conv());
        spec.layers.push_back(gen.pool());
        spec.layers.push_back(gen.fc());
        spec.layers.push_back(gen.activation());
    }
    auto restored = arch_from_json(to_json(spec));
    CHECK(restored.name == spec.name);
    CHECK(restored.variant == spec.variant);
    REQUIRE(restored.layers.size() == spec.layers.size());
    CHECK(arch_op_counts(restored).totals == arch_op_counts(spec).totals);
}

TEST_CASE("zoo holds the 24 table entries and all validate") {
    auto entries = sca::zoo::list_entries();
    CHECK(entries.size() == 24);
    int alexnet = 0;
    for (const auto& entry : entries) {
        auto spec = sca::zoo::load_file(entry.path);
        CHECK(validate_arch(spec).empty());
        if (entry.name == "Alexnet") ++alexnet;
    }
    CHECK(alexnet == 4);
}

TEST_CASE("zoo_build returns the requested variant") {
    auto alex = sca::zoo::build("Alexnet", "4096*4096*1000");
    std::vector<std::int64_t> fc_outputs;
    for (const auto& layer : alex.layers)
        if (const auto* fc = std::get_if<FcLayer>(&layer))
            fc_outputs.push_back(fc->y);
    REQUIRE(fc_outputs.size() == 3);
    CHECK(fc_outputs[0] == 4096);
    CHECK(fc_outputs[1] == 4096);
    CHECK(fc_outputs[2] == 1000);

    auto resnet = sca::zoo::build("Resnet50", "1000,(3,4,6,3)");
    CHECK(resnet.variant == "1000,(3,4,6,3)");
    CHECK_FALSE(resnet.layers.empty());

    CHECK_THROWS_AS(sca::zoo::build("Alexnet", "9999"), sca::IoError);
    try {
        sca::zoo::build("Alexnet", "9999");
    } catch (const sca::IoError& e) {
        CHECK(std::string(e.what()).find("Alexnet/4096*4096*1000") !=
              std::string::npos);
    }
}
