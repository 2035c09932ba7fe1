#include "sca/arch.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sca::arch {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t out = 0;
    if (__builtin_mul_overflow(a, b, &out))
        throw OverflowError("operation count overflows 64-bit range");
    return out;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t out = 0;
    if (__builtin_add_overflow(a, b, &out))
        throw OverflowError("operation count overflows 64-bit range");
    return out;
}

void require(bool cond, const char* what) {
    if (!cond) throw ValidationError(what);
}

}  // namespace

double alpha_for(ActKind kind) {
    switch (kind) {
    case ActKind::relu: return 1.0;
    case ActKind::tanh_fn: return 4.0;
    case ActKind::sigmoid: return 3.0;
    case ActKind::softmax: return 3.0;
    case ActKind::other: return 1.0;
    }
    throw ValidationError("unknown activation kind");
}

const char* act_kind_name(ActKind kind) {
    switch (kind) {
    case ActKind::relu: return "relu";
    case ActKind::tanh_fn: return "tanh";
    case ActKind::sigmoid: return "sigmoid";
    case ActKind::softmax: return "softmax";
    case ActKind::other: return "other";
    }
    return "unknown";
}

ActKind act_kind_from_name(const std::string& name) {
    if (name == "relu") return ActKind::relu;
    if (name == "tanh") return ActKind::tanh_fn;
    if (name == "sigmoid") return ActKind::sigmoid;
    if (name == "softmax") return ActKind::softmax;
    if (name == "other") return ActKind::other;
    throw ValidationError("unknown activation kind: " + name);
}

ActivationLayer make_activation(ActKind kind, std::int64_t c, std::int64_t l,
                                std::int64_t w) {
    return ActivationLayer{c, l, w, alpha_for(kind), kind, true};
}

const char* layer_kind_name(const Layer& layer) {
    struct Visitor {
        const char* operator()(const ConvLayer&) const { return "conv"; }
        const char* operator()(const PoolLayer&) const { return "pool"; }
        const char* operator()(const FcLayer&) const { return "fc"; }
        const char* operator()(const ActivationLayer&) const { return "activation"; }
    };
    return std::visit(Visitor{}, layer);
}

std::int64_t OpCount::total() const {
    return checked_add(checked_add(mul, add), checked_add(cmp, act));
}

OpCount& OpCount::operator+=(const OpCount& rhs) {
    mul = checked_add(mul, rhs.mul);
    add = checked_add(add, rhs.add);
    cmp = checked_add(cmp, rhs.cmp);
    act = checked_add(act, rhs.act);
    return *this;
}

OpCount conv_op_count(const ConvLayer& y) {
    require(y.c >= 1 && y.l >= 1 && y.w >= 1 && y.s >= 1 && y.n >= 1 && y.f >= 1,
            "conv layer fields must be positive");
    require(y.f <= y.l && y.f <= y.w, "conv kernel larger than input");
    // (l/s)*(w/s) output positions, n kernels, c*f*f taps each
    std::int64_t positions = checked_mul(y.l / y.s, y.w / y.s);
    std::int64_t per_position = checked_mul(checked_mul(y.n, y.c), checked_mul(y.f, y.f));
    std::int64_t count = checked_mul(positions, per_position);
    return OpCount{count, count, 0, 0};
}

OpCount pool_op_count(const PoolLayer& y) {
    require(y.c >= 1 && y.l >= 1 && y.w >= 1 && y.s >= 1 && y.f >= 1,
            "pool layer fields must be positive");
    require(y.f <= y.l && y.f <= y.w, "pool window larger than input");
    std::int64_t positions = checked_mul(y.l / y.s, y.w / y.s);
    std::int64_t count = checked_mul(checked_mul(y.c, positions), checked_mul(y.f, y.f));
    return OpCount{0, 0, count, 0};
}

OpCount fc_op_count(const FcLayer& y) {
    require(y.x >= 1 && y.y >= 1, "fc layer dimensions must be positive");
    std::int64_t count = checked_mul(y.x, y.y);
    return OpCount{count, count, 0, 0};
}

OpCount act_op_count(const ActivationLayer& y) {
    require(y.c >= 1 && y.l >= 1 && y.w >= 1, "activation dimensions must be positive");
    require(y.alpha >= 0.0, "alpha must be non-negative");
    double elems = static_cast<double>(checked_mul(checked_mul(y.c, y.l), y.w));
    double exact = y.alpha * elems;
    double rounded = std::round(exact);
    if (std::abs(exact - rounded) > 1e-6 * std::max(1.0, std::abs(exact)))
        throw ValidationError("alpha * c * l * w is not integral");
    if (rounded > 9.2e18)
        throw OverflowError("operation count overflows 64-bit range");
    return OpCount{0, 0, 0, static_cast<std::int64_t>(rounded)};
}

OpCount layer_op_count(const Layer& layer) {
    struct Visitor {
        OpCount operator()(const ConvLayer& y) const { return conv_op_count(y); }
        OpCount operator()(const PoolLayer& y) const { return pool_op_count(y); }
        OpCount operator()(const FcLayer& y) const { return fc_op_count(y); }
        OpCount operator()(const ActivationLayer& y) const { return act_op_count(y); }
    };
    return std::visit(Visitor{}, layer);
}

LayerCounts arch_op_counts(const ArchitectureSpec& arch) {
    LayerCounts out;
    out.per_layer.reserve(arch.layers.size());
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        try {
            OpCount count = layer_op_count(arch.layers[i]);
            out.per_layer.emplace_back(i, count);
            out.totals += count;
        } catch (const std::runtime_error& e) {
            std::ostringstream msg;
            msg << "layer " << i << " (" << layer_kind_name(arch.layers[i])
                << "): " << e.what();
            throw ValidationError(msg.str());
        }
    }
    return out;
}

namespace {

struct SpatialShape {
    std::int64_t c, l, w;
};

// Output shape of a spatial layer; FC layers break the spatial chain.
std::optional<SpatialShape> output_shape(const Layer& layer) {
    struct Visitor {
        std::optional<SpatialShape> operator()(const ConvLayer& y) const {
            return SpatialShape{y.n, y.l / y.s, y.w / y.s};
        }
        std::optional<SpatialShape> operator()(const PoolLayer& y) const {
            return SpatialShape{y.c, y.l / y.s, y.w / y.s};
        }
        std::optional<SpatialShape> operator()(const FcLayer&) const {
            return std::nullopt;
        }
        std::optional<SpatialShape> operator()(const ActivationLayer& y) const {
            return SpatialShape{y.c, y.l, y.w};
        }
    };
    return std::visit(Visitor{}, layer);
}

struct SpatialInput {
    std::optional<SpatialShape> shape;
    bool chain = true;
};

SpatialInput input_shape(const Layer& layer) {
    struct Visitor {
        SpatialInput operator()(const ConvLayer& y) const {
            return {SpatialShape{y.c, y.l, y.w}, y.chain};
        }
        SpatialInput operator()(const PoolLayer& y) const {
            return {SpatialShape{y.c, y.l, y.w}, y.chain};
        }
        SpatialInput operator()(const FcLayer&) const { return {std::nullopt, true}; }
        SpatialInput operator()(const ActivationLayer& y) const {
            return {SpatialShape{y.c, y.l, y.w}, y.chain};
        }
    };
    return std::visit(Visitor{}, layer);
}

}  // namespace

std::vector<ValidationIssue> validate_arch(const ArchitectureSpec& arch,
                                           ValidationMode mode) {
    std::vector<ValidationIssue> issues;
    auto add = [&](std::size_t idx, const char* field, std::string msg) {
        issues.push_back(ValidationIssue{idx, field, std::move(msg)});
    };

    if (arch.layers.empty()) {
        add(ValidationIssue::npos, "layers", "empty architecture");
        return issues;
    }

    bool strict = mode == ValidationMode::strict;

    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const Layer& layer = arch.layers[i];
        if (const auto* y = std::get_if<ConvLayer>(&layer)) {
            if (y->c < 1) add(i, "c", "must be >= 1");
            if (y->l < 1) add(i, "l", "must be >= 1");
            if (y->w < 1) add(i, "w", "must be >= 1");
            if (y->s < 1) add(i, "s", "must be >= 1");
            if (y->n < 1) add(i, "n", "must be >= 1");
            if (y->f < 1) add(i, "f", "must be >= 1");
            if (strict && y->s >= 1 && y->l >= 1 && y->l % y->s != 0)
                add(i, "s", "stride does not divide input height");
            if (strict && y->s >= 1 && y->w >= 1 && y->w % y->s != 0)
                add(i, "s", "stride does not divide input width");
            if (y->f > y->l || y->f > y->w) add(i, "f", "kernel larger than input");
        } else if (const auto* y = std::get_if<PoolLayer>(&layer)) {
            if (y->c < 1) add(i, "c", "must be >= 1");
            if (y->l < 1) add(i, "l", "must be >= 1");
            if (y->w < 1) add(i, "w", "must be >= 1");
            if (y->s < 1) add(i, "s", "must be >= 1");
            if (y->f < 1) add(i, "f", "must be >= 1");
            if (strict && y->s >= 1 && y->l >= 1 && y->l % y->s != 0)
                add(i, "s", "stride does not divide input height");
            if (strict && y->s >= 1 && y->w >= 1 && y->w % y->s != 0)
                add(i, "s", "stride does not divide input width");
            if (y->f > y->l || y->f > y->w) add(i, "f", "window larger than input");
        } else if (const auto* y = std::get_if<FcLayer>(&layer)) {
            if (y->x < 1) add(i, "x", "must be >= 1");
            if (y->y < 1) add(i, "y", "must be >= 1");
        } else if (const auto* y = std::get_if<ActivationLayer>(&layer)) {
            if (y->c < 1) add(i, "c", "must be >= 1");
            if (y->l < 1) add(i, "l", "must be >= 1");
            if (y->w < 1) add(i, "w", "must be >= 1");
            if (y->alpha < 0.0) add(i, "alpha", "must be >= 0");
            if (y->kind != ActKind::other && y->alpha != alpha_for(y->kind))
                add(i, "alpha", "does not match the fixed lookup for its kind");
        }
    }

    // Spatial chain: output dims of layer k must match input dims of layer
    // k+1 when both are spatial and k+1 is not a branch entry point.
    for (std::size_t i = 0; i + 1 < arch.layers.size(); ++i) {
        auto prev = output_shape(arch.layers[i]);
        auto next = input_shape(arch.layers[i + 1]);
        if (!prev || !next.shape || !next.chain) continue;
        if (prev->c != next.shape->c || prev->l != next.shape->l ||
            prev->w != next.shape->w) {
            std::ostringstream msg;
            msg << "input shape (" << next.shape->c << "," << next.shape->l << ","
                << next.shape->w << ") does not match previous output (" << prev->c
                << "," << prev->l << "," << prev->w << ")";
            add(i + 1, "shape", msg.str());
        }
    }

    return issues;
}

void throw_if_invalid(const ArchitectureSpec& arch, ValidationMode mode) {
    auto issues = validate_arch(arch, mode);
    if (issues.empty()) return;
    std::ostringstream msg;
    msg << arch.label() << ": " << issues.size() << " validation issue(s); first: ";
    if (issues.front().layer_index != ValidationIssue::npos)
        msg << "layer " << issues.front().layer_index << " ";
    msg << "field '" << issues.front().field << "': " << issues.front().message;
    throw ValidationError(msg.str());
}

nlohmann::json to_json(const ArchitectureSpec& arch) {
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& layer : arch.layers) {
        nlohmann::json j;
        if (const auto* y = std::get_if<ConvLayer>(&layer)) {
            j = {{"kind", "conv"}, {"c", y->c}, {"l", y->l}, {"w", y->w},
                 {"s", y->s},      {"n", y->n}, {"f", y->f}};
            if (!y->chain) j["chain"] = false;
        } else if (const auto* y = std::get_if<PoolLayer>(&layer)) {
            j = {{"kind", "pool"}, {"c", y->c}, {"l", y->l}, {"w", y->w},
                 {"s", y->s},      {"f", y->f}};
            if (!y->chain) j["chain"] = false;
        } else if (const auto* y = std::get_if<FcLayer>(&layer)) {
            j = {{"kind", "fc"}, {"x", y->x}, {"y", y->y}};
        } else if (const auto* y = std::get_if<ActivationLayer>(&layer)) {
            j = {{"kind", "activation"}, {"c", y->c}, {"l", y->l}, {"w", y->w},
                 {"act", act_kind_name(y->kind)}};
            if (y->kind == ActKind::other) j["alpha"] = y->alpha;
            if (!y->chain) j["chain"] = false;
        }
        layers.push_back(std::move(j));
    }
    return nlohmann::json{{"name", arch.name}, {"variant", arch.variant},
                          {"layers", std::move(layers)}};
}

ArchitectureSpec arch_from_json(const nlohmann::json& doc) {
    ArchitectureSpec arch;
    try {
        arch.name = doc.at("name").get<std::string>();
        arch.variant = doc.at("variant").get<std::string>();
        for (const auto& j : doc.at("layers")) {
            std::string kind = j.at("kind").get<std::string>();
            bool chain = j.value("chain", true);
            if (kind == "conv") {
                arch.layers.push_back(ConvLayer{j.at("c"), j.at("l"), j.at("w"),
                                                j.at("s"), j.at("n"), j.at("f"), chain});
            } else if (kind == "pool") {
                arch.layers.push_back(PoolLayer{j.at("c"), j.at("l"), j.at("w"),
                                                j.at("s"), j.at("f"), chain});
            } else if (kind == "fc") {
                arch.layers.push_back(FcLayer{j.at("x"), j.at("y")});
            } else if (kind == "activation") {
                ActKind act = act_kind_from_name(j.at("act").get<std::string>());
                double alpha = act == ActKind::other ? j.at("alpha").get<double>()
                                                     : alpha_for(act);
                arch.layers.push_back(ActivationLayer{j.at("c"), j.at("l"), j.at("w"),
                                                      alpha, act, chain});
            } else {
                throw ValidationError("unknown layer kind: " + kind);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed architecture document: ") + e.what());
    }
    return arch;
}

}  // namespace sca::arch
