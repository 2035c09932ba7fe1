#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sca {

class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class OverflowError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace arch {

/// Convolutional layer: input c x l x w, n kernels of size f x f, stride s.
/// "chain" is false when the layer's input is not the previous layer's
/// output (branch entry points in flattened block structures).
struct ConvLayer {
    std::int64_t c = 1;
    std::int64_t l = 1;
    std::int64_t w = 1;
    std::int64_t s = 1;
    std::int64_t n = 1;
    std::int64_t f = 1;
    bool chain = true;
};

/// Max-pooling layer: input c x l x w, window f x f, stride s.
struct PoolLayer {
    std::int64_t c = 1;
    std::int64_t l = 1;
    std::int64_t w = 1;
    std::int64_t s = 1;
    std::int64_t f = 1;
    bool chain = true;
};

/// Fully connected layer: x input neurons, y output neurons.
struct FcLayer {
    std::int64_t x = 1;
    std::int64_t y = 1;
};

enum class ActKind { relu, tanh_fn, sigmoid, softmax, other };

/// Operational coefficient for the built-in activation kinds.
double alpha_for(ActKind kind);

const char* act_kind_name(ActKind kind);
ActKind act_kind_from_name(const std::string& name);

/// Element-wise layer over a c x l x w input, alpha operations per element.
/// For the built-in kinds alpha is fixed by the kind; "other" carries an
/// explicit alpha (used for folded batch-norm and residual adds).
struct ActivationLayer {
    std::int64_t c = 1;
    std::int64_t l = 1;
    std::int64_t w = 1;
    double alpha = 1.0;
    ActKind kind = ActKind::relu;
    bool chain = true;
};

ActivationLayer make_activation(ActKind kind, std::int64_t c, std::int64_t l,
                                std::int64_t w);

using Layer = std::variant<ConvLayer, PoolLayer, FcLayer, ActivationLayer>;

const char* layer_kind_name(const Layer& layer);

/// Exact operation counts for one layer or an aggregate of layers.
struct OpCount {
    std::int64_t mul = 0;
    std::int64_t add = 0;
    std::int64_t cmp = 0;
    std::int64_t act = 0;

    std::int64_t total() const;
    OpCount& operator+=(const OpCount& rhs);
    friend bool operator==(const OpCount&, const OpCount&) = default;
};

OpCount conv_op_count(const ConvLayer& layer);
OpCount pool_op_count(const PoolLayer& layer);
OpCount fc_op_count(const FcLayer& layer);
OpCount act_op_count(const ActivationLayer& layer);
OpCount layer_op_count(const Layer& layer);

struct ArchitectureSpec {
    std::string name;
    std::string variant;
    std::vector<Layer> layers;

    std::string label() const { return name + "/" + variant; }
};

struct LayerCounts {
    std::vector<std::pair<std::size_t, OpCount>> per_layer;
    OpCount totals;
};

/// Per-layer op counts plus the field-wise total. Layer errors are
/// rethrown with the layer index attached.
LayerCounts arch_op_counts(const ArchitectureSpec& arch);

enum class ValidationMode { strict, permissive };

struct ValidationIssue {
    std::size_t layer_index = 0;  // npos for architecture-level issues
    std::string field;
    std::string message;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Collects every invariant violation; empty result means valid.
/// Permissive mode skips stride-divisibility checks.
std::vector<ValidationIssue> validate_arch(const ArchitectureSpec& arch,
                                           ValidationMode mode = ValidationMode::strict);

void throw_if_invalid(const ArchitectureSpec& arch,
                      ValidationMode mode = ValidationMode::strict);

nlohmann::json to_json(const ArchitectureSpec& arch);
ArchitectureSpec arch_from_json(const nlohmann::json& doc);

}  // namespace arch
}  // namespace sca
