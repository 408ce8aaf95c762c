#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ktune {

enum class ParamKind { Real, Integer, Categorical, Boolean };
enum class ParamRole { Input, Design };

std::string to_string(ParamKind k);
std::string to_string(ParamRole r);

// One tunable or input parameter. Real/integer parameters carry inclusive
// [low, high] bounds; categorical parameters carry an ordered label list.
// Boolean is categorical with the fixed labels {false, true}.
struct ParameterSpec {
    std::string name;
    ParamKind kind = ParamKind::Real;
    ParamRole role = ParamRole::Design;
    double low = 0.0;
    double high = 0.0;
    std::vector<std::string> categories;

    static ParameterSpec real(std::string name, ParamRole role, double low, double high);
    static ParameterSpec integer(std::string name, ParamRole role, long long low, long long high);
    static ParameterSpec categorical(std::string name, ParamRole role,
                                     std::vector<std::string> labels);
    static ParameterSpec boolean(std::string name, ParamRole role);

    bool is_numeric() const { return kind == ParamKind::Real || kind == ParamKind::Integer; }
    std::size_t category_count() const { return categories.size(); }
    // Index of a label within categories, or nullopt.
    std::optional<std::size_t> category_code(const std::string& label) const;
};

// A single parameter value: double for real, long long for integer, label for
// categorical/boolean.
using Value = std::variant<double, long long, std::string>;

std::string value_to_string(const Value& v);
// Numeric view of a value against its spec (labels map to their ordinal code).
double value_to_number(const ParameterSpec& spec, const Value& v);

// Full assignment of values, aligned with ParameterSpace order.
struct Configuration {
    std::vector<Value> values;

    bool operator==(const Configuration& other) const { return values == other.values; }
};

class ParameterSpace {
public:
    ParameterSpace() = default;
    // Throws ConfigError listing every violated invariant.
    explicit ParameterSpace(std::vector<ParameterSpec> params);

    // All violations, empty when the space is well-formed. Static so callers
    // can inspect a candidate list without constructing.
    static std::vector<std::string> validate(const std::vector<ParameterSpec>& params);

    const std::vector<ParameterSpec>& params() const { return params_; }
    std::size_t size() const { return params_.size(); }
    const ParameterSpec& param(std::size_t i) const { return params_[i]; }

    const std::vector<std::size_t>& input_dims() const { return input_dims_; }
    const std::vector<std::size_t>& design_dims() const { return design_dims_; }

    std::optional<std::size_t> index_of(const std::string& name) const;

    // Indices (into full space order) of categorical/boolean parameters.
    std::vector<std::size_t> categorical_dims() const;

    // Checks a configuration against kinds and bounds; returns the first
    // problem or nullopt when valid.
    std::optional<std::string> check(const Configuration& config) const;

    // Stable 64-bit hash over names, kinds, roles, bounds and labels.
    std::uint64_t fingerprint() const;

private:
    std::vector<ParameterSpec> params_;
    std::vector<std::size_t> input_dims_;
    std::vector<std::size_t> design_dims_;
};

// Numeric encoding used by the surrogate and the optimizers: reals pass
// through, integers cast, category labels become 0-based ordinal codes.
std::vector<double> encode(const ParameterSpace& space, const Configuration& config);

// Inverse of encode, total on finite vectors: values are rounded half-to-even
// where needed and clamped into bounds. Throws on non-finite entries.
Configuration decode(const ParameterSpace& space, const std::vector<double>& vec);

// Rounds halfway cases to the nearest even integer.
double round_half_even(double x);

// Encode/decode restricted to one role; the vector is aligned with
// input_dims()/design_dims() order.
std::vector<double> encode_subspace(const ParameterSpace& space,
                                    const std::vector<std::size_t>& dims,
                                    const std::vector<Value>& values);
std::vector<Value> decode_subspace(const ParameterSpace& space,
                                   const std::vector<std::size_t>& dims,
                                   const std::vector<double>& vec);

// Assembles a full configuration from input-subspace and design-subspace
// values.
Configuration combine(const ParameterSpace& space, const std::vector<Value>& input_values,
                      const std::vector<Value>& design_values);

// -----------------------------------------------------------------------------
// Bound reformulation: a constrained parameter is replaced by a free alpha in
// [0,1] that linearly interpolates between expression-defined bounds.
// -----------------------------------------------------------------------------

// Arithmetic over other parameter values with + - * / min max floor and
// parentheses. Parsed once, evaluated against a configuration.
class BoundExpr {
public:
    struct Node;

    BoundExpr() = default;
    static BoundExpr parse(const std::string& text);

    double eval(const ParameterSpace& space, const Configuration& context) const;
    const std::string& text() const { return text_; }

private:
    std::shared_ptr<const Node> root_;
    std::string text_;
};

struct BoundReformulation {
    std::string target;     // design parameter being replaced
    std::string alpha_name; // free parameter in [0,1]
    BoundExpr lower_expr;
    BoundExpr upper_expr;
};

// value = lb + alpha * (ub - lb); integer targets are rounded half-to-even and
// clamped to [lb, ub]. Throws when the evaluated interval is inverted.
Value apply_reformulation(const BoundReformulation& reform, double alpha,
                          const ParameterSpace& space, const Configuration& context);

// -----------------------------------------------------------------------------
// Regular grid over the input subspace.
// -----------------------------------------------------------------------------

struct InputGrid {
    // Each point holds one value per input dimension, in input_dims order.
    std::vector<std::vector<Value>> points;
    std::vector<std::size_t> effective_counts; // per axis, after dedup
    std::vector<std::string> warnings;
};

// Cartesian product of per-axis points. Numeric axes get evenly spaced points
// including both bounds (integer axes rounded, duplicates removed; a
// single-count integer axis takes the interval midpoint); a categorical axis
// takes all labels when the count allows, otherwise the first `count` labels
// with a warning.
InputGrid input_grid(const ParameterSpace& space, const std::vector<std::size_t>& dims_per_axis);

} // namespace ktune
