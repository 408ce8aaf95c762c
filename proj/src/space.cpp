#include "ktune/space.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "ktune/util.hpp"

namespace ktune {

std::string to_string(ParamKind k) {
    switch (k) {
        case ParamKind::Real: return "real";
        case ParamKind::Integer: return "integer";
        case ParamKind::Categorical: return "categorical";
        case ParamKind::Boolean: return "boolean";
    }
    return "?";
}

std::string to_string(ParamRole r) { return r == ParamRole::Input ? "input" : "design"; }

ParameterSpec ParameterSpec::real(std::string name, ParamRole role, double low, double high) {
    ParameterSpec s;
    s.name = std::move(name);
    s.kind = ParamKind::Real;
    s.role = role;
    s.low = low;
    s.high = high;
    return s;
}

ParameterSpec ParameterSpec::integer(std::string name, ParamRole role, long long low,
                                     long long high) {
    ParameterSpec s;
    s.name = std::move(name);
    s.kind = ParamKind::Integer;
    s.role = role;
    s.low = static_cast<double>(low);
    s.high = static_cast<double>(high);
    return s;
}

ParameterSpec ParameterSpec::categorical(std::string name, ParamRole role,
                                         std::vector<std::string> labels) {
    ParameterSpec s;
    s.name = std::move(name);
    s.kind = ParamKind::Categorical;
    s.role = role;
    s.categories = std::move(labels);
    return s;
}

ParameterSpec ParameterSpec::boolean(std::string name, ParamRole role) {
    ParameterSpec s;
    s.name = std::move(name);
    s.kind = ParamKind::Boolean;
    s.role = role;
    s.categories = {"false", "true"};
    return s;
}

std::optional<std::size_t> ParameterSpec::category_code(const std::string& label) const {
    for (std::size_t i = 0; i < categories.size(); ++i)
        if (categories[i] == label) return i;
    return std::nullopt;
}

std::string value_to_string(const Value& v) {
    if (std::holds_alternative<double>(v)) return format_g17(std::get<double>(v));
    if (std::holds_alternative<long long>(v)) return std::to_string(std::get<long long>(v));
    return std::get<std::string>(v);
}

double value_to_number(const ParameterSpec& spec, const Value& v) {
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    if (std::holds_alternative<long long>(v))
        return static_cast<double>(std::get<long long>(v));
    auto code = spec.category_code(std::get<std::string>(v));
    if (!code)
        throw ConfigError("parameter '" + spec.name + "': unknown category label '" +
                          std::get<std::string>(v) + "'");
    return static_cast<double>(*code);
}

namespace {

bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

bool label_ok(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c == ',' || c == '\n' || c == '\r') return false;
    return true;
}

} // namespace

std::vector<std::string> ParameterSpace::validate(const std::vector<ParameterSpec>& params) {
    std::vector<std::string> errors;
    std::set<std::string> seen;
    bool has_input = false, has_design = false;
    for (const auto& p : params) {
        if (!is_identifier(p.name))
            errors.push_back("parameter name '" + p.name + "' is not an identifier");
        if (seen.count(p.name))
            errors.push_back("duplicate parameter name '" + p.name + "'");
        seen.insert(p.name);
        if (p.role == ParamRole::Input) has_input = true;
        if (p.role == ParamRole::Design) has_design = true;
        switch (p.kind) {
            case ParamKind::Real:
                if (!(p.low < p.high))
                    errors.push_back("parameter '" + p.name + "': real bounds require low < high");
                if (!std::isfinite(p.low) || !std::isfinite(p.high))
                    errors.push_back("parameter '" + p.name + "': non-finite bounds");
                break;
            case ParamKind::Integer:
                if (!(p.low <= p.high))
                    errors.push_back("parameter '" + p.name +
                                     "': integer bounds require low <= high");
                break;
            case ParamKind::Boolean:
            case ParamKind::Categorical: {
                if (p.categories.empty())
                    errors.push_back("parameter '" + p.name + "': empty category list");
                std::set<std::string> labels;
                for (const auto& label : p.categories) {
                    if (!label_ok(label))
                        errors.push_back("parameter '" + p.name + "': bad category label '" +
                                         label + "'");
                    if (labels.count(label))
                        errors.push_back("parameter '" + p.name + "': duplicate category label '" +
                                         label + "'");
                    labels.insert(label);
                }
                if (p.kind == ParamKind::Boolean &&
                    p.categories != std::vector<std::string>{"false", "true"})
                    errors.push_back("parameter '" + p.name +
                                     "': boolean labels must be {false,true}");
                break;
            }
        }
    }
    if (!has_input) errors.push_back("space has no input parameters");
    if (!has_design) errors.push_back("space has no design parameters");
    return errors;
}

ParameterSpace::ParameterSpace(std::vector<ParameterSpec> params) : params_(std::move(params)) {
    auto errors = validate(params_);
    if (!errors.empty()) {
        std::string msg = "invalid parameter space:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].role == ParamRole::Input)
            input_dims_.push_back(i);
        else
            design_dims_.push_back(i);
    }
}

std::optional<std::size_t> ParameterSpace::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    return std::nullopt;
}

std::vector<std::size_t> ParameterSpace::categorical_dims() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (!params_[i].is_numeric()) out.push_back(i);
    return out;
}

std::optional<std::string> ParameterSpace::check(const Configuration& config) const {
    if (config.values.size() != params_.size())
        return "configuration has " + std::to_string(config.values.size()) + " values, expected " +
               std::to_string(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& p = params_[i];
        const auto& v = config.values[i];
        switch (p.kind) {
            case ParamKind::Real: {
                if (!std::holds_alternative<double>(v))
                    return "parameter '" + p.name + "': expected a real value";
                double x = std::get<double>(v);
                if (!std::isfinite(x)) return "parameter '" + p.name + "': non-finite value";
                if (x < p.low || x > p.high)
                    return "parameter '" + p.name + "': value " + format_g17(x) +
                           " outside bounds [" + format_g17(p.low) + ", " + format_g17(p.high) +
                           "]";
                break;
            }
            case ParamKind::Integer: {
                if (!std::holds_alternative<long long>(v))
                    return "parameter '" + p.name + "': expected an integer value";
                long long x = std::get<long long>(v);
                if (x < static_cast<long long>(p.low) || x > static_cast<long long>(p.high))
                    return "parameter '" + p.name + "': value " + std::to_string(x) +
                           " outside bounds";
                break;
            }
            case ParamKind::Boolean:
            case ParamKind::Categorical: {
                if (!std::holds_alternative<std::string>(v))
                    return "parameter '" + p.name + "': expected a category label";
                if (!p.category_code(std::get<std::string>(v)))
                    return "parameter '" + p.name + "': unknown category label '" +
                           std::get<std::string>(v) + "'";
                break;
            }
        }
    }
    return std::nullopt;
}

std::uint64_t ParameterSpace::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : params_) {
        h = fnv1a(p.name, h);
        h = fnv1a(to_string(p.kind), h);
        h = fnv1a(to_string(p.role), h);
        if (p.is_numeric()) {
            h = fnv1a(format_g17(p.low), h);
            h = fnv1a(format_g17(p.high), h);
        }
        for (const auto& label : p.categories) h = fnv1a(label, h);
        h = fnv1a(";", h);
    }
    return h;
}

double round_half_even(double x) {
    // Default FP environment rounds to nearest, ties to even.
    return std::nearbyint(x);
}

std::vector<double> encode(const ParameterSpace& space, const Configuration& config) {
    if (auto err = space.check(config)) throw ConfigError("encode: " + *err);
    std::vector<double> out(space.size());
    for (std::size_t i = 0; i < space.size(); ++i)
        out[i] = value_to_number(space.param(i), config.values[i]);
    return out;
}

namespace {

Value decode_one(const ParameterSpec& p, double x) {
    if (!std::isfinite(x))
        throw ConfigError("decode: non-finite entry for parameter '" + p.name + "'");
    switch (p.kind) {
        case ParamKind::Real:
            return std::clamp(x, p.low, p.high);
        case ParamKind::Integer: {
            double r = std::clamp(round_half_even(x), p.low, p.high);
            return static_cast<long long>(r);
        }
        case ParamKind::Boolean:
        case ParamKind::Categorical: {
            double r = std::clamp(round_half_even(x), 0.0,
                                  static_cast<double>(p.categories.size() - 1));
            return p.categories[static_cast<std::size_t>(r)];
        }
    }
    throw ConfigError("decode: bad kind");
}

} // namespace

Configuration decode(const ParameterSpace& space, const std::vector<double>& vec) {
    if (vec.size() != space.size())
        throw ConfigError("decode: vector length " + std::to_string(vec.size()) +
                          " does not match space size " + std::to_string(space.size()));
    Configuration config;
    config.values.reserve(space.size());
    for (std::size_t i = 0; i < space.size(); ++i)
        config.values.push_back(decode_one(space.param(i), vec[i]));
    return config;
}

std::vector<double> encode_subspace(const ParameterSpace& space,
                                    const std::vector<std::size_t>& dims,
                                    const std::vector<Value>& values) {
    if (values.size() != dims.size()) throw ConfigError("encode_subspace: length mismatch");
    std::vector<double> out(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i)
        out[i] = value_to_number(space.param(dims[i]), values[i]);
    return out;
}

std::vector<Value> decode_subspace(const ParameterSpace& space,
                                   const std::vector<std::size_t>& dims,
                                   const std::vector<double>& vec) {
    if (vec.size() != dims.size()) throw ConfigError("decode_subspace: length mismatch");
    std::vector<Value> out;
    out.reserve(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i)
        out.push_back(decode_one(space.param(dims[i]), vec[i]));
    return out;
}

Configuration combine(const ParameterSpace& space, const std::vector<Value>& input_values,
                      const std::vector<Value>& design_values) {
    if (input_values.size() != space.input_dims().size() ||
        design_values.size() != space.design_dims().size())
        throw ConfigError("combine: subspace length mismatch");
    Configuration config;
    config.values.resize(space.size());
    for (std::size_t i = 0; i < input_values.size(); ++i)
        config.values[space.input_dims()[i]] = input_values[i];
    for (std::size_t i = 0; i < design_values.size(); ++i)
        config.values[space.design_dims()[i]] = design_values[i];
    return config;
}

// -----------------------------------------------------------------------------
// Expression parser for reformulation bounds.
// -----------------------------------------------------------------------------

struct BoundExpr::Node {
    enum class Op { Constant, Variable, Add, Sub, Mul, Div, Min, Max, Floor, Neg };
    Op op = Op::Constant;
    double constant = 0.0;
    std::string variable;
    std::shared_ptr<const Node> lhs, rhs;
};

namespace {

class ExprParser {
public:
    explicit ExprParser(const std::string& text) : text_(text) {}

    std::shared_ptr<const BoundExpr::Node> parse() {
        auto node = parse_sum();
        skip_ws();
        if (pos_ != text_.size())
            throw ConfigError("expression '" + text_ + "': trailing input at position " +
                              std::to_string(pos_));
        return node;
    }

private:
    using Node = BoundExpr::Node;
    using NodePtr = std::shared_ptr<const Node>;

    NodePtr make(Node::Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
        auto n = std::make_shared<Node>();
        n->op = op;
        n->lhs = std::move(lhs);
        n->rhs = std::move(rhs);
        return n;
    }

    NodePtr parse_sum() {
        auto lhs = parse_product();
        for (;;) {
            skip_ws();
            if (accept('+'))
                lhs = make(Node::Op::Add, lhs, parse_product());
            else if (accept('-'))
                lhs = make(Node::Op::Sub, lhs, parse_product());
            else
                return lhs;
        }
    }

    NodePtr parse_product() {
        auto lhs = parse_factor();
        for (;;) {
            skip_ws();
            if (accept('*'))
                lhs = make(Node::Op::Mul, lhs, parse_factor());
            else if (accept('/'))
                lhs = make(Node::Op::Div, lhs, parse_factor());
            else
                return lhs;
        }
    }

    NodePtr parse_factor() {
        skip_ws();
        if (accept('-')) return make(Node::Op::Neg, parse_factor());
        if (accept('(')) {
            auto inner = parse_sum();
            expect(')');
            return inner;
        }
        if (pos_ < text_.size() &&
            (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            return parse_number();
        return parse_name();
    }

    NodePtr parse_number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                text_[pos_] == 'e' || text_[pos_] == 'E' ||
                ((text_[pos_] == '+' || text_[pos_] == '-') && pos_ > start &&
                 (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))))
            ++pos_;
        auto n = std::make_shared<Node>();
        n->op = Node::Op::Constant;
        n->constant = parse_double(text_.substr(start, pos_ - start), "expression constant");
        return n;
    }

    NodePtr parse_name() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                       text_[pos_] == '_'))
            ++pos_;
        if (pos_ == start)
            throw ConfigError("expression '" + text_ + "': expected a name or number at position " +
                              std::to_string(pos_));
        std::string name = text_.substr(start, pos_ - start);
        if (name == "min" || name == "max" || name == "floor") {
            expect('(');
            auto a = parse_sum();
            if (name == "floor") {
                expect(')');
                return make(Node::Op::Floor, a);
            }
            expect(',');
            auto b = parse_sum();
            expect(')');
            return make(name == "min" ? Node::Op::Min : Node::Op::Max, a, b);
        }
        auto n = std::make_shared<Node>();
        n->op = Node::Op::Variable;
        n->variable = name;
        return n;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c))
            throw ConfigError("expression '" + text_ + "': expected '" + std::string(1, c) +
                              "' at position " + std::to_string(pos_));
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

double eval_node(const BoundExpr::Node& node, const ParameterSpace& space,
                 const Configuration& context) {
    using Op = BoundExpr::Node::Op;
    switch (node.op) {
        case Op::Constant: return node.constant;
        case Op::Variable: {
            auto idx = space.index_of(node.variable);
            if (!idx) throw ConfigError("expression references unknown parameter '" +
                                        node.variable + "'");
            const auto& p = space.param(*idx);
            if (!p.is_numeric())
                throw ConfigError("expression references non-numeric parameter '" + node.variable +
                                  "'");
            return value_to_number(p, context.values[*idx]);
        }
        case Op::Add: return eval_node(*node.lhs, space, context) + eval_node(*node.rhs, space, context);
        case Op::Sub: return eval_node(*node.lhs, space, context) - eval_node(*node.rhs, space, context);
        case Op::Mul: return eval_node(*node.lhs, space, context) * eval_node(*node.rhs, space, context);
        case Op::Div: return eval_node(*node.lhs, space, context) / eval_node(*node.rhs, space, context);
        case Op::Min: return std::min(eval_node(*node.lhs, space, context),
                                      eval_node(*node.rhs, space, context));
        case Op::Max: return std::max(eval_node(*node.lhs, space, context),
                                      eval_node(*node.rhs, space, context));
        case Op::Floor: return std::floor(eval_node(*node.lhs, space, context));
        case Op::Neg: return -eval_node(*node.lhs, space, context);
    }
    throw ConfigError("expression: bad node");
}

} // namespace

BoundExpr BoundExpr::parse(const std::string& text) {
    BoundExpr e;
    e.root_ = ExprParser(text).parse();
    e.text_ = text;
    return e;
}

double BoundExpr::eval(const ParameterSpace& space, const Configuration& context) const {
    if (!root_) throw ConfigError("empty bound expression");
    return eval_node(*root_, space, context);
}

Value apply_reformulation(const BoundReformulation& reform, double alpha,
                          const ParameterSpace& space, const Configuration& context) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ConfigError("reformulation '" + reform.target + "': alpha " + format_g17(alpha) +
                          " outside [0,1]");
    auto idx = space.index_of(reform.target);
    if (!idx)
        throw ConfigError("reformulation targets unknown parameter '" + reform.target + "'");
    const auto& spec = space.param(*idx);
    double lb = reform.lower_expr.eval(space, context);
    double ub = reform.upper_expr.eval(space, context);
    if (!(lb <= ub))
        throw ConfigError("reformulation '" + reform.target + "': infeasible context, lb " +
                          format_g17(lb) + " > ub " + format_g17(ub));
    double v = lb + alpha * (ub - lb);
    if (spec.kind == ParamKind::Integer) {
        v = std::clamp(round_half_even(v), lb, ub);
        return static_cast<long long>(v);
    }
    return v;
}

// -----------------------------------------------------------------------------
// Input grid.
// -----------------------------------------------------------------------------

InputGrid input_grid(const ParameterSpace& space, const std::vector<std::size_t>& dims_per_axis) {
    const auto& axes = space.input_dims();
    if (dims_per_axis.size() != axes.size())
        throw ConfigError("input_grid: expected " + std::to_string(axes.size()) +
                          " axis counts, got " + std::to_string(dims_per_axis.size()));
    InputGrid grid;
    std::vector<std::vector<Value>> axis_points(axes.size());
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto& p = space.param(axes[a]);
        std::size_t count = dims_per_axis[a];
        if (count == 0) throw ConfigError("input_grid: axis '" + p.name + "' has zero count");
        switch (p.kind) {
            case ParamKind::Real: {
                if (count < 2)
                    throw ConfigError("input_grid: real axis '" + p.name +
                                      "' needs at least 2 points");
                for (std::size_t i = 0; i < count; ++i) {
                    double t = static_cast<double>(i) / static_cast<double>(count - 1);
                    axis_points[a].push_back(p.low + t * (p.high - p.low));
                }
                break;
            }
            case ParamKind::Integer: {
                std::vector<long long> vals;
                if (count == 1) {
                    vals.push_back(static_cast<long long>(
                        round_half_even((p.low + p.high) / 2.0)));
                } else {
                    for (std::size_t i = 0; i < count; ++i) {
                        double t = static_cast<double>(i) / static_cast<double>(count - 1);
                        vals.push_back(static_cast<long long>(
                            round_half_even(p.low + t * (p.high - p.low))));
                    }
                }
                vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
                if (vals.size() < count)
                    grid.warnings.push_back("axis '" + p.name + "': " + std::to_string(count) +
                                            " requested, " + std::to_string(vals.size()) +
                                            " distinct integer points");
                for (long long v : vals) axis_points[a].push_back(v);
                break;
            }
            case ParamKind::Boolean:
            case ParamKind::Categorical: {
                std::size_t take = std::min(count, p.categories.size());
                if (count < p.categories.size())
                    grid.warnings.push_back("axis '" + p.name + "': taking first " +
                                            std::to_string(take) + " of " +
                                            std::to_string(p.categories.size()) + " categories");
                for (std::size_t i = 0; i < take; ++i) axis_points[a].push_back(p.categories[i]);
                break;
            }
        }
        grid.effective_counts.push_back(axis_points[a].size());
    }

    std::size_t total = 1;
    for (auto c : grid.effective_counts) total *= c;
    grid.points.reserve(total);
    std::vector<std::size_t> idx(axes.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
        std::vector<Value> point(axes.size());
        for (std::size_t a = 0; a < axes.size(); ++a) point[a] = axis_points[a][idx[a]];
        grid.points.push_back(std::move(point));
        // odometer increment, last axis fastest
        for (std::size_t a = axes.size(); a-- > 0;) {
            if (++idx[a] < axis_points[a].size()) break;
            idx[a] = 0;
        }
    }
    return grid;
}

} // namespace ktune
