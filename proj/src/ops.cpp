#include "featgraph/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "featgraph/error.hpp"

namespace featgraph::ops {

namespace {

constexpr std::array<OperationKind, 15> kCatalog = {{
    {op_id::kSquare, "square", Arity::Unary, false, false},
    {op_id::kSqrtAbs, "sqrt_abs", Arity::Unary, false, false},
    {op_id::kLogAbs, "log_abs", Arity::Unary, false, false},
    {op_id::kExpClip, "exp_clip", Arity::Unary, false, false},
    {op_id::kSin, "sin", Arity::Unary, false, false},
    {op_id::kCos, "cos", Arity::Unary, false, false},
    {op_id::kTanh, "tanh", Arity::Unary, false, false},
    {op_id::kReciprocal, "reciprocal", Arity::Unary, false, false},
    {op_id::kStandardize, "standardize", Arity::Unary, true, false},
    {op_id::kMinMax, "minmax", Arity::Unary, true, false},
    {op_id::kQuantileUniform, "quantile_uniform", Arity::Unary, true, false},
    {op_id::kAdd, "add", Arity::Binary, false, true},
    {op_id::kSubtract, "subtract", Arity::Binary, false, false},
    {op_id::kMultiply, "multiply", Arity::Binary, false, true},
    {op_id::kDivideSafe, "divide_safe", Arity::Binary, false, false},
}};

// 1/max(|x|, eps) carrying the sign of x, with sign(0) = +1.
double guarded_denominator(double x, double epsilon) {
  const double magnitude = std::max(std::abs(x), epsilon);
  return std::signbit(x) ? -magnitude : magnitude;
}

double finish(double value, const SafetyConfig& safety, const OperationKind& kind) {
  if (safety.enabled) {
    if (std::isnan(value)) return 0.0;
    return std::clamp(value, -safety.magnitude_limit, safety.magnitude_limit);
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::NonFiniteOutput, std::string(kind.name) + " produced a non-finite value");
  }
  return value;
}

double quantile_position(const std::vector<double>& sorted, double x) {
  const std::size_t n = sorted.size();
  if (n == 1) return 0.5;
  if (x <= sorted.front()) return 0.0;
  if (x >= sorted.back()) return 1.0;
  const auto upper = std::upper_bound(sorted.begin(), sorted.end(), x);
  const auto i = static_cast<std::size_t>(upper - sorted.begin()) - 1;
  const double fraction = (x - sorted[i]) / (sorted[i + 1] - sorted[i]);
  return (static_cast<double>(i) + fraction) / static_cast<double>(n - 1);
}

FitState fit_state(const OperationKind& kind, std::span<const double> column) {
  switch (kind.id) {
    case op_id::kStandardize: {
      const double n = static_cast<double>(column.size());
      const double mean = std::accumulate(column.begin(), column.end(), 0.0) / n;
      double squares = 0.0;
      for (double v : column) squares += (v - mean) * (v - mean);
      return StandardizeFit{mean, std::sqrt(squares / n)};
    }
    case op_id::kMinMax: {
      const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
      return MinMaxFit{*lo, *hi};
    }
    case op_id::kQuantileUniform: {
      QuantileFit fit{std::vector<double>(column.begin(), column.end())};
      std::sort(fit.sorted.begin(), fit.sorted.end());
      return fit;
    }
    default:
      throw Error(ErrorCode::FitStateMismatch, std::string(kind.name) + " is not stateful");
  }
}

bool fit_matches(const OperationKind& kind, const FitState& fit) {
  switch (kind.id) {
    case op_id::kStandardize: return std::holds_alternative<StandardizeFit>(fit);
    case op_id::kMinMax: return std::holds_alternative<MinMaxFit>(fit);
    case op_id::kQuantileUniform: return std::holds_alternative<QuantileFit>(fit);
    default: return false;
  }
}

}  // namespace

std::span<const OperationKind> operation_catalog() { return kCatalog; }

std::vector<OperationKind> default_operation_set() { return {kCatalog.begin(), kCatalog.end()}; }

const OperationKind& operation_by_id(int id) {
  if (id < 0 || id >= static_cast<int>(kCatalog.size()))
    throw Error(ErrorCode::UnknownOperation, "operation id " + std::to_string(id));
  return kCatalog[static_cast<std::size_t>(id)];
}

const OperationKind& operation_by_name(std::string_view name) {
  for (const auto& kind : kCatalog) {
    if (kind.name == name) return kind;
  }
  throw Error(ErrorCode::UnknownOperation, "operation '" + std::string(name) + "'");
}

std::string_view fit_kind(const FitState& fit) {
  if (std::holds_alternative<StandardizeFit>(fit)) return "standardize";
  if (std::holds_alternative<MinMaxFit>(fit)) return "minmax";
  return "quantile";
}

UnaryResult apply_unary(const OperationKind& kind, std::span<const double> column, const FitState* fit,
                        const SafetyConfig& safety) {
  if (kind.arity != Arity::Unary) throw Error(ErrorCode::ArityMismatch, std::string(kind.name) + " is binary");
  if (fit != nullptr && !fit_matches(kind, *fit))
    throw Error(ErrorCode::FitStateMismatch, "fit state does not belong to " + std::string(kind.name));

  UnaryResult result;
  result.values.resize(column.size());
  const double eps = safety.epsilon;

  if (kind.stateful) {
    if (column.empty() && fit == nullptr) throw Error(ErrorCode::EmptyColumn, "cannot fit on an empty column");
    FitState state = fit != nullptr ? *fit : fit_state(kind, column);
    for (std::size_t i = 0; i < column.size(); ++i) {
      const double x = column[i];
      double y = 0.0;
      if (const auto* s = std::get_if<StandardizeFit>(&state)) {
        const double scale = safety.enabled ? std::max(s->std, eps) : s->std;
        y = (x - s->mean) / scale;
      } else if (const auto* m = std::get_if<MinMaxFit>(&state)) {
        const double range = safety.enabled ? std::max(m->max - m->min, eps) : m->max - m->min;
        y = (x - m->min) / range;
      } else {
        y = quantile_position(std::get<QuantileFit>(state).sorted, x);
      }
      result.values[i] = finish(y, safety, kind);
    }
    if (fit == nullptr) result.fit = std::move(state);
    return result;
  }

  for (std::size_t i = 0; i < column.size(); ++i) {
    const double x = column[i];
    double y = 0.0;
    switch (kind.id) {
      case op_id::kSquare: y = x * x; break;
      case op_id::kSqrtAbs: y = std::sqrt(std::abs(x)); break;
      case op_id::kLogAbs: y = safety.enabled ? std::log(std::abs(x) + eps) : std::log(std::abs(x)); break;
      case op_id::kExpClip: y = safety.enabled ? std::exp(std::min(x, safety.exp_clip)) : std::exp(x); break;
      case op_id::kSin: y = std::sin(x); break;
      case op_id::kCos: y = std::cos(x); break;
      case op_id::kTanh: y = std::tanh(x); break;
      case op_id::kReciprocal: y = safety.enabled ? 1.0 / guarded_denominator(x, eps) : 1.0 / x; break;
      default: throw Error(ErrorCode::UnknownOperation, std::string(kind.name));
    }
    result.values[i] = finish(y, safety, kind);
  }
  return result;
}

std::vector<double> apply_binary(const OperationKind& kind, std::span<const double> a, std::span<const double> b,
                                 const SafetyConfig& safety) {
  if (kind.arity != Arity::Binary) throw Error(ErrorCode::ArityMismatch, std::string(kind.name) + " is unary");
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "binary operands differ in length");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double y = 0.0;
    switch (kind.id) {
      case op_id::kAdd: y = a[i] + b[i]; break;
      case op_id::kSubtract: y = a[i] - b[i]; break;
      case op_id::kMultiply: y = a[i] * b[i]; break;
      case op_id::kDivideSafe: y = safety.enabled ? a[i] / guarded_denominator(b[i], safety.epsilon) : a[i] / b[i]; break;
      default: throw Error(ErrorCode::UnknownOperation, std::string(kind.name));
    }
    out[i] = finish(y, safety, kind);
  }
  return out;
}

}  // namespace featgraph::ops
