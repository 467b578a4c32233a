#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace featgraph::ops {

enum class Arity { Unary, Binary };

/// One entry of the operation catalog. `id` is the stable integer written
/// into graph exports.
struct OperationKind {
  int id = 0;
  std::string_view name;
  Arity arity = Arity::Unary;
  bool stateful = false;
  bool commutative = false;

  friend bool operator==(const OperationKind& a, const OperationKind& b) { return a.id == b.id; }
};

namespace op_id {
inline constexpr int kSquare = 0;
inline constexpr int kSqrtAbs = 1;
inline constexpr int kLogAbs = 2;
inline constexpr int kExpClip = 3;
inline constexpr int kSin = 4;
inline constexpr int kCos = 5;
inline constexpr int kTanh = 6;
inline constexpr int kReciprocal = 7;
inline constexpr int kStandardize = 8;
inline constexpr int kMinMax = 9;
inline constexpr int kQuantileUniform = 10;
inline constexpr int kAdd = 11;
inline constexpr int kSubtract = 12;
inline constexpr int kMultiply = 13;
inline constexpr int kDivideSafe = 14;
}  // namespace op_id

struct StandardizeFit {
  double mean = 0.0;
  double std = 0.0;
};
struct MinMaxFit {
  double min = 0.0;
  double max = 0.0;
};
struct QuantileFit {
  std::vector<double> sorted;
};

/// Parameters captured by a stateful operation on training data.
using FitState = std::variant<StandardizeFit, MinMaxFit, QuantileFit>;

/// Safe-math guards. With `enabled` false the raw formulas are used and a
/// non-finite output raises NonFiniteOutput.
struct SafetyConfig {
  bool enabled = true;
  double epsilon = 1e-6;
  double exp_clip = 50.0;
  /// Outputs are clamped to +-magnitude_limit so that repeated squaring
  /// cannot overflow the statistics computed downstream.
  double magnitude_limit = 1e100;
};

/// All fifteen kinds, ids dense from 0.
std::span<const OperationKind> operation_catalog();

/// The default operation set (the full catalog).
std::vector<OperationKind> default_operation_set();

const OperationKind& operation_by_id(int id);
const OperationKind& operation_by_name(std::string_view name);

struct UnaryResult {
  std::vector<double> values;
  std::optional<FitState> fit;
};

/// Applies a unary kind. Stateful kinds fit on `column` when `fit` is null
/// and return the captured state; with a state they replay it unchanged.
UnaryResult apply_unary(const OperationKind& kind, std::span<const double> column, const FitState* fit = nullptr,
                        const SafetyConfig& safety = {});

std::vector<double> apply_binary(const OperationKind& kind, std::span<const double> a, std::span<const double> b,
                                 const SafetyConfig& safety = {});

/// Name of the fit-state alternative ("standardize", "minmax", "quantile").
std::string_view fit_kind(const FitState& fit);

}  // namespace featgraph::ops
