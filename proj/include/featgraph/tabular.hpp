#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace featgraph::tabular {

enum class TaskKind { Classification, Regression };

std::string to_string(TaskKind task);
TaskKind parse_task(const std::string& text);

using Column = std::vector<double>;

/// Numeric feature table plus a label vector.
///
/// Classification labels are contiguous class indices 0..C-1; `class_names`
/// keeps the original label text in index order so predictions can be
/// mapped back.
struct Dataset {
  std::vector<std::string> names;
  std::vector<Column> columns;
  Column labels;
  TaskKind task = TaskKind::Classification;
  std::vector<std::string> class_names;

  std::size_t row_count() const { return labels.size(); }
  std::size_t feature_count() const { return columns.size(); }
  std::size_t class_count() const { return class_names.size(); }

  /// Copy of the given rows, in the given order.
  Dataset select_rows(std::span<const std::size_t> rows) const;

  /// Throws unless the structural invariants hold (lengths, finiteness,
  /// unique names).
  void validate() const;
};

struct ColumnStats {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;

  static constexpr std::size_t kDimension = 7;
  std::array<double, kDimension> as_array() const { return {mean, std, min, q1, median, q3, max}; }
};

/// Population std, quartiles by linear interpolation between closest ranks.
ColumnStats compute_stats(std::span<const double> column);

/// Linear-interpolated quantile of an ascending-sorted sample, p in [0, 1].
double sorted_quantile(std::span<const double> sorted, double p);

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column, TaskKind task);
Dataset parse_csv(std::istream& in, const std::string& label_column, TaskKind task);
void write_csv(std::ostream& out, const std::vector<std::string>& names, const std::vector<Column>& columns,
               const std::string& label_name, std::span<const double> labels);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

SplitIndices split_indices(const Dataset& dataset, const SplitSpec& spec);
std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec);

}  // namespace featgraph::tabular
