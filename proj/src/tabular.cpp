#include "featgraph/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "featgraph/error.hpp"
#include "featgraph/random.hpp"

namespace featgraph::tabular {

std::string to_string(TaskKind task) {
  return task == TaskKind::Classification ? "classification" : "regression";
}

TaskKind parse_task(const std::string& text) {
  if (text == "classification" || text == "C" || text == "c") return TaskKind::Classification;
  if (text == "regression" || text == "R" || text == "r") return TaskKind::Regression;
  throw Error(ErrorCode::OutOfRange, "unknown task kind '" + text + "'");
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  Dataset out;
  out.names = names;
  out.task = task;
  out.class_names = class_names;
  out.columns.resize(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    out.columns[c].reserve(rows.size());
    for (std::size_t r : rows) out.columns[c].push_back(columns[c].at(r));
  }
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(labels.at(r));
  return out;
}

void Dataset::validate() const {
  if (names.size() != columns.size())
    throw Error(ErrorCode::SchemaMismatch, "column name count differs from column count");
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) throw Error(ErrorCode::SchemaMismatch, "duplicate column name '" + name + "'");
  }
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].size() != labels.size())
      throw Error(ErrorCode::LengthMismatch, "column '" + names[c] + "' has wrong length");
    for (double v : columns[c]) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteOutput, "non-finite value in '" + names[c] + "'");
    }
  }
  for (double v : labels) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteOutput, "non-finite label");
  }
}

double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyColumn, "quantile of empty sample");
  const double position = p * static_cast<double>(sorted.size() - 1);
  const auto lower = static_cast<std::size_t>(std::floor(position));
  const std::size_t upper = std::min(lower + 1, sorted.size() - 1);
  const double fraction = position - static_cast<double>(lower);
  return sorted[lower] + fraction * (sorted[upper] - sorted[lower]);
}

ColumnStats compute_stats(std::span<const double> column) {
  if (column.empty()) throw Error(ErrorCode::EmptyColumn, "cannot describe an empty column");
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());

  const double n = static_cast<double>(column.size());
  const double mean = std::accumulate(column.begin(), column.end(), 0.0) / n;
  double squares = 0.0;
  for (double v : column) squares += (v - mean) * (v - mean);

  ColumnStats stats;
  stats.mean = mean;
  stats.std = std::sqrt(squares / n);
  stats.min = sorted.front();
  stats.q1 = sorted_quantile(sorted, 0.25);
  stats.median = sorted_quantile(sorted, 0.5);
  stats.q3 = sorted_quantile(sorted, 0.75);
  stats.max = sorted.back();
  // Interpolation can round a hair outside its bracket on nearly equal
  // neighbours; clamp so the order statistics stay monotone.
  stats.q1 = std::clamp(stats.q1, stats.min, stats.max);
  stats.median = std::clamp(stats.median, stats.q1, stats.max);
  stats.q3 = std::clamp(stats.q3, stats.median, stats.max);
  return stats;
}

namespace {

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && (text[begin] == ' ' || text[begin] == '\t' || text[begin] == '\r')) ++begin;
  while (end > begin && (text[end - 1] == ' ' || text[end - 1] == '\t' || text[end - 1] == '\r')) --end;
  std::string out(text.substr(begin, end - begin));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

Dataset parse_csv(std::istream& in, const std::string& label_column, TaskKind task) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split_line(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::EmptyDataset, "no header row");

  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw Error(ErrorCode::MissingLabelColumn, "label column '" + label_column + "' not in header");
  const auto label_index = static_cast<std::size_t>(label_it - header.begin());

  Dataset data;
  data.task = task;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_index) data.names.push_back(header[c]);
  }
  data.columns.resize(data.names.size());

  std::vector<std::string> raw_labels;
  std::vector<std::string> problems;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::RaggedRow, "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                            " cells, header has " + std::to_string(header.size()));
    }
    std::size_t feature = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_index) {
        raw_labels.push_back(cells[c]);
        continue;
      }
      const auto value = parse_number(cells[c]);
      if (!value) {
        if (problems.size() < 10) problems.push_back("(row " + std::to_string(row) + ", col '" + header[c] + "': '" + cells[c] + "')");
        data.columns[feature].push_back(0.0);
      } else {
        data.columns[feature].push_back(*value);
      }
      ++feature;
    }
    ++row;
  }
  if (row == 0) throw Error(ErrorCode::EmptyDataset, "no data rows");
  if (data.names.empty()) throw Error(ErrorCode::EmptyDataset, "no feature columns");

  if (task == TaskKind::Regression) {
    for (std::size_t r = 0; r < raw_labels.size(); ++r) {
      const auto value = parse_number(raw_labels[r]);
      if (!value) {
        if (problems.size() < 10)
          problems.push_back("(row " + std::to_string(r) + ", col '" + label_column + "': '" + raw_labels[r] + "')");
        data.labels.push_back(0.0);
      } else {
        data.labels.push_back(*value);
      }
    }
  } else {
    // Numeric labels are ordered numerically, anything else lexicographically.
    bool all_numeric = true;
    for (const auto& text : raw_labels) all_numeric = all_numeric && parse_number(text).has_value();
    std::map<std::string, double> index;
    if (all_numeric) {
      std::map<double, std::string> by_value;
      for (const auto& text : raw_labels) by_value.emplace(*parse_number(text), text);
      for (const auto& [value, text] : by_value) {
        index[text] = static_cast<double>(data.class_names.size());
        data.class_names.push_back(text);
      }
      for (const auto& text : raw_labels) {
        if (!index.count(text)) index[text] = index.at(by_value.at(*parse_number(text)));
      }
    } else {
      std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
      for (const auto& text : distinct) {
        index[text] = static_cast<double>(data.class_names.size());
        data.class_names.push_back(text);
      }
    }
    for (const auto& text : raw_labels) data.labels.push_back(index.at(text));
  }

  if (!problems.empty()) {
    std::string message = "non-numeric or non-finite cells:";
    for (const auto& p : problems) message += " " + p;
    throw Error(ErrorCode::NonNumericCell, message);
  }
  data.validate();
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column, TaskKind task) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  return parse_csv(in, label_column, task);
}

void write_csv(std::ostream& out, const std::vector<std::string>& names, const std::vector<Column>& columns,
               const std::string& label_name, std::span<const double> labels) {
  for (const auto& name : names) {
    // Commas inside a derived formula would break the delimiter.
    if (name.find(',') != std::string::npos) {
      out << '"' << name << "\",";
    } else {
      out << name << ',';
    }
  }
  out << label_name << '\n';
  std::ostringstream cell;
  cell.precision(17);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    for (const auto& column : columns) {
      cell.str("");
      cell << column[r];
      out << cell.str() << ',';
    }
    cell.str("");
    cell << labels[r];
    out << cell.str() << '\n';
  }
}

SplitIndices split_indices(const Dataset& dataset, const SplitSpec& spec) {
  const std::size_t n = dataset.row_count();
  if (n < 5) throw Error(ErrorCode::TooFewRows, "split needs at least 5 rows, got " + std::to_string(n));
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw Error(ErrorCode::OutOfRange, "train fraction must lie in (0, 1)");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  shuffle(order, rng);

  auto train_size = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  train_size = std::clamp<std::size_t>(train_size, 1, n - 1);

  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_size));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train_size), order.end());

  if (dataset.task == TaskKind::Classification) {
    // Move one row of every class missing from train over from test, giving
    // back a row of a class that train holds more than once.
    std::map<double, std::size_t> train_counts;
    for (std::size_t r : out.train) ++train_counts[dataset.labels[r]];
    for (std::size_t t = 0; t < out.test.size(); ++t) {
      const double label = dataset.labels[out.test[t]];
      if (train_counts.count(label)) continue;
      for (std::size_t s = out.train.size(); s-- > 0;) {
        const double donor = dataset.labels[out.train[s]];
        if (train_counts[donor] > 1) {
          --train_counts[donor];
          ++train_counts[label];
          std::swap(out.train[s], out.test[t]);
          break;
        }
      }
    }
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec) {
  const auto indices = split_indices(dataset, spec);
  return {dataset.select_rows(indices.train), dataset.select_rows(indices.test)};
}

}  // namespace featgraph::tabular
