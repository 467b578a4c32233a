#include "featgraph/graph_io.hpp"

#include <map>
#include <sstream>

#include "featgraph/error.hpp"

namespace featgraph::graph {

using nlohmann::json;

namespace {

json fit_to_json(const ops::FitState& fit) {
  json out;
  out["kind"] = std::string(ops::fit_kind(fit));
  if (const auto* s = std::get_if<ops::StandardizeFit>(&fit)) {
    out["mean"] = s->mean;
    out["std"] = s->std;
  } else if (const auto* m = std::get_if<ops::MinMaxFit>(&fit)) {
    out["min"] = m->min;
    out["max"] = m->max;
  } else {
    out["sorted"] = std::get<ops::QuantileFit>(fit).sorted;
  }
  return out;
}

ops::FitState fit_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "standardize") return ops::StandardizeFit{j.at("mean").get<double>(), j.at("std").get<double>()};
  if (kind == "minmax") return ops::MinMaxFit{j.at("min").get<double>(), j.at("max").get<double>()};
  if (kind == "quantile") return ops::QuantileFit{j.at("sorted").get<std::vector<double>>()};
  throw Error(ErrorCode::MalformedProgram, "unknown fit kind '" + kind + "'");
}

ops::SafetyConfig safety_from_json(const json& program) {
  ops::SafetyConfig safety;
  if (program.contains("safety")) {
    const auto& s = program["safety"];
    safety.enabled = s.value("enabled", safety.enabled);
    safety.epsilon = s.value("epsilon", safety.epsilon);
    safety.exp_clip = s.value("exp_clip", safety.exp_clip);
    safety.magnitude_limit = s.value("magnitude_limit", safety.magnitude_limit);
  }
  return safety;
}

void check_format(const json& program) {
  if (!program.is_object() || program.value("format", "") != "featgraph-program")
    throw Error(ErrorCode::MalformedProgram, "not a featgraph program document");
  if (program.value("version", 0) != 1) throw Error(ErrorCode::MalformedProgram, "unsupported program version");
}

std::vector<std::string> root_names(const json& program) {
  std::vector<std::string> names;
  for (const auto& r : program.at("roots")) names.push_back(r.at("name").get<std::string>());
  return names;
}

}  // namespace

json to_program_json(const FeatureGraph& graph) {
  json program;
  program["format"] = "featgraph-program";
  program["version"] = 1;
  program["operations"] = json::array();
  for (const auto& op : ops::operation_catalog()) {
    program["operations"].push_back({{"id", op.id},
                                     {"name", std::string(op.name)},
                                     {"arity", op.arity == ops::Arity::Unary ? "unary" : "binary"},
                                     {"stateful", op.stateful}});
  }
  const auto& safety = graph.safety();
  program["safety"] = {{"enabled", safety.enabled},
                       {"epsilon", safety.epsilon},
                       {"exp_clip", safety.exp_clip},
                       {"magnitude_limit", safety.magnitude_limit}};
  program["roots"] = json::array();
  program["derivations"] = json::array();
  for (const auto& n : graph.nodes()) {
    if (const auto* root = std::get_if<RootOrigin>(&n.provenance)) {
      program["roots"].push_back({{"id", n.id}, {"name", root->name}, {"column", root->column}});
      continue;
    }
    const auto& d = n.derivation();
    json entry = {{"id", n.id},
                  {"op", d.op_id},
                  {"op_name", std::string(ops::operation_by_id(d.op_id).name)},
                  {"parents", d.parents},
                  {"depth", n.depth},
                  {"formula", graph.trace_formula(n.id)}};
    if (n.fit) entry["fit"] = fit_to_json(*n.fit);
    program["derivations"].push_back(std::move(entry));
  }
  program["next_id"] = graph.next_id();
  return program;
}

std::vector<std::vector<double>> materialize_program(const json& program, const tabular::Dataset& data) {
  check_format(program);
  if (data.names != root_names(program)) throw Error(ErrorCode::SchemaMismatch, "dataset columns differ from program roots");
  const auto safety = safety_from_json(program);

  std::map<NodeId, std::size_t> position;
  std::vector<std::vector<double>> out;
  for (const auto& r : program.at("roots")) {
    position[r.at("id").get<NodeId>()] = out.size();
    out.push_back(data.columns.at(r.at("column").get<std::size_t>()));
  }
  for (const auto& d : program.at("derivations")) {
    const auto& op = ops::operation_by_id(d.at("op").get<int>());
    const auto parents = d.at("parents").get<std::vector<NodeId>>();
    for (NodeId p : parents) {
      if (!position.count(p)) throw Error(ErrorCode::UnknownParent, "program references node " + std::to_string(p));
    }
    std::vector<double> column;
    if (op.arity == ops::Arity::Unary) {
      std::optional<ops::FitState> fit;
      if (d.contains("fit")) fit = fit_from_json(d["fit"]);
      column = ops::apply_unary(op, out[position.at(parents.at(0))], fit ? &*fit : nullptr, safety).values;
    } else {
      column = ops::apply_binary(op, out[position.at(parents.at(0))], out[position.at(parents.at(1))], safety);
    }
    position[d.at("id").get<NodeId>()] = out.size();
    out.push_back(std::move(column));
  }
  return out;
}

FeatureGraph from_program_json(const json& program, const tabular::Dataset& train) {
  check_format(program);
  if (train.names != root_names(program)) throw Error(ErrorCode::SchemaMismatch, "training columns differ from program roots");

  FeatureGraph graph;
  GraphBuilder builder(graph);
  builder.set_roots(root_names(program));
  builder.set_safety(safety_from_json(program));
  const auto columns = materialize_program(program, train);

  std::map<NodeId, int> depth;
  std::size_t position = 0;
  for (const auto& r : program.at("roots")) {
    Node node;
    node.id = r.at("id").get<NodeId>();
    node.provenance = RootOrigin{r.at("name").get<std::string>(), r.at("column").get<std::size_t>()};
    node.train_column = columns[position++];
    node.embedding = tabular::compute_stats(node.train_column);
    depth[node.id] = 0;
    builder.append(std::move(node));
  }
  for (const auto& d : program.at("derivations")) {
    Node node;
    node.id = d.at("id").get<NodeId>();
    const int op = d.at("op").get<int>();
    if (d.contains("op_name") && d["op_name"].get<std::string>() != ops::operation_by_id(op).name)
      throw Error(ErrorCode::MalformedProgram, "operation id/name mismatch at node " + std::to_string(node.id));
    Derivation derivation{op, d.at("parents").get<std::vector<NodeId>>()};
    int parent_depth = 0;
    for (NodeId p : derivation.parents) parent_depth = std::max(parent_depth, depth.at(p));
    node.depth = parent_depth + 1;
    depth[node.id] = node.depth;
    node.provenance = std::move(derivation);
    if (d.contains("fit")) node.fit = fit_from_json(d["fit"]);
    node.train_column = columns[position++];
    node.embedding = tabular::compute_stats(node.train_column);
    builder.append(std::move(node));
  }
  NodeId next = 0;
  for (const auto& n : graph.nodes()) next = std::max(next, n.id + 1);
  builder.finish(program.value("next_id", next));
  return graph;
}

std::string to_dot(const FeatureGraph& graph) {
  const auto escape = [](const std::string& text) {
    std::string out;
    for (char c : text) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out;
  };
  std::ostringstream dot;
  dot << "digraph feature_states {\n  rankdir=LR;\n";
  for (const auto& n : graph.nodes()) {
    dot << "  n" << n.id << " [label=\"" << escape(graph.trace_formula(n.id)) << "\\ndepth=" << n.depth << "\"";
    if (n.is_root()) dot << ", shape=box";
    dot << "];\n";
  }
  for (const auto& e : graph.edges()) {
    dot << "  n" << e.head << " -> n" << e.child << " [label=\"" << ops::operation_by_id(e.op_id).name << "\"];\n";
  }
  dot << "}\n";
  return dot.str();
}

namespace {

class FormulaParser {
 public:
  explicit FormulaParser(const std::string& text) : text_(text) {}

  Formula parse() {
    Formula f = expression();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    return f;
  }

 private:
  Formula expression() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != '(' && text_[pos_] != ')' && text_[pos_] != ',') ++pos_;
    std::string symbol = text_.substr(start, pos_ - start);
    while (!symbol.empty() && symbol.back() == ' ') symbol.pop_back();
    if (symbol.empty()) fail("empty symbol");
    Formula f;
    f.symbol = symbol;
    if (pos_ < text_.size() && text_[pos_] == '(') {
      f.is_call = true;
      ++pos_;
      while (true) {
        f.args.push_back(expression());
        skip_space();
        if (pos_ >= text_.size()) fail("unterminated call");
        if (text_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (text_[pos_] == ')') {
          ++pos_;
          break;
        }
        fail("unexpected character");
      }
    }
    return f;
  }

  void skip_space() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::MalformedProgram, "formula '" + text_ + "': " + what + " at " + std::to_string(pos_));
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

}  // namespace

Formula parse_formula(const std::string& text) { return FormulaParser(text).parse(); }

std::vector<double> evaluate_formula(const Formula& formula, const tabular::Dataset& data, const ops::SafetyConfig& safety) {
  if (!formula.is_call) {
    for (std::size_t c = 0; c < data.names.size(); ++c) {
      if (data.names[c] == formula.symbol) return data.columns[c];
    }
    throw Error(ErrorCode::SchemaMismatch, "no column named '" + formula.symbol + "'");
  }
  const auto& op = ops::operation_by_name(formula.symbol);
  std::vector<std::vector<double>> args;
  for (const auto& a : formula.args) args.push_back(evaluate_formula(a, data, safety));
  if (op.arity == ops::Arity::Unary) {
    if (args.size() != 1) throw Error(ErrorCode::ArityMismatch, formula.symbol + " takes one argument");
    return ops::apply_unary(op, args[0], nullptr, safety).values;
  }
  if (args.size() != 2) throw Error(ErrorCode::ArityMismatch, formula.symbol + " takes two arguments");
  return ops::apply_binary(op, args[0], args[1], safety);
}

}  // namespace featgraph::graph
