#include "contrafair/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>

#include "contrafair/error.hpp"
#include "contrafair/scm.hpp"

namespace contrafair {
namespace {

std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cell += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"' && cell.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
      was_quoted = false;
    } else {
      cell += c;
    }
  }
  if (quoted) throw Error(ErrorCode::kParseError, where + ": unterminated quote");
  cells.push_back(std::move(cell));
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_double(const std::string& text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

struct Row {
  std::size_t line = 0;
  std::int64_t time = 0;
  ValueMap protected_values;
  ValueMap observables;
  std::optional<double> outcome;
};

std::string quote(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<Individual> parse_dataset(std::istream& in, const CausalGraph& graph, const std::string& source) {
  auto where = [&](std::size_t line, std::size_t column) {
    return source + ":" + std::to_string(line) + ":" + std::to_string(column);
  };

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    header = split_csv_line(line, where(line_no, 1));
    break;
  }
  if (header.empty()) throw Error(ErrorCode::kParseError, source + ": missing header row");

  std::optional<std::size_t> id_col;
  std::optional<std::size_t> time_col;
  std::optional<std::size_t> outcome_col;
  std::vector<const VariableSpec*> column_spec(header.size(), nullptr);
  std::map<std::string, std::size_t> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    if (!seen.emplace(name, c).second) {
      throw Error(ErrorCode::kParseError, where(line_no, c + 1) + ": duplicate column '" + name + "'");
    }
    if (name == "id") {
      id_col = c;
    } else if (name == "time") {
      time_col = c;
    } else if (const VariableSpec* spec = graph.find(name)) {
      column_spec[c] = spec;
      if (spec->role == Role::kOutcome) {
        if (outcome_col) {
          throw Error(ErrorCode::kParseError, where(line_no, c + 1) + ": more than one outcome column");
        }
        outcome_col = c;
      }
    } else {
      throw Error(ErrorCode::kParseError, where(line_no, c + 1) + ": column '" + name +
                                              "' is not a graph variable");
    }
  }
  if (!id_col) throw Error(ErrorCode::kParseError, where(line_no, 1) + ": header has no 'id' column");
  for (const auto& spec : graph.variables()) {
    if (spec.role != Role::kOutcome && !seen.contains(spec.name)) {
      throw Error(ErrorCode::kParseError, where(line_no, 1) + ": header has no column for '" + spec.name + "'");
    }
  }

  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line, where(line_no, 1));
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kParseError, where(line_no, 1) + ": expected " + std::to_string(header.size()) +
                                              " fields, found " + std::to_string(cells.size()));
    }
    Row row;
    row.line = line_no;
    const std::string id = trim(cells[*id_col]);
    if (id.empty()) throw Error(ErrorCode::kParseError, where(line_no, *id_col + 1) + ": empty id");
    if (time_col) {
      const std::string text = trim(cells[*time_col]);
      std::int64_t tick = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), tick);
      if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::kParseError, where(line_no, *time_col + 1) + ": time '" + text +
                                                "' is not an integer");
      }
      row.time = tick;
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const VariableSpec* spec = column_spec[c];
      if (spec == nullptr) continue;
      const std::string text = trim(cells[c]);
      if (text.empty()) {
        if (spec->role == Role::kOutcome) continue;
        throw Error(ErrorCode::kMissingValue, where(line_no, c + 1) + ": empty cell for '" + spec->name + "'");
      }
      double value = 0.0;
      if (spec->categorical()) {
        const auto level = spec->level_index(text);
        if (!level) {
          throw Error(ErrorCode::kDomainViolation, where(line_no, c + 1) + ": row '" + id + "': '" + text +
                                                       "' is not a level of '" + spec->name + "'");
        }
        value = *level;
      } else {
        const auto parsed = parse_double(text);
        if (!parsed) {
          throw Error(ErrorCode::kParseError, where(line_no, c + 1) + ": '" + text + "' is not a number");
        }
        if (!std::isfinite(*parsed)) {
          throw Error(ErrorCode::kDomainViolation, where(line_no, c + 1) + ": row '" + id +
                                                       "': non-finite value for '" + spec->name + "'");
        }
        value = *parsed;
      }
      switch (spec->role) {
        case Role::kProtected: row.protected_values[spec->name] = value; break;
        case Role::kObservable: row.observables[spec->name] = value; break;
        case Role::kOutcome: row.outcome = value; break;
      }
    }
    auto [it, fresh] = rows.try_emplace(id);
    if (fresh) order.push_back(id);
    it->second.push_back(std::move(row));
  }

  std::vector<Individual> out;
  out.reserve(order.size());
  for (const auto& id : order) {
    std::vector<Row>& group = rows.at(id);
    std::stable_sort(group.begin(), group.end(), [](const Row& a, const Row& b) { return a.time < b.time; });
    Individual person;
    person.id = id;
    person.protected_values = group.front().protected_values;
    for (std::size_t k = 0; k < group.size(); ++k) {
      if (k > 0 && group[k].time == group[k - 1].time) {
        throw Error(ErrorCode::kDuplicateTimestamp, source + ":" + std::to_string(group[k].line) + ": id '" +
                                                        id + "' repeats time " + std::to_string(group[k].time));
      }
      if (group[k].protected_values != person.protected_values) {
        throw Error(ErrorCode::kParseError, source + ":" + std::to_string(group[k].line) + ": id '" + id +
                                                "' changes a protected value between rows");
      }
      person.snapshots.push_back({group[k].time, std::move(group[k].observables)});
    }
    person.outcome = group.back().outcome;
    validate_individual(graph, person);
    out.push_back(std::move(person));
  }
  return out;
}

std::vector<Individual> load_dataset(const std::filesystem::path& path, const CausalGraph& graph) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open dataset '" + path.string() + "'");
  return parse_dataset(in, graph, path.string());
}

void write_dataset(std::ostream& out, const CausalGraph& graph, std::span<const Individual> individuals) {
  bool with_time = false;
  for (const auto& person : individuals) {
    if (person.snapshots.size() > 1) with_time = true;
    for (const auto& snap : person.snapshots) with_time = with_time || snap.time != 0;
  }
  const VariableSpec* outcome = nullptr;
  for (const auto& spec : graph.variables()) {
    if (spec.role == Role::kOutcome) {
      outcome = &spec;
      break;
    }
  }

  out << "id";
  if (with_time) out << ",time";
  for (const auto& spec : graph.variables()) {
    if (spec.role != Role::kOutcome) out << ',' << quote(spec.name);
  }
  if (outcome != nullptr) out << ',' << quote(outcome->name);
  out << '\n';

  for (const auto& person : individuals) {
    for (std::size_t s = 0; s < person.snapshots.size(); ++s) {
      const Snapshot& snap = person.snapshots[s];
      out << quote(person.id);
      if (with_time) out << ',' << snap.time;
      for (const auto& spec : graph.variables()) {
        if (spec.role == Role::kOutcome) continue;
        const ValueMap& values = spec.role == Role::kProtected ? person.protected_values : snap.observables;
        auto it = values.find(spec.name);
        if (it == values.end()) throw Error(ErrorCode::kMissingValue, person.id + ": " + spec.name);
        out << ',' << quote(spec.format_value(it->second));
      }
      if (outcome != nullptr) {
        out << ',';
        if (s + 1 == person.snapshots.size() && person.outcome) out << quote(outcome->format_value(*person.outcome));
      }
      out << '\n';
    }
  }
}

void save_dataset(const std::filesystem::path& path, const CausalGraph& graph,
                  std::span<const Individual> individuals) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write dataset '" + path.string() + "'");
  write_dataset(out, graph, individuals);
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

}  // namespace contrafair
