#pragma once

// Snapshot directory format:
//   snapshot_<t>.tsv   "u v [w]" per line, tab or space separated, '#' comments
//   labels_<t>.tsv     "u label" per line (optional)
// Snapshots must be numbered contiguously from 0. Nodes are indexed in order
// of first appearance in the edge list; nodes that appear only in a labels
// file are ignored.

#include <toporeg/errors.hpp>
#include <toporeg/graph.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace toporeg {

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string field;
  while (in >> field) fields.push_back(field);
  return fields;
}

inline bool skip_line(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

inline double parse_double(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ValidationError(where + ": cannot parse number '" + text + "'");
  }
}

// Interns label tokens so the same label maps to the same id across snapshots.
class LabelDictionary {
 public:
  int intern(const std::string& token) {
    const auto [it, inserted] = ids_.emplace(token, static_cast<int>(ids_.size()));
    return it->second;
  }

 private:
  std::unordered_map<std::string, int> ids_;
};

}  // namespace detail

/// Parses one snapshot edge list (and its optional labels file).
inline SnapshotGraph load_snapshot(const std::filesystem::path& edge_file,
                                   const std::filesystem::path& label_file,
                                   detail::LabelDictionary& dictionary) {
  std::ifstream in(edge_file);
  if (!in) throw ValidationError("cannot open " + edge_file.string());

  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> index;
  std::map<std::pair<std::size_t, std::size_t>, double> edge_weights;
  const auto local = [&](const std::string& id) {
    const auto [it, inserted] = index.emplace(id, ids.size());
    if (inserted) ids.push_back(id);
    return it->second;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skip_line(line)) continue;
    const auto where = edge_file.filename().string() + ":" + std::to_string(line_no);
    const auto fields = detail::split_fields(line);
    if (fields.size() < 2 || fields.size() > 3) throw ValidationError(where + ": expected 'u v [w]'");
    if (fields[0] == fields[1]) throw ValidationError(where + ": self-loop on node " + fields[0]);
    const double w = fields.size() == 3 ? detail::parse_double(fields[2], where) : 1.0;
    if (!std::isfinite(w) || w < 0.0) throw ValidationError(where + ": negative edge weight");
    auto u = local(fields[0]);
    auto v = local(fields[1]);
    if (u > v) std::swap(u, v);
    edge_weights[{u, v}] += w;
  }
  if (ids.empty()) throw EmptyGraphError(edge_file.string() + " contains no edges");

  const auto n = static_cast<Eigen::Index>(ids.size());
  Matrix weights = Matrix::Zero(n, n);
  for (const auto& [uv, w] : edge_weights) {
    weights(uv.first, uv.second) = w;
    weights(uv.second, uv.first) = w;
  }

  std::optional<Labels> labels;
  if (!label_file.empty() && std::filesystem::exists(label_file)) {
    std::ifstream lin(label_file);
    Labels parsed(ids.size(), -1);
    line_no = 0;
    while (std::getline(lin, line)) {
      ++line_no;
      if (detail::skip_line(line)) continue;
      const auto fields = detail::split_fields(line);
      if (fields.size() != 2) {
        throw ValidationError(label_file.filename().string() + ":" + std::to_string(line_no) +
                              ": expected 'u label'");
      }
      const auto it = index.find(fields[0]);
      if (it == index.end()) continue;
      parsed[it->second] = dictionary.intern(fields[1]);
    }
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      if (parsed[i] < 0) throw ValidationError(label_file.string() + ": no label for node " + ids[i]);
    }
    labels = std::move(parsed);
  }
  return SnapshotGraph(std::move(ids), std::move(weights), std::move(labels));
}

/// Loads snapshot_0.tsv, snapshot_1.tsv, ... from a directory.
inline DynamicGraph load_dynamic_graph(const std::filesystem::path& directory) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(directory)) throw ValidationError("not a directory: " + directory.string());
  std::map<long, fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    const auto name = entry.path().filename().string();
    constexpr std::string_view prefix = "snapshot_";
    constexpr std::string_view suffix = ".tsv";
    if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) || !name.ends_with(suffix)) {
      continue;
    }
    const auto digits = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    long t = -1;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), t);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || t < 0) continue;
    files.emplace(t, entry.path());
  }
  if (files.empty()) throw GapError("no snapshot_<t>.tsv files in " + directory.string());
  long expected = 0;
  for (const auto& [t, path] : files) {
    if (t != expected) throw GapError("snapshot sequence has a gap: missing t=" + std::to_string(expected));
    ++expected;
  }
  detail::LabelDictionary dictionary;
  std::vector<SnapshotGraph> snapshots;
  for (const auto& [t, path] : files) {
    snapshots.push_back(load_snapshot(path, directory / ("labels_" + std::to_string(t) + ".tsv"), dictionary));
  }
  return DynamicGraph(std::move(snapshots));
}

/// Writes one snapshot in the loader's format (upper triangle, full precision).
inline void write_snapshot(const SnapshotGraph& g, const std::filesystem::path& edge_file,
                           const std::filesystem::path& label_file) {
  std::ofstream out(edge_file);
  if (!out) throw ValidationError("cannot write " + edge_file.string());
  out.precision(17);
  const auto& ids = g.node_ids();
  for (const auto& [u, v, w] : g.edges()) out << ids[u] << '\t' << ids[v] << '\t' << w << '\n';
  if (g.has_labels() && !label_file.empty()) {
    std::ofstream lout(label_file);
    for (std::size_t i = 0; i < g.num_nodes(); ++i) lout << ids[i] << '\t' << g.labels()[i] << '\n';
  }
}

inline void write_dynamic_graph(const DynamicGraph& dg, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  for (std::size_t t = 0; t < dg.size(); ++t) {
    const auto suffix = std::to_string(t) + ".tsv";
    write_snapshot(dg[t], directory / ("snapshot_" + suffix), directory / ("labels_" + suffix));
  }
}

}  // namespace toporeg
