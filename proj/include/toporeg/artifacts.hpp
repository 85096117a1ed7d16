#pragma once

// Config files, run artifacts and checkpoints.
//
// Layout under an output directory:
//   config.txt                  effective configuration
//   metrics.csv                 per-snapshot ACC/NMI/ARI/Modularity + mean row
//   consistency.csv             consecutive W_{1,inf} before/after stage 2
//   losses.csv                  per-epoch loss components
//   topo.csv                    per-snapshot topological terms of the final state
//   embeddings/t_<t>.txt        "id z_1 ... z_d"
//   assignments/t_<t>.txt       "id q_1 ... q_K"
//   labels/t_<t>.txt            "id label"
//   communities/t_<t>.txt       community network M
//   diagrams/t_<t>_dim<k>.txt   persistence diagrams with edge attribution
//   checkpoints/stage<s>/t_<t>.bin  encoder weight and centers

#include <toporeg/graph_io.hpp>
#include <toporeg/pipeline.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace toporeg {

namespace fs = std::filesystem;

namespace detail {

inline int parse_int(const std::string& text, const std::string& where) {
  const double v = parse_double(text, where);
  if (v != static_cast<double>(static_cast<long long>(v))) throw ValidationError(where + ": expected an integer");
  return static_cast<int>(v);
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

}  // namespace detail

inline EvalMode parse_mode(const std::string& text) {
  if (text == "fixed") return EvalMode::kFixed;
  if (text == "varying") return EvalMode::kVarying;
  throw ValidationError("mode must be 'fixed' or 'varying', got '" + text + "'");
}

inline std::string mode_name(EvalMode mode) { return mode == EvalMode::kVarying ? "varying" : "fixed"; }

/// Applies one key=value setting.
inline void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  const std::string where = "config key " + key;
  if (key == "K") {
    cfg.clusters = detail::parse_int(value, where);
  } else if (key == "embed_dim") {
    cfg.embed_dim = detail::parse_int(value, where);
  } else if (key == "lr") {
    cfg.lr = detail::parse_double(value, where);
  } else if (key == "epochs_stage1") {
    cfg.epochs_stage1 = detail::parse_int(value, where);
  } else if (key == "epochs_stage2") {
    cfg.epochs_stage2 = detail::parse_int(value, where);
  } else if (key == "warmup_epochs") {
    cfg.warmup_epochs = detail::parse_int(value, where);
  } else if (key == "alpha_stage1") {
    cfg.alpha_stage1 = detail::parse_double(value, where);
  } else if (key == "beta_stage1") {
    cfg.beta_stage1 = detail::parse_double(value, where);
  } else if (key == "alpha_stage2") {
    cfg.alpha_stage2 = detail::parse_double(value, where);
  } else if (key == "beta_stage2") {
    cfg.beta_stage2 = detail::parse_double(value, where);
  } else if (key == "lambda_pinv") {
    cfg.lambda_pinv = detail::parse_double(value, where);
  } else if (key == "seed") {
    cfg.seed = std::stoull(value);
  } else if (key == "mode") {
    cfg.mode = parse_mode(value);
  } else if (key == "threads") {
    cfg.threads = static_cast<unsigned>(detail::parse_int(value, where));
  } else {
    throw ValidationError("unknown config key '" + key + "'");
  }
}

/// Flat key=value text; '#' starts a comment.
inline PipelineConfig parse_config(std::istream& in, PipelineConfig cfg = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::skip_line(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline PipelineConfig load_config(const fs::path& path, PipelineConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  return parse_config(in, base);
}

inline void write_config(const fs::path& path, const PipelineConfig& cfg) {
  auto out = detail::open_out(path);
  out.precision(17);
  out << "K=" << cfg.clusters << "\nembed_dim=" << cfg.embed_dim << "\nlr=" << cfg.lr
      << "\nepochs_stage1=" << cfg.epochs_stage1 << "\nepochs_stage2=" << cfg.epochs_stage2
      << "\nwarmup_epochs=" << cfg.warmup_epochs << "\nalpha_stage1=" << cfg.alpha_stage1
      << "\nbeta_stage1=" << cfg.beta_stage1 << "\nalpha_stage2=" << cfg.alpha_stage2
      << "\nbeta_stage2=" << cfg.beta_stage2 << "\nlambda_pinv=" << cfg.lambda_pinv << "\nseed=" << cfg.seed
      << "\nmode=" << mode_name(cfg.mode) << '\n';
}

// ---- matrices -------------------------------------------------------------

inline void write_matrix_binary(std::ostream& out, const Matrix& m) {
  const std::int64_t shape[2] = {m.rows(), m.cols()};
  out.write(reinterpret_cast<const char*>(shape), sizeof shape);
  // Row-major so the file does not depend on Eigen's storage order.
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
}

inline Matrix read_matrix_binary(std::istream& in, const std::string& where) {
  std::int64_t shape[2] = {0, 0};
  if (!in.read(reinterpret_cast<char*>(shape), sizeof shape) || shape[0] < 0 || shape[1] < 0) {
    throw IntegrityError(where + ": truncated matrix header");
  }
  Matrix m(shape[0], shape[1]);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v = 0.0;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IntegrityError(where + ": truncated matrix data");
      m(i, j) = v;
    }
  }
  return m;
}

/// "id v_1 ... v_d" rows, aligned to the graph's node order.
inline Matrix read_node_matrix(const fs::path& path, const SnapshotGraph& g) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("missing artifact " + path.string());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) index.emplace(g.node_ids()[i], i);
  std::vector<std::vector<double>> rows(g.num_nodes());
  std::string line;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    if (detail::skip_line(line)) continue;
    const auto fields = detail::split_fields(line);
    const auto it = index.find(fields[0]);
    if (it == index.end()) throw IntegrityError(path.string() + ": unknown node '" + fields[0] + "'");
    const auto cols = static_cast<Eigen::Index>(fields.size()) - 1;
    if (width >= 0 && cols != width) throw IntegrityError(path.string() + ": ragged rows");
    width = cols;
    for (std::size_t j = 1; j < fields.size(); ++j) rows[it->second].push_back(detail::parse_double(fields[j], path.string()));
  }
  Matrix m(static_cast<Eigen::Index>(g.num_nodes()), std::max<Eigen::Index>(width, 0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != m.cols()) {
      throw IntegrityError(path.string() + ": no row for node '" + g.node_ids()[i] + "'");
    }
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  }
  return m;
}

inline void write_labels(const fs::path& path, const std::vector<std::string>& ids, const Labels& labels) {
  auto out = detail::open_out(path);
  for (std::size_t i = 0; i < labels.size(); ++i) out << ids.at(i) << ' ' << labels[i] << '\n';
}

// ---- checkpoints ----------------------------------------------------------

inline fs::path checkpoint_path(const fs::path& out, int stage, std::size_t t) {
  return out / "checkpoints" / ("stage" + std::to_string(stage)) / ("t_" + std::to_string(t) + ".bin");
}

inline void save_checkpoints(const fs::path& out, int stage, const std::vector<SnapshotState>& states) {
  for (std::size_t t = 0; t < states.size(); ++t) {
    auto file = detail::open_out(checkpoint_path(out, stage, t));
    file.write("TRCK", 4);
    write_matrix_binary(file, states[t].encoder.weight);
    write_matrix_binary(file, states[t].centers);
  }
}

inline bool has_checkpoints(const fs::path& out, int stage, std::size_t count) {
  for (std::size_t t = 0; t < count; ++t) {
    if (!fs::exists(checkpoint_path(out, stage, t))) return false;
  }
  return true;
}

/// Rebuilds snapshot states (Z, Q, M, diagrams) from saved parameters.
inline std::vector<SnapshotState> load_checkpoints(const fs::path& out, int stage, const DynamicGraph& dg,
                                                   const PipelineConfig& cfg) {
  std::vector<SnapshotState> states;
  for (std::size_t t = 0; t < dg.size(); ++t) {
    const fs::path path = checkpoint_path(out, stage, t);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("missing stage-" + std::to_string(stage) + " checkpoint " + path.string());
    char magic[4] = {};
    if (!in.read(magic, 4) || std::string(magic, 4) != "TRCK") throw IntegrityError(path.string() + ": bad magic");
    EncoderParams encoder{read_matrix_binary(in, path.string())};
    Matrix centers = read_matrix_binary(in, path.string());
    const MfcConfig mcfg = cfg.mfc(t);
    if (encoder.weight.rows() != static_cast<Eigen::Index>(dg[t].num_nodes()) ||
        centers.rows() != mcfg.clusters || centers.cols() != encoder.weight.cols()) {
      throw IntegrityError(path.string() + ": checkpoint does not match data or config");
    }
    states.push_back(make_state(dg[t], mcfg, std::move(encoder), std::move(centers)));
  }
  return states;
}

// ---- tables ---------------------------------------------------------------

inline void write_metrics_csv(const fs::path& path, const MetricsTable& table) {
  auto out = detail::open_out(path);
  out << "t,n,ACC,NMI,ARI,Modularity\n";
  const auto row = [&](const std::string& t, const MetricsRow& r) {
    out << t << ',' << r.n << ',' << detail::format_number(r.acc) << ',' << detail::format_number(r.nmi) << ','
        << detail::format_number(r.ari) << ',' << detail::format_number(r.modularity) << '\n';
  };
  for (const auto& r : table.rows) row(std::to_string(r.t), r);
  row("mean", table.mean);
}

inline void write_consistency_csv(const fs::path& path, const ConsistencyReport& report) {
  auto out = detail::open_out(path);
  out << "t,dim,W_stage1,W_stage2\n";
  for (const auto& r : report.rows) {
    out << r.t << ',' << r.dim << ',' << detail::format_number(r.before) << ',' << detail::format_number(r.after)
        << '\n';
  }
  out << "mean,all," << detail::format_number(report.mean_before) << ',' << detail::format_number(report.mean_after)
      << '\n';
  out << "std,all," << detail::format_number(report.std_before) << ',' << detail::format_number(report.std_after)
      << '\n';
}

inline void write_losses_csv(const fs::path& path, const std::vector<LossRow>& rows) {
  auto out = detail::open_out(path);
  out << "stage,t,epoch,gae,clustering,topo,total\n";
  for (const auto& r : rows) {
    out << r.stage << ',' << r.t << ',' << r.record.epoch << ',' << detail::format_number(r.record.gae) << ','
        << detail::format_number(r.record.clustering) << ',' << detail::format_number(r.record.topo) << ','
        << detail::format_number(r.record.total) << '\n';
  }
}

inline void write_topo_csv(const fs::path& path, const std::vector<SnapshotState>& states) {
  auto out = detail::open_out(path);
  out << "t,dim,W_prev,W_next,loss_term\n";
  std::vector<PersistenceDiagram> diagrams;
  for (const auto& s : states) diagrams.push_back(s.topology.diagram);
  const TopoLossReport report = topo_loss(diagrams);
  for (const auto& term : report.terms) {
    out << term.t << ',' << term.dim << ',' << detail::format_number(term.w_prev) << ','
        << detail::format_number(term.w_next) << ',' << detail::format_number(term.term()) << '\n';
  }
  out << "total,all,,," << detail::format_number(report.loss) << '\n';
}

/// Per-snapshot exports of a set of states.
inline void write_states(const fs::path& out, const std::vector<SnapshotState>& states, const DynamicGraph& dg) {
  for (std::size_t t = 0; t < states.size(); ++t) {
    const auto name = "t_" + std::to_string(t);
    const auto& ids = dg[t].node_ids();
    fs::create_directories(out / "embeddings");
    fs::create_directories(out / "assignments");
    fs::create_directories(out / "communities");
    fs::create_directories(out / "diagrams");
    write_embedding((out / "embeddings" / (name + ".txt")).string(), ids, states[t].embedding);
    write_embedding((out / "assignments" / (name + ".txt")).string(), ids, states[t].assignment);
    write_labels(out / "labels" / (name + ".txt"), ids, states[t].pseudo_labels);
    write_community_network((out / "communities" / (name + ".txt")).string(), states[t].community);
    for (int dim : kLossDimensions) {
      write_diagram((out / "diagrams" / (name + "_dim" + std::to_string(dim) + ".txt")).string(),
                    states[t].topology.filtration, states[t].topology.diagram, dim);
    }
  }
}

/// States holding only what evaluation needs, read from exported text files.
inline std::vector<SnapshotState> load_exported_states(const fs::path& out, const DynamicGraph& dg) {
  std::vector<SnapshotState> states(dg.size());
  for (std::size_t t = 0; t < dg.size(); ++t) {
    const auto name = "t_" + std::to_string(t) + ".txt";
    states[t].embedding = read_node_matrix(out / "embeddings" / name, dg[t]);
    states[t].assignment = read_node_matrix(out / "assignments" / name, dg[t]);
  }
  return states;
}

}  // namespace toporeg
