// toporeg: topology-regularized dynamic community detection.
//
//   toporeg synth  --out data/ [--k 5 --size-mean 20 ...]
//   toporeg train  --data data/ --out run/ [--stage 1|2]
//   toporeg eval   --data data/ --out run/
//   toporeg report --data data/ --out run/
//   toporeg demo   --out run/ --seed 1

#include <toporeg/artifacts.hpp>
#include <toporeg/scenario.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace toporeg;

namespace {

struct CommonOptions {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<int> k;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("--data", o.data, "snapshot directory");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--mode", o.mode, "evaluation mode")->check(CLI::IsMember({"fixed", "varying"}));
  app->add_option("--k", o.k, "number of communities");
}

// Defaults < run directory config.txt < --config < flags.
PipelineConfig resolve_config(const CommonOptions& o, bool use_run_config) {
  PipelineConfig cfg;
  if (use_run_config && o.config.empty() && !o.out.empty() && fs::exists(fs::path(o.out) / "config.txt")) {
    cfg = load_config(fs::path(o.out) / "config.txt", cfg);
  }
  if (!o.config.empty()) cfg = load_config(o.config, cfg);
  if (o.seed) cfg.seed = *o.seed;
  if (o.mode) cfg.mode = parse_mode(*o.mode);
  if (o.k) cfg.clusters = *o.k;
  cfg.validate();
  return cfg;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ValidationError(flag + " is required");
}

// Keeps earlier stage-1 rows when only stage 2 is rerun.
std::vector<LossRow> stage1_losses(const fs::path& path) {
  std::vector<LossRow> rows;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.starts_with("1,")) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    LossRow r;
    fields >> r.stage >> r.t >> r.record.epoch >> r.record.gae >> r.record.clustering >> r.record.topo >> r.record.total;
    rows.push_back(r);
  }
  return rows;
}

void write_run(const fs::path& out, const RunResult& result, const DynamicGraph& dg, const PipelineConfig& cfg) {
  write_config(out / "config.txt", cfg);
  write_states(out, result.final_states(), dg);
  write_metrics_csv(out / "metrics.csv", evaluate(result.final_states(), dg, cfg));
  write_consistency_csv(out / "consistency.csv", consistency_report(result));
  write_topo_csv(out / "topo.csv", result.final_states());
  write_losses_csv(out / "losses.csv", result.losses);
}

void print_metrics(const MetricsTable& table) {
  std::printf("%-6s %5s %8s %8s %8s %10s\n", "t", "n", "ACC", "NMI", "ARI", "Modularity");
  const auto row = [](const std::string& t, const MetricsRow& r) {
    std::printf("%-6s %5zu %8.4f %8.4f %8.4f %10.4f\n", t.c_str(), r.n, r.acc, r.nmi, r.ari, r.modularity);
  };
  for (const auto& r : table.rows) row(std::to_string(r.t), r);
  row("mean", table.mean);
}

int run_synth(const ScenarioConfig& scenario, const CommonOptions& o) {
  require(o.out, "--out");
  ScenarioConfig s = scenario;
  if (o.seed) s.seed = *o.seed;
  if (o.k) s.k = *o.k;
  const DynamicGraph dg = bridge_scenario(s);
  write_dynamic_graph(dg, o.out);
  std::printf("wrote %zu snapshots (%zu nodes) to %s\n", dg.size(), dg[0].num_nodes(), o.out.c_str());
  return 0;
}

int run_train(const CommonOptions& o, int stage) {
  require(o.data, "--data");
  require(o.out, "--out");
  const fs::path out(o.out);
  const PipelineConfig cfg = resolve_config(o, stage == 2);
  const DynamicGraph dg = load_dynamic_graph(o.data);
  RunResult result;
  if (stage == 2) {
    if (!has_checkpoints(out, 1, dg.size())) {
      throw MissingArtifactError("stage 2 needs stage-1 checkpoints under " + (out / "checkpoints" / "stage1").string() +
                                 "; run 'train --stage 1' first");
    }
    result.stage1 = load_checkpoints(out, 1, dg, cfg);
    result.losses = stage1_losses(out / "losses.csv");
  } else {
    result = stage1_train(dg, cfg);
    save_checkpoints(out, 1, result.stage1);
  }
  if (stage != 1) {
    result = stage2_train(std::move(result), dg, cfg);
    save_checkpoints(out, 2, result.stage2);
  }
  write_run(out, result, dg, cfg);
  print_metrics(evaluate(result.final_states(), dg, cfg));
  return 0;
}

int run_eval(const CommonOptions& o, const std::string& metrics_path) {
  require(o.data, "--data");
  require(o.out, "--out");
  const PipelineConfig cfg = resolve_config(o, true);
  const DynamicGraph dg = load_dynamic_graph(o.data);
  const MetricsTable table = evaluate(load_exported_states(o.out, dg), dg, cfg);
  write_metrics_csv(metrics_path.empty() ? fs::path(o.out) / "metrics_eval.csv" : fs::path(metrics_path), table);
  print_metrics(table);
  return 0;
}

int run_report(const CommonOptions& o) {
  require(o.data, "--data");
  require(o.out, "--out");
  const fs::path out(o.out);
  const PipelineConfig cfg = resolve_config(o, true);
  const DynamicGraph dg = load_dynamic_graph(o.data);
  RunResult result;
  result.stage1 = load_checkpoints(out, 1, dg, cfg);
  if (has_checkpoints(out, 2, dg.size())) result.stage2 = load_checkpoints(out, 2, dg, cfg);
  const ConsistencyReport report = consistency_report(result);
  write_consistency_csv(out / "consistency.csv", report);
  write_topo_csv(out / "topo.csv", result.final_states());
  write_states(out, result.final_states(), dg);
  std::printf("consecutive W_1,inf  stage 1: %.6f +- %.6f", report.mean_before, report.std_before);
  if (!result.stage2.empty()) std::printf("  stage 2: %.6f +- %.6f", report.mean_after, report.std_after);
  std::printf("\n");
  return 0;
}

int run_demo(ScenarioConfig scenario, const CommonOptions& o) {
  require(o.out, "--out");
  const fs::path out(o.out);
  const PipelineConfig cfg = resolve_config(o, false);
  scenario.seed = cfg.seed;
  scenario.k = cfg.clusters;
  write_dynamic_graph(bridge_scenario(scenario), out / "data");
  const DynamicGraph dg = load_dynamic_graph(out / "data");

  RunResult result = stage1_train(dg, cfg);
  save_checkpoints(out, 1, result.stage1);
  const MetricsTable before = evaluate(result.stage1, dg, cfg);
  write_metrics_csv(out / "metrics_stage1.csv", before);

  // Accuracy and L_topo per stage-2 epoch.
  auto trend = detail::open_out(out / "trend.csv");
  trend << "epoch,topo";
  for (std::size_t t = 0; t < dg.size(); ++t) trend << ",ACC_" << t;
  trend << '\n';
  const auto log_trend = [&](const std::string& epoch, double topo, const std::vector<SnapshotState>& states) {
    trend << epoch << ',' << detail::format_number(topo);
    for (std::size_t t = 0; t < dg.size(); ++t) {
      trend << ',' << detail::format_number(accuracy(dg[t].labels(), predicted_labels(states[t], cfg, t)));
    }
    trend << '\n';
  };
  std::vector<PersistenceDiagram> diagrams;
  for (const auto& s : result.stage1) diagrams.push_back(s.topology.diagram);
  log_trend("stage1", topo_loss(diagrams).loss, result.stage1);
  result = stage2_train(std::move(result), dg, cfg, [&](int epoch, const std::vector<SnapshotState>& states) {
    std::vector<PersistenceDiagram> d;
    for (const auto& s : states) d.push_back(s.topology.diagram);
    log_trend(std::to_string(epoch), topo_loss(d).loss, states);
  });
  save_checkpoints(out, 2, result.stage2);
  write_run(out, result, dg, cfg);

  const MetricsTable after = evaluate(result.stage2, dg, cfg);
  std::printf("stage 1\n");
  print_metrics(before);
  std::printf("stage 2\n");
  print_metrics(after);
  const ConsistencyReport report = consistency_report(result);
  std::printf("consecutive W_1,inf: %.6f -> %.6f\n", report.mean_before, report.mean_after);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology-regularized dynamic community detection"};
  app.require_subcommand(1);

  CommonOptions common;
  ScenarioConfig scenario;
  int stage = 0;
  std::string metrics_path;

  auto* synth = app.add_subcommand("synth", "generate the bridge-perturbed Gaussian partition scenario");
  add_common(synth, common);
  synth->add_option("--size-mean", scenario.size_mean, "mean cluster size");
  synth->add_option("--size-std", scenario.size_std, "cluster size standard deviation");
  synth->add_option("--p-in", scenario.p_in, "intra-cluster edge probability");
  synth->add_option("--p-out", scenario.p_out, "inter-cluster edge probability");
  synth->add_option("--p-add", scenario.p_add, "bridge edge probability in the perturbed snapshot");
  synth->add_option("--snapshots", scenario.snapshots, "number of snapshots");

  auto* train = app.add_subcommand("train", "run stage 1, stage 2, or both");
  add_common(train, common);
  train->add_option("--stage", stage, "1 or 2 (default: both)")->check(CLI::IsMember({1, 2}));

  auto* eval = app.add_subcommand("eval", "recompute metrics from exported embeddings and assignments");
  add_common(eval, common);
  eval->add_option("--metrics", metrics_path, "metrics CSV path (default <out>/metrics_eval.csv)");

  auto* report = app.add_subcommand("report", "consistency table and diagram export from checkpoints");
  add_common(report, common);

  auto* demo = app.add_subcommand("demo", "synthetic scenario end to end");
  add_common(demo, common);
  demo->add_option("--p-add", scenario.p_add, "bridge edge probability in the perturbed snapshot");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(scenario, common);
    if (train->parsed()) return run_train(common, stage);
    if (eval->parsed()) return run_eval(common, metrics_path);
    if (report->parsed()) return run_report(common);
    if (demo->parsed()) return run_demo(scenario, common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
