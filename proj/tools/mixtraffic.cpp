// Command-line front end: baselines, scripted policies, rendering, sweeps and
// the control protocol server.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixtraffic/env.hpp"
#include "mixtraffic/errors.hpp"
#include "mixtraffic/io.hpp"
#include "mixtraffic/protocol.hpp"

namespace fs = std::filesystem;
using namespace mixtraffic;
using nlohmann::json;

namespace {

// Missing inputs, configuration errors and unknown environments.
constexpr int kUsageExit = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string env;
  std::string seeds = "0-9";
  std::string out = ".";
  std::string obs_mode;
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  try {
    while (start <= text.size()) {
      const std::size_t comma = text.find(',', start);
      const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      const std::size_t dash = item.find('-');
      if (dash != std::string::npos && dash > 0) {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw UsageError("empty seed range '" + item + "'");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      } else {
        seeds.push_back(std::stoull(item));
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse seeds '" + text + "'");
  }
  return seeds;
}

EpisodeConfig resolve_config(const Common& c) {
  EpisodeConfig config;
  if (!c.config.empty()) {
    if (!fs::exists(c.config)) throw UsageError("config file not found: " + c.config);
    config = load_config(c.config);
  } else if (!c.env.empty()) {
    try {
      config = default_config(env_kind_from_string(c.env));
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  } else {
    throw UsageError("either --config or --env is required");
  }
  if (!c.config.empty() && !c.env.empty() && to_string(config.env) != c.env) {
    throw UsageError("--env " + c.env + " does not match the config's env " + to_string(config.env));
  }
  if (!c.obs_mode.empty()) {
    config.observation.mode = obs_mode_from_string(c.obs_mode);
    config.validate();
  }
  return config;
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

void add_common(CLI::App* app, Common& c, bool seeds = true) {
  app->add_option("--config", c.config, "environment config file (JSON)");
  app->add_option("--env", c.env, "environment kind when no config is given: ring, figure_eight, intersection, "
                                  "merge, bottleneck");
  if (seeds) app->add_option("--seeds,--seed", c.seeds, "seed list, e.g. 0-9 or 1,4,7");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--obs-mode", c.obs_mode, "image, precise or position-only");
}

const std::vector<std::string> kMetricsHeader{"seed",  "avg_velocity", "outflow", "queue_ew",
                                              "total_reward", "steps", "collision"};

void metrics_row(CsvWriter& csv, std::uint64_t seed, const EpisodeSummary& s) {
  csv.cell(static_cast<long long>(seed))
      .cell(s.avg_velocity)
      .cell(s.outflow)
      .cell(static_cast<long long>(s.queue_ew))
      .cell(s.total_reward)
      .cell(static_cast<long long>(s.steps))
      .cell(static_cast<long long>(s.collision));
  csv.end_row();
}

std::string write_summary(const std::string& out, const EpisodeConfig& config,
                          const std::vector<EpisodeSummary>& runs) {
  std::vector<double> v, o, q, r;
  for (const auto& s : runs) {
    v.push_back(s.avg_velocity);
    o.push_back(s.outflow);
    q.push_back(s.queue_ew);
    r.push_back(s.total_reward);
  }
  CsvWriter csv({"env", "metric", "mean", "std", "runs"});
  const std::string env = to_string(config.env);
  for (const auto& [name, values] : std::vector<std::pair<std::string, std::vector<double>>>{
           {"avg_velocity", v}, {"outflow", o}, {"queue_ew", q}, {"total_reward", r}}) {
    const Summary s = summarize(values);
    csv.cell(env).cell(name).cell(s.mean).cell(s.stddev).cell(static_cast<long long>(s.count));
    csv.end_row();
  }
  csv.save(fs::path(out) / "summary.csv");
  return env + " avg_velocity " + format_mean_std(summarize(v)) + " m/s, outflow " +
         format_mean_std(summarize(o)) + " veh/hr, queue_ew " + format_mean_std(summarize(q));
}

void time_space_rows(CsvWriter& csv, std::uint64_t seed, const RolloutRecord& record, const RoadNetwork& net,
                     int stride) {
  for (const auto& step : record.steps) {
    if (step.step % stride != 0) continue;
    for (const auto& v : step.vehicles) {
      csv.cell(static_cast<long long>(seed))
          .cell(step.time)
          .cell(static_cast<long long>(v.id))
          .cell(static_cast<long long>(v.edge_id))
          .cell(net.edges[v.edge_id].route_offset + v.arc_pos)
          .cell(v.velocity);
      csv.end_row();
    }
  }
}

int run_rollouts(const Common& c, bool baseline, const std::string& policy_name, bool keep_rollouts, int stride) {
  EpisodeConfig config = resolve_config(c);
  if (baseline) config.all_hv = true;
  const auto seeds = parse_seeds(c.seeds);
  Policy policy;
  if (policy_name == "zero") {
    policy = zero_policy();
  } else if (policy_name == "hv-mimic") {
    policy = hv_mimic_policy();
  } else {
    throw UsageError("unknown policy '" + policy_name + "' (zero, hv-mimic)");
  }
  ensure_dir(c.out);
  CsvWriter metrics(kMetricsHeader);
  CsvWriter ts({"seed", "time", "vehicle", "edge", "position", "velocity"});
  std::vector<EpisodeSummary> runs;
  EnvOptions options;
  options.observe = !baseline;
  options.record = true;
  for (auto seed : seeds) {
    config.seed = seed;
    EpisodeResult r = run_episode(config, policy, options);
    metrics_row(metrics, seed, r.summary);
    time_space_rows(ts, seed, r.record, *build_network(config, r.record.header.network_scale), stride);
    if (keep_rollouts) write_rollout(fs::path(c.out) / ("rollout_seed" + std::to_string(seed) + ".jsonl"), r.record);
    runs.push_back(r.summary);
  }
  metrics.save(fs::path(c.out) / "metrics.csv");
  ts.save(fs::path(c.out) / "time_space.csv");
  std::cout << write_summary(c.out, config, runs) << "\n";
  return 0;
}

// Inclusive "a:b" or a single step number.
std::pair<std::int64_t, std::int64_t> parse_range(const std::string& text) {
  try {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
      const auto s = std::stoll(text);
      return {s, s};
    }
    return {std::stoll(text.substr(0, colon)), std::stoll(text.substr(colon + 1))};
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse step range '" + text + "'");
  }
}

int render(const std::string& rollout_path, const std::string& steps, const std::string& out) {
  if (!fs::exists(rollout_path)) throw UsageError("rollout file not found: " + rollout_path);
  const RolloutRecord record = read_rollout(fs::path(rollout_path));
  if (!record.header.states) throw UsageError("rollout was recorded without vehicle states");
  const EpisodeConfig config = config_from_json(record.header.config);
  World world;
  world.network = build_network(config, record.header.network_scale);
  const auto [from, to] = parse_range(steps);
  ensure_dir(out);
  int frames = 0;
  for (const auto& step : record.steps) {
    if (step.step < from || step.step > to) continue;
    world.vehicles = step.vehicles;
    world.time = step.time;
    world.step = step.step;
    const Observation obs = stack_rv_observations(world, config.observation);
    for (int s = 0; s < obs.stack; ++s) {
      const std::span<const std::uint8_t> slice(obs.image.data() + static_cast<std::size_t>(s) * kImagePixels,
                                                kImagePixels);
      char name[64];
      std::snprintf(name, sizeof name, "step%06lld_slot%02d.pgm", static_cast<long long>(step.step), s + 1);
      write_pgm(fs::path(out) / name, slice);
      ++frames;
    }
  }
  std::cout << "wrote " << frames << " frames to " << out << "\n";
  return 0;
}

std::vector<SweepPoint> default_grid(EnvKind kind) {
  std::vector<SweepPoint> grid;
  switch (kind) {
    case EnvKind::ring:
      for (int c = 210; c <= 290; c += 10) grid.push_back({double(c), 0.0});
      break;
    case EnvKind::figure_eight:
      for (int r = 18; r <= 32; r += 2) grid.push_back({double(r), 0.0});
      break;
    case EnvKind::merge:
      for (const auto& [h, r] : merge_inflow_grid()) grid.push_back({h, r});
      break;
    case EnvKind::bottleneck:
      grid = {{2300.0, 0.0}, {2500.0, 0.0}};
      break;
    case EnvKind::intersection:
      throw UsageError("the intersection has no sweep parameter");
  }
  return grid;
}

SweepParameter default_parameter(EnvKind kind) {
  switch (kind) {
    case EnvKind::ring: return SweepParameter::circumference;
    case EnvKind::figure_eight: return SweepParameter::radius;
    case EnvKind::merge: return SweepParameter::merge_inflow;
    case EnvKind::bottleneck: return SweepParameter::bottleneck_inflow;
    case EnvKind::intersection: break;
  }
  throw UsageError("the intersection has no sweep parameter");
}

int sweep(const Common& c, const std::string& sweep_path) {
  EpisodeConfig base;
  std::vector<SweepPoint> grid;
  std::optional<SweepParameter> parameter;
  std::vector<std::uint64_t> seeds = parse_seeds(c.seeds);
  if (!sweep_path.empty()) {
    if (!fs::exists(sweep_path)) throw UsageError("sweep file not found: " + sweep_path);
    json doc;
    try {
      doc = json::parse(read_file(sweep_path));
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("malformed sweep file: ") + e.what());
    }
    if (!doc.contains("config")) throw ConfigError("sweep file needs a 'config' object", "config");
    base = config_from_json(doc.at("config"));
    if (doc.contains("parameter")) parameter = sweep_parameter_from_string(doc.at("parameter").get<std::string>());
    if (doc.contains("values")) {
      for (const auto& v : doc.at("values")) {
        if (v.is_array()) {
          grid.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        } else {
          grid.push_back({v.get<double>(), 0.0});
        }
      }
    }
    if (doc.contains("seeds")) seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  } else {
    base = resolve_config(c);
  }
  if (!c.obs_mode.empty()) base.observation.mode = obs_mode_from_string(c.obs_mode);
  if (!parameter) parameter = default_parameter(base.env);
  if (grid.empty()) grid = default_grid(base.env);
  base.all_hv = true;
  const auto rows = run_density_sweep(base, *parameter, grid, seeds);
  ensure_dir(c.out);
  CsvWriter csv({"env", "parameter", "value", "ramp", "metric", "mean", "std", "seeds"});
  for (const auto& row : rows) {
    csv.cell(to_string(base.env))
        .cell(to_string(*parameter))
        .cell(row.point.value)
        .cell(row.point.ramp)
        .cell(sweep_metric_name(base.env))
        .cell(row.summary.mean)
        .cell(row.summary.stddev)
        .cell(static_cast<long long>(row.summary.count));
    csv.end_row();
  }
  csv.save(fs::path(c.out) / "sweep.csv");
  std::cout << "wrote " << rows.size() << " rows to " << (fs::path(c.out) / "sweep.csv").string() << "\n";
  return 0;
}

int serve(const std::string& endpoint) {
  if (endpoint == "stdio") {
    serve_fd(STDIN_FILENO, STDOUT_FILENO);
    return 0;
  }
  if (endpoint.rfind("unix:", 0) == 0) {
    serve_unix(endpoint.substr(5));
    return 0;
  }
  throw UsageError("endpoint must be 'stdio' or 'unix:<path>'");
}

int describe(const Common& c) {
  const EpisodeConfig config = resolve_config(c);
  Rng rng = stream_rng(config.seed, RngStream::network);
  const auto net = build_network(config, sample_network_scale(config, rng));
  std::cout << network_to_text(*net) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixtraffic: mixed-autonomy traffic microsimulator and RL environments"};
  app.require_subcommand(1);

  Common baseline;
  auto* cmd_baseline = app.add_subcommand("run-baseline", "all-HV rollouts: metrics, time-space and summary CSVs");
  add_common(cmd_baseline, baseline);
  int baseline_stride = 10;
  cmd_baseline->add_option("--time-space-stride", baseline_stride, "keep every n-th step in time_space.csv");

  Common policy;
  std::string policy_name = "hv-mimic";
  int policy_stride = 10;
  auto* cmd_policy = app.add_subcommand("run-policy", "scripted-policy rollouts, persisted as JSON lines");
  add_common(cmd_policy, policy);
  cmd_policy->add_option("--policy", policy_name, "zero or hv-mimic");
  cmd_policy->add_option("--time-space-stride", policy_stride, "keep every n-th step in time_space.csv");

  std::string rollout_path, steps = "0:0", render_out = ".";
  auto* cmd_render = app.add_subcommand("render", "PGM frames for every agent slot of recorded steps");
  cmd_render->add_option("--rollout", rollout_path, "rollout JSON lines file")->required();
  cmd_render->add_option("--steps", steps, "world step or inclusive range a:b");
  cmd_render->add_option("--out", render_out, "output directory");

  Common sweep_opts;
  std::string sweep_path;
  auto* cmd_sweep = app.add_subcommand("sweep", "all-HV density or inflow sweep");
  add_common(cmd_sweep, sweep_opts);
  cmd_sweep->add_option("--sweep", sweep_path, "sweep file: {config, parameter, values, seeds}");

  std::string endpoint = "stdio";
  auto* cmd_serve = app.add_subcommand("serve", "framed control protocol server");
  cmd_serve->add_option("--endpoint", endpoint, "stdio or unix:<path>");

  Common describe_opts;
  auto* cmd_describe = app.add_subcommand("describe", "print the network of a config as JSON");
  add_common(cmd_describe, describe_opts, false);

  Common config_opts;
  auto* cmd_config = app.add_subcommand("config", "print the fully resolved config as JSON");
  add_common(cmd_config, config_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; every other usage error exits with the usage code.
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }
  try {
    if (*cmd_baseline) return run_rollouts(baseline, true, "zero", false, std::max(1, baseline_stride));
    if (*cmd_policy) return run_rollouts(policy, false, policy_name, true, std::max(1, policy_stride));
    if (*cmd_render) return render(rollout_path, steps, render_out);
    if (*cmd_sweep) return sweep(sweep_opts, sweep_path);
    if (*cmd_serve) return serve(endpoint);
    if (*cmd_describe) return describe(describe_opts);
    if (*cmd_config) {
      std::cout << to_json(resolve_config(config_opts)).dump(2) << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
