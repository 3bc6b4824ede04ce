#include "relkal/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "relkal/observability.hpp"
#include "relkal/simlab.hpp"

#ifndef RELKAL_VERSION
#define RELKAL_VERSION "0.0.0"
#endif

namespace relkal {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

namespace {

std::string join_numbers(std::initializer_list<double> values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ',';
    out += format_number(v);
  }
  return out;
}

/// Output directory built in a sibling staging directory and swapped into place once
/// complete. The manifest is the last file written.
class OutputSet {
 public:
  OutputSet(const std::string& out, bool overwrite) : final_(fs::absolute(out)) {
    if (out.empty()) throw ConfigError("--out must name a directory");
    if (fs::exists(final_) && !overwrite) {
      throw ConfigError("output directory '" + out + "' already exists; pass --overwrite to replace it");
    }
    if (fs::exists(final_) && !fs::is_directory(final_)) {
      throw ConfigError("output path '" + out + "' exists and is not a directory");
    }
    const std::string tag = std::to_string(::getpid());
    fs::create_directories(final_.parent_path());
    staging_ = final_.parent_path() / ("." + final_.filename().string() + ".staging-" + tag);
    retired_ = final_.parent_path() / ("." + final_.filename().string() + ".old-" + tag);
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(staging_ / name, std::ios::binary);
    f << content;
    f.close();
    if (!f) throw std::runtime_error("failed to write " + (staging_ / name).string());
    files_.push_back(name);
  }

  const std::vector<std::string>& files() const { return files_; }

  void commit(const json& manifest) {
    write("manifest.json", manifest.dump(2) + "\n");
    if (fs::exists(final_)) {
      fs::rename(final_, retired_);
      fs::rename(staging_, final_);
      fs::remove_all(retired_);
    } else {
      fs::rename(staging_, final_);
    }
  }

 private:
  fs::path final_;
  fs::path staging_;
  fs::path retired_;
  std::vector<std::string> files_;
};

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> models;
  std::string out;
  bool overwrite = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_models) {
  cmd->add_option("--config", o.config_path, "StudyConfig JSON file");
  cmd->add_option("--seed", o.seed, "RNG seed (overrides the config)");
  if (with_models) cmd->add_option("--models", o.models, "Comma-separated subset of A,B,C");
  cmd->add_option("--out", o.out, "Output directory")->required();
  cmd->add_flag("--overwrite", o.overwrite, "Replace an existing output directory");
}

std::vector<Model> parse_model_list(const std::string& text) {
  std::vector<Model> models;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    models.push_back(parse_model(item));
  }
  if (models.empty()) throw ConfigError("model set is empty; valid models are A, B, C");
  return models;
}

StudyConfig load_config(const CommonOptions& o) {
  StudyConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream f(o.config_path);
    if (!f) throw ConfigError("cannot read config '" + o.config_path + "'");
    json j;
    try {
      j = json::parse(f);
    } catch (const json::exception& e) {
      throw ConfigError("config '" + o.config_path + "': " + e.what());
    }
    cfg = config_from_json(j);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.models) cfg.models = parse_model_list(*o.models);
  cfg.validate();
  return cfg;
}

json manifest(const std::string& command, const StudyConfig& cfg, const OutputSet& out,
              std::chrono::steady_clock::time_point started) {
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::vector<std::string> outputs = out.files();
  outputs.push_back("manifest.json");
  return json{{"tool", "relkal"},  {"version", RELKAL_VERSION}, {"command", command},
              {"seed", cfg.seed},  {"config", config_to_json(cfg)}, {"outputs", outputs},
              {"wall_clock_s", wall}};
}

std::vector<int> trajectory_selection(const StudyConfig& cfg, int traj) {
  if (traj >= cfg.n_trajectories) {
    throw ConfigError("--traj " + std::to_string(traj) + " is out of range; the config has " +
                      std::to_string(cfg.n_trajectories) + " trajectories");
  }
  if (traj >= 0) return {traj};
  std::vector<int> all(cfg.n_trajectories);
  for (int j = 0; j < cfg.n_trajectories; ++j) all[j] = j;
  return all;
}

std::string trajectories_csv(const StudyConfig& cfg, const std::vector<int>& selection) {
  std::string s =
      "traj,step,t,ego_x,ego_y,ego_psi,ego_psidot,ego_v,ego_a,"
      "target_x,target_y,target_psi,target_psidot,target_v,target_a\n";
  for (int j : selection) {
    const TrajectoryPair tp = generate_pair(cfg, j);
    for (std::size_t k = 0; k < tp.times.size(); ++k) {
      const CtraState& e = tp.ego[k];
      const CtraState& t = tp.target[k];
      s += std::to_string(j) + ',' + std::to_string(k) + ',' +
           join_numbers({tp.times[k], e.x, e.y, e.psi, e.psidot, e.v, e.a, t.x, t.y, t.psi, t.psidot, t.v, t.a}) +
           '\n';
    }
  }
  return s;
}

std::string measurements_csv(const StudyConfig& cfg, const std::vector<int>& selection) {
  std::string s = "traj,step,t,psidot_meas,v_meas,a_meas,x_rel_meas,y_rel_meas\n";
  for (int j : selection) {
    const auto frames = synthesize_measurements(generate_pair(cfg, j), cfg, j);
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const MeasurementFrame& f = frames[k];
      s += std::to_string(j) + ',' + std::to_string(k) + ',' +
           join_numbers({f.t, f.proprio[0], f.proprio[1], f.proprio[2], f.extero[0], f.extero[1]}) + '\n';
    }
  }
  return s;
}

std::vector<std::string> state_columns(Model model) {
  if (model == Model::C) return {"x_rel", "y_rel", "psi_rel", "psidot", "v", "a"};
  return {"x_rel", "y_rel", "vx_rel", "vy_rel", "ax_rel", "ay_rel"};
}

std::string trace_csv(Model model, const TrackResult& tr) {
  std::string s = "t";
  for (const auto& c : state_columns(model)) s += ',' + c;
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) s += ",p" + std::to_string(r) + std::to_string(c);
  }
  s += ",pos_error_m\n";
  for (const TraceRow& row : tr.trace) {
    s += format_number(row.t);
    for (int i = 0; i < 6; ++i) s += ',' + format_number(row.belief.mean[i]);
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) s += ',' + format_number(row.belief.cov(r, c));
    }
    s += ',' + format_number(row.error) + '\n';
  }
  return s;
}

std::string metrics_csv(const StudyResult& res) {
  std::string s = "model,avg_max_error_m,avg_mean_error_m,gramian_det_min,gramian_det_max\n";
  for (const ModelOutcome& m : res.models) {
    const MetricsRow& r = m.metrics;
    s += std::string(to_string(r.model)) + ',' +
         join_numbers({r.avg_max_error, r.avg_mean_error, r.gramian_det_min, r.gramian_det_max}) + '\n';
  }
  return s;
}

std::string errors_csv(const StudyConfig& cfg, const StudyResult& res) {
  std::string s = "model,traj,step,t,pos_error_m\n";
  for (const ModelOutcome& m : res.models) {
    const std::string name(to_string(m.metrics.model));
    for (std::size_t j = 0; j < m.errors.size(); ++j) {
      for (std::size_t i = 0; i < m.errors[j].size(); ++i) {
        const int step = cfg.filter.warmup_steps + 1 + static_cast<int>(i);
        s += name + ',' + std::to_string(j) + ',' + std::to_string(step) + ',' +
             join_numbers({step * cfg.dt, m.errors[j][i]}) + '\n';
      }
    }
  }
  return s;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json summary_json(const StudyResult& res) {
  json models = json::array();
  for (const ModelOutcome& m : res.models) {
    json diverged = json::array();
    for (std::size_t i = 0; i < m.diverged.size(); ++i) {
      diverged.push_back({{"traj", m.diverged[i]}, {"reason", m.divergence_reasons[i]}});
    }
    const MetricsRow& r = m.metrics;
    models.push_back({{"model", to_string(r.model)},
                      {"avg_max_error_m", number_or_null(r.avg_max_error)},
                      {"avg_mean_error_m", number_or_null(r.avg_mean_error)},
                      {"gramian_det_min", number_or_null(r.gramian_det_min)},
                      {"gramian_det_max", number_or_null(r.gramian_det_max)},
                      {"trajectories_used", m.errors.size() - m.diverged.size()},
                      {"diverged", diverged}});
  }
  return json{{"models", models}};
}

/// Per-model aggregates recomputed from an errors.csv file.
std::string evaluate_errors_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read errors file '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != "model,traj,step,t,pos_error_m") {
    throw ConfigError("'" + path + "' is not an errors.csv file (unexpected header)");
  }
  std::vector<std::string> order;
  std::map<std::string, std::map<int, std::vector<double>>> grouped;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string model, traj, step, t, err;
    if (!std::getline(ss, model, ',') || !std::getline(ss, traj, ',') || !std::getline(ss, step, ',') ||
        !std::getline(ss, t, ',') || !std::getline(ss, err, ',')) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 5 columns");
    }
    try {
      if (!grouped.contains(model)) order.push_back(model);
      grouped[model][std::stoi(traj)].push_back(std::stod(err));
    } catch (const std::logic_error&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  std::string s = "model,n_trajectories,avg_max_error_m,avg_mean_error_m\n";
  for (const auto& model : order) {
    std::vector<std::vector<double>> errors;
    for (auto& [traj, e] : grouped[model]) errors.push_back(std::move(e));
    const ErrorAggregate agg = aggregate(errors);
    s += model + ',' + std::to_string(errors.size()) + ',' + join_numbers({agg.avg_max, agg.avg_mean}) + '\n';
  }
  return s;
}

Vec6 default_gramian_state(Model model) {
  Vec6 x;
  if (model == Model::C) {
    x << 30.0, 2.0, 0.1, 0.05, 15.0, 0.5;
  } else {
    x << 30.0, 2.0, 5.0, 0.5, 0.3, 0.1;
  }
  return x;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Relative-coordinate target tracking: simulation, filtering and observability"};
  app.set_version_flag("--version", RELKAL_VERSION);
  app.require_subcommand(1);

  CommonOptions gen_o, sim_o, track_o, study_o;
  int gen_traj = -1, sim_traj = -1, track_traj = 0;
  std::string track_model;

  auto* gen = app.add_subcommand("generate", "Write reference trajectory pairs");
  add_common(gen, gen_o, false);
  gen->add_option("--traj", gen_traj, "Single trajectory index (default: all)");

  auto* sim = app.add_subcommand("simulate", "Write trajectories and synthesized measurements");
  add_common(sim, sim_o, false);
  sim->add_option("--traj", sim_traj, "Single trajectory index (default: all)");

  auto* track = app.add_subcommand("track", "Run one model's filter over one trajectory");
  add_common(track, track_o, false);
  track->add_option("--model", track_model, "A, B or C")->required();
  track->add_option("--traj", track_traj, "Trajectory index");

  std::string eval_errors, eval_out;
  bool eval_overwrite = false;
  auto* eval = app.add_subcommand("evaluate", "Recompute error aggregates from an errors.csv file");
  eval->add_option("--errors", eval_errors, "errors.csv written by 'study'")->required();
  eval->add_option("--out", eval_out, "Output directory")->required();
  eval->add_flag("--overwrite", eval_overwrite, "Replace an existing output directory");

  std::string gram_model;
  double gram_dt = 0.04;
  std::vector<double> gram_state, gram_ego, gram_w_sigma;
  int gram_blocks = kDefaultGramianBlocks;
  auto* gram = app.add_subcommand("gramian", "Print the observability Gramian report as JSON");
  gram->add_option("--model", gram_model, "A, B or C")->required();
  gram->add_option("--dt", gram_dt, "Step length [s]");
  gram->add_option("--state", gram_state, "Relative state, 6 comma-separated values")->delimiter(',')->expected(6);
  gram->add_option("--ego", gram_ego, "Ego input v0,a0,psidot0")->delimiter(',')->expected(3);
  gram->add_option("--w-sigma", gram_w_sigma, "Position noise sigmas sx,sy (default: unit W)")
      ->delimiter(',')
      ->expected(2);
  gram->add_option("--blocks", gram_blocks, "Number of stacked H A^i blocks");

  auto* study = app.add_subcommand("study", "Full Monte-Carlo comparison of the selected models");
  add_common(study, study_o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const auto started = std::chrono::steady_clock::now();

  if (*gen || *sim) {
    const CommonOptions& o = *gen ? gen_o : sim_o;
    const StudyConfig cfg = load_config(o);
    const auto selection = trajectory_selection(cfg, *gen ? gen_traj : sim_traj);
    OutputSet out(o.out, o.overwrite);
    out.write("trajectories.csv", trajectories_csv(cfg, selection));
    if (*sim) out.write("measurements.csv", measurements_csv(cfg, selection));
    out.commit(manifest(*gen ? "generate" : "simulate", cfg, out, started));
    return 0;
  }

  if (*track) {
    const Model model = parse_model(track_model);
    StudyConfig cfg = load_config(track_o);
    cfg.models = {model};
    trajectory_selection(cfg, track_traj);
    if (track_traj < 0) throw ConfigError("--traj must be >= 0");
    OutputSet out(track_o.out, track_o.overwrite);
    const TrajectoryPair tp = generate_pair(cfg, track_traj);
    const auto frames = synthesize_measurements(tp, cfg, track_traj);
    const TrackResult tr = run_track(cfg, model, tp, frames, run_ego_filter(cfg, frames));
    out.write("trace_" + std::string(to_string(model)) + ".csv", trace_csv(model, tr));
    if (tr.diverged) {
      std::cerr << "relkal: filter diverged: " << tr.divergence << "\n";
      return 1;
    }
    out.commit(manifest("track", cfg, out, started));
    return 0;
  }

  if (*eval) {
    const std::string table = evaluate_errors_csv(eval_errors);
    OutputSet out(eval_out, eval_overwrite);
    out.write("evaluation.csv", table);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    out.commit(json{{"tool", "relkal"},
                    {"version", RELKAL_VERSION},
                    {"command", "evaluate"},
                    {"input", eval_errors},
                    {"outputs", {"evaluation.csv", "manifest.json"}},
                    {"wall_clock_s", wall}});
    return 0;
  }

  if (*gram) {
    const Model model = parse_model(gram_model);
    if (!(gram_dt > 0.0)) throw ConfigError("--dt must be > 0");
    if (gram_blocks < 1) throw ConfigError("--blocks must be >= 1");
    const Vec6 x = gram_state.empty() ? default_gramian_state(model) : Vec6(Eigen::Map<Vec6>(gram_state.data()));
    EgoInput in;
    in.v0 = 20.0;
    in.a0 = 0.5;
    in.psidot0 = 0.05;
    if (!gram_ego.empty()) {
      in.v0 = gram_ego[0];
      in.a0 = gram_ego[1];
      in.psidot0 = gram_ego[2];
    }
    Mat2 w = Mat2::Identity();
    if (!gram_w_sigma.empty()) {
      if (!(gram_w_sigma[0] > 0.0 && gram_w_sigma[1] > 0.0)) throw ConfigError("--w-sigma must be > 0");
      w = Vec2(gram_w_sigma[0] * gram_w_sigma[0], gram_w_sigma[1] * gram_w_sigma[1]).asDiagonal();
    }
    const GramianReport r = stochastic_gramian(model, RelState{model, x}, in, gram_dt, w, gram_blocks);
    const json report{{"model", to_string(model)},
                      {"dt", gram_dt},
                      {"n_blocks", r.n_blocks},
                      {"det", r.det},
                      {"min_singular_value", r.min_singular_value},
                      {"observable", r.observable},
                      {"state", std::vector<double>(x.data(), x.data() + 6)},
                      {"ego", {in.v0, in.a0, in.psidot0}}};
    std::cout << report.dump(2) << "\n";
    return 0;
  }

  const StudyConfig cfg = load_config(study_o);
  OutputSet out(study_o.out, study_o.overwrite);
  const StudyResult res = run_study(cfg, study_threads());
  out.write("metrics.csv", metrics_csv(res));
  out.write("errors.csv", errors_csv(cfg, res));
  out.write("summary.json", summary_json(res).dump(2) + "\n");
  for (const ModelOutcome& m : res.models) {
    if (!m.diverged.empty()) {
      std::cerr << "relkal: model " << to_string(m.metrics.model) << ": " << m.diverged.size()
                << " trajectories diverged (see summary.json)\n";
    }
  }
  out.commit(manifest("study", cfg, out, started));
  return 0;
}

}  // namespace

int run_command(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "relkal: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "relkal: error: " << e.what() << "\n";
    return 1;
  }
}

int run_command(const std::vector<std::string>& args) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("relkal");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run_command(static_cast<int>(storage.size()), argv.data());
}

}  // namespace relkal
