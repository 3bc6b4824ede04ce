#include "relkal/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include <Eigen/Eigenvalues>

#include "relkal/frames.hpp"
#include "relkal/observability.hpp"

namespace relkal {

namespace {

using nlohmann::json;

template <int N>
Eigen::Matrix<double, N, N> diag_from_json(const json& j, const char* key) {
  const auto values = j.get<std::vector<double>>();
  if (values.size() != static_cast<std::size_t>(N)) {
    throw ConfigError(std::string("config: '") + key + "' needs " + std::to_string(N) + " entries");
  }
  Eigen::Matrix<double, N, 1> d;
  for (int i = 0; i < N; ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0) {
      throw ConfigError(std::string("config: '") + key + "' entries must be finite and >= 0");
    }
    d[i] = values[i];
  }
  return d.asDiagonal();
}

template <int N>
Eigen::Matrix<double, N, N> sigma_diag_from_json(const json& j, const char* key) {
  Eigen::Matrix<double, N, N> m = diag_from_json<N>(j, key);
  return m.cwiseProduct(m);
}

template <int N>
std::vector<double> diag_to_vector(const Eigen::Matrix<double, N, N>& m, bool as_sigma) {
  std::vector<double> out(N);
  for (int i = 0; i < N; ++i) out[i] = as_sigma ? std::sqrt(m(i, i)) : m(i, i);
  return out;
}

Range range_from_json(const json& j, const char* key) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2 || !(v[0] <= v[1])) {
    throw ConfigError(std::string("config: '") + key + "' must be [lo, hi] with lo <= hi");
  }
  return {v[0], v[1]};
}

template <int N>
Eigen::Matrix<double, N, 1> sample_gaussian(const Eigen::Matrix<double, N, N>& cov, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Matrix<double, N, 1> u;
  for (int i = 0; i < N; ++i) u[i] = normal(rng);
  if (cov.isDiagonal()) return cov.diagonal().cwiseMax(0.0).cwiseSqrt().cwiseProduct(u);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(cov);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().cwiseProduct(u);
}

template <int N>
Eigen::Matrix<double, N, N> floored(const Eigen::Matrix<double, N, N>& cov, double floor) {
  Eigen::Matrix<double, N, N> out = cov;
  for (int i = 0; i < N; ++i) out(i, i) = std::max(out(i, i), floor);
  return out;
}

std::vector<std::pair<const char*, Range*>> initial_fields(InitialRanges& r) {
  return {{"ego_speed", &r.ego_speed},         {"ego_yaw_rate", &r.ego_yaw_rate},
          {"ego_accel", &r.ego_accel},         {"target_ahead", &r.target_ahead},
          {"target_lateral", &r.target_lateral}, {"target_speed", &r.target_speed},
          {"target_heading", &r.target_heading}, {"target_yaw_rate", &r.target_yaw_rate},
          {"target_accel", &r.target_accel}};
}

double uniform(std::mt19937_64& rng, const Range& r) {
  if (r.lo == r.hi) {
    rng.discard(1);
    return r.lo;
  }
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

void StudyConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("config: dt must be > 0");
  if (!(duration >= dt) || !std::isfinite(duration)) throw ConfigError("config: duration must be >= dt");
  if (n_trajectories < 1) throw ConfigError("config: n_trajectories must be >= 1");
  if (models.empty()) throw ConfigError("config: model set is empty; choose from A, B, C");
  if (!(psi_perturb_sigma >= 0.0)) throw ConfigError("config: psi_perturb_sigma must be >= 0");
  if (filter.warmup_steps < 0) throw ConfigError("config: warmup_steps must be >= 0");
  if (!(filter.meas_variance_floor > 0.0)) throw ConfigError("config: meas_variance_floor must be > 0");
  const auto psd = [](const Eigen::MatrixXd& m, const char* what) {
    if (!is_symmetric_psd(m)) throw ConfigError(std::string("config: ") + what + " is not symmetric PSD");
  };
  psd(noise.target_ctra, "target_ctra");
  psd(noise.target_jerk, "target_jerk");
  psd(noise.ego_ctra, "ego_ctra");
  psd(noise.meas_proprio, "meas_proprio");
  psd(noise.meas_extero, "meas_extero");
  if (filter.process_noise) {
    psd(filter.process_noise->target_ctra, "process_noise.target_ctra");
    psd(filter.process_noise->target_jerk, "process_noise.target_jerk");
    psd(filter.process_noise->ego_ctra, "process_noise.ego_ctra");
  }
  psd(filter.unmeasured_ab, "init_cov_ab");
  psd(filter.unmeasured_c, "init_cov_c");
}

int StudyConfig::n_samples() const { return static_cast<int>(std::floor(duration / dt + 1e-9)) + 1; }

StudyConfig config_from_json(const json& j) {
  StudyConfig cfg;
  try {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    cfg.n_trajectories = j.value("n_trajectories", cfg.n_trajectories);
    cfg.duration = j.value("duration", cfg.duration);
    cfg.dt = j.value("dt", cfg.dt);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.psi_perturb_sigma = j.value("psi_perturb_sigma", cfg.psi_perturb_sigma);
    if (j.contains("models")) {
      cfg.models.clear();
      for (const auto& m : j.at("models")) cfg.models.push_back(parse_model(m.get<std::string>()));
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      if (n.contains("target_ctra")) cfg.noise.target_ctra = diag_from_json<2>(n.at("target_ctra"), "target_ctra");
      if (n.contains("target_jerk")) cfg.noise.target_jerk = diag_from_json<2>(n.at("target_jerk"), "target_jerk");
      if (n.contains("ego_ctra")) cfg.noise.ego_ctra = diag_from_json<2>(n.at("ego_ctra"), "ego_ctra");
      if (n.contains("meas_proprio_sigma")) {
        cfg.noise.meas_proprio = sigma_diag_from_json<3>(n.at("meas_proprio_sigma"), "meas_proprio_sigma");
      }
      if (n.contains("meas_extero_sigma")) {
        cfg.noise.meas_extero = sigma_diag_from_json<2>(n.at("meas_extero_sigma"), "meas_extero_sigma");
      }
    }
    if (j.contains("initial")) {
      const json& i = j.at("initial");
      for (auto& [key, range] : initial_fields(cfg.initial)) {
        if (i.contains(key)) *range = range_from_json(i.at(key), key);
      }
    }
    if (j.contains("filter")) {
      const json& f = j.at("filter");
      if (f.contains("init_cov_ab")) cfg.filter.unmeasured_ab = diag_from_json<4>(f.at("init_cov_ab"), "init_cov_ab");
      if (f.contains("init_cov_c")) cfg.filter.unmeasured_c = diag_from_json<4>(f.at("init_cov_c"), "init_cov_c");
      cfg.filter.warmup_steps = f.value("warmup_steps", cfg.filter.warmup_steps);
      cfg.filter.meas_variance_floor = f.value("meas_variance_floor", cfg.filter.meas_variance_floor);
      cfg.filter.gramian_unit_w = f.value("gramian_unit_w", cfg.filter.gramian_unit_w);
      if (f.contains("process_noise")) {
        const json& p = f.at("process_noise");
        NoiseSpec pn = cfg.noise;
        if (p.contains("target_ctra")) pn.target_ctra = diag_from_json<2>(p.at("target_ctra"), "target_ctra");
        if (p.contains("target_jerk")) pn.target_jerk = diag_from_json<2>(p.at("target_jerk"), "target_jerk");
        if (p.contains("ego_ctra")) pn.ego_ctra = diag_from_json<2>(p.at("ego_ctra"), "ego_ctra");
        cfg.filter.process_noise = pn;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const StudyConfig& cfg) {
  json models = json::array();
  for (Model m : cfg.models) models.push_back(std::string(to_string(m)));
  json initial = json::object();
  InitialRanges ranges = cfg.initial;
  for (auto& [key, range] : initial_fields(ranges)) initial[key] = json::array({range->lo, range->hi});
  json out{
      {"n_trajectories", cfg.n_trajectories},
      {"duration", cfg.duration},
      {"dt", cfg.dt},
      {"seed", cfg.seed},
      {"psi_perturb_sigma", cfg.psi_perturb_sigma},
      {"models", models},
      {"noise",
       {{"target_ctra", diag_to_vector<2>(cfg.noise.target_ctra, false)},
        {"target_jerk", diag_to_vector<2>(cfg.noise.target_jerk, false)},
        {"ego_ctra", diag_to_vector<2>(cfg.noise.ego_ctra, false)},
        {"meas_proprio_sigma", diag_to_vector<3>(cfg.noise.meas_proprio, true)},
        {"meas_extero_sigma", diag_to_vector<2>(cfg.noise.meas_extero, true)}}},
      {"initial", initial},
      {"filter",
       {{"init_cov_ab", diag_to_vector<4>(cfg.filter.unmeasured_ab, false)},
        {"init_cov_c", diag_to_vector<4>(cfg.filter.unmeasured_c, false)},
        {"warmup_steps", cfg.filter.warmup_steps},
        {"meas_variance_floor", cfg.filter.meas_variance_floor},
        {"gramian_unit_w", cfg.filter.gramian_unit_w}}},
  };
  if (cfg.filter.process_noise) {
    const NoiseSpec& pn = *cfg.filter.process_noise;
    out["filter"]["process_noise"] = {{"target_ctra", diag_to_vector<2>(pn.target_ctra, false)},
                                      {"target_jerk", diag_to_vector<2>(pn.target_jerk, false)},
                                      {"ego_ctra", diag_to_vector<2>(pn.ego_ctra, false)}};
  }
  return out;
}

std::mt19937_64 make_stream(std::uint64_t seed, int traj_index, Channel channel) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(traj_index), static_cast<std::uint32_t>(channel)};
  return std::mt19937_64(seq);
}

TrajectoryPair generate_pair(const StudyConfig& cfg, int traj_index) {
  cfg.validate();
  auto init_rng = make_stream(cfg.seed, traj_index, Channel::Initial);
  auto ego_rng = make_stream(cfg.seed, traj_index, Channel::EgoNoise);
  auto target_rng = make_stream(cfg.seed, traj_index, Channel::TargetNoise);
  auto psi_rng = make_stream(cfg.seed, traj_index, Channel::PsiPerturb);
  std::normal_distribution<double> psi_noise(0.0, 1.0);

  CtraState ego;
  ego.v = uniform(init_rng, cfg.initial.ego_speed);
  ego.psidot = uniform(init_rng, cfg.initial.ego_yaw_rate);
  ego.a = uniform(init_rng, cfg.initial.ego_accel);
  CtraState target;
  target.x = uniform(init_rng, cfg.initial.target_ahead);
  target.y = uniform(init_rng, cfg.initial.target_lateral);
  target.psi = uniform(init_rng, cfg.initial.target_heading);
  target.v = uniform(init_rng, cfg.initial.target_speed);
  target.psidot = uniform(init_rng, cfg.initial.target_yaw_rate);
  target.a = uniform(init_rng, cfg.initial.target_accel);

  const int n = cfg.n_samples();
  TrajectoryPair tp;
  tp.times.reserve(n);
  tp.ego.reserve(n);
  tp.target.reserve(n);
  for (int k = 0; k < n; ++k) {
    tp.times.push_back(k * cfg.dt);
    tp.ego.push_back(ego);
    tp.target.push_back(target);
    const Vec2 ne = sample_gaussian<2>(cfg.noise.ego_ctra, ego_rng);
    const Vec2 nt = sample_gaussian<2>(cfg.noise.target_ctra, target_rng);
    ego = ctra_propagate(ego, cfg.dt, {ne[0], ne[1]});
    target = ctra_propagate(target, cfg.dt, {nt[0], nt[1]});
    target.psi = wrap_angle(target.psi + cfg.psi_perturb_sigma * psi_noise(psi_rng));
  }
  return tp;
}

std::vector<MeasurementFrame> synthesize_measurements(const TrajectoryPair& tp, const StudyConfig& cfg,
                                                      int traj_index) {
  auto proprio_rng = make_stream(cfg.seed, traj_index, Channel::Proprio);
  auto extero_rng = make_stream(cfg.seed, traj_index, Channel::Extero);
  std::vector<MeasurementFrame> frames;
  frames.reserve(tp.times.size());
  for (std::size_t k = 0; k < tp.times.size(); ++k) {
    const CtraState& e = tp.ego[k];
    const CtraState& t = tp.target[k];
    MeasurementFrame f;
    f.t = tp.times[k];
    f.proprio_cov = cfg.noise.meas_proprio;
    f.extero_cov = cfg.noise.meas_extero;
    f.proprio = Vec3(e.psidot, e.v, e.a) + sample_gaussian<3>(f.proprio_cov, proprio_rng);
    f.extero = rotation(e.psi).m * Vec2(t.x - e.x, t.y - e.y) + sample_gaussian<2>(f.extero_cov, extero_rng);
    frames.push_back(f);
  }
  return frames;
}

double position_error(const RelState& est, const CtraState& ego_truth, const CtraState& target_truth) {
  const Vec2 truth = rotation(ego_truth.psi).m * Vec2(target_truth.x - ego_truth.x, target_truth.y - ego_truth.y);
  return (est.position() - truth).norm();
}

ErrorAggregate aggregate(const std::vector<std::vector<double>>& errors) {
  if (errors.empty()) throw ConfigError("aggregate: no trajectories");
  ErrorAggregate agg;
  for (const auto& traj : errors) {
    if (traj.empty()) throw ConfigError("aggregate: trajectory without error samples");
    double max = 0.0;
    double sum = 0.0;
    for (double e : traj) {
      max = std::max(max, e);
      sum += e;
    }
    agg.avg_max += max;
    agg.avg_mean += sum / static_cast<double>(traj.size());
  }
  agg.avg_max /= static_cast<double>(errors.size());
  agg.avg_mean /= static_cast<double>(errors.size());
  return agg;
}

std::vector<GaussianBelief> run_ego_filter(const StudyConfig& cfg, const std::vector<MeasurementFrame>& frames) {
  std::vector<GaussianBelief> out;
  if (frames.empty()) return out;
  out.reserve(frames.size());
  const auto meas = MeasurementModel::proprio(floored<3>(frames[0].proprio_cov, cfg.filter.meas_variance_floor));
  GaussianBelief ego = initialize_ego(frames[0].proprio, meas);
  out.push_back(ego);
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const double dt = frames[k].t - frames[k - 1].t;
    ego = ego_predict(ego, cfg.filter_noise().ego_ctra, dt);
    const auto mk = MeasurementModel::proprio(floored<3>(frames[k].proprio_cov, cfg.filter.meas_variance_floor));
    // x, y, psi are dead-reckoned and never leave this function.
    ego = update(ego, frames[k].proprio, mk, 2);
    out.push_back(ego);
  }
  return out;
}

TrackResult run_track(const StudyConfig& cfg, Model model, const TrajectoryPair& tp,
                      const std::vector<MeasurementFrame>& frames, const std::vector<GaussianBelief>& ego) {
  TrackResult res;
  res.model = model;
  res.gramian_det_min = std::numeric_limits<double>::infinity();
  res.gramian_det_max = -std::numeric_limits<double>::infinity();
  const Mat4 v_rel = stacked_noise_cov(model, cfg.filter_noise());
  const Mat4& unmeasured = model == Model::C ? cfg.filter.unmeasured_c : cfg.filter.unmeasured_ab;
  const int angle_index = model == Model::C ? 2 : -1;

  const auto meas_at = [&](std::size_t k) {
    return MeasurementModel::extero(floored<2>(frames[k].extero_cov, cfg.filter.meas_variance_floor));
  };
  GaussianBelief b = initialize_track(frames[0].extero, meas_at(0), unmeasured);
  try {
    for (std::size_t k = 1; k < frames.size(); ++k) {
      const double dt = frames[k].t - frames[k - 1].t;
      const EgoInput in = ego_input_from(ego[k - 1]);
      const Mat2 w_gramian = cfg.filter.gramian_unit_w ? Mat2::Identity() : meas_at(k).W.eval();
      const GramianReport g = stochastic_gramian(model, RelState{model, b.mean}, in, dt, w_gramian);
      res.gramian_det_min = std::min(res.gramian_det_min, g.det);
      res.gramian_det_max = std::max(res.gramian_det_max, g.det);

      b = predict(b, model, in, v_rel, dt);
      b = update(b, frames[k].extero, meas_at(k), angle_index);
      if (!b.mean.allFinite() || !b.cov.allFinite()) {
        throw std::runtime_error("non-finite state at step " + std::to_string(k));
      }
      const double err = position_error(RelState{model, b.mean}, tp.ego[k], tp.target[k]);
      res.trace.push_back({frames[k].t, static_cast<int>(k), b, err});
      if (static_cast<int>(k) > cfg.filter.warmup_steps) res.errors.push_back(err);
    }
  } catch (const std::exception& e) {
    res.diverged = true;
    res.divergence = e.what();
  }
  return res;
}

unsigned study_threads() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RELKAL_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && n >= 1) return static_cast<unsigned>(n);
  }
  return hw;
}

StudyResult run_study(const StudyConfig& cfg, unsigned threads) {
  cfg.validate();
  const int n_traj = cfg.n_trajectories;
  const std::size_t n_models = cfg.models.size();
  std::vector<std::vector<TrackResult>> per_traj(n_traj);

  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int j = next++; j < n_traj; j = next++) {
      const TrajectoryPair tp = generate_pair(cfg, j);
      const auto frames = synthesize_measurements(tp, cfg, j);
      const auto ego = run_ego_filter(cfg, frames);
      auto& slot = per_traj[j];
      slot.reserve(n_models);
      for (Model m : cfg.models) slot.push_back(run_track(cfg, m, tp, frames, ego));
    }
  };
  const unsigned n_workers = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(n_traj));
  {
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < n_workers; ++i) pool.emplace_back(worker);
    worker();
  }

  StudyResult result;
  result.models.resize(n_models);
  for (std::size_t mi = 0; mi < n_models; ++mi) {
    ModelOutcome& out = result.models[mi];
    out.metrics.model = cfg.models[mi];
    out.metrics.gramian_det_min = std::numeric_limits<double>::infinity();
    out.metrics.gramian_det_max = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> usable;
    out.errors.resize(n_traj);
    for (int j = 0; j < n_traj; ++j) {
      const TrackResult& tr = per_traj[j][mi];
      out.metrics.gramian_det_min = std::min(out.metrics.gramian_det_min, tr.gramian_det_min);
      out.metrics.gramian_det_max = std::max(out.metrics.gramian_det_max, tr.gramian_det_max);
      if (tr.diverged || tr.errors.empty()) {
        out.diverged.push_back(j);
        out.divergence_reasons.push_back(tr.diverged ? tr.divergence : "no samples after warm-up");
        continue;
      }
      out.errors[j] = tr.errors;
      usable.push_back(tr.errors);
    }
    if (usable.empty()) {
      out.metrics.avg_max_error = std::numeric_limits<double>::quiet_NaN();
      out.metrics.avg_mean_error = std::numeric_limits<double>::quiet_NaN();
    } else {
      const ErrorAggregate agg = aggregate(usable);
      out.metrics.avg_max_error = agg.avg_max;
      out.metrics.avg_mean_error = agg.avg_mean;
    }
  }
  return result;
}

}  // namespace relkal
