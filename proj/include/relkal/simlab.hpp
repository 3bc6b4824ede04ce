#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relkal/ekf.hpp"
#include "relkal/global_models.hpp"
#include "relkal/statespace.hpp"

namespace relkal {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Initial conditions of a reference trajectory pair. The ego starts at the origin
/// with heading 0; the target starts ahead of it.
struct InitialRanges {
  Range ego_speed{10.0, 30.0};
  Range ego_yaw_rate{0.0, 0.0};
  Range ego_accel{0.0, 0.0};
  Range target_ahead{20.0, 80.0};
  Range target_lateral{-4.0, 4.0};
  Range target_speed{5.0, 35.0};
  Range target_heading{-0.2, 0.2};
  Range target_yaw_rate{0.0, 0.0};
  Range target_accel{0.0, 0.0};
};

struct FilterSettings {
  Mat4 unmeasured_ab = default_unmeasured_cov(Model::A);
  Mat4 unmeasured_c = default_unmeasured_cov(Model::C);
  /// Steps after initialization excluded from the error statistics.
  int warmup_steps = 0;
  /// Lower bound on the measurement variances the filters assume [unit^2].
  double meas_variance_floor = 1e-12;
  /// Gramian column evaluated with W = I (otherwise with the extero covariance).
  bool gramian_unit_w = true;
  /// Process noise assumed by the filters. When unset the filters use the generation
  /// noise (target_jerk is filter-only in either case).
  std::optional<NoiseSpec> process_noise;
};

struct StudyConfig {
  int n_trajectories = 50;
  double duration = 20.0;  ///< [s]
  double dt = 0.04;        ///< [s]
  NoiseSpec noise;
  double psi_perturb_sigma = 0.01;  ///< [rad] per step, added to the target heading
  std::uint64_t seed = 1;
  std::vector<Model> models{Model::A, Model::B, Model::C};
  InitialRanges initial;
  FilterSettings filter;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  int n_samples() const;
  const NoiseSpec& filter_noise() const { return filter.process_noise ? *filter.process_noise : noise; }
};

StudyConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const StudyConfig& cfg);

struct TrajectoryPair {
  std::vector<double> times;
  std::vector<CtraState> ego;
  std::vector<CtraState> target;
};

struct MeasurementFrame {
  double t = 0.0;
  Vec3 proprio = Vec3::Zero();  ///< (psidot, v, a)
  Mat3 proprio_cov = Mat3::Zero();
  Vec2 extero = Vec2::Zero();  ///< (x_rel, y_rel) in the ego frame
  Mat2 extero_cov = Mat2::Zero();
};

/// Independent random streams per (seed, trajectory, channel).
enum class Channel : std::uint32_t { Initial = 0, EgoNoise, TargetNoise, PsiPerturb, Proprio, Extero };
std::mt19937_64 make_stream(std::uint64_t seed, int traj_index, Channel channel);

TrajectoryPair generate_pair(const StudyConfig& cfg, int traj_index);
std::vector<MeasurementFrame> synthesize_measurements(const TrajectoryPair& tp, const StudyConfig& cfg,
                                                      int traj_index);

/// Euclidean distance between the estimated relative position and the true target
/// position expressed in the true ego frame.
double position_error(const RelState& est, const CtraState& ego_truth, const CtraState& target_truth);

struct ErrorAggregate {
  double avg_max = 0.0;
  double avg_mean = 0.0;
};

/// Mean over trajectories of the per-trajectory max and mean. Throws ConfigError on
/// an empty set or an empty trajectory.
ErrorAggregate aggregate(const std::vector<std::vector<double>>& errors);

/// Ego CTRA filter run over the proprioceptive stream; one posterior per frame.
std::vector<GaussianBelief> run_ego_filter(const StudyConfig& cfg, const std::vector<MeasurementFrame>& frames);

struct TraceRow {
  double t = 0.0;
  int step = 0;
  GaussianBelief belief;
  double error = 0.0;
};

struct TrackResult {
  Model model = Model::A;
  std::vector<TraceRow> trace;  ///< one row per update after initialization
  std::vector<double> errors;   ///< errors entering the statistics (after warm-up)
  double gramian_det_min = 0.0;
  double gramian_det_max = 0.0;
  bool diverged = false;
  std::string divergence;
};

/// Target filter of one model over one trajectory, fed by the ego posteriors.
TrackResult run_track(const StudyConfig& cfg, Model model, const TrajectoryPair& tp,
                      const std::vector<MeasurementFrame>& frames, const std::vector<GaussianBelief>& ego);

struct MetricsRow {
  Model model = Model::A;
  double avg_max_error = 0.0;   ///< [m]
  double avg_mean_error = 0.0;  ///< [m]
  double gramian_det_min = 0.0;
  double gramian_det_max = 0.0;
};

struct ModelOutcome {
  MetricsRow metrics;
  std::vector<std::vector<double>> errors;  ///< per trajectory (empty when diverged)
  std::vector<int> diverged;                ///< trajectory indices
  std::vector<std::string> divergence_reasons;
};

struct StudyResult {
  std::vector<ModelOutcome> models;  ///< same order as cfg.models
};

/// Worker count from RELKAL_THREADS (capped by hardware concurrency when unset).
unsigned study_threads();

/// Whole pipeline. Trajectories run on `threads` workers; the reduction is by
/// trajectory index, so the result does not depend on the thread count.
StudyResult run_study(const StudyConfig& cfg, unsigned threads = 1);

}  // namespace relkal
