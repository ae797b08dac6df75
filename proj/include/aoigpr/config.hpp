#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace aoigpr {

enum class FadingModel { kOff, kRayleigh };
enum class Boundary { kWrap, kReflect };

/// Surrogate three-regime V2V channel. Every number here is a tunable
/// default, not a measured value.
struct ChannelParams {
  double ref_distance_m = 10.0;
  double min_distance_m = 1.0;
  double los_ref_loss_db = 63.3;  // at ref_distance_m
  double los_exponent = 1.77;
  double wlos_corner_loss_db = 10.0;
  double nlos_ref_loss_db = 63.3;
  double nlos_exponent = 2.9;
  double nlos_corner_loss_db = 10.0;
  double los_shadowing_db = 3.0;
  double wlos_shadowing_db = 3.0;
  double nlos_shadowing_db = 3.0;
  double shadowing_ar = 0.9;  // per-slot AR(1) coefficient of the dB shadowing process
  FadingModel fading = FadingModel::kRayleigh;
  double fading_ar = 0.0;  // per-slot AR(1) coefficient of the complex fading amplitude
};

struct MobilityParams {
  double area_m = 250.0;
  double block_m = 50.0;
  double speed_kmh = 60.0;
  double speed_jitter = 0.0;  // fractional, per vehicle, uniform in [-j, +j]
  double p_straight = 0.5;
  double p_left = 0.25;
  double p_right = 0.25;
  double gap_mean_m = 15.0;
  double gap_min_m = 5.0;
  double gap_max_m = 30.0;
  double gap_reversion_per_s = 1.0;
  double gap_noise_m_per_sqrt_s = 5.0;
  Boundary boundary = Boundary::kWrap;
};

struct LearningParams {
  int refit_period = 50;       // F
  int fit_min_samples = 10;
  int fit_restarts = 3;
  int fit_max_evals = 200;
  int fit_window = 0;          // most recent samples used for fitting; 0 = whole window
  double nu = 0.5;
  bool standard_scaling = false;
  double h_init_ms = 0.0;      // 0 selects d (in ms)
  double lambda_init = 1.0;
  double jitter_rel = 1e-6;    // sigma_j^2 = jitter_rel * h^2
  double jitter_max_rel = 1e-2;
  int candidate_cap = 512;     // S; 0 forces exhaustive enumeration
  bool center_mean = false;
  double aoi_scale_ms = 0.0;   // 0 selects d
  double power_scale_w = 0.0;  // 0 selects p
};

struct TrafficParams {
  bool supersede = false;
};

/// All scenario parameters in SI linear units.
struct ScenarioConfig {
  int K = 20;
  int N = 20;
  double W = 180e3;                  // Hz
  double tau = 3e-3;                 // s
  double p = 0.01;                   // W
  int L = 1;
  double P_max = 0.05011872336272722;  // W (17 dBm)
  double Z = 4000.0;                 // bits
  double N0 = 3.9810717055349851e-21;  // W/Hz (-174 dBm/Hz)
  double arrival_rate = 2.5e6;       // bit/s
  double d = 10e-3;                  // s
  int M = 200;
  double alpha_c = 1.0;
  double alpha_i = 100.0;
  int T = 5000;
  std::uint64_t seed = 1;
  int warmup = -1;                   // slots; negative selects max(M, 100)

  ChannelParams channel;
  MobilityParams mobility;
  LearningParams learning;
  TrafficParams traffic;

  double d_ms() const { return d * 1e3; }
  double tau_ms() const { return tau * 1e3; }
  double h_init() const { return learning.h_init_ms > 0 ? learning.h_init_ms : d_ms(); }
  double aoi_scale() const { return learning.aoi_scale_ms > 0 ? learning.aoi_scale_ms : d_ms(); }
  double power_scale() const { return learning.power_scale_w > 0 ? learning.power_scale_w : p; }
  int effective_warmup() const { return warmup >= 0 ? warmup : std::max(M, 100); }
};

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

/// Periodic packet arrivals per slot, possibly fractional.
double derive_arrival(double arrival_rate, double tau, double Z);

/// Throws ValidationError listing every violated constraint.
void validate(const ScenarioConfig& cfg);

/// Parses the sectioned key/value format. Missing keys keep their defaults.
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Writes every field in file units; parse_config(to_text(c)) reproduces c.
std::string to_text(const ScenarioConfig& cfg);

}  // namespace aoigpr
