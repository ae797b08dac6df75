#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "aoigpr/config.hpp"
#include "aoigpr/metrics.hpp"
#include "aoigpr/vehicular.hpp"

namespace aoigpr {

enum class Policy { kProposed, kBaseline2, kBaseline1 };

std::string_view to_string(Policy p);
/// Accepts proposed, baseline2, baseline1; throws std::invalid_argument otherwise.
Policy parse_policy(std::string_view s);

enum SlotFlag : unsigned { kFlagFallback = 1, kFlagRefit = 2, kFlagFitWarning = 4 };

/// What happened to one pair in one slot. delta_ms is the age reached at the
/// start of the next slot, the quantity mu_ms predicted.
struct SlotRecord {
  std::int64_t slot = 0;
  int pair = 0;
  double delta_ms = 0.0;
  std::optional<double> mu_ms;
  std::optional<double> sigma2_ms2;
  double rate_pkts = 0.0;
  double total_power_w = 0.0;
  bool delivered = false;
  unsigned flags = 0;
  std::vector<double> interference_w;  // one entry per active RB, in RB order
};

struct MetricsReport {
  std::size_t samples = 0;  // pooled (pair, slot) records after warmup
  double violation_prob = 0.0;
  double avg_aoi_ms = 0.0;
  std::vector<CcdfPoint> ccdf;
  std::vector<std::optional<double>> rmse_ms;  // per pair, none without predictions
  std::vector<std::optional<double>> mean_sigma2_ms2;
  std::optional<double> mean_rmse_ms;  // over pairs that have one
  std::size_t fallback_slots = 0;
  std::size_t refits = 0;
};

/// Metrics over records with slot >= warmup, pooled across every trace given.
MetricsReport compute_metrics(const std::vector<const std::vector<SlotRecord>*>& traces, int pairs, double d_ms,
                              int warmup);
MetricsReport compute_metrics(const std::vector<SlotRecord>& trace, int pairs, double d_ms, int warmup);

struct SimEvent {
  enum Kind { kDecide, kResolve } kind;
  std::int64_t slot;
  int pair;  // -1 for kResolve
};

struct SimOptions {
  int threads = 1;  // decision-phase workers
  bool record_interference = true;
  /// Called after the gains for a slot are drawn and before they are used.
  std::function<void(GainTensor&, std::int64_t slot)> gain_hook;
  /// Called for every decision and once per resolution; must be thread safe.
  std::function<void(const SimEvent&)> observer;
  /// Optional per-slot mobility trace (slot, pair, positions, own-link class).
  std::ostream* mobility_trace = nullptr;
};

struct SimulationResult {
  Policy policy = Policy::kProposed;
  std::uint64_t seed = 0;
  ScenarioConfig config;  // as run, after policy adjustments
  std::vector<SlotRecord> trace;  // slot-major, pair-minor
  MetricsReport report;
};

/// The policy-adjusted config: baseline2 zeroes alpha_i.
ScenarioConfig policy_config(const ScenarioConfig& cfg, Policy policy);

/// Runs cfg.T slots. Validates cfg first (ValidationError).
SimulationResult run_simulation(const ScenarioConfig& cfg, Policy policy, const SimOptions& opts = {});

/// trace.csv: slot,pair,delta_ms,mu_ms,sigma2_ms2,rate_pkts,total_power_w,delivered,flags
void write_trace_csv(std::ostream& os, const std::vector<SlotRecord>& trace);
/// ccdf.csv: threshold_ms,ccdf
void write_ccdf_csv(std::ostream& os, const std::vector<CcdfPoint>& curve);

/// Shortest text that parses back to exactly v.
std::string format_double(double v);

}  // namespace aoigpr
