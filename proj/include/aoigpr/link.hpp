#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>

#include "aoigpr/config.hpp"
#include "aoigpr/vehicular.hpp"

namespace aoigpr {

/// Aggregate interference at receiver k on RB n from every other transmitter (W).
/// powers[k'] is transmitter k's per-RB power vector.
double interference_at(int k, int n, std::span<const std::span<const double>> powers, const GainTensor& gains);

/// Shannon-rate service in packets per slot:
/// (tau/Z) * sum_n W log2(1 + P_n h_n / (N0 W + I_n)).
double transmission_rate(std::span<const double> power, std::span<const double> own_gain,
                         std::span<const double> interference, const ScenarioConfig& cfg);

struct Packet {
  std::int64_t generation = 0;  // slot index at which the update was generated
  double remaining_bits = 0.0;
};

/// Transmitter FIFO of timestamped status updates with a fractional arrival accumulator.
struct PacketQueue {
  std::deque<Packet> packets;
  double accumulator = 0.0;  // packets, in [0, 1)
  double served_bits = 0.0;  // lifetime total, for bit accounting
  double arrived_bits = 0.0;

  /// Backlog in packets, sum of remaining bits / Z.
  double length(double Z) const;
};

struct ServeResult {
  std::optional<std::int64_t> newest_delivered;  // generation slot of the newest fully delivered packet
  double bits_served = 0.0;
};

/// Serves R*Z bits FIFO (partial service carries over), then credits A to
/// the accumulator and enqueues one packet, generated at slot t+1, per whole unit.
/// With supersede set, a fresh arrival replaces everything still queued.
ServeResult serve_queue(PacketQueue& q, double R, double A, std::int64_t t, double Z, bool supersede = false);

/// Receiver-side age. gamma_slot is the generation slot of the newest delivered update.
struct AoiState {
  double delta = 0.0;  // s
  std::optional<std::int64_t> gamma_slot;
};

/// Age at the start of slot t+1 given what was delivered during slot t.
/// Deliveries older than the stored one are ignored.
AoiState update_aoi(const AoiState& a, std::optional<std::int64_t> delivered_gen, std::int64_t t, double tau);

}  // namespace aoigpr
