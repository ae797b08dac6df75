#include "aoigpr/link.hpp"

#include <algorithm>
#include <cmath>

namespace aoigpr {

double interference_at(int k, int n, std::span<const std::span<const double>> powers, const GainTensor& gains) {
  double sum = 0.0;
  for (int other = 0; other < static_cast<int>(powers.size()); ++other) {
    if (other == k) continue;
    const double p = powers[static_cast<std::size_t>(other)][static_cast<std::size_t>(n)];
    if (p > 0.0) sum += p * gains.at(other, k, n);
  }
  return sum;
}

double transmission_rate(std::span<const double> power, std::span<const double> own_gain,
                         std::span<const double> interference, const ScenarioConfig& cfg) {
  const double noise = cfg.N0 * cfg.W;
  double bits_per_s = 0.0;
  for (std::size_t n = 0; n < power.size(); ++n) {
    if (power[n] <= 0.0) continue;
    bits_per_s += cfg.W * std::log2(1.0 + power[n] * own_gain[n] / (noise + interference[n]));
  }
  return cfg.tau / cfg.Z * bits_per_s;
}

double PacketQueue::length(double Z) const {
  double bits = 0.0;
  for (const auto& p : packets) bits += p.remaining_bits;
  return bits / Z;
}

ServeResult serve_queue(PacketQueue& q, double R, double A, std::int64_t t, double Z, bool supersede) {
  ServeResult res;
  double budget = R * Z;
  while (budget > 0.0 && !q.packets.empty()) {
    auto& head = q.packets.front();
    if (budget >= head.remaining_bits) {
      budget -= head.remaining_bits;
      res.bits_served += head.remaining_bits;
      res.newest_delivered = head.generation;
      q.packets.pop_front();
    } else {
      head.remaining_bits -= budget;
      res.bits_served += budget;
      budget = 0.0;
    }
  }
  q.served_bits += res.bits_served;

  q.accumulator += A;
  while (q.accumulator >= 1.0) {
    q.accumulator -= 1.0;
    if (supersede) q.packets.clear();
    q.packets.push_back({t + 1, Z});
    q.arrived_bits += Z;
  }
  return res;
}

AoiState update_aoi(const AoiState& a, std::optional<std::int64_t> delivered_gen, std::int64_t t, double tau) {
  AoiState out = a;
  if (delivered_gen && (!out.gamma_slot || *delivered_gen > *out.gamma_slot)) out.gamma_slot = delivered_gen;
  if (out.gamma_slot)
    out.delta = tau * static_cast<double>(t + 1 - *out.gamma_slot);
  else
    out.delta = a.delta + tau;
  return out;
}

}  // namespace aoigpr
