#pragma once

#include <complex>
#include <cstddef>
#include <ostream>
#include <string_view>
#include <vector>

#include "aoigpr/config.hpp"
#include "aoigpr/rng.hpp"

namespace aoigpr {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

/// Square street grid: horizontal streets at y = j*block, vertical at x = i*block.
struct ManhattanGrid {
  double side = 250.0;
  double block = 50.0;
  bool wrap = true;

  static ManhattanGrid from(const MobilityParams& m) {
    return {m.area_m, m.block_m, m.boundary == Boundary::kWrap};
  }
  bool on_horizontal(Vec2 p) const;
  bool on_vertical(Vec2 p) const;
  /// Per-axis separation, shortest way round on a torus.
  double axis_distance(double a, double b) const;
  double distance(Vec2 a, Vec2 b) const;
  Vec2 normalize(Vec2 p) const;
};

/// One transmitter with its receiver trailing it on the same street.
struct VuePairState {
  Vec2 tx;
  Vec2 rx;
  int hx = 1, hy = 0;  // heading, a unit vector along a street axis
  double speed = 0.0;  // m/s
  double gap = 15.0;   // m, along-path tx->rx distance
  // Last corner the transmitter went round; the receiver is still behind it
  // while since_turn < gap.
  Vec2 last_turn;
  int prev_hx = 1, prev_hy = 0;
  double since_turn = 1e300;
};

enum class LinkClass { kLos = 0, kWlos = 1, kNlos = 2 };

std::string_view to_string(LinkClass c);

struct LinkGeometry {
  LinkClass cls = LinkClass::kLos;
  double distance = 0.0;   // straight-line (torus) distance
  double d_tx_corner = 0.0;
  double d_rx_corner = 0.0;
  int corners = 0;
  double path_length = 0.0;  // distance fed to the path-loss law
};

/// Random on-street start with a heading along the street and the mean gap.
VuePairState spawn_pair(const ManhattanGrid& grid, const MobilityParams& m, Engine& rng);

/// Advances one slot: the transmitter drives speed*tau (turning at
/// intersections), the gap takes a clamped mean-reverting step and the
/// receiver is re-placed gap metres behind along the transmitter's path.
VuePairState step_mobility(const VuePairState& s, const ManhattanGrid& grid, const MobilityParams& m, double tau,
                           Engine& rng);

/// Receiver position implied by the transmitter state and gap.
Vec2 trailing_position(const VuePairState& s, const ManhattanGrid& grid);

LinkGeometry classify_link(const ManhattanGrid& grid, Vec2 tx, Vec2 rx);

/// Deterministic path loss (dB) of a classified link.
double path_loss_db(const LinkGeometry& g, const ChannelParams& p);

/// Correlated shadowing and fading state of one directed link, with its own substream.
struct LinkChannel {
  Engine rng;
  double shadow = 0.0;  // unit-variance AR(1) process, scaled by the class std
  bool shadow_started = false;
  std::vector<std::complex<double>> fading;
  std::vector<bool> fading_started;

  LinkChannel(Engine e, int rbs) : rng(std::move(e)), fading(static_cast<std::size_t>(rbs)), fading_started(static_cast<std::size_t>(rbs), false) {}
};

/// Moves the link's shadowing process forward by one slot.
void advance_shadowing(LinkChannel& link, const ChannelParams& p);

/// Linear power gain 10^(-PL/10) * S * F_n; advances the fading of RB n by one slot.
double channel_gain(const LinkGeometry& geom, const ChannelParams& p, int rb, LinkChannel& link);

/// Dense (transmitter, receiver, RB) gain tensor.
class GainTensor {
 public:
  GainTensor() = default;
  GainTensor(int K, int N) : K_(K), N_(N), g_(static_cast<std::size_t>(K * K * N), 0.0) {}
  double& at(int tx, int rx, int rb) { return g_[index(tx, rx, rb)]; }
  double at(int tx, int rx, int rb) const { return g_[index(tx, rx, rb)]; }
  int pairs() const { return K_; }
  int rbs() const { return N_; }

 private:
  std::size_t index(int tx, int rx, int rb) const {
    return (static_cast<std::size_t>(tx) * static_cast<std::size_t>(K_) + static_cast<std::size_t>(rx)) *
               static_cast<std::size_t>(N_) +
           static_cast<std::size_t>(rb);
  }
  int K_ = 0, N_ = 0;
  std::vector<double> g_;
};

/// Gains for every transmitter -> receiver link; links[tx*K + rx] carries each link's state.
GainTensor gain_matrix(const std::vector<VuePairState>& pairs, const ManhattanGrid& grid, const ChannelParams& p,
                       int N, std::vector<LinkChannel>& links);

/// All pairs plus per-link channel state, stepped once per slot.
class VehicularEnv {
 public:
  VehicularEnv(const ScenarioConfig& cfg, const RngStreams& streams);

  /// Gains for the current geometry; advances shadowing and fading by one slot.
  GainTensor draw_gains();
  void step_mobility();

  const std::vector<VuePairState>& pairs() const noexcept { return pairs_; }
  const ManhattanGrid& grid() const noexcept { return grid_; }

  /// CSV rows: slot, pair, tx_x, tx_y, rx_x, rx_y, class (own link).
  static void write_trace_header(std::ostream& os);
  void write_trace_rows(std::ostream& os, long slot) const;

 private:
  ChannelParams channel_;
  MobilityParams mobility_;
  double tau_;
  int rbs_;
  ManhattanGrid grid_;
  std::vector<VuePairState> pairs_;
  std::vector<LinkChannel> links_;
  Engine mobility_rng_;
};

}  // namespace aoigpr
