#include "aoigpr/vehicular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace aoigpr {

namespace {

constexpr double kOnStreetTol = 1e-6;

bool near_multiple(double v, double step) {
  double r = std::fmod(std::abs(v), step);
  return std::min(r, step - r) < kOnStreetTol;
}

}  // namespace

std::string_view to_string(LinkClass c) {
  switch (c) {
    case LinkClass::kLos: return "LOS";
    case LinkClass::kWlos: return "WLOS";
    case LinkClass::kNlos: return "NLOS";
  }
  return "?";
}

bool ManhattanGrid::on_horizontal(Vec2 p) const { return near_multiple(p.y, block); }
bool ManhattanGrid::on_vertical(Vec2 p) const { return near_multiple(p.x, block); }

double ManhattanGrid::axis_distance(double a, double b) const {
  double d = std::abs(a - b);
  return wrap ? std::min(d, side - d) : d;
}

double ManhattanGrid::distance(Vec2 a, Vec2 b) const {
  return std::hypot(axis_distance(a.x, b.x), axis_distance(a.y, b.y));
}

Vec2 ManhattanGrid::normalize(Vec2 p) const {
  if (!wrap) return p;
  auto w = [this](double v) {
    v = std::fmod(v, side);
    if (v < 0) v += side;
    if (v >= side) v -= side;
    return v;
  };
  return {w(p.x), w(p.y)};
}

VuePairState spawn_pair(const ManhattanGrid& grid, const MobilityParams& m, Engine& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int streets = static_cast<int>(std::lround(grid.side / grid.block)) + (grid.wrap ? 0 : 1);
  VuePairState s;
  const bool horizontal = unit(rng) < 0.5;
  const double street = grid.block * static_cast<double>(std::min(streets - 1, static_cast<int>(unit(rng) * streets)));
  const int dir = unit(rng) < 0.5 ? 1 : -1;
  double along = unit(rng) * grid.side;
  if (!grid.wrap) {
    // keep the trailing receiver inside the area
    along = m.gap_max_m + unit(rng) * (grid.side - 2 * m.gap_max_m);
  }
  if (horizontal) {
    s.tx = {along, street};
    s.hx = dir;
    s.hy = 0;
  } else {
    s.tx = {street, along};
    s.hx = 0;
    s.hy = dir;
  }
  s.prev_hx = s.hx;
  s.prev_hy = s.hy;
  s.last_turn = s.tx;
  s.speed = m.speed_kmh / 3.6 * (1.0 + m.speed_jitter * (2.0 * unit(rng) - 1.0));
  s.gap = m.gap_mean_m;
  s.rx = trailing_position(s, grid);
  return s;
}

Vec2 trailing_position(const VuePairState& s, const ManhattanGrid& grid) {
  Vec2 p;
  if (s.since_turn >= s.gap) {
    p = {s.tx.x - s.gap * s.hx, s.tx.y - s.gap * s.hy};
  } else {
    const double back = s.gap - s.since_turn;
    p = {s.last_turn.x - back * s.prev_hx, s.last_turn.y - back * s.prev_hy};
  }
  return grid.normalize(p);
}

VuePairState step_mobility(const VuePairState& in, const ManhattanGrid& grid, const MobilityParams& m, double tau,
                           Engine& rng) {
  VuePairState s = in;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  double remaining = s.speed * tau;
  while (remaining > 0.0) {
    double& along = s.hx != 0 ? s.tx.x : s.tx.y;
    const int dir = s.hx != 0 ? s.hx : s.hy;
    const double k = along / grid.block;
    const double next = dir > 0 ? (std::floor(k + 1e-9) + 1.0) * grid.block : (std::ceil(k - 1e-9) - 1.0) * grid.block;
    const double to_next = std::abs(next - along);
    if (remaining < to_next) {
      along += dir * remaining;
      s.since_turn += remaining;
      break;
    }
    along = next;
    s.since_turn += to_next;
    remaining -= to_next;
    s.tx = grid.normalize(s.tx);

    // Intersection: straight / left / right, restricted to directions that stay in the area.
    struct Option {
      int hx, hy;
      double p;
    };
    Option opts[3] = {{s.hx, s.hy, m.p_straight}, {-s.hy, s.hx, m.p_left}, {s.hy, -s.hx, m.p_right}};
    double total = 0.0;
    for (auto& o : opts) {
      if (!grid.wrap) {
        const double nx = s.tx.x + o.hx * grid.block, ny = s.tx.y + o.hy * grid.block;
        if (nx < -kOnStreetTol || nx > grid.side + kOnStreetTol || ny < -kOnStreetTol || ny > grid.side + kOnStreetTol)
          o.p = 0.0;
      }
      total += o.p;
    }
    double u = unit(rng) * total;
    int nhx = -s.hx, nhy = -s.hy;  // dead end: U-turn
    if (total > 0.0) {
      for (const auto& o : opts) {
        if (o.p <= 0.0) continue;
        nhx = o.hx;
        nhy = o.hy;
        if (u < o.p) break;
        u -= o.p;
      }
    }
    if (nhx != s.hx || nhy != s.hy) {
      s.last_turn = s.tx;
      s.prev_hx = s.hx;
      s.prev_hy = s.hy;
      s.since_turn = 0.0;
      s.hx = nhx;
      s.hy = nhy;
    }
  }
  s.tx = grid.normalize(s.tx);

  const double xi = normal(rng);
  s.gap += m.gap_reversion_per_s * (m.gap_mean_m - s.gap) * tau + m.gap_noise_m_per_sqrt_s * std::sqrt(tau) * xi;
  s.gap = std::clamp(s.gap, m.gap_min_m, m.gap_max_m);
  s.rx = trailing_position(s, grid);
  return s;
}

LinkGeometry classify_link(const ManhattanGrid& grid, Vec2 tx, Vec2 rx) {
  LinkGeometry g;
  g.distance = grid.distance(tx, rx);
  const bool th = grid.on_horizontal(tx), tv = grid.on_vertical(tx);
  const bool rh = grid.on_horizontal(rx), rv = grid.on_vertical(rx);

  const bool same_h = th && rh && grid.axis_distance(tx.y, rx.y) < kOnStreetTol;
  const bool same_v = tv && rv && grid.axis_distance(tx.x, rx.x) < kOnStreetTol;
  if (same_h || same_v) {
    g.cls = LinkClass::kLos;
    g.path_length = g.distance;
    return g;
  }

  // Perpendicular streets meet at one corner; keep the shortest way round it.
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](double d1, double d2) {
    if (d1 + d2 < best) {
      best = d1 + d2;
      g.d_tx_corner = d1;
      g.d_rx_corner = d2;
    }
  };
  if (th && rv) consider(grid.axis_distance(tx.x, rx.x), grid.axis_distance(tx.y, rx.y));
  if (tv && rh) consider(grid.axis_distance(tx.y, rx.y), grid.axis_distance(tx.x, rx.x));
  if (std::isfinite(best)) {
    g.corners = 1;
    g.path_length = best;
    const double reach = grid.block + kOnStreetTol;
    g.cls = (g.d_tx_corner <= reach && g.d_rx_corner <= reach) ? LinkClass::kWlos : LinkClass::kNlos;
    return g;
  }

  g.cls = LinkClass::kNlos;
  g.corners = 2;
  g.path_length = grid.axis_distance(tx.x, rx.x) + grid.axis_distance(tx.y, rx.y);
  return g;
}

double path_loss_db(const LinkGeometry& g, const ChannelParams& p) {
  const double d = std::max(g.path_length, p.min_distance_m);
  switch (g.cls) {
    case LinkClass::kLos: return p.los_ref_loss_db + 10.0 * p.los_exponent * std::log10(d / p.ref_distance_m);
    case LinkClass::kWlos:
      return p.los_ref_loss_db + 10.0 * p.los_exponent * std::log10(d / p.ref_distance_m) + p.wlos_corner_loss_db;
    case LinkClass::kNlos:
      return p.nlos_ref_loss_db + 10.0 * p.nlos_exponent * std::log10(d / p.ref_distance_m) +
             p.nlos_corner_loss_db * g.corners;
  }
  return 0.0;
}

void advance_shadowing(LinkChannel& link, const ChannelParams& p) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double xi = normal(link.rng);
  if (!link.shadow_started) {
    link.shadow = xi;
    link.shadow_started = true;
  } else {
    link.shadow = p.shadowing_ar * link.shadow + std::sqrt(1.0 - p.shadowing_ar * p.shadowing_ar) * xi;
  }
}

double channel_gain(const LinkGeometry& geom, const ChannelParams& p, int rb, LinkChannel& link) {
  double std_db = p.los_shadowing_db;
  if (geom.cls == LinkClass::kWlos) std_db = p.wlos_shadowing_db;
  if (geom.cls == LinkClass::kNlos) std_db = p.nlos_shadowing_db;
  const double loss_db = path_loss_db(geom, p) - std_db * link.shadow;

  double fade = 1.0;
  if (p.fading == FadingModel::kRayleigh) {
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    const std::complex<double> w(normal(link.rng), normal(link.rng));
    auto& g = link.fading[static_cast<std::size_t>(rb)];
    if (!link.fading_started[static_cast<std::size_t>(rb)]) {
      g = w;
      link.fading_started[static_cast<std::size_t>(rb)] = true;
    } else {
      g = p.fading_ar * g + std::sqrt(1.0 - p.fading_ar * p.fading_ar) * w;
    }
    fade = std::max(std::norm(g), std::numeric_limits<double>::min());
  }
  return std::pow(10.0, -loss_db / 10.0) * fade;
}

GainTensor gain_matrix(const std::vector<VuePairState>& pairs, const ManhattanGrid& grid, const ChannelParams& p,
                       int N, std::vector<LinkChannel>& links) {
  const int K = static_cast<int>(pairs.size());
  GainTensor g(K, N);
  for (int t = 0; t < K; ++t) {
    for (int r = 0; r < K; ++r) {
      auto& link = links[static_cast<std::size_t>(t * K + r)];
      const auto geom = classify_link(grid, pairs[static_cast<std::size_t>(t)].tx, pairs[static_cast<std::size_t>(r)].rx);
      advance_shadowing(link, p);
      for (int n = 0; n < N; ++n) g.at(t, r, n) = channel_gain(geom, p, n, link);
    }
  }
  return g;
}

VehicularEnv::VehicularEnv(const ScenarioConfig& cfg, const RngStreams& streams)
    : channel_(cfg.channel),
      mobility_(cfg.mobility),
      tau_(cfg.tau),
      rbs_(cfg.N),
      grid_(ManhattanGrid::from(cfg.mobility)),
      mobility_rng_(streams.stream("mobility")) {
  pairs_.reserve(static_cast<std::size_t>(cfg.K));
  for (int k = 0; k < cfg.K; ++k) pairs_.push_back(spawn_pair(grid_, mobility_, mobility_rng_));
  links_.reserve(static_cast<std::size_t>(cfg.K * cfg.K));
  for (int t = 0; t < cfg.K; ++t)
    for (int r = 0; r < cfg.K; ++r)
      links_.emplace_back(streams.stream("fading", {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(r)}),
                          cfg.N);
}

GainTensor VehicularEnv::draw_gains() { return gain_matrix(pairs_, grid_, channel_, rbs_, links_); }

void VehicularEnv::step_mobility() {
  for (auto& s : pairs_) s = aoigpr::step_mobility(s, grid_, mobility_, tau_, mobility_rng_);
}

void VehicularEnv::write_trace_header(std::ostream& os) { os << "slot,pair,tx_x,tx_y,rx_x,rx_y,class\n"; }

void VehicularEnv::write_trace_rows(std::ostream& os, long slot) const {
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const auto& s = pairs_[k];
    os << slot << ',' << k << ',' << s.tx.x << ',' << s.tx.y << ',' << s.rx.x << ',' << s.rx.y << ','
       << to_string(classify_link(grid_, s.tx, s.rx).cls) << '\n';
  }
}

}  // namespace aoigpr
