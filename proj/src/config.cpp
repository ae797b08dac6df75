#include "aoigpr/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "aoigpr/errors.hpp"

namespace aoigpr {

double dbm_to_watt(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }

double watt_to_dbm(double watt) { return 10.0 * std::log10(watt * 1000.0); }

double derive_arrival(double arrival_rate, double tau, double Z) { return arrival_rate * tau / Z; }

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
  double v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("expected a number");
  return v;
}

long long parse_int(std::string_view s) {
  long long v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("expected an integer");
  return v;
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("expected a non-negative integer");
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("expected true/false");
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(ScenarioConfig&, std::string_view)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

template <class Member>
Field real(const char* sec, const char* key, Member m, double file_per_si = 1.0) {
  return {sec, key, [m, file_per_si](ScenarioConfig& c, std::string_view v) { m(c) = parse_double(v) / file_per_si; },
          [m, file_per_si](const ScenarioConfig& c) { return fmt_double(m(c) * file_per_si); }};
}

template <class Member>
Field dbm(const char* sec, const char* key, Member m) {
  return {sec, key, [m](ScenarioConfig& c, std::string_view v) { m(c) = dbm_to_watt(parse_double(v)); },
          [m](const ScenarioConfig& c) { return fmt_double(watt_to_dbm(m(c))); }};
}

template <class Member>
Field integer(const char* sec, const char* key, Member m) {
  return {sec, key, [m](ScenarioConfig& c, std::string_view v) { m(c) = static_cast<int>(parse_int(v)); },
          [m](const ScenarioConfig& c) { return std::to_string(m(c)); }};
}

template <class Member>
Field boolean(const char* sec, const char* key, Member m) {
  return {sec, key, [m](ScenarioConfig& c, std::string_view v) { m(c) = parse_bool(v); },
          [m](const ScenarioConfig& c) { return std::string(m(c) ? "true" : "false"); }};
}

#define AOIGPR_M(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      integer("radio", "K", AOIGPR_M(K)),
      integer("radio", "N", AOIGPR_M(N)),
      real("radio", "W_hz", AOIGPR_M(W)),
      real("radio", "tau_ms", AOIGPR_M(tau), 1e3),
      dbm("radio", "p_dbm", AOIGPR_M(p)),
      integer("radio", "L", AOIGPR_M(L)),
      dbm("radio", "P_max_dbm", AOIGPR_M(P_max)),
      dbm("radio", "N0_dbm_per_hz", AOIGPR_M(N0)),

      real("traffic", "Z_bits", AOIGPR_M(Z)),
      real("traffic", "arrival_rate_bps", AOIGPR_M(arrival_rate)),
      real("traffic", "d_ms", AOIGPR_M(d), 1e3),
      boolean("traffic", "supersede", AOIGPR_M(traffic.supersede)),

      integer("learning", "M", AOIGPR_M(M)),
      real("learning", "alpha_c", AOIGPR_M(alpha_c)),
      real("learning", "alpha_i", AOIGPR_M(alpha_i)),
      integer("learning", "refit_period", AOIGPR_M(learning.refit_period)),
      integer("learning", "fit_min_samples", AOIGPR_M(learning.fit_min_samples)),
      integer("learning", "fit_restarts", AOIGPR_M(learning.fit_restarts)),
      integer("learning", "fit_max_evals", AOIGPR_M(learning.fit_max_evals)),
      integer("learning", "fit_window", AOIGPR_M(learning.fit_window)),
      real("learning", "nu", AOIGPR_M(learning.nu)),
      boolean("learning", "standard_scaling", AOIGPR_M(learning.standard_scaling)),
      real("learning", "h_init_ms", AOIGPR_M(learning.h_init_ms)),
      real("learning", "lambda_init", AOIGPR_M(learning.lambda_init)),
      real("learning", "jitter_rel", AOIGPR_M(learning.jitter_rel)),
      real("learning", "jitter_max_rel", AOIGPR_M(learning.jitter_max_rel)),
      integer("learning", "candidates", AOIGPR_M(learning.candidate_cap)),
      boolean("learning", "center_mean", AOIGPR_M(learning.center_mean)),
      real("learning", "aoi_scale_ms", AOIGPR_M(learning.aoi_scale_ms)),
      real("learning", "power_scale_w", AOIGPR_M(learning.power_scale_w)),

      real("channel", "ref_distance_m", AOIGPR_M(channel.ref_distance_m)),
      real("channel", "min_distance_m", AOIGPR_M(channel.min_distance_m)),
      real("channel", "los_ref_loss_db", AOIGPR_M(channel.los_ref_loss_db)),
      real("channel", "los_exponent", AOIGPR_M(channel.los_exponent)),
      real("channel", "wlos_corner_loss_db", AOIGPR_M(channel.wlos_corner_loss_db)),
      real("channel", "nlos_ref_loss_db", AOIGPR_M(channel.nlos_ref_loss_db)),
      real("channel", "nlos_exponent", AOIGPR_M(channel.nlos_exponent)),
      real("channel", "nlos_corner_loss_db", AOIGPR_M(channel.nlos_corner_loss_db)),
      real("channel", "los_shadowing_db", AOIGPR_M(channel.los_shadowing_db)),
      real("channel", "wlos_shadowing_db", AOIGPR_M(channel.wlos_shadowing_db)),
      real("channel", "nlos_shadowing_db", AOIGPR_M(channel.nlos_shadowing_db)),
      real("channel", "shadowing_ar", AOIGPR_M(channel.shadowing_ar)),
      Field{"channel", "fading",
            [](ScenarioConfig& c, std::string_view v) {
              if (v == "rayleigh") c.channel.fading = FadingModel::kRayleigh;
              else if (v == "off") c.channel.fading = FadingModel::kOff;
              else throw std::invalid_argument("expected rayleigh/off");
            },
            [](const ScenarioConfig& c) {
              return std::string(c.channel.fading == FadingModel::kRayleigh ? "rayleigh" : "off");
            }},
      real("channel", "fading_ar", AOIGPR_M(channel.fading_ar)),

      real("mobility", "area_m", AOIGPR_M(mobility.area_m)),
      real("mobility", "block_m", AOIGPR_M(mobility.block_m)),
      real("mobility", "speed_kmh", AOIGPR_M(mobility.speed_kmh)),
      real("mobility", "speed_jitter", AOIGPR_M(mobility.speed_jitter)),
      real("mobility", "p_straight", AOIGPR_M(mobility.p_straight)),
      real("mobility", "p_left", AOIGPR_M(mobility.p_left)),
      real("mobility", "p_right", AOIGPR_M(mobility.p_right)),
      real("mobility", "gap_mean_m", AOIGPR_M(mobility.gap_mean_m)),
      real("mobility", "gap_min_m", AOIGPR_M(mobility.gap_min_m)),
      real("mobility", "gap_max_m", AOIGPR_M(mobility.gap_max_m)),
      real("mobility", "gap_reversion_per_s", AOIGPR_M(mobility.gap_reversion_per_s)),
      real("mobility", "gap_noise_m_per_sqrt_s", AOIGPR_M(mobility.gap_noise_m_per_sqrt_s)),
      Field{"mobility", "boundary",
            [](ScenarioConfig& c, std::string_view v) {
              if (v == "wrap") c.mobility.boundary = Boundary::kWrap;
              else if (v == "reflect") c.mobility.boundary = Boundary::kReflect;
              else throw std::invalid_argument("expected wrap/reflect");
            },
            [](const ScenarioConfig& c) {
              return std::string(c.mobility.boundary == Boundary::kWrap ? "wrap" : "reflect");
            }},

      integer("run", "T", AOIGPR_M(T)),
      Field{"run", "seed", [](ScenarioConfig& c, std::string_view v) { c.seed = parse_u64(v); },
            [](const ScenarioConfig& c) { return std::to_string(c.seed); }},
      integer("run", "warmup", AOIGPR_M(warmup)),
  };
  return table;
}

#undef AOIGPR_M

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

void validate(const ScenarioConfig& c) {
  std::vector<std::string> bad;
  auto need = [&](bool ok, const char* msg) {
    if (!ok) bad.emplace_back(msg);
  };
  need(c.K >= 1, "K must be >= 1");
  need(c.N >= 1, "N must be >= 1");
  need(c.L >= 1, "L must be >= 1");
  need(c.T >= 0, "T must be >= 0");
  need(c.M >= 1, "M must be >= 1");
  need(c.tau > 0, "tau must be > 0");
  need(c.W > 0, "W must be > 0");
  need(c.Z > 0, "Z must be > 0");
  need(c.d > 0, "d must be > 0");
  need(c.p > 0, "p must be > 0");
  need(c.P_max > 0, "P_max must be > 0");
  need(c.N0 > 0, "N0 must be > 0");
  need(c.arrival_rate >= 0, "arrival_rate must be >= 0");
  need(c.alpha_c >= 0, "alpha_c must be >= 0");
  need(c.alpha_i >= 0, "alpha_i must be >= 0");

  const auto& l = c.learning;
  need(l.refit_period >= 1, "learning.refit_period must be >= 1");
  need(l.fit_min_samples >= 1, "learning.fit_min_samples must be >= 1");
  need(l.fit_restarts >= 1, "learning.fit_restarts must be >= 1");
  need(l.fit_max_evals >= 1, "learning.fit_max_evals must be >= 1");
  need(l.fit_window >= 0, "learning.fit_window must be >= 0");
  need(l.nu > 0, "learning.nu must be > 0");
  need(l.h_init_ms >= 0, "learning.h_init_ms must be >= 0");
  need(l.lambda_init > 0, "learning.lambda_init must be > 0");
  need(l.jitter_rel >= 0, "learning.jitter_rel must be >= 0");
  need(l.jitter_max_rel >= l.jitter_rel, "learning.jitter_max_rel must be >= jitter_rel");
  need(l.candidate_cap == 0 || l.candidate_cap >= 2, "learning.candidates must be 0 (exhaustive) or >= 2");
  need(l.aoi_scale_ms >= 0, "learning.aoi_scale_ms must be >= 0");
  need(l.power_scale_w >= 0, "learning.power_scale_w must be >= 0");

  const auto& ch = c.channel;
  need(ch.ref_distance_m > 0, "channel.ref_distance_m must be > 0");
  need(ch.min_distance_m > 0, "channel.min_distance_m must be > 0");
  need(ch.los_exponent > 0, "channel.los_exponent must be > 0");
  need(ch.nlos_exponent > 0, "channel.nlos_exponent must be > 0");
  need(ch.los_shadowing_db >= 0 && ch.wlos_shadowing_db >= 0 && ch.nlos_shadowing_db >= 0,
       "channel shadowing std must be >= 0");
  need(ch.shadowing_ar >= 0 && ch.shadowing_ar < 1, "channel.shadowing_ar must be in [0,1)");
  need(ch.fading_ar >= 0 && ch.fading_ar < 1, "channel.fading_ar must be in [0,1)");

  const auto& mo = c.mobility;
  need(mo.area_m > 0 && mo.block_m > 0, "mobility area and block must be > 0");
  if (mo.area_m > 0 && mo.block_m > 0) {
    double blocks = mo.area_m / mo.block_m;
    need(std::abs(blocks - std::round(blocks)) < 1e-9, "mobility.block_m must divide area_m");
  }
  need(mo.speed_kmh >= 0, "mobility.speed_kmh must be >= 0");
  need(mo.speed_jitter >= 0 && mo.speed_jitter < 1, "mobility.speed_jitter must be in [0,1)");
  need(mo.p_straight >= 0 && mo.p_left >= 0 && mo.p_right >= 0 &&
           std::abs(mo.p_straight + mo.p_left + mo.p_right - 1.0) < 1e-9,
       "mobility turn probabilities must be >= 0 and sum to 1");
  need(mo.gap_min_m > 0 && mo.gap_min_m <= mo.gap_mean_m && mo.gap_mean_m <= mo.gap_max_m,
       "mobility gaps must satisfy 0 < gap_min <= gap_mean <= gap_max");
  need(mo.gap_max_m < mo.block_m, "mobility.gap_max_m must be < block_m");
  need(mo.gap_reversion_per_s >= 0 && mo.gap_noise_m_per_sqrt_s >= 0,
       "mobility gap walk parameters must be >= 0");

  if (!bad.empty()) throw ValidationError(std::move(bad));
}

ScenarioConfig parse_config(std::string_view text) {
  ScenarioConfig cfg;
  std::string section;
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigParseError(lineno, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigParseError(lineno, "expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);

    const Field* match = nullptr;
    for (const auto& f : fields())
      if (section == f.section && key == f.key) match = &f;
    if (!match) throw ConfigParseError(lineno, "unknown field [" + section + "] " + std::string(key));
    try {
      match->set(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigParseError(lineno, "[" + section + "] " + std::string(key) + ": " + e.what());
    }
  }
  validate(cfg);
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError(0, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const ScenarioConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

}  // namespace aoigpr
