#include "aoigpr/allocator.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "aoigpr/errors.hpp"

namespace aoigpr {

int PowerAction::total_level() const { return std::accumulate(levels.begin(), levels.end(), 0); }

std::vector<double> PowerAction::powers(double p, int L) const {
  std::vector<double> out(levels.size());
  for (std::size_t n = 0; n < levels.size(); ++n) out[n] = levels[n] * p / L;
  return out;
}

namespace {

int level_budget_for(int N, int L, double p, double P_max) {
  const double raw = std::floor(P_max / (p / L) * (1.0 + 1e-9));
  return static_cast<int>(std::min<double>(raw, static_cast<double>(N) * L));
}

std::vector<std::vector<std::uint64_t>> completion_table(int N, int L, int budget) {
  std::vector<std::vector<std::uint64_t>> c(static_cast<std::size_t>(N + 1),
                                            std::vector<std::uint64_t>(static_cast<std::size_t>(budget + 1), 0));
  std::fill(c[static_cast<std::size_t>(N)].begin(), c[static_cast<std::size_t>(N)].end(), 1);
  for (int n = N - 1; n >= 0; --n)
    for (int b = 0; b <= budget; ++b) {
      std::uint64_t s = 0;
      for (int l = 0; l <= std::min(L, b); ++l) s += c[static_cast<std::size_t>(n + 1)][static_cast<std::size_t>(b - l)];
      c[static_cast<std::size_t>(n)][static_cast<std::size_t>(b)] = s;
    }
  return c;
}

void enumerate(int n, int left, PowerAction& cur, int L, std::vector<PowerAction>& out) {
  if (n == static_cast<int>(cur.levels.size())) {
    out.push_back(cur);
    return;
  }
  for (int l = 0; l <= std::min(L, left); ++l) {
    cur.levels[static_cast<std::size_t>(n)] = l;
    enumerate(n + 1, left - l, cur, L, out);
  }
  cur.levels[static_cast<std::size_t>(n)] = 0;
}

}  // namespace

std::uint64_t count_feasible_actions(int N, int L, double p, double P_max) {
  const int b = level_budget_for(N, L, p, P_max);
  return completion_table(N, L, b)[0][static_cast<std::size_t>(b)];
}

ActionSpace::ActionSpace(int N, double p, int L, double P_max, int cap)
    : N_(N), L_(L), p_(p), P_max_(P_max), cap_(cap) {
  if (N < 1 || L < 1 || p <= 0 || P_max < 0) throw std::invalid_argument("invalid action space parameters");
  if (cap != 0 && cap < 2) throw std::invalid_argument("candidate cap must be 0 or >= 2");
  budget_ = level_budget_for(N, L, p, P_max);
  completions_ = completion_table(N, L, budget_);
  count_ = completions_[0][static_cast<std::size_t>(budget_)];
  mode_ = (cap == 0 || count_ <= static_cast<std::uint64_t>(cap)) ? Mode::kExhaustive : Mode::kSampled;
  if (mode_ == Mode::kExhaustive) {
    PowerAction cur = zero();
    all_.reserve(count_);
    enumerate(0, budget_, cur, L, all_);
  }
}

ActionSpace ActionSpace::from(const ScenarioConfig& cfg) {
  return ActionSpace(cfg.N, cfg.p, cfg.L, cfg.P_max, cfg.learning.candidate_cap);
}

bool ActionSpace::feasible(const PowerAction& a) const {
  if (static_cast<int>(a.levels.size()) != N_) return false;
  for (int l : a.levels)
    if (l < 0 || l > L_) return false;
  return a.total_level() <= budget_;
}

const std::vector<PowerAction>& ActionSpace::all() const {
  if (mode_ != Mode::kExhaustive) throw std::logic_error("action space is sampled, not enumerated");
  return all_;
}

PowerAction ActionSpace::sample_uniform(Engine& rng) const {
  PowerAction a = zero();
  int b = budget_;
  for (int n = 0; n < N_; ++n) {
    const auto total = completions_[static_cast<std::size_t>(n)][static_cast<std::size_t>(b)];
    std::uint64_t u = std::uniform_int_distribution<std::uint64_t>(0, total - 1)(rng);
    int chosen = 0;
    for (int l = 0; l <= std::min(L_, b); ++l) {
      const auto w = completions_[static_cast<std::size_t>(n + 1)][static_cast<std::size_t>(b - l)];
      if (u < w) {
        chosen = l;
        break;
      }
      u -= w;
    }
    a.levels[static_cast<std::size_t>(n)] = chosen;
    b -= chosen;
  }
  return a;
}

std::vector<PowerAction> ActionSpace::candidates(const std::optional<PowerAction>& previous, Engine& rng) const {
  if (mode_ == Mode::kExhaustive) return all_;
  std::vector<PowerAction> out;
  std::set<PowerAction> seen;
  auto add = [&](PowerAction a) {
    if (seen.insert(a).second) out.push_back(std::move(a));
  };
  add(zero());
  if (previous) add(*previous);
  const auto want = static_cast<std::size_t>(cap_);
  while (out.size() < want) add(sample_uniform(rng));
  return out;
}

double violation_probability(double mu, double sigma2, double d) {
  if (!(sigma2 > 0.0)) {
    if (mu > d) return 1.0;
    if (mu < d) return 0.0;
    return 0.5;
  }
  return 0.5 * std::erfc((d - mu) / std::sqrt(2.0 * sigma2));
}

double acquisition(double mu, double sigma2, const Objective& obj) {
  return obj.alpha_c * violation_probability(mu, sigma2, obj.d_ms) - obj.alpha_i * sigma2;
}

InputScaling InputScaling::from(const ScenarioConfig& cfg) {
  return {cfg.aoi_scale(), cfg.power_scale(), cfg.p, cfg.L};
}

std::vector<double> InputScaling::input(double delta_ms, const PowerAction& a) const {
  std::vector<double> x(a.levels.size() + 1);
  x[0] = delta_ms / aoi_ms;
  for (std::size_t n = 0; n < a.levels.size(); ++n) x[n + 1] = a.levels[n] * p / L / power_w;
  return x;
}

Eigen::MatrixXd InputScaling::inputs(double delta_ms, std::span<const PowerAction> actions) const {
  const auto N = actions.empty() ? 0 : static_cast<Eigen::Index>(actions.front().levels.size());
  Eigen::MatrixXd X(N + 1, static_cast<Eigen::Index>(actions.size()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const auto& a = actions[static_cast<std::size_t>(j)];
    X(0, j) = delta_ms / aoi_ms;
    for (Eigen::Index n = 0; n < N; ++n) X(n + 1, j) = a.levels[static_cast<std::size_t>(n)] * p / L / power_w;
  }
  return X;
}

namespace {

// Standardized margin (mu - d) / sigma. The violation probability is monotone in it,
// so it still orders candidates once erfc has rounded to exactly 0 or 1.
double margin(double mu, double sigma2, double d) {
  if (sigma2 > 0.0) return (mu - d) / std::sqrt(sigma2);
  if (mu == d) return 0.0;
  return mu > d ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

Selection argmin(const Eigen::VectorXd& mu, const Eigen::VectorXd& s2, std::span<const PowerAction> candidates,
                 const Objective& obj) {
  Selection best;
  double best_margin = 0.0;
  bool have = false;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double score = acquisition(mu(jj), s2(jj), obj);
    const double m = obj.alpha_c > 0.0 ? margin(mu(jj), s2(jj), obj.d_ms) : 0.0;
    bool better = !have || score < best.score;
    if (have && score == best.score) {
      if (m != best_margin) {
        better = m < best_margin;
      } else {
        const auto& a = candidates[j];
        const auto& b = candidates[best.index];
        const int pa = a.total_level(), pb = b.total_level();
        better = pa < pb || (pa == pb && a.levels < b.levels);
      }
    }
    if (better) {
      best = {j, {mu(jj), s2(jj)}, score};
      best_margin = m;
      have = true;
    }
  }
  return best;
}

}  // namespace

Selection select_action(const OnlineGpr& gp, double delta_ms, std::span<const PowerAction> candidates,
                        const Objective& obj, const InputScaling& scaling) {
  if (candidates.empty()) throw std::invalid_argument("no candidate actions");
  Eigen::VectorXd mu, s2;
  gp.predict_batch(scaling.inputs(delta_ms, candidates), mu, s2);
  return argmin(mu, s2, candidates, obj);
}

PowerAction random_policy(const ActionSpace& space, Engine& rng) {
  if (space.mode() == ActionSpace::Mode::kExhaustive) {
    const auto& all = space.all();
    return all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
  }
  return space.sample_uniform(rng);
}

GprOptions gpr_options(const ScenarioConfig& cfg) {
  GprOptions o;
  o.scaling = cfg.learning.standard_scaling ? KernelScaling::kStandard : KernelScaling::kPaper;
  o.jitter.escalate = true;
  o.jitter.base_rel = cfg.learning.jitter_rel;
  o.jitter.max_rel = cfg.learning.jitter_max_rel;
  o.center_mean = cfg.learning.center_mean;
  return o;
}

KernelHyperparams initial_hyperparams(const ScenarioConfig& cfg) {
  const double h = cfg.h_init();
  return {h, cfg.learning.lambda_init, cfg.learning.nu, std::sqrt(cfg.learning.jitter_rel) * h};
}

GprAgent::GprAgent(const ScenarioConfig& cfg, const ActionSpace& space, const RngStreams& streams, int index,
                   double alpha_i)
    : space_(space),
      obj_{cfg.alpha_c, alpha_i, cfg.d_ms()},
      scaling_(InputScaling::from(cfg)),
      learning_(cfg.learning),
      theta0_(initial_hyperparams(cfg)),
      gp_(static_cast<std::size_t>(cfg.M), theta0_, gpr_options(cfg)),
      init_rng_(streams.stream("agent-init", {static_cast<std::uint64_t>(index)})),
      candidate_rng_(streams.stream("candidates", {static_cast<std::uint64_t>(index)})),
      fit_rng_(streams.stream("fit", {static_cast<std::uint64_t>(index)})),
      last_action_(space.zero()) {
  if (space_.mode() == ActionSpace::Mode::kExhaustive) exhaustive_inputs_ = scaling_.inputs(0.0, space_.all());
}

const PowerAction& GprAgent::initialize() {
  last_action_ = random_policy(space_, init_rng_);
  last_delta_ms_ = 0.0;
  slots_since_refit_ = 0;
  return last_action_;
}

StepResult GprAgent::step(double observed_delta_ms, std::int64_t /*t*/) {
  StepResult res;
  try {
    gp_.push({scaling_.input(last_delta_ms_, last_action_), observed_delta_ms});

    ++slots_since_refit_;
    const auto& data = gp_.dataset();
    if (slots_since_refit_ >= learning_.refit_period &&
        data.size() >= static_cast<std::size_t>(learning_.fit_min_samples)) {
      FitOptions fo;
      fo.restarts = learning_.fit_restarts;
      fo.max_evals = learning_.fit_max_evals;
      fo.min_samples = static_cast<std::size_t>(learning_.fit_min_samples);
      auto fitted = fit_hyperparams(data.tail(static_cast<std::size_t>(learning_.fit_window)), gp_.theta(),
                                    FitBounds::around(theta0_), fo, gp_.options(), fit_rng_);
      res.fit_warning = fitted.warning;
      res.refit = true;
      slots_since_refit_ = 0;
      if (!(fitted.theta == gp_.theta())) gp_.set_theta(fitted.theta);
    }
    if (!gp_.factorized()) gp_.refactor();

    Selection sel;
    if (space_.mode() == ActionSpace::Mode::kExhaustive) {
      exhaustive_inputs_.row(0).setConstant(observed_delta_ms / scaling_.aoi_ms);
      Eigen::VectorXd mu, s2;
      gp_.predict_batch(exhaustive_inputs_, mu, s2);
      sel = argmin(mu, s2, space_.all(), obj_);
      res.action = space_.all()[sel.index];
    } else {
      auto cands = space_.candidates(last_action_, candidate_rng_);
      sel = select_action(gp_, observed_delta_ms, cands, obj_, scaling_);
      res.action = std::move(cands[sel.index]);
    }
    res.posterior = sel.posterior;
  } catch (const SingularKernelError&) {
    res.fallback = true;
    res.action = last_action_;
    res.posterior.reset();
  }
  last_delta_ms_ = observed_delta_ms;
  last_action_ = res.action;
  return res;
}

}  // namespace aoigpr
