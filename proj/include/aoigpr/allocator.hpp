#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aoigpr/config.hpp"
#include "aoigpr/gpr.hpp"
#include "aoigpr/rng.hpp"

namespace aoigpr {

/// Per-RB power levels; RB n transmits levels[n] * p / L watts.
struct PowerAction {
  std::vector<int> levels;

  int total_level() const;
  double total_power(double p, int L) const { return total_level() * p / L; }
  std::vector<double> powers(double p, int L) const;
  bool operator==(const PowerAction&) const = default;
  auto operator<=>(const PowerAction&) const = default;
};

/// The feasible set: levels in {0..L} per RB with total power within P_max.
/// Small sets are enumerated once; larger ones are sampled per decision.
class ActionSpace {
 public:
  enum class Mode { kExhaustive, kSampled };

  /// cap == 0 forces exhaustive enumeration regardless of size.
  ActionSpace(int N, double p, int L, double P_max, int cap);
  static ActionSpace from(const ScenarioConfig& cfg);

  int rbs() const noexcept { return N_; }
  int levels() const noexcept { return L_; }
  double p() const noexcept { return p_; }
  /// Largest admissible sum of levels.
  int level_budget() const noexcept { return budget_; }
  std::uint64_t feasible_count() const noexcept { return count_; }
  Mode mode() const noexcept { return mode_; }
  int cap() const noexcept { return cap_; }

  bool feasible(const PowerAction& a) const;
  PowerAction zero() const { return PowerAction{std::vector<int>(static_cast<std::size_t>(N_), 0)}; }

  /// Every feasible action, lexicographic order. Only for exhaustive mode.
  const std::vector<PowerAction>& all() const;

  /// Uniform draw over the whole feasible set.
  PowerAction sample_uniform(Engine& rng) const;

  /// Candidates for one decision. Exhaustive mode returns everything;
  /// sampled mode returns the zero action, `previous` and fresh distinct
  /// uniform draws up to the cap.
  std::vector<PowerAction> candidates(const std::optional<PowerAction>& previous, Engine& rng) const;

 private:
  int N_, L_;
  double p_, P_max_;
  int cap_;
  int budget_;
  std::uint64_t count_;
  Mode mode_;
  // completions_[n][b]: ways to fill RBs n..N-1 using at most b levels
  std::vector<std::vector<std::uint64_t>> completions_;
  std::vector<PowerAction> all_;
};

/// Feasible-set size by dynamic programming over RBs.
std::uint64_t count_feasible_actions(int N, int L, double p, double P_max);

/// P{X > d} for X ~ N(mu, sigma2): 0.5*erfc((d-mu)/sqrt(2 sigma2)); a
/// point mass when sigma2 == 0.
double violation_probability(double mu, double sigma2, double d);

struct Objective {
  double alpha_c = 1.0;
  double alpha_i = 100.0;
  double d_ms = 10.0;
};

/// Score to minimize: alpha_c * P{next AoI > d} - alpha_i * sigma2.
double acquisition(double mu, double sigma2, const Objective& obj);

/// Maps (AoI, action) to the GPR input space.
struct InputScaling {
  double aoi_ms = 10.0;
  double power_w = 0.01;
  double p = 0.01;
  int L = 1;

  static InputScaling from(const ScenarioConfig& cfg);
  std::vector<double> input(double delta_ms, const PowerAction& a) const;
  Eigen::MatrixXd inputs(double delta_ms, std::span<const PowerAction> actions) const;
};

struct Selection {
  std::size_t index = 0;
  Posterior posterior;
  double score = 0.0;
};

/// Acquisition argmin over the candidates. Scores that tie after rounding are
/// ordered by the standardized margin (mu - d) / sigma, which keeps the
/// violation ordering when erfc saturates; remaining ties go to the lower
/// total power, then to the lexicographically smaller action.
Selection select_action(const OnlineGpr& gp, double delta_ms, std::span<const PowerAction> candidates,
                        const Objective& obj, const InputScaling& scaling);

/// Uniform random allocation, independent every slot.
PowerAction random_policy(const ActionSpace& space, Engine& rng);

struct StepResult {
  PowerAction action;
  std::optional<Posterior> posterior;
  bool refit = false;
  bool fallback = false;  // singular kernel: previous action repeated
  bool fit_warning = false;
};

/// One transmitter-receiver pair's online learner and decision maker.
class GprAgent {
 public:
  GprAgent(const ScenarioConfig& cfg, const ActionSpace& space, const RngStreams& streams, int index,
           double alpha_i);

  /// Random first action; the age starts at 0.
  const PowerAction& initialize();

  /// Observe the age reached by the last action, learn from it, pick the next action.
  StepResult step(double observed_delta_ms, std::int64_t t);

  const OnlineGpr& model() const noexcept { return gp_; }
  const PowerAction& last_action() const noexcept { return last_action_; }
  double last_delta_ms() const noexcept { return last_delta_ms_; }
  int slots_since_refit() const noexcept { return slots_since_refit_; }
  const Objective& objective() const noexcept { return obj_; }

 private:
  const ActionSpace& space_;
  Objective obj_;
  InputScaling scaling_;
  LearningParams learning_;
  KernelHyperparams theta0_;
  OnlineGpr gp_;
  Engine init_rng_, candidate_rng_, fit_rng_;
  PowerAction last_action_;
  double last_delta_ms_ = 0.0;
  int slots_since_refit_ = 0;
  // In exhaustive mode the power rows of the input matrix never change.
  Eigen::MatrixXd exhaustive_inputs_;
};

GprOptions gpr_options(const ScenarioConfig& cfg);
KernelHyperparams initial_hyperparams(const ScenarioConfig& cfg);

}  // namespace aoigpr
