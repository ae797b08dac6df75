#include "aoigpr/engine.hpp"

#include <atomic>
#include <charconv>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "aoigpr/allocator.hpp"
#include "aoigpr/link.hpp"

namespace aoigpr {

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::kProposed: return "proposed";
    case Policy::kBaseline2: return "baseline2";
    case Policy::kBaseline1: return "baseline1";
  }
  return "?";
}

Policy parse_policy(std::string_view s) {
  if (s == "proposed") return Policy::kProposed;
  if (s == "baseline2") return Policy::kBaseline2;
  if (s == "baseline1") return Policy::kBaseline1;
  throw std::invalid_argument("unknown policy '" + std::string(s) + "' (expected proposed, baseline2 or baseline1)");
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

// Runs fn(0..count-1) across a fixed set of threads; the caller takes part as worker 0.
class WorkerPool {
 public:
  explicit WorkerPool(int threads) : threads_(std::max(1, threads)) {
    for (int w = 1; w < threads_; ++w) workers_.emplace_back([this, w] { loop(w); });
  }
  ~WorkerPool() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
      ++generation_;
    }
    start_.notify_all();
    for (auto& t : workers_) t.join();
  }

  void run(int count, const std::function<void(int)>& fn) {
    if (threads_ == 1) {
      for (int i = 0; i < count; ++i) fn(i);
      return;
    }
    {
      std::lock_guard lock(mu_);
      fn_ = &fn;
      count_ = count;
      pending_ = threads_ - 1;
      error_ = nullptr;
      ++generation_;
    }
    start_.notify_all();
    std::exception_ptr mine;
    try {
      work(0);
    } catch (...) {
      mine = std::current_exception();
    }
    std::unique_lock lock(mu_);
    done_.wait(lock, [this] { return pending_ == 0; });
    if (mine) std::rethrow_exception(mine);
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void work(int w) {
    for (int i = w; i < count_; i += threads_) (*fn_)(i);
  }

  void loop(int w) {
    std::uint64_t seen = 0;
    while (true) {
      {
        std::unique_lock lock(mu_);
        start_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
      }
      std::exception_ptr err;
      try {
        work(w);
      } catch (...) {
        err = std::current_exception();
      }
      std::lock_guard lock(mu_);
      if (err && !error_) error_ = err;
      if (--pending_ == 0) done_.notify_one();
    }
  }

  int threads_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable start_, done_;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  const std::function<void(int)>* fn_ = nullptr;
  int count_ = 0;
  int pending_ = 0;
  std::exception_ptr error_;
};

struct Decision {
  PowerAction action;
  std::optional<Posterior> posterior;
  unsigned flags = 0;
};

}  // namespace

ScenarioConfig policy_config(const ScenarioConfig& cfg, Policy policy) {
  ScenarioConfig c = cfg;
  if (policy == Policy::kBaseline2) c.alpha_i = 0.0;
  return c;
}

SimulationResult run_simulation(const ScenarioConfig& in, Policy policy, const SimOptions& opts) {
  const ScenarioConfig cfg = policy_config(in, policy);
  validate(cfg);

  SimulationResult result;
  result.policy = policy;
  result.seed = cfg.seed;
  result.config = cfg;

  const int K = cfg.K;
  const RngStreams streams(cfg.seed);
  VehicularEnv env(cfg, streams);
  const ActionSpace space = ActionSpace::from(cfg);
  const double A = derive_arrival(cfg.arrival_rate, cfg.tau, cfg.Z);

  std::vector<std::unique_ptr<GprAgent>> agents;
  std::vector<Engine> random_rngs;
  for (int k = 0; k < K; ++k) {
    if (policy == Policy::kBaseline1)
      random_rngs.push_back(streams.stream("baseline-policy", {static_cast<std::uint64_t>(k)}));
    else
      agents.push_back(std::make_unique<GprAgent>(cfg, space, streams, k, cfg.alpha_i));
  }

  std::vector<PacketQueue> queues(static_cast<std::size_t>(K));
  std::vector<AoiState> aoi(static_cast<std::size_t>(K));
  std::vector<Decision> decisions(static_cast<std::size_t>(K));
  std::vector<std::vector<double>> powers(static_cast<std::size_t>(K));
  std::vector<std::span<const double>> power_views(static_cast<std::size_t>(K));
  std::vector<double> own(static_cast<std::size_t>(cfg.N)), interference(static_cast<std::size_t>(cfg.N));

  WorkerPool pool(opts.threads);
  result.trace.reserve(static_cast<std::size_t>(cfg.T) * static_cast<std::size_t>(K));
  if (opts.mobility_trace) VehicularEnv::write_trace_header(*opts.mobility_trace);

  for (std::int64_t t = 0; t < cfg.T; ++t) {
    // Phase 1: decisions from what each agent knows at the start of slot t.
    pool.run(K, [&](int k) {
      auto& dec = decisions[static_cast<std::size_t>(k)];
      dec.posterior.reset();
      dec.flags = 0;
      if (policy == Policy::kBaseline1) {
        dec.action = random_policy(space, random_rngs[static_cast<std::size_t>(k)]);
      } else if (t == 0) {
        dec.action = agents[static_cast<std::size_t>(k)]->initialize();
      } else {
        auto step = agents[static_cast<std::size_t>(k)]->step(aoi[static_cast<std::size_t>(k)].delta * 1e3, t);
        dec.action = std::move(step.action);
        dec.posterior = step.posterior;
        dec.flags = (step.fallback ? kFlagFallback : 0u) | (step.refit ? kFlagRefit : 0u) |
                    (step.fit_warning ? kFlagFitWarning : 0u);
      }
      if (opts.observer) opts.observer({SimEvent::kDecide, t, k});
    });

    // Phase 2: the environment resolves the joint action profile.
    if (t > 0) env.step_mobility();
    GainTensor gains = env.draw_gains();
    if (opts.gain_hook) opts.gain_hook(gains, t);
    for (int k = 0; k < K; ++k) {
      powers[static_cast<std::size_t>(k)] = decisions[static_cast<std::size_t>(k)].action.powers(cfg.p, cfg.L);
      power_views[static_cast<std::size_t>(k)] = powers[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < K; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      SlotRecord rec;
      rec.slot = t;
      rec.pair = k;
      for (int n = 0; n < cfg.N; ++n) {
        own[static_cast<std::size_t>(n)] = gains.at(k, k, n);
        interference[static_cast<std::size_t>(n)] = interference_at(k, n, power_views, gains);
        if (opts.record_interference && powers[ks][static_cast<std::size_t>(n)] > 0.0)
          rec.interference_w.push_back(interference[static_cast<std::size_t>(n)]);
      }
      rec.rate_pkts = transmission_rate(powers[ks], own, interference, cfg);
      const auto served = serve_queue(queues[ks], rec.rate_pkts, A, t, cfg.Z, cfg.traffic.supersede);
      aoi[ks] = update_aoi(aoi[ks], served.newest_delivered, t, cfg.tau);

      const auto& dec = decisions[ks];
      rec.delta_ms = aoi[ks].delta * 1e3;
      if (dec.posterior) {
        rec.mu_ms = dec.posterior->mu;
        rec.sigma2_ms2 = dec.posterior->sigma2;
      }
      rec.total_power_w = dec.action.total_power(cfg.p, cfg.L);
      rec.delivered = served.newest_delivered.has_value();
      rec.flags = dec.flags;
      result.trace.push_back(std::move(rec));
    }
    if (opts.observer) opts.observer({SimEvent::kResolve, t, -1});
    if (opts.mobility_trace) env.write_trace_rows(*opts.mobility_trace, static_cast<long>(t));
  }

  result.report = compute_metrics(result.trace, K, cfg.d_ms(), cfg.effective_warmup());
  return result;
}

MetricsReport compute_metrics(const std::vector<const std::vector<SlotRecord>*>& traces, int pairs, double d_ms,
                              int warmup) {
  MetricsReport rep;
  std::vector<double> samples;
  std::vector<std::vector<double>> mu(static_cast<std::size_t>(pairs)), actual(static_cast<std::size_t>(pairs));
  std::vector<double> s2_sum(static_cast<std::size_t>(pairs), 0.0);
  for (const auto* trace : traces) {
    for (const auto& r : *trace) {
      if (r.flags & kFlagFallback) ++rep.fallback_slots;
      if (r.flags & kFlagRefit) ++rep.refits;
      if (r.slot < warmup) continue;
      samples.push_back(r.delta_ms);
      if (r.mu_ms && r.pair >= 0 && r.pair < pairs) {
        const auto p = static_cast<std::size_t>(r.pair);
        mu[p].push_back(*r.mu_ms);
        actual[p].push_back(r.delta_ms);
        s2_sum[p] += *r.sigma2_ms2;
      }
    }
  }
  rep.samples = samples.size();
  rep.rmse_ms.resize(static_cast<std::size_t>(pairs));
  rep.mean_sigma2_ms2.resize(static_cast<std::size_t>(pairs));
  if (samples.empty()) return rep;

  rep.violation_prob = violation_rate(samples, d_ms);
  double sum = 0.0;
  for (double v : samples) sum += v;
  rep.avg_aoi_ms = sum / static_cast<double>(samples.size());
  rep.ccdf = ccdf(samples, default_ccdf_grid(samples, d_ms));

  double rmse_sum = 0.0;
  int with = 0;
  for (std::size_t p = 0; p < mu.size(); ++p) {
    if (mu[p].empty()) continue;
    rep.rmse_ms[p] = rmse(mu[p], actual[p]);
    rep.mean_sigma2_ms2[p] = s2_sum[p] / static_cast<double>(mu[p].size());
    rmse_sum += *rep.rmse_ms[p];
    ++with;
  }
  if (with > 0) rep.mean_rmse_ms = rmse_sum / with;
  return rep;
}

MetricsReport compute_metrics(const std::vector<SlotRecord>& trace, int pairs, double d_ms, int warmup) {
  return compute_metrics(std::vector<const std::vector<SlotRecord>*>{&trace}, pairs, d_ms, warmup);
}

void write_trace_csv(std::ostream& os, const std::vector<SlotRecord>& trace) {
  os << "slot,pair,delta_ms,mu_ms,sigma2_ms2,rate_pkts,total_power_w,delivered,flags\n";
  for (const auto& r : trace) {
    os << r.slot << ',' << r.pair << ',' << format_double(r.delta_ms) << ','
       << (r.mu_ms ? format_double(*r.mu_ms) : "") << ',' << (r.sigma2_ms2 ? format_double(*r.sigma2_ms2) : "")
       << ',' << format_double(r.rate_pkts) << ',' << format_double(r.total_power_w) << ',' << (r.delivered ? 1 : 0)
       << ',' << r.flags << '\n';
  }
}

void write_ccdf_csv(std::ostream& os, const std::vector<CcdfPoint>& curve) {
  os << "threshold_ms,ccdf\n";
  for (const auto& p : curve) os << format_double(p.threshold_ms) << ',' << format_double(p.ccdf) << '\n';
}

}  // namespace aoigpr
