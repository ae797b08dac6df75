// aoigpr command-line front end: run, compare, sweep-m, sweep-alpha.
#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "aoigpr/config.hpp"
#include "aoigpr/engine.hpp"
#include "aoigpr/errors.hpp"

#ifndef AOIGPR_VERSION
#define AOIGPR_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace aoigpr;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string seeds = "1";
  std::string out;
  int warmup = -1;
  std::string candidates;
  int slots = -1;
  int threads = 1;
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

template <class T>
T parse_number(const std::string& s, const char* what) {
  std::size_t used = 0;
  T v{};
  try {
    if constexpr (std::is_floating_point_v<T>) v = static_cast<T>(std::stod(s, &used));
    else v = static_cast<T>(std::stoll(s, &used));
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw UsageError(std::string("bad ") + what + " '" + s + "'");
  return v;
}

// "1,2,5" or ranges such as "1-5"
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split(s)) {
    const auto dash = part.find('-', 1);
    if (dash == std::string::npos) {
      seeds.push_back(parse_number<std::uint64_t>(part, "seed"));
      continue;
    }
    const auto lo = parse_number<std::uint64_t>(part.substr(0, dash), "seed");
    const auto hi = parse_number<std::uint64_t>(part.substr(dash + 1), "seed");
    if (hi < lo) throw UsageError("bad seed range '" + part + "'");
    for (auto v = lo; v <= hi; ++v) seeds.push_back(v);
  }
  if (seeds.empty()) throw UsageError("no seeds given");
  return seeds;
}

ScenarioConfig base_config(const Common& c) {
  ScenarioConfig cfg = c.config_path.empty() ? ScenarioConfig{} : load_config(c.config_path);
  if (c.warmup >= 0) cfg.warmup = c.warmup;
  if (c.slots >= 0) cfg.T = c.slots;
  if (c.candidates == "exhaustive") cfg.learning.candidate_cap = 0;
  else if (!c.candidates.empty()) cfg.learning.candidate_cap = parse_number<int>(c.candidates, "candidate count");
  validate(cfg);
  return cfg;
}

std::string sha256(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

struct Cell {
  ScenarioConfig cfg;
  Policy policy;
  SimulationResult result;
  double seconds = 0.0;
};

// Runs every cell; results land in their own slot so the merge order is fixed.
void run_cells(std::vector<Cell>& cells, int threads) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < cells.size();) {
      try {
        const auto start = std::chrono::steady_clock::now();
        cells[i].result = run_simulation(cells[i].cfg, cells[i].policy);
        cells[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json report_json(const MetricsReport& r) {
  json j;
  j["samples"] = r.samples;
  j["violation_prob"] = r.violation_prob;
  j["avg_aoi_ms"] = r.avg_aoi_ms;
  j["mean_rmse_ms"] = optional_json(r.mean_rmse_ms);
  j["rmse_ms"] = json::array();
  for (const auto& v : r.rmse_ms) j["rmse_ms"].push_back(optional_json(v));
  j["mean_sigma2_ms2"] = json::array();
  for (const auto& v : r.mean_sigma2_ms2) j["mean_sigma2_ms2"].push_back(optional_json(v));
  j["fallback_slots"] = r.fallback_slots;
  j["refits"] = r.refits;
  return j;
}

MetricsReport pooled(const std::vector<const Cell*>& cells) {
  std::vector<const std::vector<SlotRecord>*> traces;
  for (const auto* c : cells) traces.push_back(&c->result.trace);
  const auto& cfg = cells.front()->result.config;
  return compute_metrics(traces, cfg.K, cfg.d_ms(), cfg.effective_warmup());
}

// Collects output files in memory; nothing touches the disk until every run succeeded.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  void commit(const json& manifest_base) {
    fs::create_directories(dir_);
    json manifest = manifest_base;
    manifest["output_dir"] = fs::absolute(dir_).string();
    manifest["files"] = json::array();
    for (const auto& [name, content] : files_) {
      write(name, content);
      manifest["files"].push_back({{"name", name}, {"bytes", content.size()}, {"sha256", sha256(content)}});
    }
    write("manifest.json", manifest.dump(2) + "\n");
  }

 private:
  void write(const std::string& name, const std::string& content) {
    std::ofstream os(dir_ / name, std::ios::binary);
    os << content;
    if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
  }

  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

json manifest_for(const std::string& command, const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds,
                  const std::vector<Policy>& policies, const std::vector<Cell>& cells) {
  json m;
  m["command"] = command;
  m["version"] = AOIGPR_VERSION;
  m["config"] = to_text(cfg);
  m["seeds"] = seeds;
  m["policies"] = json::array();
  for (auto p : policies) m["policies"].push_back(std::string(to_string(p)));
  double total = 0.0;
  m["timings"] = json::array();
  for (const auto& c : cells) {
    total += c.seconds;
    m["timings"].push_back({{"policy", std::string(to_string(c.policy))},
                            {"seed", c.cfg.seed},
                            {"M", c.cfg.M},
                            {"alpha_i", c.result.config.alpha_i},
                            {"seconds", c.seconds}});
  }
  m["total_run_seconds"] = total;
  return m;
}

std::string trace_text(const std::vector<SlotRecord>& trace) {
  std::ostringstream os;
  write_trace_csv(os, trace);
  return os.str();
}

std::string ccdf_text(const MetricsReport& r) {
  std::ostringstream os;
  write_ccdf_csv(os, r.ccdf);
  return os.str();
}

struct MeanSe {
  double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return r;
}

std::string csv_optional(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

int cmd_run(const Common& c, const std::string& policy_name, bool with_trace) {
  const auto policy = parse_policy(policy_name);
  const auto cfg = base_config(c);
  const auto seeds = parse_seeds(c.seeds);
  std::vector<Cell> cells;
  for (auto s : seeds) {
    auto cc = cfg;
    cc.seed = s;
    cells.push_back({cc, policy, {}, 0.0});
  }
  run_cells(cells, c.threads);

  std::vector<const Cell*> all;
  for (const auto& cell : cells) all.push_back(&cell);
  const auto report = pooled(all);
  json metrics;
  metrics["policy"] = std::string(to_string(policy));
  metrics["d_ms"] = cfg.d_ms();
  metrics["warmup"] = cfg.effective_warmup();
  metrics["pooled"] = report_json(report);
  metrics["per_seed"] = json::array();
  for (const auto& cell : cells) {
    auto j = report_json(cell.result.report);
    j["seed"] = cell.cfg.seed;
    metrics["per_seed"].push_back(j);
  }

  Outputs out(c.out);
  out.add("metrics.json", metrics.dump(2) + "\n");
  out.add("ccdf.csv", ccdf_text(report));
  if (with_trace) {
    if (cells.size() == 1) out.add("trace.csv", trace_text(cells[0].result.trace));
    else
      for (const auto& cell : cells)
        out.add("trace_" + std::to_string(cell.cfg.seed) + ".csv", trace_text(cell.result.trace));
  }
  out.commit(manifest_for("run", cfg, seeds, {policy}, cells));
  std::cout << to_string(policy) << ": violation_prob " << report.violation_prob << ", avg_aoi_ms "
            << report.avg_aoi_ms << "\n";
  return 0;
}

int cmd_compare(const Common& c) {
  const auto cfg = base_config(c);
  const auto seeds = parse_seeds(c.seeds);
  const std::vector<Policy> policies{Policy::kProposed, Policy::kBaseline2, Policy::kBaseline1};
  std::vector<Cell> cells;
  for (auto p : policies)
    for (auto s : seeds) {
      auto cc = cfg;
      cc.seed = s;
      cells.push_back({cc, p, {}, 0.0});
    }
  run_cells(cells, c.threads);

  std::ostringstream table;
  table << "policy,seed,violation_prob,avg_aoi_ms\n";
  json metrics;
  metrics["d_ms"] = cfg.d_ms();
  metrics["warmup"] = cfg.effective_warmup();
  metrics["policies"] = json::object();
  std::map<Policy, double> viol;
  for (auto p : policies) {
    std::vector<const Cell*> mine;
    for (const auto& cell : cells)
      if (cell.policy == p) {
        mine.push_back(&cell);
        table << to_string(p) << ',' << cell.cfg.seed << ',' << format_double(cell.result.report.violation_prob)
              << ',' << format_double(cell.result.report.avg_aoi_ms) << '\n';
      }
    const auto rep = pooled(mine);
    viol[p] = rep.violation_prob;
    metrics["policies"][std::string(to_string(p))] = report_json(rep);
  }
  const bool ordered = viol[Policy::kProposed] <= viol[Policy::kBaseline1];
  metrics["summary"] = {{"proposed_le_baseline1", ordered},
                        {"proposed_le_baseline2", viol[Policy::kProposed] <= viol[Policy::kBaseline2]},
                        {"baseline2_le_baseline1", viol[Policy::kBaseline2] <= viol[Policy::kBaseline1]}};

  Outputs out(c.out);
  out.add("comparison.csv", table.str());
  out.add("metrics.json", metrics.dump(2) + "\n");
  out.commit(manifest_for("compare", cfg, seeds, policies, cells));
  for (auto p : policies) std::cout << to_string(p) << ": violation_prob " << viol[p] << "\n";
  if (!ordered) std::cout << "note: proposed did not beat baseline1 on this scenario\n";
  return 0;
}

// Shared by both sweeps: one cell per (value, seed), per-cell rows plus a mean/SE summary.
template <class Apply>
int sweep(const Common& c, const std::string& command, const std::string& column, const std::vector<double>& values,
          Policy policy, Apply apply) {
  const auto cfg = base_config(c);
  const auto seeds = parse_seeds(c.seeds);
  std::vector<Cell> cells;
  for (double v : values)
    for (auto s : seeds) {
      auto cc = cfg;
      cc.seed = s;
      apply(cc, v);
      validate(cc);
      cells.push_back({cc, policy, {}, 0.0});
    }
  run_cells(cells, c.threads);

  std::ostringstream rows, summary;
  rows << column << ",seed,rmse_ms,violation_prob,avg_aoi_ms\n";
  summary << column << ",seeds,mean_rmse_ms,se_rmse_ms,mean_violation_prob,se_violation_prob,mean_avg_aoi_ms,"
          << "se_avg_aoi_ms\n";
  json metrics;
  metrics["policy"] = std::string(to_string(policy));
  metrics["sweep"] = column;
  metrics["cells"] = json::array();
  std::size_t i = 0;
  for (double v : values) {
    std::vector<double> r, vp, avg;
    for (std::size_t s = 0; s < seeds.size(); ++s, ++i) {
      const auto& rep = cells[i].result.report;
      rows << format_double(v) << ',' << cells[i].cfg.seed << ',' << csv_optional(rep.mean_rmse_ms) << ','
           << format_double(rep.violation_prob) << ',' << format_double(rep.avg_aoi_ms) << '\n';
      if (rep.mean_rmse_ms) r.push_back(*rep.mean_rmse_ms);
      vp.push_back(rep.violation_prob);
      avg.push_back(rep.avg_aoi_ms);
      auto j = report_json(rep);
      j[column] = v;
      j["seed"] = cells[i].cfg.seed;
      j["warmup"] = cells[i].result.config.effective_warmup();
      metrics["cells"].push_back(j);
    }
    const auto mr = mean_se(r), mv = mean_se(vp), ma = mean_se(avg);
    summary << format_double(v) << ',' << seeds.size() << ',' << (r.empty() ? "" : format_double(mr.mean)) << ','
            << (r.empty() ? "" : format_double(mr.se)) << ',' << format_double(mv.mean) << ','
            << format_double(mv.se) << ',' << format_double(ma.mean) << ',' << format_double(ma.se) << '\n';
    std::cout << column << ' ' << v << ": violation_prob " << mv.mean << " rmse_ms "
              << (r.empty() ? std::string("-") : format_double(mr.mean)) << "\n";
  }

  Outputs out(c.out);
  out.add(command + ".csv", rows.str());
  out.add(command + "_summary.csv", summary.str());
  out.add("metrics.json", metrics.dump(2) + "\n");
  out.commit(manifest_for(command, cfg, seeds, {policy}, cells));
  return 0;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> v;
  for (const auto& part : split(s)) v.push_back(parse_number<double>(part, what));
  if (v.empty()) throw UsageError(std::string("empty ") + what + " list");
  return v;
}

int cmd_sweep_m(const Common& c, const std::string& list, const std::string& policy_name) {
  const auto values = parse_list(list, "M");
  int largest = 0;
  for (double m : values) {
    if (m < 1 || m != std::floor(m)) throw UsageError("M values must be positive integers");
    largest = std::max(largest, static_cast<int>(m));
  }
  // every M is scored over the same slots unless --warmup says otherwise
  Common fixed = c;
  if (fixed.warmup < 0) fixed.warmup = std::max(largest, 100);
  return sweep(fixed, "sweep_m", "M", values, parse_policy(policy_name),
               [](ScenarioConfig& cfg, double m) { cfg.M = static_cast<int>(m); });
}

int cmd_sweep_alpha(const Common& c, const std::string& list) {
  const auto values = parse_list(list, "alpha_i");
  for (double a : values)
    if (!(a >= 0.0) || !std::isfinite(a)) throw UsageError("alpha_i values must be finite and >= 0");
  return sweep(c, "sweep_alpha", "alpha_i", values, Policy::kProposed,
               [](ScenarioConfig& cfg, double a) { cfg.alpha_i = a; });
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "Scenario file (defaults to the built-in scenario)")
      ->envname("AOIGPR_CONFIG");
  app->add_option("--seeds", c.seeds, "Seeds, e.g. 1,2,3 or 1-5")->envname("AOIGPR_SEEDS");
  app->add_option("--out", c.out, "Output directory")->required()->envname("AOIGPR_OUT");
  app->add_option("--warmup", c.warmup, "Slots excluded from metrics")->envname("AOIGPR_WARMUP");
  app->add_option("--candidates", c.candidates, "exhaustive, or a sampled candidate count S")
      ->envname("AOIGPR_CANDIDATES");
  app->add_option("--slots", c.slots, "Override the horizon T")->envname("AOIGPR_SLOTS");
  app->add_option("--threads", c.threads, "Concurrent runs")->envname("AOIGPR_THREADS");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AoI-aware V2V resource allocation with online Gaussian process agents"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(AOIGPR_VERSION));

  Common common;
  std::string policy = "proposed", m_list, alpha_list, sweep_policy = "proposed";
  bool trace = false;

  auto* run = app.add_subcommand("run", "Run one policy over one or more seeds");
  add_common(run, common);
  run->add_option("--policy", policy, "proposed, baseline2 or baseline1")->envname("AOIGPR_POLICY");
  run->add_flag("--trace", trace, "Also write per-slot traces");

  auto* compare = app.add_subcommand("compare", "Run all three policies on each seed");
  add_common(compare, common);

  auto* sweep_m = app.add_subcommand("sweep-m", "Sweep the dataset capacity M");
  add_common(sweep_m, common);
  sweep_m->add_option("--m-list", m_list, "M values, e.g. 25,100,400")->required()->envname("AOIGPR_M_LIST");
  sweep_m->add_option("--policy", sweep_policy, "proposed or baseline2")->envname("AOIGPR_POLICY");

  auto* sweep_a = app.add_subcommand("sweep-alpha", "Sweep the exploration weight alpha_i");
  add_common(sweep_a, common);
  sweep_a->add_option("--alpha-i-list", alpha_list, "alpha_i values, e.g. 0,1,100,10000")
      ->required()
      ->envname("AOIGPR_ALPHA_I_LIST");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(common, policy, trace);
    if (*compare) return cmd_compare(common);
    if (*sweep_m) return cmd_sweep_m(common, m_list, sweep_policy);
    return cmd_sweep_alpha(common, alpha_list);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
