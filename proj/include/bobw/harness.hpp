#pragma once

// Seeded experiment runs, summaries, scaling fits and trace emission.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bobw/config.hpp"
#include "bobw/confidence.hpp"
#include "bobw/environments.hpp"
#include "bobw/learners.hpp"
#include "bobw/random.hpp"

namespace bobw {

struct RegretTrace {
  std::uint64_t seed = 0;
  std::string learner;
  std::string mode;
  std::vector<double> regret;          // cumulative pseudo-regret, round 1..T
  std::vector<double> realized;        // cumulative realized-loss regret
  std::vector<double> self_bounding;   // cumulative gap mass minus C; empty without l*
  std::vector<long long> epoch_starts;  // epoch learner only
  double max_kkt = 0.0;
  double corruption_used = 0.0;
  bool truth_covered = true;  // every epoch's confidence set held the truth
};

struct RunOptions {
  int threads = 1;
};

namespace detail {

inline RegretTrace run_mdp(const RunConfig& cfg, const LayeredMdp& mdp, std::uint64_t seed) {
  const MdpShape& shape = mdp.shape();
  RegretTrace tr;
  tr.seed = seed;
  tr.learner = to_string(cfg.learner);
  tr.mode = to_string(cfg.environment.mode);
  auto env = Environment::for_mdp(mdp, cfg.environment);
  Rng env_rng = make_stream(seed, Stream::environment);
  Rng traj_rng = make_stream(seed, Stream::trajectory);
  Rng fb_rng = make_stream(seed, Stream::feedback);

  std::unique_ptr<MdpLearner> learner;
  UnknownTransitionLearner* unknown = nullptr;
  if (cfg.learner == LearnerId::mdp_ut_bobw) {
    auto ptr = std::make_unique<UnknownTransitionLearner>(shape, cfg.horizon, cfg.options);
    unknown = ptr.get();
    learner = std::move(ptr);
  } else {
    learner = std::make_unique<KnownTransitionLearner>(mdp, cfg.learner, cfg.horizon, cfg.options);
  }

  const bool hindsight = cfg.environment.mode == EnvMode::adversarial;
  const bool has_mean = !cfg.environment.mean.empty();
  Occupancy comparator;
  MdpGapProfile gaps;
  if (has_mean) {
    comparator = best_policy_occupancy(mdp, cfg.environment.mean);
    gaps = gap_mdp(mdp, cfg.environment.mean);
  }

  std::vector<double> played_loss, realized_loss, gap_mass_series;
  std::vector<double> cum_loss(shape.pair_count(), 0.0);
  RegretAccumulator acc;
  double realized_total = 0.0;
  int seen_epoch = 0;
  for (long long t = 1; t <= cfg.horizon; ++t) {
    const Policy& pi = learner->decide(t);
    if (unknown && unknown->epoch().index != seen_epoch) {
      seen_epoch = unknown->epoch().index;
      if (!contains_truth(mdp, unknown->epoch().empirical, unknown->epoch().width)) tr.truth_covered = false;
    }
    const Occupancy q = q_from_policy(mdp, pi);
    const auto& loss = env.draw_loss(t, env_rng);
    const Trajectory traj = sample_trajectory(mdp, pi, traj_rng);
    const double agg = aggregate_loss(shape, traj, loss);
    const double c = aggregate_feedback(agg, fb_rng);
    if (hindsight) {
      played_loss.push_back(value_of(q.sa, loss));
      realized_loss.push_back(agg);
      for (std::size_t j = 0; j < cum_loss.size(); ++j) cum_loss[j] += loss[j];
    } else {
      acc.add(loss, q.sa, comparator.sa);
      realized_total += agg - value_of(comparator.sa, loss);
      tr.realized.push_back(realized_total);
    }
    if (has_mean) gap_mass_series.push_back(gap_mass(gaps.delta, q.sa));
    learner->observe(traj, c);
  }
  if (hindsight) {
    // Replay the oblivious schedule against the best fixed policy in hindsight.
    const Occupancy best = best_policy_occupancy(mdp, cum_loss);
    auto replay = Environment::for_mdp(mdp, cfg.environment);
    Rng replay_rng = make_stream(seed, Stream::environment);
    double total = 0.0, real = 0.0;
    for (long long t = 1; t <= cfg.horizon; ++t) {
      const double cmp = value_of(best.sa, replay.draw_loss(t, replay_rng));
      total += played_loss[t - 1] - cmp;
      real += realized_loss[t - 1] - cmp;
      tr.regret.push_back(total);
      tr.realized.push_back(real);
    }
  } else {
    tr.regret = acc.series();
  }
  if (has_mean) {
    const double budget = cfg.environment.mode == EnvMode::corrupted ? cfg.environment.corruption.budget : 0.0;
    tr.self_bounding = self_bounding_series(gap_mass_series, budget);
  }
  tr.max_kkt = learner->max_kkt_residual();
  tr.corruption_used = env.corruption_used();
  if (unknown) tr.epoch_starts = unknown->epoch_starts();
  return tr;
}

inline RegretTrace run_graph(const RunConfig& cfg, const Dag& dag, std::uint64_t seed) {
  RegretTrace tr;
  tr.seed = seed;
  tr.learner = to_string(cfg.learner);
  tr.mode = to_string(cfg.environment.mode);
  auto env = Environment::for_dag(dag, cfg.environment);
  Rng env_rng = make_stream(seed, Stream::environment);
  Rng traj_rng = make_stream(seed, Stream::trajectory);
  Rng fb_rng = make_stream(seed, Stream::feedback);
  ShortestPathLearner learner(dag, cfg.learner, cfg.horizon, cfg.options);

  const bool hindsight = cfg.environment.mode == EnvMode::adversarial;
  const bool has_mean = !cfg.environment.mean.empty();
  std::vector<double> comparator;
  SpGapProfile gaps;
  if (has_mean) {
    comparator = best_path_flow(dag, cfg.environment.mean);
    gaps = gap_sp(dag, cfg.environment.mean);
  }
  std::vector<double> played_loss, realized_loss, gap_mass_series;
  std::vector<double> cum_loss(dag.edge_count(), 0.0);
  RegretAccumulator acc;
  double realized_total = 0.0;
  for (long long t = 1; t <= cfg.horizon; ++t) {
    const auto q = learner.decide(t);
    const auto& loss = env.draw_loss(t, env_rng);
    RngChooser chooser(traj_rng);
    const PathVector path = sample_path(dag, q, chooser);
    const double agg = path_loss(path, loss);
    const double c = aggregate_feedback(agg, fb_rng);
    if (hindsight) {
      played_loss.push_back(value_of(q, loss));
      realized_loss.push_back(agg);
      for (std::size_t j = 0; j < cum_loss.size(); ++j) cum_loss[j] += loss[j];
    } else {
      acc.add(loss, q, comparator);
      realized_total += agg - value_of(comparator, loss);
      tr.realized.push_back(realized_total);
    }
    if (has_mean) gap_mass_series.push_back(gap_mass(gaps.delta, q));
    learner.observe(path, c);
  }
  if (hindsight) {
    const auto best = best_path_flow(dag, cum_loss);
    auto replay = Environment::for_dag(dag, cfg.environment);
    Rng replay_rng = make_stream(seed, Stream::environment);
    double total = 0.0, real = 0.0;
    for (long long t = 1; t <= cfg.horizon; ++t) {
      const double cmp = value_of(best, replay.draw_loss(t, replay_rng));
      total += played_loss[t - 1] - cmp;
      real += realized_loss[t - 1] - cmp;
      tr.regret.push_back(total);
      tr.realized.push_back(real);
    }
  } else {
    tr.regret = acc.series();
  }
  if (has_mean) {
    const double budget = cfg.environment.mode == EnvMode::corrupted ? cfg.environment.corruption.budget : 0.0;
    tr.self_bounding = self_bounding_series(gap_mass_series, budget);
  }
  tr.max_kkt = learner.max_kkt_residual();
  tr.corruption_used = env.corruption_used();
  return tr;
}

}  // namespace detail

/// One seeded run; deterministic in (cfg, seed).
inline RegretTrace run_single(const RunConfig& cfg, std::uint64_t seed) {
  if (const auto* mdp = std::get_if<LayeredMdp>(&cfg.instance)) return detail::run_mdp(cfg, *mdp, seed);
  return detail::run_graph(cfg, std::get<Dag>(cfg.instance), seed);
}

/// All seeds of `cfg` on a bounded worker pool; results sorted by seed.
inline std::vector<RegretTrace> run(const RunConfig& cfg, RunOptions opt = {}) {
  std::vector<RegretTrace> out(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size()) return;
      try {
        out[i] = run_single(cfg, cfg.seeds[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(cfg.seeds.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::sort(out.begin(), out.end(), [](const RegretTrace& a, const RegretTrace& b) { return a.seed < b.seed; });
  return out;
}

// ---------------------------------------------------------------------------
// Summaries and fits.

struct Summary {
  std::vector<double> mean;
  std::vector<double> stderr_;  // sample sd / sqrt(n); 0 for a single seed
  double final_mean = 0.0;
  double final_stderr = 0.0;
};

inline Summary summarize(const std::vector<RegretTrace>& traces) {
  Summary s;
  if (traces.empty()) return s;
  const std::size_t horizon = traces.front().regret.size();
  for (const auto& t : traces) {
    if (t.regret.size() != horizon) throw Error(Errc::precondition_violated, "traces have different horizons");
  }
  const double n = static_cast<double>(traces.size());
  s.mean.assign(horizon, 0.0);
  s.stderr_.assign(horizon, 0.0);
  for (std::size_t k = 0; k < horizon; ++k) {
    double m = 0.0;
    for (const auto& t : traces) m += t.regret[k];
    m /= n;
    double var = 0.0;
    for (const auto& t : traces) var += (t.regret[k] - m) * (t.regret[k] - m);
    s.mean[k] = m;
    s.stderr_[k] = traces.size() > 1 ? std::sqrt(var / (n - 1.0)) / std::sqrt(n) : 0.0;
  }
  if (horizon > 0) {
    s.final_mean = s.mean.back();
    s.final_stderr = s.stderr_.back();
  }
  return s;
}

enum class FitModel { log, sqrt };

inline FitModel parse_fit_model(const std::string& s) {
  if (s == "log") return FitModel::log;
  if (s == "sqrt") return FitModel::sqrt;
  throw Error(Errc::config_error, "fit model must be \"log\" or \"sqrt\"");
}

struct FitResult {
  double coefficient = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Least squares y = a f(t) + b over rounds t in the tail half, where
/// series[k] is the value at round k + 1.
inline FitResult fit_scaling(std::span<const double> series, FitModel model) {
  const std::size_t horizon = series.size();
  const std::size_t first = horizon / 2;
  FitResult r;
  r.points = horizon - first;
  if (r.points < 3) throw Error(Errc::degenerate_fit, "fit needs at least 3 tail points");
  double sx = 0.0, sy = 0.0;
  auto f = [&](std::size_t k) {
    const double t = static_cast<double>(k + 1);
    return model == FitModel::log ? std::log(t) : std::sqrt(t);
  };
  for (std::size_t k = first; k < horizon; ++k) {
    sx += f(k);
    sy += series[k];
  }
  const double n = static_cast<double>(r.points);
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = first; k < horizon; ++k) {
    const double dx = f(k) - mx, dy = series[k] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(Errc::degenerate_fit, "fit data has zero variance");
  r.coefficient = sxy / sxx;
  r.intercept = my - r.coefficient * mx;
  r.r2 = (sxy * sxy) / (sxx * syy);
  return r;
}

// ---------------------------------------------------------------------------
// Emission.

inline void write_csv(std::ostream& os, const std::vector<RegretTrace>& traces, long long stride = 1,
                      bool per_seed = false) {
  const Summary s = summarize(traces);
  os << "t,mean_regret,stderr";
  if (per_seed) {
    for (const auto& t : traces) os << ",seed_" << t.seed;
  }
  os << '\n';
  os.precision(17);
  for (std::size_t k = 0; k < s.mean.size(); ++k) {
    const bool last = k + 1 == s.mean.size();
    if ((k + 1) % static_cast<std::size_t>(stride) != 0 && !last) continue;
    os << (k + 1) << ',' << s.mean[k] << ',' << s.stderr_[k];
    if (per_seed) {
      for (const auto& t : traces) os << ',' << t.regret[k];
    }
    os << '\n';
  }
}

inline nlohmann::json trace_to_json(const RegretTrace& t) {
  return {{"seed", t.seed},
          {"learner", t.learner},
          {"mode", t.mode},
          {"regret", t.regret},
          {"realized", t.realized},
          {"self_bounding", t.self_bounding},
          {"epoch_starts", t.epoch_starts},
          {"max_kkt", t.max_kkt},
          {"corruption_used", t.corruption_used},
          {"truth_covered", t.truth_covered}};
}

inline RegretTrace trace_from_json(const nlohmann::json& j) {
  RegretTrace t;
  t.seed = j.at("seed").get<std::uint64_t>();
  t.learner = j.at("learner").get<std::string>();
  t.mode = j.at("mode").get<std::string>();
  t.regret = j.at("regret").get<std::vector<double>>();
  t.realized = j.at("realized").get<std::vector<double>>();
  t.self_bounding = j.at("self_bounding").get<std::vector<double>>();
  t.epoch_starts = j.at("epoch_starts").get<std::vector<long long>>();
  t.max_kkt = j.at("max_kkt").get<double>();
  t.corruption_used = j.at("corruption_used").get<double>();
  t.truth_covered = j.at("truth_covered").get<bool>();
  return t;
}

inline void write_json(std::ostream& os, const std::vector<RegretTrace>& traces) {
  const Summary s = summarize(traces);
  nlohmann::json j;
  j["traces"] = nlohmann::json::array();
  for (const auto& t : traces) j["traces"].push_back(trace_to_json(t));
  j["summary"] = {{"mean", s.mean}, {"stderr", s.stderr_}, {"final_mean", s.final_mean},
                  {"final_stderr", s.final_stderr}};
  os << j.dump() << '\n';
}

inline std::vector<RegretTrace> read_json(std::istream& is) {
  const auto j = nlohmann::json::parse(is);
  std::vector<RegretTrace> out;
  for (const auto& t : j.at("traces")) out.push_back(trace_from_json(t));
  return out;
}

struct SvgSeries {
  std::string label;
  std::vector<double> mean;
  std::vector<double> stderr_;
};

/// Self-contained line plot: one <path> per series plus a shaded
/// mean +- stderr polygon.
inline void write_svg(std::ostream& os, const std::vector<SvgSeries>& series, std::size_t max_points = 1000) {
  const double width = 640, height = 400, margin = 50;
  std::size_t horizon = 0;
  double ymax = 0.0, ymin = 0.0;
  for (const auto& s : series) {
    horizon = std::max(horizon, s.mean.size());
    for (std::size_t k = 0; k < s.mean.size(); ++k) {
      const double e = k < s.stderr_.size() ? s.stderr_[k] : 0.0;
      ymax = std::max(ymax, s.mean[k] + e);
      ymin = std::min(ymin, s.mean[k] - e);
    }
  }
  if (ymax <= ymin) ymax = ymin + 1.0;
  const std::size_t step = std::max<std::size_t>(1, horizon / max_points);
  auto px = [&](std::size_t k) { return margin + (width - 2 * margin) * (horizon > 1 ? double(k) / (horizon - 1) : 0.0); };
  auto py = [&](double y) { return height - margin - (height - 2 * margin) * (y - ymin) / (ymax - ymin); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
     << height - margin << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << margin << "\" y=\"" << margin - 10 << "\" font-size=\"12\">max " << ymax << "</text>\n";
  os << "<text x=\"" << width - margin << "\" y=\"" << height - margin + 20 << "\" font-size=\"12\" "
     << "text-anchor=\"end\">T = " << horizon << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = colors[i % 6];
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < s.mean.size(); k += step) idx.push_back(k);
    if (!s.mean.empty() && idx.back() != s.mean.size() - 1) idx.push_back(s.mean.size() - 1);
    if (!s.stderr_.empty() && !idx.empty()) {
      os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t k : idx) os << px(k) << ',' << py(s.mean[k] + s.stderr_[k]) << ' ';
      for (auto it = idx.rbegin(); it != idx.rend(); ++it) os << px(*it) << ',' << py(s.mean[*it] - s.stderr_[*it]) << ' ';
      os << "\"/>\n";
    }
    os << "<path fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" d=\"";
    for (std::size_t n = 0; n < idx.size(); ++n) os << (n == 0 ? 'M' : 'L') << px(idx[n]) << ',' << py(s.mean[idx[n]]) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << width - margin - 5 << "\" y=\"" << margin + 15 * (i + 1) << "\" font-size=\"12\" fill=\""
       << color << "\" text-anchor=\"end\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
}

/// Writes <prefix>.csv, <prefix>.json and <prefix>.svg under dir.
inline void emit(const std::vector<RegretTrace>& traces, const OutputSpec& out) {
  namespace fs = std::filesystem;
  fs::create_directories(out.dir);
  const fs::path base = fs::path(out.dir) / out.prefix;
  auto open = [](const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw Error(Errc::config_error, "cannot write " + p.string());
    return f;
  };
  {
    auto f = open(base.string() + ".csv");
    write_csv(f, traces, out.stride, true);
  }
  {
    auto f = open(base.string() + ".json");
    write_json(f, traces);
  }
  {
    auto f = open(base.string() + ".svg");
    const Summary s = summarize(traces);
    write_svg(f, {{traces.empty() ? "" : traces.front().learner, s.mean, s.stderr_}});
  }
}

// ---------------------------------------------------------------------------
// Gap report for `diag gaps`.

inline nlohmann::json gap_report(const LayeredMdp& mdp, std::span<const double> mean) {
  const MdpShape& shape = mdp.shape();
  const MdpGapProfile g = gap_mdp(mdp, mean);
  nlohmann::json j;
  j["kind"] = "mdp";
  j["value"] = nlohmann::json::object();
  for (int s = 0; s < shape.state_count(); ++s) j["value"][shape.state_name(s)] = g.optimal.v[s];
  j["delta"] = nlohmann::json::object();
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    for (int a = 0; a < shape.action_count(); ++a) {
      j["delta"][shape.state_name(s) + "," + shape.action_name(a)] = g.delta[shape.pair(s, a)];
    }
  }
  j["optimal_states"] = nlohmann::json::array();
  for (int s = 0; s < shape.state_count(); ++s) {
    if (g.optimal_states[s]) j["optimal_states"].push_back(shape.state_name(s));
  }
  j["optimal_actions"] = nlohmann::json::object();
  for (int s = 0; s < shape.nonterminal_count(); ++s) {
    auto& list = j["optimal_actions"][shape.state_name(s)] = nlohmann::json::array();
    for (int a : g.optimal_actions[s]) list.push_back(shape.action_name(a));
  }
  j["delta_min"] = g.delta_min;
  j["lower_bound"] = g.lower_bound;
  return j;
}

inline nlohmann::json gap_report(const Dag& dag, std::span<const double> mean) {
  const SpGapProfile g = gap_sp(dag, mean);
  nlohmann::json j;
  j["kind"] = "graph";
  j["dist"] = nlohmann::json::object();
  for (int v = 0; v < dag.vertex_count(); ++v) j["dist"][dag.name(v)] = g.dist[v];
  for (const char* key : {"delta", "delta_bar", "delta_tilde"}) j[key] = nlohmann::json::object();
  j["off_policy"] = nlohmann::json::array();
  j["best_path"] = nlohmann::json::array();
  for (int e = 0; e < dag.edge_count(); ++e) {
    const std::string name = dag.edge_name(e);
    j["delta"][name] = g.delta[e];
    j["delta_bar"][name] = g.delta_bar[e];
    if (g.off_policy[e]) {
      j["delta_tilde"][name] = g.delta_tilde[e];
      j["off_policy"].push_back(name);
    }
    if (g.best_path[e] > 0.0) j["best_path"].push_back(name);
  }
  j["off_policy_len"] = g.off_policy_len;
  j["delta_min"] = g.delta_min;
  j["lower_bound"] = g.lower_bound;
  return j;
}

inline nlohmann::json gap_report(const RunConfig& cfg) {
  if (cfg.environment.mean.empty()) throw Error(Errc::config_error, "gap report needs environment.mean");
  if (const auto* mdp = std::get_if<LayeredMdp>(&cfg.instance)) return gap_report(*mdp, cfg.environment.mean);
  return gap_report(std::get<Dag>(cfg.instance), cfg.environment.mean);
}

}  // namespace bobw
