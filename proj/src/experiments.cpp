#include "scoreflow/experiments.hpp"

#include "scoreflow/diagnostics.hpp"
#include "scoreflow/io.hpp"
#include "scoreflow/losses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace scoreflow::experiments {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

const std::set<std::string> kTopLevelKeys = {"experiment", "description", "measure",  "schedule",
                                             "epsilon",    "init",        "n_trajectories",
                                             "seed",       "output",      "options"};

// ---------------------------------------------------------------------------
// Config resolution

class Resolver {
 public:
  Resolver(json config, fs::path base_dir) : cfg_(std::move(config)), base_(std::move(base_dir)) {}

  ValidationReport resolve();

 private:
  void add(std::string finding) { findings_.push_back(std::move(finding)); }

  // Reads a number at obj[key], inserting `fallback` when absent.
  double number(json& obj, const char* key, double fallback, const std::string& where) {
    if (!obj.contains(key)) obj[key] = fallback;
    if (!obj[key].is_number()) {
      add(where + "." + key + ": expected a number");
      obj[key] = fallback;
    }
    return obj[key].get<double>();
  }

  long long integer(json& obj, const char* key, long long fallback, const std::string& where) {
    if (!obj.contains(key)) obj[key] = fallback;
    if (!obj[key].is_number_integer()) {
      add(where + "." + key + ": expected an integer");
      obj[key] = fallback;
    }
    return obj[key].get<long long>();
  }

  std::vector<double> numbers(json& obj, const char* key, std::vector<double> fallback,
                              const std::string& where) {
    if (!obj.contains(key)) obj[key] = fallback;
    const json& v = obj[key];
    bool ok = v.is_array() && !v.empty();
    if (ok) {
      for (const auto& e : v) ok = ok && e.is_number();
    }
    if (!ok) {
      add(where + "." + key + ": expected a nonempty array of numbers");
      obj[key] = fallback;
    }
    return obj[key].get<std::vector<double>>();
  }

  void resolve_measure();
  void resolve_schedule();
  void resolve_init();
  void resolve_options();

  json cfg_;
  fs::path base_;
  std::vector<std::string> findings_;
  std::string experiment_;
  int dim_ = 0;
  std::size_t n_atoms_ = 0;
  bool stochastic_ = false;
};

ValidationReport Resolver::resolve() {
  if (!cfg_.is_object()) {
    return {{"config: expected a JSON object"}, cfg_};
  }
  for (const auto& [key, value] : cfg_.items()) {
    if (!kTopLevelKeys.count(key)) add("unknown key \"" + key + "\"");
  }
  if (!cfg_.contains("experiment") || !cfg_["experiment"].is_string()) {
    add("experiment: required, one of fig1-score-profile, fig3-separatrix, fig2-lemniscate, "
        "fp-energy, kl-contraction, losses, rates");
    return {findings_, cfg_};
  }
  experiment_ = cfg_["experiment"].get<std::string>();
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment_) == names.end()) {
    add("experiment: unknown tag \"" + experiment_ + "\"");
    return {findings_, cfg_};
  }

  resolve_measure();
  resolve_schedule();

  const double default_eps = experiment_ == "fig2-lemniscate" ? 0.2 : 0.0;
  const double eps = number(cfg_, "epsilon", default_eps, "config");
  if (eps < 0.0) add("epsilon: must be >= 0");
  if ((experiment_ == "rates" || experiment_ == "fig3-separatrix") && eps != 0.0) {
    add("epsilon: " + experiment_ + " follows the deterministic flow and needs epsilon = 0");
  }
  stochastic_ = eps > 0.0 || experiment_ == "losses";

  resolve_init();
  resolve_options();

  if (stochastic_ && !cfg_.contains("seed")) add("seed required");
  if (cfg_.contains("seed") && !cfg_["seed"].is_number_unsigned()) {
    add("seed: expected a nonnegative integer");
  }
  if (cfg_.contains("output") && !cfg_["output"].is_string()) add("output: expected a path string");
  return {findings_, cfg_};
}

void Resolver::resolve_measure() {
  if (!cfg_.contains("measure")) {
    if (experiment_ == "fig2-lemniscate") {
      cfg_["measure"] = {{"lemniscate", {{"n", 2000}, {"half_width", 1.0}, {"seed", 7}}}};
    } else {
      add("measure: required");
      return;
    }
  }
  json& m = cfg_["measure"];
  if (!m.is_object()) {
    add("measure: expected an object");
    return;
  }
  try {
    if (m.contains("lemniscate")) {
      json& l = m["lemniscate"];
      const long long n = integer(l, "n", 2000, "measure.lemniscate");
      const double a = number(l, "half_width", 1.0, "measure.lemniscate");
      integer(l, "seed", 7, "measure.lemniscate");
      if (n < 1) add("measure.lemniscate.n: must be >= 1");
      if (!(a > 0.0)) add("measure.lemniscate.half_width: must be > 0");
      dim_ = 2;
      n_atoms_ = static_cast<std::size_t>(std::max(n, 1LL));
    } else if (m.contains("file")) {
      const fs::path p = base_ / m["file"].get<std::string>();
      const auto mu = load_measure(p);
      dim_ = mu.dim();
      n_atoms_ = mu.size();
    } else {
      const auto mu = measure_from_json(m);
      dim_ = mu.dim();
      n_atoms_ = mu.size();
    }
  } catch (const std::exception& e) {
    add(std::string("measure: ") + e.what());
  }
  const bool one_d_only = experiment_ == "fig1-score-profile" || experiment_ == "fp-energy" ||
                          experiment_ == "kl-contraction";
  if (one_d_only && dim_ != 0 && dim_ != 1) add("measure: " + experiment_ + " needs a 1D measure");
}

void Resolver::resolve_schedule() {
  if (!cfg_.contains("schedule")) cfg_["schedule"] = json::object();
  json& s = cfg_["schedule"];
  if (!s.is_object()) {
    add("schedule: expected an object");
    s = json::object();
  }
  double t_min_default = 1e-3;
  long long steps_default = 100;
  if (experiment_ == "rates") {
    t_min_default = 1e-6;
    steps_default = 600;
  } else if (experiment_ == "fig2-lemniscate") {
    steps_default = 300;
  } else if (experiment_ == "fp-energy" || experiment_ == "kl-contraction") {
    t_min_default = 1e-2;
    steps_default = 20;
  }
  const double T = number(s, "T", 1.0, "schedule");
  const double t_min = number(s, "t_min", t_min_default, "schedule");
  const long long n = integer(s, "n_steps", steps_default, "schedule");
  if (!s.contains("spacing")) s["spacing"] = "geometric";
  if (!(T > 0.0)) add("schedule.T: must be > 0");
  if (!(t_min > 0.0)) add("schedule.t_min: must be > 0");
  if (!(t_min < T)) add("schedule.t_min: must be < T");
  if (n < 1) add("schedule.n_steps: must be >= 1");
  try {
    parse_spacing(s["spacing"].get<std::string>());
  } catch (const std::exception&) {
    add("schedule.spacing: expected geometric, log-uniform or uniform");
  }
}

void Resolver::resolve_init() {
  const bool needs_paths = experiment_ == "fig3-separatrix" || experiment_ == "fig2-lemniscate" ||
                           experiment_ == "rates";
  if (!needs_paths) {
    if (cfg_.contains("init")) add("init: not used by " + experiment_);
    return;
  }
  if (!cfg_.contains("init")) {
    if (experiment_ == "fig3-separatrix") {
      add("init: required (explicit points)");
      return;
    }
    json mean = json::array();
    for (int i = 0; i < std::max(dim_, 1); ++i) mean.push_back(0.0);
    cfg_["init"] = {{"gaussian", {{"mean", mean}, {"sigma", std::sqrt(2.0)}}}};
  }
  json& init = cfg_["init"];
  std::size_t default_n = 100;
  if (init.contains("points")) {
    const json& pts = init["points"];
    if (!pts.is_array() || pts.empty()) {
      add("init.points: expected a nonempty array");
      return;
    }
    for (const auto& p : pts) {
      const std::size_t len = p.is_array() ? p.size() : 1;
      if (dim_ != 0 && len != static_cast<std::size_t>(dim_)) {
        add("init.points: dimension differs from the measure");
        break;
      }
    }
    default_n = pts.size();
  } else if (init.contains("gaussian")) {
    json& g = init["gaussian"];
    const double sigma = number(g, "sigma", 1.0, "init.gaussian");
    if (!(sigma >= 0.0)) add("init.gaussian.sigma: must be >= 0");
    if (!g.contains("mean")) {
      g["mean"] = std::vector<double>(static_cast<std::size_t>(std::max(dim_, 1)), 0.0);
    }
    if (dim_ != 0 && g["mean"].size() != static_cast<std::size_t>(dim_)) {
      add("init.gaussian.mean: dimension differs from the measure");
    }
    stochastic_ = true;
    if (experiment_ == "fig2-lemniscate") default_n = 10000;
  } else {
    add("init: expected {\"points\": ...} or {\"gaussian\": ...}");
    return;
  }
  const long long n = integer(cfg_, "n_trajectories", static_cast<long long>(default_n), "config");
  if (n < 1) add("n_trajectories: must be >= 1");
}

void Resolver::resolve_options() {
  if (!cfg_.contains("options")) cfg_["options"] = json::object();
  json& o = cfg_["options"];
  if (!o.is_object()) {
    add("options: expected an object");
    o = json::object();
  }
  const std::string where = "options";
  const double T = cfg_["schedule"].value("T", 1.0);
  const double t_min = cfg_["schedule"].value("t_min", 1e-3);

  if (experiment_ == "fig1-score-profile") {
    const double lo = number(o, "x_min", -8.0, where);
    const double hi = number(o, "x_max", 8.0, where);
    const long long n = integer(o, "n_x", 1601, where);
    numbers(o, "times", {1.0, 0.1, 0.01}, where);
    number(o, "peak_target", -5.0, where);
    number(o, "peak_tolerance", 0.05, where);
    if (!(lo < hi)) add("options.x_min: must be < x_max");
    if (n < 2) add("options.n_x: must be >= 2");
    for (double t : o["times"].get<std::vector<double>>()) {
      if (!(t > 0.0)) add("options.times: entries must be > 0");
    }
  } else if (experiment_ == "fig3-separatrix") {
    if (!o.contains("expected")) o["expected"] = json::array();
    if (!o["expected"].is_array()) add("options.expected: expected an array");
    for (const auto& e : o["expected"]) {
      if (!e.contains("index") || !e.contains("target") || !e.contains("tolerance")) {
        add("options.expected: entries need index, target and tolerance");
      }
    }
  } else if (experiment_ == "fig2-lemniscate") {
    const auto sweep = numbers(o, "t_min_sweep", {0.1, 0.01, 0.001}, where);
    number(o, "delta", 0.1, where);
    number(o, "mass_threshold", 0.95, where);
    const double smallest = *std::min_element(sweep.begin(), sweep.end());
    if (std::abs(smallest - t_min) > 1e-12 * t_min) {
      add("options.t_min_sweep: smallest entry must equal schedule.t_min");
    }
    try {
      const auto& s = cfg_["schedule"];
      const auto sched = make_schedule(T, t_min, s["n_steps"].get<std::size_t>(),
                                       parse_spacing(s["spacing"].get<std::string>()));
      for (double t : sweep) node_index(sched, t);
    } catch (const std::exception&) {
      add("options.t_min_sweep: every entry must be a schedule node");
    }
  } else if (experiment_ == "fp-energy") {
    integer(o, "cells", 512, where);
    numbers(o, "epsilons", {0.0, 0.5}, where);
    numbers(o, "p_values", {2.0, 4.0}, where);
    number(o, "v_T_mean", 0.0, where);
    number(o, "v_T_variance", 2.0, where);
    number(o, "solver_slack", 1.05, where);
    number(o, "sharpness_factor", 0.5, where);
    if (o["cells"].get<long long>() < 8) add("options.cells: must be >= 8");
    if (!(o["v_T_variance"].get<double>() > 0.0)) add("options.v_T_variance: must be > 0");
    for (double p : o["p_values"].get<std::vector<double>>()) {
      if (!(p >= 1.0) || std::isinf(p)) add("options.p_values: entries must be finite and >= 1");
    }
    for (double e : o["epsilons"].get<std::vector<double>>()) {
      if (e < 0.0) add("options.epsilons: entries must be >= 0");
    }
  } else if (experiment_ == "kl-contraction") {
    integer(o, "cells", 2048, where);
    number(o, "noise_epsilon", 0.5, where);
    number(o, "v_T_mean", 0.0, where);
    number(o, "v_T_variance", 2.0, where);
    number(o, "monotonicity_tolerance", 1e-3, where);
    number(o, "identity_tolerance", 0.02, where);
    number(o, "drift_tolerance", 0.02, where);
    number(o, "candidate_scale", 0.9, where);
    if (o["cells"].get<long long>() < 8) add("options.cells: must be >= 8");
    if (!(o["noise_epsilon"].get<double>() > 0.0)) add("options.noise_epsilon: must be > 0");
    if (!(o["v_T_variance"].get<double>() > 0.0)) add("options.v_T_variance: must be > 0");
  } else if (experiment_ == "losses") {
    const long long n = integer(o, "n_pairs", 100000, where);
    const double t_floor = number(o, "t_floor", kDefaultTimeFloor, where);
    numbers(o, "scales", {0.8, 0.9, 1.0, 1.1}, where);
    number(o, "lambda", 1.0, where);
    if (n < 2) add("options.n_pairs: must be >= 2");
    if (!(t_floor > 0.0 && t_floor < T)) add("options.t_floor: must lie in (0, T)");
    const auto scales = o["scales"].get<std::vector<double>>();
    if (std::find(scales.begin(), scales.end(), 1.0) == scales.end()) {
      add("options.scales: must include 1.0");
    }
    if (o["lambda"].get<double>() < 0.0) add("options.lambda: must be >= 0");
  } else if (experiment_ == "rates") {
    numbers(o, "alpha_range", {0.4, 0.6}, where);
    number(o, "limit_factor", 10.0, where);
    number(o, "bisector_tolerance", 1e-9, where);
    if (o["alpha_range"].size() != 2) add("options.alpha_range: expected [low, high]");
    if (10.0 * t_min >= T) add("schedule: rates need at least one decade between t_min and T");
  }
}

// ---------------------------------------------------------------------------
// Execution helpers

Claim make_claim(std::string id, std::string description, double measured, std::string relation,
                 double bound, json details = json::object()) {
  Claim c;
  c.id = std::move(id);
  c.description = std::move(description);
  c.measured = measured;
  c.relation = std::move(relation);
  c.bound = bound;
  if (c.relation == "<=") {
    c.pass = measured <= bound;
  } else if (c.relation == ">=") {
    c.pass = measured >= bound;
  } else if (c.relation == "<") {
    c.pass = measured < bound;
  } else if (c.relation == ">") {
    c.pass = measured > bound;
  } else {
    c.pass = measured == bound;
  }
  c.details = std::move(details);
  return c;
}

EmpiricalMeasure build_measure(const json& m, const fs::path& base) {
  if (m.contains("lemniscate")) {
    const json& l = m["lemniscate"];
    return lemniscate_dataset(l["n"].get<std::size_t>(), l["half_width"].get<double>(),
                              l["seed"].get<Seed>());
  }
  if (m.contains("file")) return load_measure(base / m["file"].get<std::string>());
  return measure_from_json(m);
}

TimeSchedule build_schedule(const json& s) {
  return make_schedule(s["T"].get<double>(), s["t_min"].get<double>(),
                       s["n_steps"].get<std::size_t>(),
                       parse_spacing(s["spacing"].get<std::string>()));
}

Vector to_vector(const json& j) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

InitSpec build_init(const json& init) {
  if (init.contains("points")) {
    PointsInit p;
    for (const auto& e : init["points"]) p.points.push_back(to_vector(e));
    return p;
  }
  const json& g = init["gaussian"];
  return GaussianInit{to_vector(g["mean"]), g["sigma"].get<double>()};
}

// Deterministic paths use RK4; noisy ones the Euler-Maruyama ensemble.
Ensemble simulate(const ScoreField& field, const InitSpec& init, const TimeSchedule& schedule,
                  double epsilon, std::size_t n, Seed seed, const EnsembleOptions& options) {
  if (epsilon > 0.0) return run_ensemble(field, init, schedule, epsilon, n, seed, options);
  Ensemble ens;
  ens.schedule = schedule;
  ens.seed = seed;
  ens.terminal_states.resize(static_cast<Eigen::Index>(n), field.dim());
  for (std::size_t i = 0; i < n; ++i) {
    Vector x0 = draw_initial_state(init, seed, i, field.dim());
    Trajectory traj;
    try {
      traj = integrate_ode(field, x0, schedule);
    } catch (const NumericalError& e) {
      throw NumericalError("trajectory " + std::to_string(i) + ": " + e.what(),
                           static_cast<std::ptrdiff_t>(i));
    }
    ens.terminal_states.row(static_cast<Eigen::Index>(i)) = traj.terminal().transpose();
    ens.initial_states.push_back(std::move(x0));
    ens.trajectories.push_back(std::move(traj));
  }
  return ens;
}

std::string fmt(double x) { return io::format_double(x); }

std::string optional_number(const std::optional<double>& x) { return x ? fmt(*x) : ""; }

class OutputWriter {
 public:
  explicit OutputWriter(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_ / "densities");
  }

  std::ofstream open(const std::string& name) {
    files_.insert(name);
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    return out;
  }

  void density(const std::string& stem, const GridDensity& d) {
    auto out = open("densities/" + stem + ".csv");
    io::write_density_csv(out, d);
  }

  const std::set<std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::set<std::string> files_;
};

struct Context {
  json cfg;
  EmpiricalMeasure mu;
  OutputWriter& out;
  std::vector<Claim>& claims;
  std::ostringstream trajectories;  // full trajectories.csv content
  std::ostringstream diagnostics;   // full diagnostics.csv content
};

void write_trajectory_header(std::ostream& out, int d) {
  out << "traj_id,t";
  for (int i = 0; i < d; ++i) out << ",x" << (i + 1);
  out << '\n';
}

// Per-trajectory diagnostics for deterministic paths.
struct PathReport {
  std::size_t limit_index = 0;
  bool bisector = false;
  std::optional<RateFit> fit;
  HullRateReport hull;
  Claim2Report claim2;
  double limit_distance = 0.0;
};

PathReport analyze_path(const Trajectory& traj, const EmpiricalMeasure& mu,
                        const SupportGeometry& geom, double bisector_tol) {
  PathReport r;
  r.limit_index = nearest_atom(mu, traj.terminal());
  r.bisector = on_bisector(mu, traj.states.front(), bisector_tol);
  r.hull = hull_rate_check(traj, geom);
  r.claim2 = claim2_invariance_check(traj, mu, r.limit_index);
  r.limit_distance = (traj.terminal() - mu.point(r.limit_index)).norm();
  try {
    r.fit = fit_rate(traj, mu.point(r.limit_index));
  } catch (const std::invalid_argument&) {
    r.fit.reset();
  }
  return r;
}

void write_path_diagnostics_header(std::ostream& out, int d) {
  out << "traj_id";
  for (int i = 0; i < d; ++i) out << ",x_T" << (i + 1);
  out << ",limit_index,alpha,C,worst_hull_violation,core_entry_time,on_bisector\n";
}

void write_path_diagnostics_row(std::ostream& out, std::size_t id, const Vector& xT,
                                const PathReport& r) {
  out << id;
  for (Eigen::Index i = 0; i < xT.size(); ++i) out << ',' << fmt(xT(i));
  out << ',' << r.limit_index << ',';
  if (r.fit && !r.fit->exact_hit) out << fmt(r.fit->alpha) << ',' << fmt(r.fit->C);
  else out << ',';
  out << ',' << fmt(r.hull.worst_violation) << ',' << optional_number(r.claim2.entry_time) << ','
      << (r.bisector ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Experiments

void run_fig1(Context& ctx) {
  const json& o = ctx.cfg["options"];
  const auto& mu = ctx.mu;
  const double lo = o["x_min"].get<double>();
  const double hi = o["x_max"].get<double>();
  const auto n = o["n_x"].get<std::size_t>();
  const auto times = o["times"].get<std::vector<double>>();

  auto profile = ctx.out.open("densities/score_profile.csv");
  profile << "x,t,s,log_u\n";
  write_trajectory_header(ctx.trajectories, 1);
  ctx.diagnostics << "t,argmax_x,max_log_u,min_li_yau_margin,max_abs_score\n";

  const auto field = ScoreField::empirical(mu);
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_scaled_margin = std::numeric_limits<double>::infinity();
  double peak_at_smallest = 0.0;
  const double smallest = *std::min_element(times.begin(), times.end());
  for (double t : times) {
    double best_x = lo;
    double best = -std::numeric_limits<double>::infinity();
    double margin_min = std::numeric_limits<double>::infinity();
    double max_abs_s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
      const Vector p = Vector::Constant(1, x);
      const auto jet = log_density_jet(mu, p, t);
      const double margin = li_yau_margin(field, p, t);
      profile << fmt(x) << ',' << fmt(t) << ',' << fmt(jet.gradient(0)) << ',' << fmt(jet.value)
              << '\n';
      if (jet.value > best) {
        best = jet.value;
        best_x = x;
      }
      margin_min = std::min(margin_min, margin);
      max_abs_s = std::max(max_abs_s, std::abs(jet.gradient(0)));
    }
    ctx.diagnostics << fmt(t) << ',' << fmt(best_x) << ',' << fmt(best) << ',' << fmt(margin_min)
                    << ',' << fmt(max_abs_s) << '\n';
    worst_margin = std::min(worst_margin, margin_min);
    worst_scaled_margin = std::min(worst_scaled_margin, margin_min * t);
    if (t == smallest) peak_at_smallest = best_x;
  }
  const double target = o["peak_target"].get<double>();
  ctx.claims.push_back(make_claim(
      "fig1.log_density_peak",
      "log u at the smallest profile time peaks within tolerance of the target atom",
      std::abs(peak_at_smallest - target), "<=", o["peak_tolerance"].get<double>(),
      {{"t", smallest}, {"argmax_x", peak_at_smallest}, {"target", target}}));
  ctx.claims.push_back(make_claim("fig1.li_yau",
                                  "div s + d/(2t), scaled by t, is nonnegative on the profile grid",
                                  worst_scaled_margin, ">=", -1e-9 * mu.dim(),
                                  {{"min_margin", worst_margin}}));
}

void run_fig3(Context& ctx) {
  const json& cfg = ctx.cfg;
  const auto& mu = ctx.mu;
  const auto field = ScoreField::empirical(mu);
  const auto sched = build_schedule(cfg["schedule"]);
  const auto n = cfg["n_trajectories"].get<std::size_t>();
  const Seed seed = cfg.value("seed", Seed{0});
  const auto ens = simulate(field, build_init(cfg["init"]), sched, 0.0, n, seed, {});
  const auto geom = support_geometry(mu);

  io::write_trajectory_csv(ctx.trajectories, ens.trajectories);
  write_path_diagnostics_header(ctx.diagnostics, mu.dim());
  double worst_hull = -std::numeric_limits<double>::infinity();
  bool hull_ok = true;
  std::size_t claim2_checked = 0;
  std::size_t claim2_ok = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = analyze_path(ens.trajectories[i], mu, geom, 1e-9);
    write_path_diagnostics_row(ctx.diagnostics, i, ens.initial_states[i], r);
    worst_hull = std::max(worst_hull, r.hull.worst_violation - r.hull.slack);
    hull_ok = hull_ok && r.hull.holds;
    if (!r.bisector) {
      ++claim2_checked;
      if (r.claim2.invariant) ++claim2_ok;
    }
  }
  ctx.claims.push_back(make_claim("fig3.hull_rate",
                                  "d(X_t, K) <= d(x_T, K) sqrt(t/T) + slack at every node",
                                  worst_hull, "<=", 0.0, {{"trajectories", n}}));
  if (claim2_checked > 0) {
    ctx.claims.push_back(make_claim("fig3.core_invariance",
                                    "off-bisector paths enter the core of their limit atom and stay",
                                    static_cast<double>(claim2_ok), ">=",
                                    static_cast<double>(claim2_checked)));
  }
  for (const auto& e : cfg["options"]["expected"]) {
    const auto idx = e["index"].get<std::size_t>();
    if (idx >= n) throw std::invalid_argument("options.expected: index out of range");
    const Vector target = to_vector(e["target"]);
    const double dist = (ens.trajectories[idx].terminal() - target).norm();
    ctx.claims.push_back(make_claim(
        "fig3.terminal_" + std::to_string(idx), "terminal state lies within tolerance of the target",
        dist, "<=", e["tolerance"].get<double>(),
        {{"x_T", std::vector<double>(ens.initial_states[idx].data(),
                                     ens.initial_states[idx].data() + mu.dim())},
         {"target", e["target"]}}));
  }
}

void run_fig2(Context& ctx) {
  const json& cfg = ctx.cfg;
  const json& o = cfg["options"];
  const auto& mu = ctx.mu;
  const auto sched = build_schedule(cfg["schedule"]);
  auto sweep = o["t_min_sweep"].get<std::vector<double>>();
  std::sort(sweep.begin(), sweep.end(), std::greater<>());
  const double delta = o["delta"].get<double>();
  const auto n = cfg["n_trajectories"].get<std::size_t>();
  const double eps = cfg["epsilon"].get<double>();

  EnsembleOptions opts;
  opts.keep_paths = false;
  opts.snapshot_times = sweep;
  const auto field = ScoreField::empirical(mu);
  const auto ens = simulate(field, build_init(cfg["init"]), sched, eps, n,
                            cfg["seed"].get<Seed>(), opts);
  std::vector<Matrix> states = ens.snapshots;
  if (states.empty()) {  // deterministic runs keep full paths instead
    for (double t : sweep) {
      const std::size_t k = node_index(sched, t);
      Matrix s(static_cast<Eigen::Index>(n), mu.dim());
      for (std::size_t i = 0; i < n; ++i) {
        s.row(static_cast<Eigen::Index>(i)) = ens.trajectories[i].states[k].transpose();
      }
      states.push_back(std::move(s));
    }
  }

  write_trajectory_header(ctx.trajectories, mu.dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < sweep.size(); ++s) {
      ctx.trajectories << i << ',' << fmt(sweep[s]);
      for (int j = 0; j < mu.dim(); ++j) {
        ctx.trajectories << ',' << fmt(states[s](static_cast<Eigen::Index>(i), j));
      }
      ctx.trajectories << '\n';
    }
  }

  ctx.diagnostics << "t_min,delta,neighborhood_mass,mean_distance_to_support\n";
  std::vector<double> masses;
  for (std::size_t s = 0; s < sweep.size(); ++s) {
    const double mass = neighborhood_mass(states[s], mu, delta);
    double mean_dist = 0.0;
    for (Eigen::Index r = 0; r < states[s].rows(); ++r) {
      mean_dist += dist_to_support(mu, states[s].row(r).transpose());
    }
    mean_dist /= static_cast<double>(states[s].rows());
    masses.push_back(mass);
    ctx.diagnostics << fmt(sweep[s]) << ',' << fmt(delta) << ',' << fmt(mass) << ','
                    << fmt(mean_dist) << '\n';
  }
  double worst_step = std::numeric_limits<double>::infinity();
  for (std::size_t s = 1; s < masses.size(); ++s) {
    worst_step = std::min(worst_step, masses[s] - masses[s - 1]);
  }
  const json note = {
      {"estimator",
       "fraction of samples within delta of the atoms, used in place of a 95% level region"},
      {"t_min", sweep},
      {"mass", masses},
      {"sweep", "states recorded at each t_min node of one run to the smallest t_min"}};
  if (masses.size() > 1) {
    ctx.claims.push_back(make_claim("fig2.mass_monotone",
                                    "neighborhood mass does not decrease as t_min decreases",
                                    worst_step, ">=", 0.0, note));
  }
  ctx.claims.push_back(make_claim("fig2.mass_final", "neighborhood mass at the smallest t_min",
                                  masses.back(), ">=", o["mass_threshold"].get<double>(), note));
}

void run_fp_energy(Context& ctx) {
  const json& cfg = ctx.cfg;
  const json& o = cfg["options"];
  const auto& mu = ctx.mu;
  const auto sched = build_schedule(cfg["schedule"]);
  const double T = sched.T;
  const double radius = mu.points().cwiseAbs().maxCoeff();
  const Grid grid = truncated_grid(radius, T, o["cells"].get<int>());
  const auto v_T = discretize_gaussian(grid, o["v_T_mean"].get<double>(),
                                       o["v_T_variance"].get<double>());
  const double slack = o["solver_slack"].get<double>();
  const auto field = ScoreField::empirical(mu);

  write_trajectory_header(ctx.trajectories, 1);
  ctx.diagnostics << "case,epsilon,p,t,norm,bound,ratio,mass_before_renormalization\n";
  for (double eps : o["epsilons"].get<std::vector<double>>()) {
    const auto sol = solve_backward_fp(field, v_T, sched, eps);
    for (std::size_t k = 0; k < sol.snapshots.size(); ++k) {
      std::ostringstream stem;
      stem << "energy_eps" << fmt(eps) << "_node" << (k < 10 ? "0" : "") << k;
      ctx.out.density(stem.str(), sol.snapshots[k]);
    }
    for (double p : o["p_values"].get<std::vector<double>>()) {
      const double base = lp_norm(v_T, p);
      const double exponent = mu.dim() * (1.0 + eps) * (p - 1.0) / (2.0 * p);
      double worst = 0.0;
      for (std::size_t k = 0; k < sol.snapshots.size(); ++k) {
        const auto& snap = sol.snapshots[k];
        const double norm = lp_norm(snap, p);
        const double bound = std::pow(T / snap.time, exponent) * base;
        worst = std::max(worst, norm / bound);
        ctx.diagnostics << "gaussian," << fmt(eps) << ',' << fmt(p) << ',' << fmt(snap.time) << ','
                        << fmt(norm) << ',' << fmt(bound) << ',' << fmt(norm / bound) << ','
                        << fmt(sol.mass_before_renormalization[k]) << '\n';
      }
      ctx.claims.push_back(make_claim(
          "energy.eps" + fmt(eps) + "_p" + fmt(p),
          "||v(t)||_p <= (T/t)^{d(1+eps)(p-1)/(2p)} ||v_T||_p times the solver slack at every node",
          worst, "<=", slack, {{"epsilon", eps}, {"p", p}, {"exponent", exponent}}));
    }
  }

  // Sharpness: v_T = u(T) with eps = 0 reproduces the heat flow, whose L2 norm grows like t^{-1/4}.
  const auto u_T = discretize_heat_solution(grid, mu, T);
  const auto sol = solve_backward_fp(field, u_T, sched, 0.0);
  const double base = lp_norm(u_T, 2.0);
  const double factor = o["sharpness_factor"].get<double>();
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& snap : sol.snapshots) {
    const double norm = lp_norm(snap, 2.0);
    const double floor = factor * std::pow(T / snap.time, 0.25) * base;
    ctx.diagnostics << "heat,0,2," << fmt(snap.time) << ',' << fmt(norm) << ',' << fmt(floor)
                    << ',' << fmt(norm / floor) << ",\n";
    if (snap.time <= 10.0 * sched.t_min * (1.0 + 1e-12)) worst = std::min(worst, norm / floor);
  }
  ctx.claims.push_back(make_claim(
      "energy.sharpness",
      "with v_T = u(T) and eps = 0, ||v(t)||_2 >= factor (T/t)^{1/4} ||v_T||_2 over the last decade",
      worst, ">=", 1.0, {{"factor", factor}}));
}

void run_kl(Context& ctx) {
  const json& cfg = ctx.cfg;
  const json& o = cfg["options"];
  const auto& mu = ctx.mu;
  const auto sched = build_schedule(cfg["schedule"]);
  const double radius = mu.points().cwiseAbs().maxCoeff();
  const Grid grid = truncated_grid(radius, sched.T, o["cells"].get<int>());
  const auto v_T = discretize_gaussian(grid, o["v_T_mean"].get<double>(),
                                       o["v_T_variance"].get<double>());
  const double eps = o["noise_epsilon"].get<double>();

  write_trajectory_header(ctx.trajectories, 1);
  ctx.diagnostics << "case,epsilon,t,kl,fisher,score_mismatch\n";
  auto record = [&](const std::string& name, double e, const KlIdentityReport& rep) {
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
      ctx.diagnostics << name << ',' << fmt(e) << ',' << fmt(rep.times[k]) << ','
                      << fmt(rep.kl[k]) << ',' << fmt(rep.fisher[k]) << ','
                      << (rep.score_mismatch.empty() ? "" : fmt(rep.score_mismatch[k])) << '\n';
    }
  };

  const auto noisy = kl_identity_residual(mu, v_T, sched, eps);
  record("exact", eps, noisy);
  for (std::size_t k = 0; k < noisy.solution.snapshots.size(); ++k) {
    std::ostringstream stem;
    stem << "kl_eps" << fmt(eps) << "_node" << (k < 10 ? "0" : "") << k;
    ctx.out.density(stem.str(), noisy.solution.snapshots[k]);
  }
  ctx.claims.push_back(make_claim("kl.monotone",
                                  "KL(v(t1)||u(t1)) <= KL(v(t2)||u(t2)) + tol for t1 <= t2",
                                  noisy.worst_monotonicity_violation, "<=",
                                  o["monotonicity_tolerance"].get<double>(), {{"epsilon", eps}}));
  ctx.claims.push_back(make_claim(
      "kl.identity", "per-interval |dKL - eps int Fisher dt| relative to the total KL change",
      noisy.worst_relative_residual, "<=", o["identity_tolerance"].get<double>(),
      {{"epsilon", eps}, {"total_change", noisy.total_change}}));

  const auto flat = kl_identity_residual(mu, v_T, sched, 0.0);
  record("exact", 0.0, flat);
  ctx.claims.push_back(make_claim("kl.conserved", "eps = 0 keeps KL constant (relative drift)",
                                  flat.max_relative_drift, "<=",
                                  o["drift_tolerance"].get<double>(), {{"kl_T", flat.kl.front()}}));

  const double scale = o["candidate_scale"].get<double>();
  if (scale != 1.0) {
    const auto candidate = make_candidate(ScoreField::empirical(mu), ScaleBy{scale});
    const auto mis = kl_identity_residual(mu, v_T, sched, eps, candidate);
    record("scaled", eps, mis);
    const double smallest = *std::min_element(mis.score_mismatch.begin(), mis.score_mismatch.end());
    ctx.claims.push_back(make_claim("kl.score_mismatch_positive",
                                    "int |s - s_theta|^2 u dx is positive at every node for a "
                                    "scaled candidate",
                                    smallest, ">", 0.0, {{"scale", scale}}));
  }
}

void run_losses(Context& ctx) {
  const json& cfg = ctx.cfg;
  const json& o = cfg["options"];
  const auto& mu = ctx.mu;
  const auto sample = sample_pairs(mu, cfg["schedule"]["T"].get<double>(),
                                   o["n_pairs"].get<std::size_t>(), cfg["seed"].get<Seed>(),
                                   o["t_floor"].get<double>());
  const auto base = ScoreField::empirical(mu);
  const double lambda = o["lambda"].get<double>();
  const auto scales = o["scales"].get<std::vector<double>>();

  write_trajectory_header(ctx.trajectories, mu.dim());
  ctx.diagnostics << "scale,objective,lambda,value,std_error\n";
  bool bitwise_ddpm = true;
  bool bitwise_penalized = true;
  double best_scale = scales.front();
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<double> gap_mean;
  std::vector<double> gap_se;
  for (double c : scales) {
    const auto cand = make_candidate(base, ScaleBy{c});
    const auto sm = score_matching_loss(cand, mu, sample);
    const auto dd = ddpm_loss(cand, mu, sample);
    const auto hy = hyvarinen_loss(cand, mu, sample);
    const auto p0 = penalized_loss(cand, mu, 0.0, sample);
    const auto pl = penalized_loss(cand, mu, lambda, sample);
    for (const auto* est : {&sm, &dd, &hy, &p0, &pl}) {
      ctx.diagnostics << fmt(c) << ',' << to_string(est->objective) << ',' << fmt(est->lambda)
                      << ',' << fmt(est->value) << ',' << fmt(est->std_error) << '\n';
    }
    bitwise_ddpm = bitwise_ddpm && sm.value == dd.value;
    bitwise_penalized = bitwise_penalized && sm.value == p0.value;
    if (sm.value < best_value) {
      best_value = sm.value;
      best_scale = c;
    }
    const auto a = loss_integrands(cand, mu, sample, Objective::ScoreMatching);
    const auto b = loss_integrands(cand, mu, sample, Objective::Hyvarinen);
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(a.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
    const double span = sample.T - sample.t_floor;
    gap_mean.push_back(span * mean);
    gap_se.push_back(span * std::sqrt(ss / static_cast<double>(a.size() - 1) /
                                      static_cast<double>(a.size())));
  }
  double worst_gap = 0.0;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    for (std::size_t j = i + 1; j < scales.size(); ++j) {
      const double pooled = std::sqrt(gap_se[i] * gap_se[i] + gap_se[j] * gap_se[j]);
      worst_gap = std::max(worst_gap, std::abs(gap_mean[i] - gap_mean[j]) / (3.0 * pooled));
    }
  }
  ctx.claims.push_back(make_claim("losses.sm_equals_ddpm",
                                  "score matching and DDPM losses agree bitwise on common pairs",
                                  bitwise_ddpm ? 1.0 : 0.0, "==", 1.0));
  ctx.claims.push_back(make_claim("losses.hyvarinen_shift",
                                  "SM - Hyvarinen differences across candidates, in units of 3 "
                                  "pooled standard errors",
                                  worst_gap, "<=", 1.0, {{"gaps", gap_mean}, {"std_errors", gap_se}}));
  ctx.claims.push_back(make_claim("losses.penalized_lambda0",
                                  "penalized loss with lambda = 0 equals score matching bitwise",
                                  bitwise_penalized ? 1.0 : 0.0, "==", 1.0));
  ctx.claims.push_back(make_claim("losses.minimizer", "scale minimizing the score-matching loss",
                                  best_scale, "==", 1.0, {{"scales", scales}}));
}

void run_rates(Context& ctx) {
  const json& cfg = ctx.cfg;
  const json& o = cfg["options"];
  const auto& mu = ctx.mu;
  const auto sched = build_schedule(cfg["schedule"]);
  const auto n = cfg["n_trajectories"].get<std::size_t>();
  const auto field = ScoreField::empirical(mu);
  const auto ens = simulate(field, build_init(cfg["init"]), sched, 0.0, n,
                            cfg.value("seed", Seed{0}), {});
  const auto geom = support_geometry(mu);
  const auto range = o["alpha_range"].get<std::vector<double>>();
  const double limit_factor = o["limit_factor"].get<double>();

  io::write_trajectory_csv(ctx.trajectories, ens.trajectories);
  write_path_diagnostics_header(ctx.diagnostics, mu.dim());
  double alpha_lo = std::numeric_limits<double>::infinity();
  double alpha_hi = -std::numeric_limits<double>::infinity();
  double worst_limit = 0.0;
  double worst_hull = -std::numeric_limits<double>::infinity();
  std::size_t generic = 0;
  std::size_t bisectors = 0;
  std::size_t core_ok = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = analyze_path(ens.trajectories[i], mu, geom, o["bisector_tolerance"].get<double>());
    write_path_diagnostics_row(ctx.diagnostics, i, ens.initial_states[i], r);
    worst_hull = std::max(worst_hull, r.hull.worst_violation - r.hull.slack);
    if (r.bisector) {
      ++bisectors;
      continue;
    }
    ++generic;
    if (r.claim2.invariant) ++core_ok;
    if (r.fit && !r.fit->exact_hit) {
      alpha_lo = std::min(alpha_lo, r.fit->alpha);
      alpha_hi = std::max(alpha_hi, r.fit->alpha);
      worst_limit = std::max(worst_limit,
                             r.limit_distance / (limit_factor * r.fit->C * std::sqrt(sched.t_min)));
    } else if (r.limit_distance > 1e-14) {
      worst_limit = std::numeric_limits<double>::infinity();
    }
  }
  const json counts = {{"generic", generic}, {"bisector", bisectors}};
  ctx.claims.push_back(make_claim("rates.alpha_min", "smallest fitted exponent", alpha_lo, ">=",
                                  range[0], counts));
  ctx.claims.push_back(make_claim("rates.alpha_max", "largest fitted exponent", alpha_hi, "<=",
                                  range[1], counts));
  ctx.claims.push_back(make_claim(
      "rates.limit_is_atom",
      "distance to the limit atom at t_min over limit_factor C sqrt(t_min), worst path",
      worst_limit, "<=", 1.0, counts));
  ctx.claims.push_back(make_claim("rates.hull_rate",
                                  "d(X_t, K) <= d(x_T, K) sqrt(t/T) + slack on every path",
                                  worst_hull, "<=", 0.0));
  ctx.claims.push_back(make_claim("rates.core_invariance",
                                  "generic paths enter the core of their limit atom and stay",
                                  static_cast<double>(core_ok), ">=", static_cast<double>(generic)));
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"fig1-score-profile", "fig3-separatrix",
                                                 "fig2-lemniscate",    "fp-energy",
                                                 "kl-contraction",     "losses",
                                                 "rates"};
  return names;
}

ValidationReport validate(const nlohmann::json& config, const std::filesystem::path& base_dir) {
  return Resolver(config, base_dir).resolve();
}

nlohmann::json to_json(const Claim& claim) {
  return {{"id", claim.id},
          {"description", claim.description},
          {"measured", claim.measured},
          {"bound", claim.bound},
          {"relation", claim.relation},
          {"pass", claim.pass},
          {"details", claim.details}};
}

RunResult run(const nlohmann::json& config, const std::filesystem::path& output_dir,
              const std::filesystem::path& base_dir) {
  RunResult result;
  const auto report = validate(config, base_dir);
  if (!report.ok()) {
    result.exit_code = kInvalidConfig;
    result.findings = report.findings;
    return result;
  }
  const json& cfg = report.resolved;
  OutputWriter out(output_dir);
  json manifest = {{"tool", "scoreflow"},
                   {"version", kVersion},
                   {"experiment", cfg["experiment"]},
                   {"config", cfg}};
  try {
    Context ctx{cfg, build_measure(cfg["measure"], base_dir), out, result.claims, {}, {}};
    const std::string exp = cfg["experiment"].get<std::string>();
    if (exp == "fig1-score-profile") run_fig1(ctx);
    else if (exp == "fig3-separatrix") run_fig3(ctx);
    else if (exp == "fig2-lemniscate") run_fig2(ctx);
    else if (exp == "fp-energy") run_fp_energy(ctx);
    else if (exp == "kl-contraction") run_kl(ctx);
    else if (exp == "losses") run_losses(ctx);
    else run_rates(ctx);

    out.open("trajectories.csv") << ctx.trajectories.str();
    out.open("diagnostics.csv") << ctx.diagnostics.str();
    manifest["measure_atoms"] = ctx.mu.size();
    manifest["measure_dim"] = ctx.mu.dim();
  } catch (const NumericalError& e) {
    result.exit_code = kNumericalFailure;
    result.error = e.what();
    manifest["error"] = e.what();
  } catch (const std::invalid_argument& e) {
    result.exit_code = kInvalidConfig;
    result.findings.push_back(e.what());
    return result;
  }

  bool all_pass = result.exit_code == kSuccess;
  json claims = json::array();
  for (const auto& c : result.claims) {
    claims.push_back(to_json(c));
    all_pass = all_pass && c.pass;
  }
  out.open("claims.json") << json{{"experiment", cfg["experiment"]},
                                  {"all_pass", all_pass},
                                  {"claims", claims}}
                                 .dump(2)
                          << '\n';
  if (result.exit_code == kSuccess && !all_pass) result.exit_code = kClaimFailed;
  manifest["exit_code"] = result.exit_code;
  std::vector<std::string> files(out.files().begin(), out.files().end());
  files.push_back("manifest.json");
  std::sort(files.begin(), files.end());
  manifest["outputs"] = files;
  out.open("manifest.json") << manifest.dump(2) << '\n';
  return result;
}

nlohmann::json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
}

}  // namespace scoreflow::experiments
