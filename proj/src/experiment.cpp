#include "fbmrds/experiment.hpp"

#include "fbmrds/gronwall.hpp"

#include <boost/version.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fbmrds {

namespace fs = std::filesystem;

namespace {

// Reads keys of one JSON object with defaults and rejects keys it was not asked about.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw std::invalid_argument(where_ + ": expected an object");
  }
  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (j_.contains(key)) {
      try {
        out = j_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw std::invalid_argument(where_ + "." + key + ": " + e.what());
      }
    }
  }
  void get_opt(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    if (j_.contains(key) && !j_.at(key).is_null()) {
      if (!j_.at(key).is_number()) throw std::invalid_argument(where_ + "." + key + ": expected a number or null");
      out = j_.at(key).get<double>();
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw std::invalid_argument(where_ + ": unknown key '" + k + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "config");
  r.get("schema_version", c.schema_version);
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  if (const json* h = r.child("holder")) {
    ObjectReader q(*h, "holder");
    q.get("beta", c.holder.beta);
    q.get("beta_prime", c.holder.beta_prime);
    q.get("beta_dprime", c.holder.beta_dprime);
    q.get("H", c.holder.H);
    q.get("alpha", c.holder.alpha);
    q.finish();
  }
  if (const json* f = r.child("fbm")) {
    ObjectReader q(*f, "fbm");
    q.get("t0", c.fbm.t0);
    q.get("t1", c.fbm.t1);
    q.get("steps", c.fbm.steps);
    q.get("trace_q", c.fbm.trace_q);
    q.get("q_decay", c.fbm.q_decay);
    q.finish();
  }
  if (const json* o = r.child("operator")) {
    ObjectReader q(*o, "operator");
    q.get("n", c.op.n);
    q.get("scale", c.op.scale);
    if (const json* ev = q.child("eigenvalues")) {
      if (ev->is_string()) {
        c.op.eigenvalues = ev->get<std::string>();
      } else if (ev->is_array()) {
        c.op.eigenvalues = "list";
        c.op.list = ev->get<std::vector<double>>();
      } else {
        throw std::invalid_argument("operator.eigenvalues: expected \"squares\" or a list");
      }
    }
    if (const json* g = q.child("G")) {
      ObjectReader gq(*g, "operator.G");
      gq.get("kind", c.op.g_kind);
      gq.get("amplitude", c.op.amplitude);
      gq.get("phase", c.op.phase);
      gq.get("g_decay", c.op.g_decay);
      gq.get("d_decay", c.op.d_decay);
      gq.finish();
    }
    q.finish();
  }
  if (const json* s = r.child("stopping")) {
    ObjectReader q(*s, "stopping");
    q.get("mu", c.stopping.mu);
    q.get("bisect_tol", c.stopping.bisect_tol);
    q.finish();
  }
  if (const json* s = r.child("solver")) {
    ObjectReader q(*s, "solver");
    q.get("max_iters", c.solver.max_iters);
    q.get("fp_tol", c.solver.fp_tol);
    q.get("rho", c.solver.rho);
    q.get("auto_rho", c.solver.auto_rho);
    q.get("rho_cap", c.solver.rho_cap);
    q.get("contraction_target", c.solver.contraction_target);
    std::string space = c.solver.initial_space == InitialSpace::V ? "V" : "V_beta";
    q.get("initial_space", space);
    if (space == "V") c.solver.initial_space = InitialSpace::V;
    else if (space == "V_beta") c.solver.initial_space = InitialSpace::Vbeta;
    else throw std::invalid_argument("solver.initial_space: expected \"V\" or \"V_beta\"");
    q.finish();
  }
  if (const json* a = r.child("attractor")) {
    ObjectReader q(*a, "attractor");
    q.get_opt("mu", c.attractor.mu);
    q.get_opt("c", c.attractor.c);
    q.get("nu", c.attractor.nu);
    q.get("mu_condition_target", c.attractor.mu_condition_target);
    q.get("calibration_intervals", c.attractor.calibration_intervals);
    q.get("growth_paths", c.attractor.growth_paths);
    q.get("growth_window", c.attractor.growth_window);
    q.get("depths", c.attractor.depths);
    q.get("ensemble", c.attractor.ensemble);
    q.get("fallback_radius", c.attractor.fallback_radius);
    q.get("tail_terms", c.attractor.tail_terms);
    q.get("invariance_probe", c.attractor.invariance_probe);
    q.finish();
  }
  r.finish();
  c.stopping.beta_prime = c.holder.beta_prime;
  c.stopping.beta_dprime = c.holder.beta_dprime;
  if (c.attractor.mu) c.stopping.mu = *c.attractor.mu;
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["holder"] = {{"beta", c.holder.beta}, {"beta_prime", c.holder.beta_prime}, {"beta_dprime", c.holder.beta_dprime},
                 {"H", c.holder.H}, {"alpha", c.holder.alpha}};
  j["fbm"] = {{"t0", c.fbm.t0}, {"t1", c.fbm.t1}, {"steps", c.fbm.steps}, {"trace_q", c.fbm.trace_q},
              {"q_decay", c.fbm.q_decay}};
  json ev = c.op.eigenvalues == "list" ? json(c.op.list) : json(c.op.eigenvalues);
  j["operator"] = {{"n", c.op.n},
                   {"scale", c.op.scale},
                   {"eigenvalues", ev},
                   {"G", {{"kind", c.op.g_kind}, {"amplitude", c.op.amplitude}, {"phase", c.op.phase},
                          {"g_decay", c.op.g_decay}, {"d_decay", c.op.d_decay}}}};
  j["stopping"] = {{"mu", c.stopping.mu}, {"bisect_tol", c.stopping.bisect_tol}};
  j["solver"] = {{"max_iters", c.solver.max_iters},
                 {"fp_tol", c.solver.fp_tol},
                 {"rho", c.solver.rho},
                 {"auto_rho", c.solver.auto_rho},
                 {"rho_cap", c.solver.rho_cap},
                 {"contraction_target", c.solver.contraction_target},
                 {"initial_space", c.solver.initial_space == InitialSpace::V ? "V" : "V_beta"}};
  j["attractor"] = {{"mu", opt_json(c.attractor.mu)},
                    {"c", opt_json(c.attractor.c)},
                    {"nu", c.attractor.nu},
                    {"mu_condition_target", c.attractor.mu_condition_target},
                    {"calibration_intervals", c.attractor.calibration_intervals},
                    {"growth_paths", c.attractor.growth_paths},
                    {"growth_window", c.attractor.growth_window},
                    {"depths", c.attractor.depths},
                    {"ensemble", c.attractor.ensemble},
                    {"fallback_radius", c.attractor.fallback_radius},
                    {"tail_terms", c.attractor.tail_terms},
                    {"invariance_probe", c.attractor.invariance_probe}};
  return j;
}

std::string read_text(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + file);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_text(const std::string& file, const std::string& text) {
  const fs::path p(file);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + file);
  os << text;
}

ExperimentConfig load_config(const std::string& file) {
  json j;
  try {
    j = json::parse(read_text(file));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + file + ": " + e.what());
  }
  return config_from_json(j);
}

bool has_errors(const std::vector<Finding>& f) {
  return std::any_of(f.begin(), f.end(), [](const Finding& x) { return x.severity == "error"; });
}

std::vector<Finding> validate_config(const ExperimentConfig& c) {
  std::vector<Finding> out;
  auto error = [&](std::string m) { out.push_back({"error", std::move(m)}); };
  auto warn = [&](std::string m) { out.push_back({"warning", std::move(m)}); };
  auto guarded = [&](const std::function<void()>& f) {
    try {
      f();
    } catch (const std::exception& e) {
      error(e.what());
    }
  };
  if (c.schema_version != kSchemaVersion) error("schema_version must be " + std::to_string(kSchemaVersion));
  guarded([&] { c.holder.validate(); });
  guarded([&] { make_fbm_config(c, c.seed).validate(); });
  if (!(c.fbm.trace_q > 0.0)) error("fbm.trace_q must be positive");
  if (c.fbm.t1 < 1.0) error("fbm.t1 must be >= 1 (forward stopping times need a unit horizon)");
  guarded([&] { make_operator(c.op); });
  if (c.op.g_kind != "zero" && c.op.g_kind != "constant" && c.op.g_kind != "sine")
    error("operator.G.kind must be one of zero, constant, sine");
  guarded([&] { c.stopping.validate(); });
  guarded([&] { c.solver.validate(); });

  const AttractorSpec& a = c.attractor;
  if (a.mu && !(*a.mu > 0.0)) error("attractor.mu must be positive");
  if (a.c && !(*a.c > 0.0)) error("attractor.c must be positive");
  if (!(a.nu >= 0.0)) error("attractor.nu must be non-negative");
  if (!(a.mu_condition_target > 1.0)) error("attractor.mu_condition_target must exceed 1");
  else if ((a.mu_condition_target - 1.0) / a.mu_condition_target < 0.1)
    warn("mu condition target leaves a margin below 10%");
  if (a.depths.empty() || *std::min_element(a.depths.begin(), a.depths.end()) < 1)
    error("attractor.depths must be a non-empty list of positive integers");
  if (a.ensemble < 1) error("attractor.ensemble must be >= 1");
  if (a.calibration_intervals < 1) error("attractor.calibration_intervals must be >= 1");
  if (a.growth_paths < 1) error("attractor.growth_paths must be >= 1");
  if (a.growth_window < 2) error("attractor.growth_window must be >= 2");
  if (!(a.fallback_radius > 0.0)) error("attractor.fallback_radius must be positive");
  if (a.tail_terms < 0) error("attractor.tail_terms must be non-negative");
  if (!a.depths.empty()) {
    const int dmax = *std::max_element(a.depths.begin(), a.depths.end());
    if (-c.fbm.t0 < dmax + 1.0) error("fbm.t0 must reach back past the deepest pullback depth (t0 <= -(depth + 1))");
  }
  if (-c.fbm.t0 < a.growth_window + 1.0) error("fbm.t0 must reach back past the growth window");
  if (a.mu && a.c) {
    const double cm = *a.c * *a.mu;
    if (!(cm < 1.0)) {
      error("c * mu must be < 1");
    } else {
      const double lambda1 = c.op.scale * (c.op.eigenvalues == "list" && !c.op.list.empty() ? c.op.list.front() : 1.0);
      const double margin = mu_condition_margin(cm / (1.0 - cm), lambda1);
      if (margin <= 0.0) error("mu condition -(2/lambda1) log k1 > 1 fails for the given c and mu");
      else if (margin < 0.1) warn("mu condition margin below 10%");
    }
  }
  return out;
}

SpectralOperator make_operator(const OperatorSpec& op) {
  if (op.n < 1) throw std::invalid_argument("operator.n must be >= 1");
  if (!(op.scale > 0.0)) throw std::invalid_argument("operator.scale must be positive");
  if (op.eigenvalues == "squares") return SpectralOperator(op.scale * SpectralOperator::squares(op.n).lambda());
  if (op.eigenvalues == "list") {
    if (op.list.size() != op.n) throw std::invalid_argument("operator.eigenvalues list must have n entries");
    return SpectralOperator(op.scale * Eigen::Map<const Vector>(op.list.data(), static_cast<Eigen::Index>(op.list.size())));
  }
  throw std::invalid_argument("operator.eigenvalues must be \"squares\" or a list");
}

NonlinearityG make_nonlinearity(const OperatorSpec& op) {
  if (op.g_kind == "zero") return NonlinearityG::zero(op.n);
  if (op.g_kind == "sine") return NonlinearityG::sine(op.n, op.amplitude, op.phase, op.g_decay, op.d_decay);
  if (op.g_kind == "constant") {
    Matrix K(static_cast<Eigen::Index>(op.n), static_cast<Eigen::Index>(op.n));
    for (Eigen::Index i = 0; i < K.rows(); ++i)
      for (Eigen::Index j = 0; j < K.cols(); ++j)
        K(i, j) = op.amplitude * std::pow(static_cast<double>(i + 1), -op.g_decay) *
                  std::pow(static_cast<double>(j + 1), -op.d_decay);
    return NonlinearityG::constant(K);
  }
  throw std::invalid_argument("unknown nonlinearity kind '" + op.g_kind + "'");
}

FbmConfig make_fbm_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  FbmConfig f;
  f.H = cfg.holder.H;
  f.t0 = cfg.fbm.t0;
  f.dt = cfg.dt();
  f.m = cfg.fbm.steps;
  f.seed = seed;
  return f;
}

TraceClassQ make_q(const ExperimentConfig& cfg) {
  return TraceClassQ::power_law(cfg.op.n, cfg.fbm.trace_q, cfg.fbm.q_decay);
}

DiscretePath sample_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  return sample_fbm_hilbert(make_fbm_config(cfg, seed), make_q(cfg));
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("output_dir");
  return hex64(fnv1a64(j.dump()));
}

bool RunManifest::ok() const {
  return std::all_of(stages.begin(), stages.end(),
                     [](const StageRecord& s) { return s.status == "ok" || s.status == "skipped"; });
}

const StageRecord* RunManifest::stage(const std::string& name) const {
  for (const auto& s : stages)
    if (s.name == name) return &s;
  return nullptr;
}

json manifest_to_json(const RunManifest& m) {
  json st = json::array();
  for (const auto& s : m.stages) {
    json e = {{"name", s.name}, {"status", s.status}, {"hash", s.hash}, {"inputs", s.inputs}, {"artifacts", s.artifacts}};
    if (!s.error.empty()) e["error"] = s.error;
    st.push_back(e);
  }
  return {{"schema_version", kSchemaVersion}, {"config_hash", m.config_hash}, {"config", m.config},
          {"seeds", m.seeds},  {"stages", st},  {"artifacts", m.artifacts},
          {"versions", m.versions}, {"output_dir", m.output_dir}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.config = j.at("config");
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& e : j.at("stages")) {
    StageRecord s;
    s.name = e.at("name").get<std::string>();
    s.status = e.at("status").get<std::string>();
    s.hash = e.at("hash").get<std::string>();
    s.inputs = e.at("inputs").get<std::vector<std::string>>();
    s.artifacts = e.at("artifacts").get<std::vector<std::string>>();
    if (e.contains("error")) s.error = e.at("error").get<std::string>();
    m.stages.push_back(std::move(s));
  }
  m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
  m.versions = j.at("versions");
  m.output_dir = j.at("output_dir").get<std::string>();
  return m;
}

RunManifest load_manifest(const std::string& file) { return manifest_from_json(json::parse(read_text(file))); }

std::string resolve_output_dir(const std::string& dir) {
  const char* root = std::getenv("FBMRDS_OUTPUT_ROOT");
  fs::path p(dir);
  if (root && *root && p.is_relative()) p = fs::path(root) / p;
  return p.lexically_normal().string();
}

// ---------------------------------------------------------------------------------------------------------------
// Stage building blocks

Calibration calibrate(const ExperimentConfig& cfg, const DiscretePath& w) {
  const SpectralOperator S = make_operator(cfg.op);
  const NonlinearityG G = make_nonlinearity(cfg.op);
  const double lambda1 = S.lambda1();
  const Vector u0 = sample_ball(cfg.op.n, 1, cfg.attractor.fallback_radius, derive_seed(cfg.seed, 2)).front();

  std::vector<NonlinearityG> suite{NonlinearityG::zero(cfg.op.n)};
  OperatorSpec cop = cfg.op;
  cop.g_kind = "constant";
  suite.push_back(make_nonlinearity(cop));
  if (cfg.op.g_kind == "sine") suite.push_back(G);

  auto measure = [&](double mu) {
    StoppingParams sp = cfg.stopping;
    sp.mu = mu;
    double c = 0.0;
    for (const NonlinearityG& g : suite) {
      CocycleSystem sys(w, S, g, cfg.holder, sp, cfg.solver, 0, cfg.attractor.calibration_intervals);
      const int I = sys.sequence().i_max;
      if (I < 1) throw std::runtime_error("calibration: no forward stopping interval fits the path");
      c = std::max(c, calibrate_interval_constant(sys, I, 0, u0));
    }
    return c;
  };

  Calibration cal;
  cal.mu_initial = cfg.attractor.mu.value_or(cfg.stopping.mu);
  if (cfg.attractor.c) {
    cal.c_initial = cal.c = *cfg.attractor.c;
  } else {
    cal.c_initial = cal.c = measure(cal.mu_initial);
  }
  if (cfg.attractor.mu) {
    cal.mu = *cfg.attractor.mu;
  } else {
    cal.mu_derived = true;
    cal.mu = mu_for_margin(cal.c, lambda1, cfg.attractor.mu_condition_target);
    if (!cfg.attractor.c) {
      // The interval ratios depend on mu through the stopping times; re-measure once at the chosen mu.
      cal.c = std::max(cal.c, measure(cal.mu));
      cal.mu = mu_for_margin(cal.c, lambda1, cfg.attractor.mu_condition_target);
    }
  }

  StoppingParams sp = cfg.stopping;
  sp.mu = cal.mu;
  std::vector<DiscretePath> ens;
  for (std::size_t k = 0; k < cfg.attractor.growth_paths; ++k) ens.push_back(sample_path(cfg, derive_seed(cfg.seed, 100 + k)));
  GrowthSettings gs;
  gs.nu = cfg.attractor.nu;
  gs.lambda1 = lambda1;
  gs.c = cal.c;
  gs.beta = cfg.holder.beta;
  gs.window = cfg.attractor.growth_window;
  cal.growth = growth_rate_estimate(ens, sp, gs);
  cal.constants = AbsorbConstants::make(cal.c, cal.mu, cfg.attractor.nu, cal.growth.d_proxy, lambda1);
  cal.mu_condition_margin = mu_condition_margin(cal.constants.k1, lambda1);
  return cal;
}

json calibration_to_json(const Calibration& cal) {
  const GrowthReport& g = cal.growth;
  const AbsorbConstants& k = cal.constants;
  return {{"c", cal.c},
          {"c_initial", cal.c_initial},
          {"mu", cal.mu},
          {"mu_initial", cal.mu_initial},
          {"mu_derived", cal.mu_derived},
          {"mu_condition_margin", cal.mu_condition_margin},
          {"constants",
           {{"c", k.c}, {"mu", k.mu}, {"nu", k.nu}, {"d", k.d}, {"lambda1", k.lambda1}, {"k0", k.k0}, {"k1", k.k1},
            {"k2", k.k2}, {"series_ratio", k.series_ratio()}}},
          {"feasibility",
           {{"mu_condition", k.mu_condition}, {"smallness", k.smallness}, {"growth_condition", k.growth_condition},
            {"absorbing_series_converges", k.series_ratio() < 1.0}}},
          {"growth",
           {{"d_mc", g.d_mc}, {"d_inverse_mc", g.d_inverse_mc}, {"d_proxy", g.d_proxy}, {"d_hat", g.d_hat},
            {"d_check", g.d_check}, {"mean_step", g.mean_step}, {"subexp_slope", g.subexp_slope},
            {"subexp_slope_se", g.subexp_slope_se}, {"smallness_mc", g.smallness_mc},
            {"smallness_proxy", g.smallness_proxy}, {"growth_mc", g.growth_mc}, {"growth_proxy", g.growth_proxy},
            {"window", g.window}, {"paths", g.paths}}}};
}

AbsorbConstants constants_from_json(const json& j) {
  const json& k = j.at("constants");
  return AbsorbConstants::make(k.at("c").get<double>(), k.at("mu").get<double>(), k.at("nu").get<double>(),
                               k.at("d").get<double>(), k.at("lambda1").get<double>());
}

json stopping_report(const DiscretePath& w, const StoppingParams& sp, int i_min, int i_max) {
  const StoppingSequence seq = stopping_sequence(w, sp, i_min, i_max);
  json times = json::object();
  for (int i = seq.i_min; i <= seq.i_max; ++i) times[std::to_string(i)] = seq.at(i);
  double min_step = 1.0, max_step = 0.0;
  for (int i = seq.i_min; i < seq.i_max; ++i) {
    const double s = seq.at(i + 1) - seq.at(i);
    min_step = std::min(min_step, s);
    max_step = std::max(max_step, s);
  }
  json rep = {{"times", times},
              {"i_min", seq.i_min},
              {"i_max", seq.i_max},
              {"requested", {i_min, i_max}},
              {"truncated", seq.truncated},
              {"params", {{"mu", sp.mu}, {"beta_prime", sp.beta_prime}, {"beta_dprime", sp.beta_dprime},
                          {"bisect_tol", sp.bisect_tol}}},
              {"min_step", min_step},
              {"max_step", max_step}};
  if (w.t0() <= -1.0 + 1e-12 && w.t_end() >= 0.0) {
    const CountingReport cr = counting_bound_check(w, sp);
    rep["counting"] = {{"N", cr.N}, {"seminorm", cr.seminorm}, {"bound", cr.bound}, {"holds", cr.holds}};
  }
  return rep;
}

namespace {

void write_cloud_csv(const std::string& file, const FiniteSet& X) {
  std::ostringstream os;
  os.precision(17);
  os << "i";
  const std::size_t n = X.empty() ? 0 : static_cast<std::size_t>(X.front().size());
  for (std::size_t j = 0; j < n; ++j) os << ",v" << j;
  os << "\n";
  for (std::size_t k = 0; k < X.size(); ++k) {
    os << k;
    for (Eigen::Index j = 0; j < X[k].size(); ++j) os << "," << X[k][j];
    os << "\n";
  }
  write_text(file, os.str());
}

}  // namespace

json pullback_report_json(const PullbackReport& rep, const std::string& dir, std::vector<std::string>* artifacts) {
  json depths = json::array();
  for (const auto& d : rep.depths) {
    const std::string name = "cloud_depth_" + std::to_string(d.depth) + ".csv";
    write_cloud_csv((fs::path(dir) / name).string(), d.cloud);
    if (artifacts) artifacts->push_back(name);
    depths.push_back({{"depth", d.depth},
                      {"T", d.T},
                      {"ball_radius", d.ball_radius},
                      {"diameter", d.diameter},
                      {"max_norm", d.max_norm},
                      {"semidist_prev", d.semidist_prev < 0.0 ? json(nullptr) : json(d.semidist_prev)},
                      {"invariance", d.invariance < 0.0 ? json(nullptr) : json(d.invariance)},
                      {"cloud", name}});
  }
  return {{"radius_source", rep.radius_source},
          {"series_ratio", rep.series_ratio},
          {"decay_rate", rep.decay_rate},
          {"semidist_nonincreasing", rep.semidist_nonincreasing},
          {"depths", depths}};
}

// ---------------------------------------------------------------------------------------------------------------
// Pipeline

namespace {

struct StageDef {
  std::vector<std::string> deps;
  std::vector<std::string> inputs;
};

const std::map<std::string, StageDef>& stage_defs() {
  static const std::map<std::string, StageDef> d{
      {"sample-fbm", {{}, {}}},
      {"solve", {{"sample-fbm"}, {"fbm.csv"}}},
      {"calibrate", {{"sample-fbm"}, {"fbm.csv"}}},
      {"stopping-times", {{"sample-fbm", "calibrate"}, {"fbm.csv", "calibration.json"}}},
      {"gronwall-verify", {{"calibrate", "stopping-times"}, {"calibration.json", "stopping.json"}}},
      {"attractor", {{"sample-fbm", "calibrate"}, {"fbm.csv", "calibration.json"}}},
  };
  return d;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

using StageFn = std::function<std::vector<std::string>(const ExperimentConfig&, const std::string&)>;

std::vector<std::string> stage_sample(const ExperimentConfig& cfg, const std::string& dir) {
  write_path_csv((fs::path(dir) / "fbm.csv").string(), sample_path(cfg, cfg.seed));
  return {"fbm.csv"};
}

std::vector<std::string> stage_solve(const ExperimentConfig& cfg, const std::string& dir) {
  const DiscretePath w = read_path_csv((fs::path(dir) / "fbm.csv").string());
  const SpectralOperator S = make_operator(cfg.op);
  const NonlinearityG G = make_nonlinearity(cfg.op);
  const Vector u0 = sample_ball(cfg.op.n, 1, cfg.attractor.fallback_radius, derive_seed(cfg.seed, 2)).front();
  const std::size_t i0 = w.index_of(0.0), i1 = w.index_of(1.0);
  const DiscretePath win = w.slice(i0, i1);
  const SolutionRecord sol = solve_mild(u0, win, S, G, cfg.holder, cfg.solver);
  std::ostringstream os;
  write_path_csv(os, sol.u);
  write_text((fs::path(dir) / "solution.csv").string(), os.str());
  const ContractionReport cr = contraction_probe(u0, win, S, G, cfg.holder, cfg.solver);
  json j = {{"iterations", sol.iterations}, {"residual", sol.residual},   {"rho", sol.rho},
            {"beta_norm", sol.beta_norm},   {"tilde_norm", sol.tilde_norm}, {"regime", sol.regime},
            {"history", sol.history},
            {"contraction", {{"rho", cr.rho}, {"distances", cr.distances}, {"ratios", cr.ratios},
                             {"exact_in_one_step", cr.exact_in_one_step}, {"success", cr.success},
                             {"max_ratio", cr.max_ratio}}}};
  write_text((fs::path(dir) / "solution.json").string(), dump(j));
  return {"solution.csv", "solution.json"};
}

std::vector<std::string> stage_calibrate(const ExperimentConfig& cfg, const std::string& dir) {
  const DiscretePath w = read_path_csv((fs::path(dir) / "fbm.csv").string());
  write_text((fs::path(dir) / "calibration.json").string(), dump(calibration_to_json(calibrate(cfg, w))));
  return {"calibration.json"};
}

double calibrated_mu(const std::string& dir) {
  return json::parse(read_text((fs::path(dir) / "calibration.json").string())).at("mu").get<double>();
}

std::vector<std::string> stage_stopping(const ExperimentConfig& cfg, const std::string& dir) {
  const DiscretePath w = read_path_csv((fs::path(dir) / "fbm.csv").string());
  StoppingParams sp = cfg.stopping;
  sp.mu = calibrated_mu(dir);
  const int dmax = *std::max_element(cfg.attractor.depths.begin(), cfg.attractor.depths.end());
  const int fwd = static_cast<int>(std::floor(w.t_end())) * 64;
  write_text((fs::path(dir) / "stopping.json").string(), dump(stopping_report(w, sp, -dmax, fwd)));
  return {"stopping.json"};
}

std::vector<std::string> stage_gronwall(const ExperimentConfig& cfg, const std::string& dir) {
  (void)cfg;
  const json cal = json::parse(read_text((fs::path(dir) / "calibration.json").string()));
  const json st = json::parse(read_text((fs::path(dir) / "stopping.json").string()));
  const AbsorbConstants k = constants_from_json(cal);
  GronwallInstance g;
  g.lambda = k.lambda1;
  g.v0 = 1.0;
  g.k0 = k.k0;
  g.k1 = k.k1;
  g.k2 = k.k2;
  const int i_max = st.at("i_max").get<int>();
  for (int i = 0; i <= i_max; ++i) g.t.push_back(st.at("times").at(std::to_string(i)).get<double>());
  const std::size_t I = g.t.size();
  const auto S = gronwall_bound(g, I);
  const auto Z = gronwall_oracle(g, I);
  bool dominated = true;
  for (std::size_t i = 0; i < I; ++i) dominated = dominated && leq_ulps(Z[i], S[i]);
  json j = {{"i", json::array()}, {"S", S}, {"Z", Z}, {"dominated", dominated},
            {"instance", {{"lambda", g.lambda}, {"v0", g.v0}, {"k0", g.k0}, {"k1", g.k1}, {"k2", g.k2}, {"t", g.t}}}};
  for (std::size_t i = 1; i <= I; ++i) j["i"].push_back(i);
  write_text((fs::path(dir) / "gronwall.json").string(), dump(j));
  if (!dominated) throw std::runtime_error("Gronwall dominance Z_i <= S_i failed");
  return {"gronwall.json"};
}

std::vector<std::string> stage_attractor(const ExperimentConfig& cfg, const std::string& dir) {
  const DiscretePath w = read_path_csv((fs::path(dir) / "fbm.csv").string());
  const json cal = json::parse(read_text((fs::path(dir) / "calibration.json").string()));
  const AbsorbConstants k = constants_from_json(cal);
  StoppingParams sp = cfg.stopping;
  sp.mu = k.mu;
  const int dmax = *std::max_element(cfg.attractor.depths.begin(), cfg.attractor.depths.end());
  const int back = std::max(dmax, cfg.attractor.growth_window) + cfg.attractor.tail_terms;
  CocycleSystem sys(w, make_operator(cfg.op), make_nonlinearity(cfg.op), cfg.holder, sp, cfg.solver, -back, 1);

  PullbackSettings ps;
  ps.depths = cfg.attractor.depths;
  ps.ensemble = cfg.attractor.ensemble;
  ps.seed = derive_seed(cfg.seed, 3);
  ps.fallback_radius = cfg.attractor.fallback_radius;
  ps.tail_terms = cfg.attractor.tail_terms;
  ps.invariance_probe = cfg.attractor.invariance_probe;
  const PullbackReport rep = pullback_attractor_estimate(sys, k, ps);

  std::vector<std::string> arts{"pullback.json"};
  json j = pullback_report_json(rep, dir, &arts);
  j["feasibility"] = cal.at("feasibility");
  j["constants"] = cal.at("constants");
  write_text((fs::path(dir) / "pullback.json").string(), dump(j));

  // Radius samples along the backward stopping times: absorbing radii when the series converges, otherwise the
  // step sequence |T(theta_{T_i} w)|^-beta whose growth the absorbing construction needs to be subexponential.
  const StoppingSequence& seq = sys.sequence();
  std::vector<double> t, r;
  std::string source;
  if (rep.radius_source == "absorbing") {
    source = "absorbing_radius";
    for (int i = -cfg.attractor.growth_window; i <= 0; ++i) {
      if (!seq.contains(i - 1)) continue;
      t.push_back(seq.abs_at(i - 1));
      r.push_back(absorbing_radius(seq, k, i, cfg.attractor.tail_terms).value);
    }
  } else {
    source = "step_power";
    for (int i = std::max(seq.i_min, -cfg.attractor.growth_window); i < 0; ++i) {
      t.push_back(seq.abs_at(i));
      r.push_back(std::pow(seq.abs_at(i + 1) - seq.abs_at(i), -cfg.holder.beta));
    }
  }
  const TemperednessReport tr = temperedness_check(t, r, cfg.attractor.nu);
  json tj = {{"source", source}, {"t", t}, {"radius", r}, {"slope", tr.slope}, {"slope_se", tr.slope_se},
             {"nu", tr.nu}, {"exp_growing", tr.exp_growing}, {"tempered", tr.tempered}};
  write_text((fs::path(dir) / "temperedness.json").string(), dump(tj));
  arts.push_back("temperedness.json");
  return arts;
}

const std::map<std::string, StageFn>& stage_fns() {
  static const std::map<std::string, StageFn> f{{"sample-fbm", stage_sample},   {"solve", stage_solve},
                                                {"calibrate", stage_calibrate}, {"stopping-times", stage_stopping},
                                                {"gronwall-verify", stage_gronwall}, {"attractor", stage_attractor}};
  return f;
}

}  // namespace

RunManifest run_pipeline(const ExperimentConfig& cfg, const std::vector<std::string>& stages) {
  const auto& defs = stage_defs();
  std::set<std::string> wanted;
  std::function<void(const std::string&)> add = [&](const std::string& s) {
    if (!defs.count(s)) {
      std::string valid;
      for (const auto& n : pipeline_stages()) valid += (valid.empty() ? "" : ", ") + n;
      throw std::invalid_argument("unknown stage '" + s + "' (valid: " + valid + ")");
    }
    if (wanted.insert(s).second)
      for (const auto& d : defs.at(s).deps) add(d);
  };
  for (const auto& s : stages) add(s);

  const std::string dir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(dir);
  const fs::path mpath = fs::path(dir) / "manifest.json";
  std::map<std::string, StageRecord> previous;
  if (fs::exists(mpath)) {
    try {
      for (auto& s : load_manifest(mpath.string()).stages) previous[s.name] = s;
    } catch (const std::exception&) {
      previous.clear();
    }
  }

  RunManifest m;
  m.config = config_to_json(cfg);
  m.config_hash = config_hash(cfg);
  m.output_dir = dir;
  m.seeds = {cfg.seed, derive_seed(cfg.seed, 2), derive_seed(cfg.seed, 3)};
  for (std::size_t k = 0; k < cfg.attractor.growth_paths; ++k) m.seeds.push_back(derive_seed(cfg.seed, 100 + k));
  m.versions = {{"fbmrds", "0.1.0"},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"boost", BOOST_LIB_VERSION},
                {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                             "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};

  std::map<std::string, std::string> hashes;
  std::set<std::string> failed;
  for (const auto& name : pipeline_stages()) {
    if (!wanted.count(name)) continue;
    const StageDef& def = defs.at(name);
    StageRecord rec;
    rec.name = name;
    rec.inputs = def.inputs;
    std::string key = m.config_hash + "|" + name;
    for (const auto& d : def.deps) key += "|" + hashes[d];
    rec.hash = hex64(fnv1a64(key));
    hashes[name] = rec.hash;

    const bool blocked = std::any_of(def.deps.begin(), def.deps.end(), [&](const std::string& d) { return failed.count(d) > 0; });
    auto prev = previous.find(name);
    if (blocked) {
      rec.status = "blocked";
      rec.error = "a dependency failed";
      failed.insert(name);
    } else if (prev != previous.end() && prev->second.hash == rec.hash &&
               (prev->second.status == "ok" || prev->second.status == "skipped") &&
               std::all_of(prev->second.artifacts.begin(), prev->second.artifacts.end(),
                           [&](const std::string& a) { return fs::exists(fs::path(dir) / a); })) {
      rec.status = "skipped";
      rec.artifacts = prev->second.artifacts;
    } else {
      try {
        rec.artifacts = stage_fns().at(name)(cfg, dir);
        rec.status = "ok";
      } catch (const std::exception& e) {
        rec.status = "failed";
        rec.error = e.what();
        failed.insert(name);
      }
    }
    for (const auto& a : rec.artifacts) m.artifacts.push_back(a);
    m.stages.push_back(std::move(rec));
  }
  write_text(mpath.string(), dump(manifest_to_json(m)));
  return m;
}

std::string emit_plot_data(const RunManifest& m, const std::string& kind, const std::string& out_file) {
  static const std::map<std::string, std::string> needs{{"paths", "fbm.csv"},
                                                        {"contraction", "solution.json"},
                                                        {"gronwall", "gronwall.json"},
                                                        {"pullback", "pullback.json"},
                                                        {"temperedness", "temperedness.json"}};
  auto it = needs.find(kind);
  if (it == needs.end()) {
    std::string valid;
    for (const auto& k : plot_kinds()) valid += (valid.empty() ? "" : ", ") + k;
    throw std::invalid_argument("unknown plot kind '" + kind + "' (valid kinds: " + valid + ")");
  }
  const std::string& art = it->second;
  if (std::find(m.artifacts.begin(), m.artifacts.end(), art) == m.artifacts.end() ||
      !fs::exists(fs::path(m.output_dir) / art))
    throw std::runtime_error("missing artifact " + art + " for plot kind '" + kind + "'");
  const std::string src = (fs::path(m.output_dir) / art).string();
  const std::string out = out_file.empty() ? (fs::path(m.output_dir) / ("plot_" + kind + ".csv")).string() : out_file;

  std::ostringstream os;
  os.precision(17);
  if (kind == "paths") {
    os << read_text(src);
  } else {
    const json j = json::parse(read_text(src));
    if (kind == "contraction") {
      const json& c = j.at("contraction");
      os << "k,distance,ratio\n";
      const auto d = c.at("distances").get<std::vector<double>>();
      const auto r = c.at("ratios").get<std::vector<double>>();
      for (std::size_t k = 0; k < d.size(); ++k) {
        os << k + 1 << "," << d[k] << ",";
        if (k >= 1 && k - 1 < r.size()) os << r[k - 1];
        os << "\n";
      }
    } else if (kind == "gronwall") {
      os << "i,S_i,Z_i\n";
      const auto S = j.at("S").get<std::vector<double>>();
      const auto Z = j.at("Z").get<std::vector<double>>();
      for (std::size_t k = 0; k < S.size(); ++k) os << k + 1 << "," << S[k] << "," << Z[k] << "\n";
    } else if (kind == "pullback") {
      os << "depth,diameter,semidist\n";
      for (const auto& d : j.at("depths")) {
        os << d.at("depth").get<int>() << "," << d.at("diameter").get<double>() << ",";
        if (!d.at("semidist_prev").is_null()) os << d.at("semidist_prev").get<double>();
        os << "\n";
      }
    } else {
      os << "t,radius,log_plus_radius,fit\n";
      const auto t = j.at("t").get<std::vector<double>>();
      const auto r = j.at("radius").get<std::vector<double>>();
      const double slope = j.at("slope").get<double>();
      double mx = 0.0, my = 0.0;
      for (std::size_t k = 0; k < t.size(); ++k) {
        mx += std::abs(t[k]) / static_cast<double>(t.size());
        my += (r[k] > 1.0 ? std::log(r[k]) : 0.0) / static_cast<double>(t.size());
      }
      for (std::size_t k = 0; k < t.size(); ++k)
        os << t[k] << "," << r[k] << "," << (r[k] > 1.0 ? std::log(r[k]) : 0.0) << ","
           << my + slope * (std::abs(t[k]) - mx) << "\n";
    }
  }
  write_text(out, os.str());
  return out;
}

}  // namespace fbmrds
