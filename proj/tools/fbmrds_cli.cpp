#include "fbmrds/attractor.hpp"
#include "fbmrds/experiment.hpp"
#include "fbmrds/fbm_gen.hpp"
#include "fbmrds/gronwall.hpp"
#include "fbmrds/holder_paths.hpp"
#include "fbmrds/mild_solver.hpp"
#include "fbmrds/stopping_times.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

using namespace fbmrds;
namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 1 invalid input or failed check, 2 runtime failure.
struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> v;
  for (const auto& x : split(s, ',')) {
    std::size_t pos = 0;
    const int k = std::stoi(x, &pos);
    if (pos != x.size()) throw std::invalid_argument("not an integer list: " + s);
    v.push_back(k);
  }
  return v;
}

ExperimentConfig checked_config(const std::string& file) {
  ExperimentConfig cfg = load_config(file);
  const auto findings = validate_config(cfg);
  for (const auto& f : findings) std::cerr << f.severity << ": " << f.message << "\n";
  if (has_errors(findings)) throw std::invalid_argument("config " + file + " failed validation");
  return cfg;
}

void write_json(const std::string& file, const json& j) { write_text(resolve_output_dir(file), j.dump(2) + "\n"); }

int run(int argc, char** argv) {
  CLI::App app{"Pathwise tools for evolution equations driven by fractional Brownian motion"};
  app.require_subcommand(1);

  // sample-fbm
  auto* s_fbm = app.add_subcommand("sample-fbm", "Sample a Hilbert-valued fBm path to CSV");
  double H = 0.75, trq = 0.01, qdecay = 2.0, t0 = 0.0, t1 = 1.0;
  std::size_t modes = 1, steps = 256;
  std::uint64_t seed = 1;
  std::string out, cfg_file;
  s_fbm->add_option("--H", H, "Hurst parameter in (1/2, 1)");
  s_fbm->add_option("--tr-q", trq, "trace of the covariance Q");
  s_fbm->add_option("--q-decay", qdecay, "power-law decay of the eigenvalues of Q");
  s_fbm->add_option("--modes", modes, "number of modes");
  s_fbm->add_option("--t0", t0, "start time (<= 0)");
  s_fbm->add_option("--t1", t1, "end time (>= 0)");
  s_fbm->add_option("--steps", steps, "number of grid steps");
  s_fbm->add_option("--seed", seed, "root seed");
  s_fbm->add_option("--out", out, "output CSV")->required();
  s_fbm->callback([&] {
    FbmConfig fc;
    fc.H = H;
    fc.t0 = t0;
    fc.dt = (t1 - t0) / static_cast<double>(steps);
    fc.m = steps;
    fc.seed = seed;
    const DiscretePath w = sample_fbm_hilbert(fc, TraceClassQ::power_law(modes, trq, qdecay));
    write_path_csv(resolve_output_dir(out), w);
  });

  // solve
  auto* s_solve = app.add_subcommand("solve", "Solve the mild equation along a path");
  std::string omega, u0_file;
  s_solve->add_option("--config", cfg_file, "experiment config")->required();
  s_solve->add_option("--omega", omega, "path CSV")->required();
  s_solve->add_option("--u0", u0_file, "initial value as a JSON array (default: sampled from the config seed)");
  s_solve->add_option("--out", out, "solution CSV (a .json sidecar holds diagnostics)")->required();
  s_solve->callback([&] {
    const ExperimentConfig cfg = checked_config(cfg_file);
    const DiscretePath w = read_path_csv(omega);
    Vector u0;
    if (u0_file.empty()) {
      u0 = sample_ball(cfg.op.n, 1, cfg.attractor.fallback_radius, derive_seed(cfg.seed, 2)).front();
    } else {
      const auto v = json::parse(read_text(u0_file)).get<std::vector<double>>();
      u0 = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (static_cast<std::size_t>(u0.size()) != cfg.op.n || w.dim() != cfg.op.n)
      throw std::invalid_argument("dimension of u0 or path differs from operator.n");
    const SolutionRecord sol =
        solve_mild(u0, w, make_operator(cfg.op), make_nonlinearity(cfg.op), cfg.holder, cfg.solver);
    std::ostringstream os;
    write_path_csv(os, sol.u);
    const std::string target = resolve_output_dir(out);
    write_text(target, os.str());
    write_text(fs::path(target).replace_extension(".json").string(),
               json({{"iterations", sol.iterations}, {"residual", sol.residual}, {"rho", sol.rho},
                     {"beta_norm", sol.beta_norm}, {"tilde_norm", sol.tilde_norm}, {"regime", sol.regime},
                     {"history", sol.history}})
                       .dump(2) + "\n");
  });

  // stopping-times
  auto* s_stop = app.add_subcommand("stopping-times", "Stopping-time sequence of a path");
  StoppingParams sp;
  std::vector<int> range{-8, 8};
  s_stop->add_option("--omega", omega, "path CSV")->required();
  s_stop->add_option("--mu", sp.mu, "budget mu");
  s_stop->add_option("--beta-prime", sp.beta_prime, "Hölder exponent of the budget");
  s_stop->add_option("--beta-dprime", sp.beta_dprime, "Hölder exponent of the counting bound");
  s_stop->add_option("--bisect-tol", sp.bisect_tol, "bisection tolerance");
  s_stop->add_option("--range", range, "i_min i_max")->expected(2);
  s_stop->add_option("--out", out, "output JSON")->required();
  s_stop->callback([&] {
    sp.validate();
    if (range.size() != 2) throw std::invalid_argument("--range needs i_min i_max");
    write_json(out, stopping_report(read_path_csv(omega), sp, range[0], range[1]));
  });

  // gronwall-verify
  auto* s_gr = app.add_subcommand("gronwall-verify", "Compare the Gronwall bound with the extremal recursion");
  GronwallInstance g;
  g.k0 = 1.0;
  g.v0 = 1.0;
  g.k1 = 0.3;
  g.k2 = 0.1;
  double step = -1.0;
  std::size_t imax = 50, random_instances = 0;
  s_gr->add_option("--lambda", g.lambda, "decay rate");
  s_gr->add_option("--k0", g.k0);
  s_gr->add_option("--v0", g.v0);
  s_gr->add_option("--k1", g.k1);
  s_gr->add_option("--k2", g.k2);
  s_gr->add_option("--step", step, "uniform step (default: the largest admissible step)");
  s_gr->add_option("--imax", imax, "number of terms");
  s_gr->add_option("--random", random_instances, "additionally check this many random admissible instances");
  s_gr->add_option("--seed", seed, "seed for random instances");
  s_gr->add_option("--out", out, "CSV with columns i,S_i,Z_i");
  s_gr->callback([&] {
    const double h = step > 0.0 ? step : g.step_limit();
    g.t.clear();
    for (std::size_t i = 0; i < imax; ++i) g.t.push_back(static_cast<double>(i) * h);
    const auto S = gronwall_bound(g, imax);
    const auto Z = gronwall_oracle(g, imax);
    std::size_t bad = 0;
    std::ostringstream os;
    os.precision(17);
    os << "i,S_i,Z_i\n";
    for (std::size_t i = 0; i < imax; ++i) {
      os << i + 1 << "," << S[i] << "," << Z[i] << "\n";
      if (!leq_ulps(Z[i], S[i])) ++bad;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (std::size_t r = 0; r < random_instances; ++r) {
      GronwallInstance q;
      q.lambda = 0.1 + 4.0 * U(rng);
      q.k1 = 0.01 + 0.98 * U(rng);
      q.k0 = 2.0 * U(rng);
      q.v0 = 2.0 * U(rng);
      q.k2 = U(rng);
      q.t = {0.0};
      for (std::size_t i = 1; i < imax; ++i) q.t.push_back(q.t.back() + q.step_limit() * (0.01 + 0.99 * U(rng)));
      const auto Sq = gronwall_bound(q, imax);
      const auto Zq = gronwall_oracle(q, imax);
      for (std::size_t i = 0; i < imax; ++i)
        if (!leq_ulps(Zq[i], Sq[i])) ++bad;
    }
    if (!out.empty()) write_text(resolve_output_dir(out), os.str());
    std::cout << "gronwall: " << (bad ? "FAIL" : "ok") << " (" << bad << " violations)\n";
    if (bad) throw CheckFailed("Gronwall dominance violated");
  });

  // attractor
  auto* s_att = app.add_subcommand("attractor", "Pullback attractor estimate for one path");
  std::string depths_s;
  std::size_t ensemble = 0;
  bool have_seed = false;
  s_att->add_option("--config", cfg_file, "experiment config")->required();
  s_att->add_option("--seed", seed, "root seed (overrides the config)")->each([&](const std::string&) { have_seed = true; });
  s_att->add_option("--depths", depths_s, "comma-separated depths, e.g. 4,8,16,32");
  s_att->add_option("--ensemble", ensemble, "ensemble size");
  s_att->add_option("--out", out, "report JSON; cloud CSVs are written next to it")->required();
  s_att->callback([&] {
    ExperimentConfig cfg = checked_config(cfg_file);
    if (have_seed) cfg.seed = seed;
    if (!depths_s.empty()) cfg.attractor.depths = parse_ints(depths_s);
    if (ensemble) cfg.attractor.ensemble = ensemble;
    const auto findings = validate_config(cfg);
    if (has_errors(findings)) throw std::invalid_argument("overrides produce an invalid config");
    const std::string target = resolve_output_dir(out);
    const std::string dir = fs::path(target).parent_path().string();
    const DiscretePath w = sample_path(cfg, cfg.seed);
    const Calibration cal = calibrate(cfg, w);
    StoppingParams spx = cfg.stopping;
    spx.mu = cal.mu;
    const int dmax = *std::max_element(cfg.attractor.depths.begin(), cfg.attractor.depths.end());
    CocycleSystem sys(w, make_operator(cfg.op), make_nonlinearity(cfg.op), cfg.holder, spx, cfg.solver,
                      -(dmax + cfg.attractor.tail_terms), 1);
    PullbackSettings ps;
    ps.depths = cfg.attractor.depths;
    ps.ensemble = cfg.attractor.ensemble;
    ps.seed = derive_seed(cfg.seed, 3);
    ps.fallback_radius = cfg.attractor.fallback_radius;
    ps.tail_terms = cfg.attractor.tail_terms;
    ps.invariance_probe = cfg.attractor.invariance_probe;
    const PullbackReport rep = pullback_attractor_estimate(sys, cal.constants, ps);
    json j = pullback_report_json(rep, dir.empty() ? "." : dir);
    const json cj = calibration_to_json(cal);
    j["feasibility"] = cj.at("feasibility");
    j["constants"] = cj.at("constants");
    j["seed"] = cfg.seed;
    write_text(target, j.dump(2) + "\n");
  });

  // pipeline
  auto* s_pipe = app.add_subcommand("pipeline", "Run pipeline stages with a manifest");
  std::string stages_s, out_dir;
  s_pipe->add_option("--config", cfg_file, "experiment config")->required();
  s_pipe->add_option("--stages", stages_s, "comma-separated stages (default: all)");
  s_pipe->add_option("--out-dir", out_dir, "output directory (overrides the config)");
  s_pipe->callback([&] {
    ExperimentConfig cfg = checked_config(cfg_file);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    const auto stages = stages_s.empty() ? pipeline_stages() : split(stages_s, ',');
    const RunManifest m = run_pipeline(cfg, stages);
    for (const auto& s : m.stages)
      std::cout << s.name << ": " << s.status << (s.error.empty() ? "" : " (" + s.error + ")") << "\n";
    if (!m.ok()) throw std::runtime_error("pipeline stage failed");
  });

  // plot-data
  auto* s_plot = app.add_subcommand("plot-data", "Emit CSV series from a pipeline run");
  std::string manifest, kind;
  s_plot->add_option("--manifest", manifest, "manifest.json of a pipeline run")->required();
  s_plot->add_option("--kind", kind, "paths, contraction, gronwall, pullback or temperedness")->required();
  s_plot->add_option("--out", out, "output CSV (default: plot_<kind>.csv in the run directory)");
  s_plot->callback([&] {
    std::cout << emit_plot_data(load_manifest(manifest), kind, out.empty() ? "" : resolve_output_dir(out)) << "\n";
  });

  // validate
  auto* s_val = app.add_subcommand("validate", "Check a config and list findings");
  s_val->add_option("--config", cfg_file, "experiment config")->required();
  s_val->callback([&] {
    const auto findings = validate_config(load_config(cfg_file));
    for (const auto& f : findings) std::cout << f.severity << ": " << f.message << "\n";
    if (findings.empty()) std::cout << "ok\n";
    if (has_errors(findings)) throw CheckFailed("config has errors");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CheckFailed& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
