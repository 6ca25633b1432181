#pragma once

#include "fbmrds/attractor.hpp"
#include "fbmrds/fbm_gen.hpp"
#include "fbmrds/holder_paths.hpp"
#include "fbmrds/mild_solver.hpp"
#include "fbmrds/spectral_operator.hpp"
#include "fbmrds/stopping_times.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fbmrds {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct OperatorSpec {
  std::string eigenvalues = "squares";   // "squares" or "list"
  std::vector<double> list;              // used when eigenvalues == "list"
  std::size_t n = 16;
  double scale = 1.0;                    // multiplies the eigenvalues
  std::string g_kind = "sine";           // "zero", "constant", "sine"
  double amplitude = 0.5;
  double phase = 0.5;
  double g_decay = 1.0;
  double d_decay = 1.0;
};

struct FbmSpec {
  double t0 = -36.0;
  double t1 = 4.0;
  std::size_t steps = 1280;
  double trace_q = 0.01;
  double q_decay = 2.0;
};

struct AttractorSpec {
  std::optional<double> mu;      // explicit mu; calibrated from c when absent
  std::optional<double> c;       // frozen calibration constant; calibrated when absent
  double nu = 0.1;
  double mu_condition_target = 1.25;     // -(2/lambda1) log k1 aimed at when mu is derived
  int calibration_intervals = 8;
  std::size_t growth_paths = 8;
  int growth_window = 16;
  std::vector<int> depths{4, 8, 16, 32};
  std::size_t ensemble = 64;
  double fallback_radius = 2.0;
  int tail_terms = 64;
  bool invariance_probe = true;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 1;
  HolderParams holder;
  FbmSpec fbm;
  OperatorSpec op;
  StoppingParams stopping;       // mu is overwritten by the attractor spec or calibration
  SolverConfig solver;
  AttractorSpec attractor;
  std::string output_dir = "out";

  double dt() const { return (fbm.t1 - fbm.t0) / static_cast<double>(fbm.steps); }
};

// Missing keys take the defaults above; unknown keys are rejected.
ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& file);

struct Finding {
  std::string severity;   // "error" or "warning"
  std::string message;
};
std::vector<Finding> validate_config(const ExperimentConfig& cfg);
bool has_errors(const std::vector<Finding>& f);

// Objects built from a config.
SpectralOperator make_operator(const OperatorSpec& op);
NonlinearityG make_nonlinearity(const OperatorSpec& op);
FbmConfig make_fbm_config(const ExperimentConfig& cfg, std::uint64_t seed);
TraceClassQ make_q(const ExperimentConfig& cfg);
DiscretePath sample_path(const ExperimentConfig& cfg, std::uint64_t seed);

std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t h);
// Hash of the canonical (sorted-key) serialization.
std::string config_hash(const ExperimentConfig& cfg);

inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> s{"sample-fbm", "solve", "calibrate", "stopping-times", "gronwall-verify",
                                          "attractor"};
  return s;
}

struct StageRecord {
  std::string name;
  std::string status;     // "ok", "skipped", "failed", "blocked"
  std::string hash;
  std::vector<std::string> inputs;
  std::vector<std::string> artifacts;
  std::string error;
};

struct RunManifest {
  std::string config_hash;
  json config;
  std::vector<std::uint64_t> seeds;
  std::vector<StageRecord> stages;
  std::vector<std::string> artifacts;
  json versions;
  std::string output_dir;

  bool ok() const;
  const StageRecord* stage(const std::string& name) const;
};

json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const json& j);
RunManifest load_manifest(const std::string& file);

// Output directory with the FBMRDS_OUTPUT_ROOT override applied to relative paths.
std::string resolve_output_dir(const std::string& dir);

// Runs the requested stages plus their dependencies in order. Stages whose hash matches a completed entry
// of an existing manifest in the output directory (with artifacts present) are skipped.
RunManifest run_pipeline(const ExperimentConfig& cfg, const std::vector<std::string>& stages);

inline const std::vector<std::string>& plot_kinds() {
  static const std::vector<std::string> k{"paths", "contraction", "gronwall", "pullback", "temperedness"};
  return k;
}
// Writes the CSV series for `kind` and returns its path.
std::string emit_plot_data(const RunManifest& m, const std::string& kind, const std::string& out_file = "");

// Building blocks shared by the pipeline and the CLI.
struct Calibration {
  double c = 0.0;
  double c_initial = 0.0;
  double mu = 0.0;
  double mu_initial = 0.0;
  bool mu_derived = false;
  GrowthReport growth;
  AbsorbConstants constants;
  double mu_condition_margin = 0.0;
};
Calibration calibrate(const ExperimentConfig& cfg, const DiscretePath& w);
json calibration_to_json(const Calibration& cal);
AbsorbConstants constants_from_json(const json& j);

json stopping_report(const DiscretePath& w, const StoppingParams& sp, int i_min, int i_max);
json pullback_report_json(const PullbackReport& rep, const std::string& dir,
                          std::vector<std::string>* artifacts = nullptr);
void write_text(const std::string& file, const std::string& text);
std::string read_text(const std::string& file);

}  // namespace fbmrds
