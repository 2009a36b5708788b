#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rbflow/fields.hpp"
#include "rbflow/monotone.hpp"
#include "rbflow/spectral.hpp"

namespace rbflow {

// Scenario configuration: a minimal sectioned key=value text format. Lines
// are either blank, '#' comments, '[section]' headers, or 'key = value'
// pairs. Sections: [geometry], [flow], [solver], [outputs], [quantities],
// [verify]. Unknown sections, unknown keys, duplicate keys, and malformed
// values are all errors; parsing collects every violation rather than
// stopping at the first.

enum class GeometryKind { kTorus, kEinstein, kProduct };

// Initial condition from the closed expression library, selected by id with
// numeric parameters (no runtime expression evaluation):
//   constant  <value>
//   cos_x | cos_y | sin_x | sin_y  <amplitude> [<mode>]   (mode >= 1, default 1)
//   two_mode  <amp_x> <mode_x> <amp_y> <mode_y>
// Modes count whole periods across the corresponding side length.
struct InitialExpression {
  std::string id = "constant";
  std::vector<double> params = {0.0};
};

// Empty optional when the expression is a valid library reference; otherwise
// the violation message.
std::optional<std::string> expression_error(const InitialExpression& e);

// Node-centered samples of the expression on an nx-by-ny grid over
// [0,Lx) x [0,Ly). Throws std::invalid_argument when expression_error is set.
ScalarField render_expression(const InitialExpression& e, int nx, int ny, double Lx, double Ly);

struct TorusSection {
  int N = 32;  // square grid; even and >= 8
  double Lx = 6.283185307179586476925286766559;
  double Ly = 6.283185307179586476925286766559;
  InitialExpression u0;
  InitialExpression phi0;
};

struct EinsteinSection {
  double a = 1.0;
  int n = 2;
  double lambda0 = 1.0;
};

struct ProductSection {
  double a0 = 1.0;
  double b0 = 1.0;
};

struct QuantitySection {
  std::vector<QuantityId> track;  // in config order; duplicates rejected
  // Shared hypothesis constants for the tracked quantities; curvature
  // constants c and C are measured from the initial data at run start.
  double beta = 0.5;
  double gamma = 0.5;
  double a_pinch = 0.0;
  double epsilon = 0.0;
};

struct VerifySection {
  bool variation = false;
  bool lemmas = false;  // grid identity checks; torus only
  bool bounds = false;  // curvature-minimum comparison; torus only
  double fd_step = 1e-3;
  int every = 1;  // run the verifiers at every k-th sample
};

struct ScenarioConfig {
  GeometryKind geometry = GeometryKind::kTorus;
  TorusSection torus;
  EinsteinSection einstein;
  ProductSection product;

  // [flow]
  double rho = 0.0;
  double p = 2.0;
  double t_end = 0.1;
  double dt = 0.0;           // resolved: never 0 in a valid config
  bool dt_was_auto = false;  // dt came from "auto" (CFL / fixed fraction)
  bool evolve_phi = true;

  SolverOptions solver;  // [solver]; seed lives here

  // [outputs]
  int sample_every = 1;  // flow steps per CSV sample
  std::string csv_path = "run.csv";
  std::string report_path = "run_report.txt";

  QuantitySection quantities;
  VerifySection verify;

  // Dimension implied by the geometry: torus 2, einstein its n, product 3.
  int dimension() const;
  FlowParams flow_params() const;
};

struct ParseOutcome {
  std::optional<ScenarioConfig> config;  // engaged iff errors is empty
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

// Parses and validates; on success the returned config has dt resolved
// (torus "auto" = the CFL step of the initial geometry; closed-form
// geometries "auto" = t_end / 256).
ParseOutcome parse_config(const std::string& text);

// Reads the file then parses; unreadable files produce a single error.
ParseOutcome load_config(const std::string& path);

// Re-validates a programmatically modified config (used by sweeps after
// changing one axis value) and re-resolves dt when it was "auto". Returns
// every violation; empty means valid.
std::vector<std::string> validate_config(ScenarioConfig& cfg);

}  // namespace rbflow
