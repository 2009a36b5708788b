// Weighted p-Laplacian machinery on the discretized torus and on small
// graphs: p-Dirichlet energy, the discrete operator defined as its exact
// measure-weighted negative gradient (so summation by parts holds to
// roundoff), and constrained Rayleigh-quotient minimizers for the first
// nonzero eigenpair.
//
// The "first nonzero" constraint set is
//   { integral |f|^p dmu = 1,  integral |f|^{p-2} f dmu = 0 },
// i.e. unit p-norm plus zero p-median (imposed along every zero-energy
// direction of the discrete gradient). p = 2 is solved by block inverse
// iteration with Rayleigh-Ritz extraction; general p by a safeguarded
// inverse-power iteration on the Rayleigh quotient (lagged-diffusivity inner
// solves, Anderson-accelerated, with quadratic-ground-state start shaping
// above p = 2).
#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "rbflow/errors.hpp"
#include "rbflow/fields.hpp"

namespace rbflow {

struct SolverOptions {
  double tol_eig = 1e-8;   // residual certificate threshold
  int max_iter = 20000;    // per start
  int restarts = 4;        // random starts in cold mode
  std::uint64_t seed = 1;  // base seed for the deterministic start vectors
  double epsilon_reg = 0;  // gradient regularization (|grad f|^2 + eps^2)^{p/2}

  void validate() const;  // throws std::invalid_argument listing violations
};

// How first_eigenpair chooses its start vectors.
enum class SolveMode {
  kCold,          // `restarts` seeded random starts
  kWarmPlusCold,  // supplied start plus one random safeguard start
  kWarmOnly,      // supplied start only (pins the continuation branch)
};

struct Eigenpair {
  double lambda = 0.0;
  ScalarField f;
  double residual = 0.0;  // measure-weighted 2-norm of the eigen-equation defect
  int iterations = 0;     // summed over all starts
  int restarts_used = 0;
};

struct GraphEigenpair {
  double lambda = 0.0;
  std::vector<double> f;
  double residual = 0.0;
  int iterations = 0;
  int restarts_used = 0;
};

// Undirected weighted graph with node measures; the small-scale analogue of
// the weighted manifold (edge weights = conductances, measures = dmu).
struct SmallGraph {
  int n = 0;
  std::vector<double> measures;                     // size n, all > 0
  std::vector<std::tuple<int, int, double>> edges;  // (i, j, weight > 0), i != j

  void validate() const;     // format-level checks
  bool is_connected() const; // union-find on the edge set
};

// Text format: '#' comments and blank lines ignored; then node count, a line
// of node measures, and one "i j weight" line per edge.
SmallGraph parse_graph(const std::string& text);
SmallGraph load_graph(const std::string& path);

// p-Dirichlet energy integral ((|grad f|_g^2 + eps^2)^{p/2}, cell measure).
double p_energy(const TorusGeometry& geom, const ScalarField& f, const FlowParams& params,
                double epsilon_reg = 0.0);

// Nodewise d/df of p_energy (exact derivative of the discrete sum).
ScalarField p_energy_gradient(const TorusGeometry& geom, const ScalarField& f,
                              const FlowParams& params, double epsilon_reg = 0.0);

// Discrete weighted p-Laplacian: (op f)_i = -(dE/df_i) / (p * dmu_i), the
// unique definition for which -sum_i f_i (op f)_i dmu_i = p_energy(f) exactly.
ScalarField apply_weighted_p_laplacian(const TorusGeometry& geom, const ScalarField& f,
                                       const FlowParams& params);

// First nonzero eigenpair of the weighted p-Laplacian on the torus.
// Throws SolverError if no start certifies residual <= tol_eig.
Eigenpair first_eigenpair(const TorusGeometry& geom, const FlowParams& params,
                          const SolverOptions& opts, SolveMode mode = SolveMode::kCold,
                          const ScalarField* warm_start = nullptr);

// Same solver run on a small graph (the iterative route, used as one half of
// the oracle-equivalence pairing).
GraphEigenpair first_eigenpair_graph(const SmallGraph& graph, double p, const SolverOptions& opts,
                                     SolveMode mode = SolveMode::kCold,
                                     const std::vector<double>* warm_start = nullptr);

// Independent brute-force route: dense generalized eigendecomposition at
// p = 2, deterministic multi-start Nelder-Mead on the projected Rayleigh
// quotient otherwise. Graphs up to 6 nodes.
double brute_force_small_eigen(const SmallGraph& graph, double p, std::uint64_t seed = 0);

// Graph p-Rayleigh quotient pieces (exposed for tests and the oracle).
double graph_p_energy(const SmallGraph& graph, const std::vector<double>& f, double p);
double graph_p_norm(const SmallGraph& graph, const std::vector<double>& f, double p);

}  // namespace rbflow
