#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hqfs/qubo.hpp"

namespace hqfs {

struct SolverConfig {
  std::size_t restarts = 32;
  std::size_t sweeps = 200;
  double t_start = 0;           // <= 0: estimate from random single-flip probes
  double t_end_ratio = 1e-3;    // T_end = t_end_ratio * T_start
  std::uint64_t seed = 0;
  bool verify_incremental = false;  // recompute the energy after every accepted flip

  void validate() const;
};

struct SolveResult {
  BitVector x;
  double energy = 0;
  std::vector<double> restart_energies;
  double wall_seconds = 0;
  std::string solver;
};

/// Metropolis single-flip annealing with geometric cooling, followed by a
/// zero-temperature quench. Deterministic for a fixed seed.
SolveResult solve_sa(const QuboProblem& problem, const SolverConfig& config);

/// Global minimum by Gray-code enumeration; refuses dim > kMaxExhaustiveDim.
SolveResult solve_exhaustive(const QuboProblem& problem);
inline constexpr std::size_t kMaxExhaustiveDim = 24;

/// Largest |dE| seen over random single-flip probes; 1.0 if all probes are flat.
double estimate_start_temperature(const QuboProblem& problem, std::uint64_t seed, std::size_t probes = 256);

using SolverFn = std::function<SolveResult(const QuboProblem&, const SolverConfig&)>;

class SolverRegistry {
 public:
  /// Comes with "sa" and "exhaustive".
  SolverRegistry();

  void register_solver(const std::string& name, SolverFn solver);
  bool contains(const std::string& name) const { return solvers_.count(name) != 0; }
  std::vector<std::string> names() const;

  /// Throws SolverError for an unknown name; the message lists what is available.
  SolveResult solve_with(const std::string& name, const QuboProblem& problem, const SolverConfig& config) const;

 private:
  std::map<std::string, SolverFn> solvers_;
};

SolverRegistry& default_solver_registry();

}  // namespace hqfs
