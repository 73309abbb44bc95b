#include "hqfs/annealer.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "hqfs/error.hpp"

namespace hqfs {

void SolverConfig::validate() const {
  if (restarts < 1) throw ConfigError("solver.restarts must be >= 1");
  if (sweeps < 1) throw ConfigError("solver.sweeps must be >= 1");
  if (!(t_start >= 0) || !std::isfinite(t_start)) throw ConfigError("solver.t_start must be finite and >= 0");
  if (!(t_end_ratio > 0 && t_end_ratio < 1)) throw ConfigError("solver.t_end_ratio must be in (0, 1)");
}

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Incremental state: field[k] = sum_{l != k} Q_kl x_l.
class FlipState {
 public:
  FlipState(const QuboProblem& problem, BitVector x) : q_(problem.matrix()), x_(std::move(x)), field_(x_.size(), 0.0) {
    const auto n = x_.size();
    for (std::size_t k = 0; k < n; ++k) {
      double f = 0;
      for (std::size_t l = 0; l < n; ++l) {
        if (l != k && x_[l]) f += q_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      }
      field_[k] = f;
    }
    energy_ = qubo_energy(problem, x_);
  }

  double delta(std::size_t k) const {
    const auto kk = static_cast<Eigen::Index>(k);
    return (x_[k] ? -1.0 : 1.0) * (q_(kk, kk) + 2.0 * field_[k]);
  }

  void flip(std::size_t k, double d) {
    const double s = x_[k] ? -1.0 : 1.0;
    x_[k] ^= 1;
    energy_ += d;
    const double* col = q_.data() + static_cast<std::size_t>(q_.rows()) * k;  // column k == row k
    for (std::size_t l = 0; l < x_.size(); ++l) field_[l] += s * col[l];
    field_[k] -= s * col[k];
  }

  const BitVector& x() const { return x_; }
  double energy() const { return energy_; }

 private:
  const Eigen::MatrixXd& q_;
  BitVector x_;
  std::vector<double> field_;
  double energy_ = 0;
};

void check_incremental(const QuboProblem& problem, const FlipState& s) {
  const double exact = qubo_energy(problem, s.x());
  if (std::abs(exact - s.energy()) > 1e-9 * std::max(1.0, std::abs(exact))) {
    throw SolverError("annealer: incremental energy drifted from full recomputation");
  }
}

}  // namespace

double estimate_start_temperature(const QuboProblem& problem, std::uint64_t seed, std::size_t probes) {
  const std::size_t n = problem.dim();
  if (n == 0) return 1.0;
  std::mt19937_64 rng(splitmix(seed ^ 0x7465'6d70ULL));
  double largest = 0;
  for (std::size_t p = 0; p < probes; ++p) {
    BitVector x(n);
    for (auto& b : x) b = static_cast<std::uint8_t>(rng() & 1);
    const std::size_t k = rng() % n;
    largest = std::max(largest, std::abs(flip_delta(problem, x, k)));
  }
  return largest > 0 ? largest : 1.0;
}

SolveResult solve_sa(const QuboProblem& problem, const SolverConfig& config) {
  config.validate();
  const auto start = Clock::now();
  const std::size_t n = problem.dim();
  SolveResult result;
  result.solver = "sa";
  if (n == 0) throw SolverError("solve_sa: empty problem");

  const double t0 = config.t_start > 0 ? config.t_start : estimate_start_temperature(problem, config.seed);
  const double t1 = t0 * config.t_end_ratio;
  const double cooling =
      config.sweeps > 1 ? std::pow(t1 / t0, 1.0 / static_cast<double>(config.sweeps - 1)) : 1.0;

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < config.restarts; ++r) {
    std::mt19937_64 rng(splitmix(config.seed * 0x100000001B3ULL + r));
    BitVector x(n);
    for (auto& b : x) b = static_cast<std::uint8_t>(rng() & 1);
    FlipState s(problem, std::move(x));
    BitVector restart_best = s.x();
    double restart_best_e = s.energy();

    double temp = t0;
    for (std::size_t sweep = 0; sweep < config.sweeps; ++sweep, temp *= cooling) {
      for (std::size_t k = 0; k < n; ++k) {
        const double d = s.delta(k);
        if (d <= 0 || unit(rng) < std::exp(-d / temp)) {
          s.flip(k, d);
          if (config.verify_incremental) check_incremental(problem, s);
          if (s.energy() < restart_best_e) {
            restart_best_e = s.energy();
            restart_best = s.x();
          }
        }
      }
    }
    // Quench from the best state seen: flip while any single flip still helps.
    FlipState q(problem, restart_best);
    for (bool improved = true; improved;) {
      improved = false;
      for (std::size_t k = 0; k < n; ++k) {
        const double d = q.delta(k);
        if (d < -1e-15) {
          q.flip(k, d);
          if (config.verify_incremental) check_incremental(problem, q);
          improved = true;
        }
      }
    }
    const double e = qubo_energy(problem, q.x());
    result.restart_energies.push_back(e);
    if (e < best) {  // ties keep the lower restart index
      best = e;
      result.x = q.x();
    }
  }
  result.energy = best;
  result.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

SolveResult solve_exhaustive(const QuboProblem& problem) {
  const auto start = Clock::now();
  const std::size_t n = problem.dim();
  if (n == 0) throw SolverError("solve_exhaustive: empty problem");
  if (n > kMaxExhaustiveDim) {
    throw SolverError("solve_exhaustive: dim " + std::to_string(n) + " exceeds the limit of " +
                      std::to_string(kMaxExhaustiveDim));
  }
  FlipState s(problem, BitVector(n, 0));
  BitVector best_x = s.x();
  double best = s.energy();
  const std::uint64_t states = std::uint64_t{1} << n;
  for (std::uint64_t i = 1; i < states; ++i) {
    const auto k = static_cast<std::size_t>(std::countr_zero(i));  // Gray code: bit that changes at step i
    s.flip(k, s.delta(k));
    if (s.energy() < best) {
      best = s.energy();
      best_x = s.x();
    }
  }
  SolveResult result;
  result.solver = "exhaustive";
  result.energy = qubo_energy(problem, best_x);
  result.x = std::move(best_x);
  result.restart_energies = {result.energy};
  result.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

SolverRegistry::SolverRegistry() {
  solvers_["sa"] = solve_sa;
  solvers_["exhaustive"] = [](const QuboProblem& p, const SolverConfig&) { return solve_exhaustive(p); };
}

void SolverRegistry::register_solver(const std::string& name, SolverFn solver) {
  if (name.empty() || !solver) throw std::invalid_argument("register_solver: empty name or solver");
  solvers_[name] = std::move(solver);
}

std::vector<std::string> SolverRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, fn] : solvers_) out.push_back(name);
  return out;
}

SolveResult SolverRegistry::solve_with(const std::string& name, const QuboProblem& problem,
                                       const SolverConfig& config) const {
  const auto it = solvers_.find(name);
  if (it == solvers_.end()) {
    std::string list;
    for (const auto& n : names()) list += (list.empty() ? "" : ", ") + n;
    throw SolverError("unknown solver '" + name + "' (available: " + list + ")");
  }
  SolveResult r = it->second(problem, config);
  if (r.solver.empty()) r.solver = name;
  return r;
}

SolverRegistry& default_solver_registry() {
  static SolverRegistry registry;
  return registry;
}

}  // namespace hqfs
