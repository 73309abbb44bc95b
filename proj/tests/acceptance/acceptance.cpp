// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "hqfs/annealer.hpp"
#include "hqfs/audit.hpp"
#include "hqfs/bytes.hpp"
#include "hqfs/config.hpp"
#include "hqfs/forecaster.hpp"
#include "hqfs/pipeline.hpp"
#include "hqfs/portfolio.hpp"
#include "hqfs/preprocess.hpp"
#include "hqfs/qubo.hpp"
#include "hqfs/synthetic.hpp"
#include "hqfs/vqc.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace hqfs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool bit_equal(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

double norm2(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Every trainable parameter in one flat list, theta first.
std::vector<double*> parameters(ForecastModel& m) {
  std::vector<double*> p;
  for (auto& t : m.theta) p.push_back(&t);
  for (auto* v : {&m.head.w1, &m.head.b1, &m.head.w2, &m.head.b2}) {
    for (auto& x : *v) p.push_back(&x);
  }
  return p;
}

std::vector<double> flatten(const LossGradient& g) {
  std::vector<double> out(g.theta);
  for (const auto* v : {&g.head.w1, &g.head.b1, &g.head.w2, &g.head.b2}) out.insert(out.end(), v->begin(), v->end());
  return out;
}

Outcome gradient_fidelity() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  constexpr double h = 1e-5;
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 4;
    const std::size_t depth = 1 + (trial / 4) % 3;
    const std::size_t lookback = 1 + trial % 3;
    const std::size_t dim = trial % 2 ? 6 : 4;
    CircuitSpec spec;
    spec.qubits = n;
    spec.depth = depth;
    std::uniform_int_distribution<std::size_t> col(0, dim - 1);
    for (std::size_t q = 0; q < n; ++q) spec.feature_map.push_back(col(rng));
    spec.encoding_scale = std::uniform_real_distribution<double>(0.3, 2.0)(rng);

    const auto data = fixtures::random_samples(24, lookback, dim, rng);
    auto model = fixtures::random_model(spec, 3, lookback, dim, rng);
    TrainConfig cfg;
    cfg.hidden = 3;
    cfg.beta = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    cfg.lambda = std::uniform_real_distribution<double>(1e-4, 1e-1)(rng);
    std::vector<Sample> batch = data.samples();
    std::shuffle(batch.begin(), batch.end(), rng);
    batch.resize(8);

    const auto analytic = flatten(loss_gradient(data, batch, model, cfg));
    std::vector<double> numeric;
    for (double* p : parameters(model)) {
      const double keep = *p;
      *p = keep + h;
      const double up = loss(data, batch, model, cfg);
      *p = keep - h;
      const double down = loss(data, batch, model, cfg);
      *p = keep;
      numeric.push_back((up - down) / (2 * h));
    }
    std::vector<double> diff(numeric.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
    const double scale = std::max({norm2(numeric), norm2(analytic), 1e-300});
    worst = std::max(worst, norm2(diff) / scale);
  }
  const double elapsed = seconds_since(start);
  return {worst < 1e-5 && elapsed < 60,
          fmt("worst relative error %.2e over 50 configs (limit 1e-05), %.1f s (limit 60 s)", worst, elapsed)};
}

Outcome simulation_correctness() {
  const auto start = Clock::now();
  std::mt19937_64 rng(202);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  double worst = 0;
  std::size_t clipped = 0;
  for (int trial = 0; trial < 100; ++trial) {
    CircuitSpec spec;
    spec.qubits = 1 + trial % 6;
    spec.depth = 1 + (trial / 6) % 4;
    const std::size_t rows = 1 + trial % 5;
    const std::size_t cols = 6;
    std::uniform_int_distribution<std::size_t> col(0, cols - 1);
    for (std::size_t q = 0; q < spec.qubits; ++q) spec.feature_map.push_back(col(rng));
    spec.encoding_scale = trial % 3 == 0 ? 4.0 : 1.0;

    std::vector<double> x(rows * cols);
    for (auto& v : x) v = nd(rng);
    const FeatureWindow window{x, rows, cols};
    std::vector<double> theta(spec.parameter_count());
    for (auto& t : theta) t = u(rng);

    // Angles from the window mean of each mapped column, clamped to [-pi, pi].
    std::vector<double> angles;
    for (std::size_t q = 0; q < spec.qubits; ++q) {
      double sum = 0;
      for (std::size_t r = 0; r < rows; ++r) sum += x[r * cols + spec.feature_map[q]];
      const double a = spec.encoding_scale * sum / static_cast<double>(rows);
      if (std::abs(a) > std::numbers::pi) ++clipped;
      angles.push_back(std::clamp(a, -std::numbers::pi, std::numbers::pi));
    }
    const auto got = vqc_embed(window, theta, spec);
    const auto want = oracle::dense_embed(angles, theta, spec);
    for (std::size_t q = 0; q < spec.qubits; ++q) worst = std::max(worst, std::abs(got[q] - want[q]));
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-10 && elapsed < 60,
          fmt("max |<Z> - dense| %.2e over 100 circuits, n <= 6, %zu clipped angles (limit 1e-10), %.2f s", worst,
              clipped, elapsed)};
}

// Portfolio-encoded and unstructured instances, all small enough to enumerate.
std::vector<QuboProblem> small_instances(std::mt19937_64& rng) {
  std::vector<QuboProblem> out;
  const std::pair<std::size_t, std::size_t> shapes[] = {{2, 4}, {3, 4}, {4, 4}, {3, 5}, {5, 3}, {8, 2}, {2, 6}, {4, 3}};
  std::uniform_real_distribution<double> eta(0.0, 5.0);
  for (int k = 0; k < 100; ++k) {
    if (k % 2 == 0) {
      out.push_back(oracle::random_qubo(4 + static_cast<std::size_t>(k / 2) % 13, rng));
    } else {
      const auto [m, b] = shapes[(k / 2) % 8];
      const double scale = k % 4 == 1 ? 1.0 : 1e-3;
      out.push_back(encode_qubo(oracle::random_moments(m, rng, scale), eta(rng), b));
    }
  }
  return out;
}

struct SolvedSmall {
  std::vector<QuboProblem> problems;
  std::vector<SolveResult> sa;
};

Outcome solver_optimality(SolvedSmall& solved) {
  const auto start = Clock::now();
  std::mt19937_64 rng(303);
  solved.problems = small_instances(rng);
  std::size_t hits = 0;
  double worst_recheck = 0;
  for (std::size_t k = 0; k < solved.problems.size(); ++k) {
    const auto& p = solved.problems[k];
    SolverConfig cfg;
    cfg.seed = k;
    const auto sa = solve_sa(p, cfg);
    const auto exact = solve_exhaustive(p);
    if (sa.energy <= exact.energy + 1e-9 * std::max(1.0, std::abs(exact.energy))) ++hits;
    worst_recheck = std::max({worst_recheck, std::abs(qubo_energy(p, sa.x) - sa.energy),
                              std::abs(oracle::dense_energy(p, sa.x) - sa.energy)});
    solved.sa.push_back(sa);
  }
  const double elapsed = seconds_since(start);
  return {hits >= 95 && worst_recheck <= 1e-9 && elapsed < 120,
          fmt("SA reached the exhaustive optimum on %zu/100 (need 95), worst energy recheck %.2e (limit 1e-09), %.1f s",
              hits, worst_recheck, elapsed)};
}

Outcome encoding_consistency() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<std::size_t> assets(1, 30), bits(1, 6);
  std::uniform_real_distribution<double> eta(0.0, 5.0);
  std::bernoulli_distribution coin(0.5);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = assets(rng);
    const std::size_t b = bits(rng);
    const auto moments = oracle::random_moments(m, rng, trial % 2 ? 1e-2 : 1e-4);
    const double e = eta(rng);
    const double rho = trial % 3 == 0 ? 0.5 : 0.0;
    const auto p = encode_qubo(moments, e, b, rho);
    BitVector x(m * b);
    for (auto& v : x) v = coin(rng);
    worst = std::max(worst, std::abs(qubo_energy(p, x) - oracle::direct_objective(moments, e, p.penalty(), b, x)));
  }
  return {worst <= 1e-10, fmt("max |E_qubo - direct| %.2e over 1000 bitstrings (limit 1e-10)", worst)};
}

Outcome solve_time(std::vector<SolveResult>& large) {
  std::mt19937_64 rng(505);
  double slowest = 0;
  for (int k = 0; k < 3; ++k) {
    const auto p = encode_qubo(oracle::random_moments(30, rng, 1e-3), 1.0, 6);
    SolverConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(k);
    const auto start = Clock::now();
    large.push_back(solve_sa(p, cfg));
    slowest = std::max(slowest, seconds_since(start));
  }
  return {slowest < 2.0, fmt("dim 180 (M=30, B=6) slowest of 3 SA solves %.3f s (limit 2 s)", slowest)};
}

PriceTable truncate(const PriceTable& table, std::size_t days) {
  std::vector<DayKey> cal(table.calendar().begin(), table.calendar().begin() + static_cast<std::ptrdiff_t>(days));
  PriceTable out(table.symbols(), cal);
  for (std::size_t s = 0; s < table.num_symbols(); ++s) {
    for (std::size_t d = 0; d < days; ++d) {
      if (const auto& b = table.bar(s, d)) out.set_bar(s, d, *b);
    }
  }
  return out;
}

Outcome leakage() {
  SyntheticConfig sc;
  sc.assets = 6;
  sc.days = 320;
  sc.seed = 11;
  const PriceTable table = generate_market(sc);
  PreprocessConfig pc;
  pc.lookback = 10;
  pc.lags = 3;
  const SplitSpec split = chrono_split(table.num_days(), 200, 260);
  const PreparedData full = prepare_samples(table, pc, split);

  // Refit with everything after t_tr deleted.
  const Standardizer refit = fit_training_statistics(truncate(table, split.train_end), pc, split.train_end);
  const bool stats_equal = refit == full.standardizer && refit.digest() == full.standardizer.digest();

  // Scramble every bar after the last permissible target day and rebuild.
  PriceTable scrambled = table;
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> jitter(0.5, 2.0);
  for (std::size_t s = 0; s < table.num_symbols(); ++s) {
    for (std::size_t d = split.train_end + 1; d < table.num_days(); ++d) {
      if (auto b = table.bar(s, d)) {
        const double f = jitter(rng);
        b->open *= f;
        b->high *= f;
        b->low *= f;
        b->close *= f;
        if (b->volume) *b->volume *= jitter(rng);
        scrambled.set_bar(s, d, *b);
      }
    }
  }
  const PreparedData rebuilt = prepare_samples(scrambled, pc, split);

  std::size_t train = 0, bad_days = 0, bad_targets = 0, changed = 0;
  const auto& s0 = full.samples;
  const auto& s1 = rebuilt.samples;
  const auto train0 = s0.subset(Split::train);
  const auto train1 = s1.subset(Split::train);
  for (std::size_t i = 0; i < train0.size(); ++i) {
    const Sample& s = train0[i];
    ++train;
    // Window rows day-L+1..day are train days; the target is day+1 <= t_tr + 1.
    if (s.day + 1 < pc.lookback || s.day >= split.train_end || s.day + 1 > split.train_end ||
        split.label(s.day) != Split::train || !s0.has_window(s.symbol, s.day)) {
      ++bad_days;
    }
    const auto& a = table.bar(s.symbol, s.day);
    const auto& b = table.bar(s.symbol, s.day + 1);
    if (!a || !b || std::abs(std::log(b->close / a->close) - s.next_return_raw) > 1e-15) ++bad_targets;
    const auto w0 = s0.window(s);
    const auto w1 = i < train1.size() ? s1.window(train1[i]) : FeatureWindow{};
    const bool same = i < train1.size() && train1[i].day == s.day && train1[i].symbol == s.symbol &&
                      bit_equal(train1[i].target_return, s.target_return) &&
                      bit_equal(train1[i].target_vol, s.target_vol) && w0.rows == w1.rows &&
                      std::equal(w0.data.begin(), w0.data.end(), w1.data.begin(), w1.data.end(),
                                 [](double x, double y) { return bit_equal(x, y); });
    if (!same) ++changed;
  }
  if (train1.size() != train0.size()) ++changed;
  const bool pass = stats_equal && rebuilt.standardizer == full.standardizer && bad_days == 0 && bad_targets == 0 &&
                    changed == 0 && train > 0;
  return {pass, fmt("refit on truncated data bit-exact: %s; %zu train samples, %zu outside allowed days, "
                    "%zu wrong targets, %zu changed by post-target scramble",
                    stats_equal ? "yes" : "no", train, bad_days, bad_targets, changed)};
}

// Normalized weights must sum to one within rounding and match v / sum(v).
bool decodes_to_simplex(const BitVector& x, std::size_t assets, std::size_t bits) {
  const auto d = decode_weights(x, assets, bits);
  if (d.weights.size() != assets) return false;
  double z = 0;
  std::vector<double> v(assets, 0.0);
  for (std::size_t i = 0; i < assets; ++i) {
    for (std::size_t b = 0; b < bits; ++b) {
      if (x[i * bits + b]) v[i] += std::ldexp(1.0, -static_cast<int>(b));
    }
    z += v[i];
  }
  if (z == 0) return d.degenerate;
  double sum = 0;
  for (std::size_t i = 0; i < assets; ++i) {
    if (!(d.weights[i] >= 0) || std::abs(d.weights[i] - v[i] / z) > 1e-15) return false;
    sum += d.weights[i];
  }
  return !d.degenerate && std::abs(sum - 1.0) <= 1e-12;
}

RunConfig small_run_config() {
  RunConfig c = RunConfig::parse(
      "[preprocess]\nvol_window = 10\nlookback = 3\nlags = 2\n"
      "[circuit]\nqubits = 3\ndepth = 2\n"
      "[train]\nhidden = 4\nepochs = 3\nbatch_size = 32\n"
      "[portfolio]\nassets = 6\nbits = 5\nrebalance_every = 5\ncorr_window = 30\nliquidity_window = 30\n"
      "[solver]\nrestarts = 8\nsweeps = 100\n");
  c.finalize();
  return c;
}

struct SmallRun {
  PriceTable table;
  PreparedData data;
  ForecastModel model;
  RunConfig config;
};

SmallRun small_run() {
  SmallRun r;
  SyntheticConfig sc;
  sc.assets = 8;
  sc.days = 260;
  sc.seed = 21;
  r.table = generate_market(sc);
  r.config = small_run_config();
  r.config.set_seed(3);
  r.data = prepare_samples(r.table, r.config.preprocess, r.config.split.resolve(r.table.num_days()));
  r.model = train(r.data.samples, r.data.standardizer.digest(), r.config.circuit, r.config.train).model;
  return r;
}

Outcome decode_invariants(const SolvedSmall& small, const std::vector<SolveResult>& large, const SmallRun& run) {
  std::size_t checked = 0, bad = 0;
  for (std::size_t k = 0; k < small.problems.size(); ++k) {
    const auto& p = small.problems[k];
    if (p.assets() == 0) continue;
    for (const auto& x : {small.sa[k].x, solve_exhaustive(p).x}) {
      ++checked;
      if (!decodes_to_simplex(x, p.assets(), p.bits())) ++bad;
    }
  }
  for (const auto& r : large) {
    ++checked;
    if (!decodes_to_simplex(r.x, 30, 6)) ++bad;
  }
  const auto wf = walk_forward(run.table, run.data, run.model, run.config);
  for (const auto& r : wf.rebalances) {
    ++checked;
    if (!on_simplex(r.weights, 1e-12)) ++bad;
  }

  // All-zero solutions, given directly and reached by the solver.
  bool fallback = true;
  for (std::size_t m : {1u, 5u, 30u}) {
    const auto d = decode_weights(BitVector(m * 4, 0), m, 4);
    fallback = fallback && d.degenerate && d.weights == std::vector<double>(m, 1.0 / static_cast<double>(m));
  }
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(12, 12);
  const QuboProblem positive(q, 0.0, 3, 4, 1.0);
  const auto zero = solve_sa(positive, SolverConfig{});
  const auto d = decode_weights(zero.x, 3, 4);
  fallback = fallback && std::all_of(zero.x.begin(), zero.x.end(), [](auto b) { return b == 0; }) && d.degenerate &&
             d.weights == std::vector<double>(3, 1.0 / 3.0);
  return {bad == 0 && fallback && checked > 0,
          fmt("%zu/%zu solver outputs on the simplex; all-zero fallback to equal weight with flag: %s", checked - bad,
              checked, fallback ? "yes" : "no")};
}

std::vector<std::uint8_t> report_bytes(const WalkForwardResult& r) {
  nlohmann::json j = {{"hqfs", to_json(r.hqfs.metrics)},
                      {"equal_weight", to_json(r.equal_weight.metrics)},
                      {"mv_pg", to_json(r.mv_pg.metrics)}};
  ByteWriter w;
  for (const auto* rep : {&r.hqfs, &r.equal_weight, &r.mv_pg}) {
    for (double e : rep->equity) w.f64(e);
    for (double t : rep->turnovers) w.f64(t);
  }
  for (const auto& info : r.rebalances) {
    for (double x : info.weights) w.f64(x);
    w.f64(info.energy);
  }
  auto bytes = std::move(w).bytes();
  const auto text = j.dump();
  bytes.insert(bytes.end(), text.begin(), text.end());
  return bytes;
}

Outcome audit_suite(const SmallRun& run) {
  const auto dir = fixtures::scratch("acceptance_audit");
  const auto keys = lamport_keygen(seed_from_u64(77), 256);

  // Round trip.
  LamportSigner one(keys.sk);
  const Digest msg = sha256(std::string_view("rebalance"));
  const bool round_trip = verify_signature(keys.pk, msg, one.sign(msg));

  // Audit on vs off over the same walk-forward.
  const auto ckpt = run.model.serialize();
  LamportSigner signer(keys.sk);
  AuditLog log(dir / "audit.log");
  Auditor auditor(signer, log, ckpt);
  const auto on = walk_forward(run.table, run.data, run.model, run.config, &auditor);
  const auto off = walk_forward(run.table, run.data, run.model, run.config);
  const bool identical = on.hqfs == off.hqfs && on.equal_weight == off.equal_weight && on.mv_pg == off.mv_pg &&
                         report_bytes(on) == report_bytes(off);

  const auto records = read_audit_log(dir / "audit.log");
  CheckpointStore store{{sha256(ckpt), ckpt}};
  const bool clean = !records.empty() && records.size() == on.rebalances.size() &&
                     verify_log(records, keys.pk, &store).ok();

  // Single-bit mutations: half in the signature, half in the signed payload (digest, weights, t).
  std::mt19937_64 rng(808);
  std::size_t caught = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto r = records[static_cast<std::size_t>(trial) % records.size()];
    if (trial % 2 == 0) {
      const std::size_t bit = std::uniform_int_distribution<std::size_t>(0, r.signature.size() * 8 - 1)(rng);
      r.signature[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    } else {
      const std::size_t payload_bits = 256 + r.weights.size() * 64 + 64;
      std::size_t bit = std::uniform_int_distribution<std::size_t>(0, payload_bits - 1)(rng);
      if (bit < 256) {
        r.digest[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      } else if ((bit -= 256) < r.weights.size() * 64) {
        auto& w = r.weights[bit / 64];
        w = std::bit_cast<double>(std::bit_cast<std::uint64_t>(w) ^ (std::uint64_t{1} << (bit % 64)));
      } else {
        r.t ^= std::int64_t{1} << ((bit - r.weights.size() * 64) % 64);
      }
    }
    if (!verify_log(std::vector<AuditRecord>{r}, keys.pk, &store).ok()) ++caught;
  }

  // Latency at the reference universe size.
  std::vector<double> weights(30, 1.0 / 30);
  std::vector<std::string> tickers;
  for (int i = 0; i < 30; ++i) tickers.push_back("S" + std::to_string(i));
  LamportSigner timed_signer(lamport_keygen(seed_from_u64(78), 128).sk);
  AuditLog timed_log(dir / "timed.log");
  Auditor timed(timed_signer, timed_log, ckpt);
  for (std::int64_t t = 0; t < 101; ++t) timed.record(t * 86400, tickers, weights);
  const double latency = median(timed.latencies_ms());
  const std::size_t record_bytes = timed.last().serialize().size();

  const bool pass = round_trip && clean && identical && caught == 1000 && latency < 5.0;
  return {pass, fmt("round trip %s, %zu records verify %s, %zu/1000 mutations rejected, audit on/off identical %s, "
                    "median sign+append %.3f ms (limit 5 ms), %zu bytes per record",
                    round_trip ? "ok" : "failed", records.size(), clean ? "ok" : "failed", caught,
                    identical ? "yes" : "no", latency, record_bytes)};
}

Outcome planted_signal() {
  const auto start = Clock::now();
  RunConfig cfg = RunConfig::load(fixtures::source_dir() / "configs" / "planted.conf");
  cfg.finalize();
  const PriceTable table = generate_market(SyntheticConfig{});
  const PreparedData data = prepare_samples(table, cfg.preprocess, cfg.split.resolve(table.num_days()));
  const auto test = data.samples.subset(Split::test);

  double min_da = 1, hqfs = 0, ew = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.set_seed(seed);
    const auto model = train(data.samples, data.standardizer.digest(), cfg.circuit, cfg.train).model;
    const auto da = evaluate(data.samples, test, model).directional_accuracy.value_or(0.0);
    const auto wf = walk_forward(table, data, model, cfg);
    min_da = std::min(min_da, da);
    hqfs += wf.hqfs.metrics.sharpe / 5;
    ew += wf.equal_weight.metrics.sharpe / 5;
    per_seed += fmt(" %.3f", da);
  }
  const double elapsed = seconds_since(start);
  return {min_da > 0.55 && hqfs >= ew && elapsed < 600,
          fmt("test DA per seed%s (each > 0.55); mean Sharpe HQFS %.3f vs EW %.3f over 5 seeds; %.0f s (limit 600 s)",
              per_seed.c_str(), hqfs, ew, elapsed)};
}

Outcome mv_pg_reference() {
  Moments m;
  m.universe = {"A", "B"};
  m.sigma = Eigen::Vector2d(1.0, 4.0).asDiagonal();
  m.mu = Eigen::Vector2d::Zero();
  const auto r = solve_mv_pg(m, 0.0);
  const double err = std::max(std::abs(r.weights[0] - 0.8), std::abs(r.weights[1] - 0.2));

  auto monotone = [](const std::vector<double>& h) {
    for (std::size_t k = 1; k < h.size(); ++k) {
      if (h[k] > h[k - 1]) return false;
    }
    return true;
  };
  bool all_monotone = monotone(r.objective_history);
  std::mt19937_64 rng(909);
  for (int k = 0; k < 50; ++k) {
    const auto rm = oracle::random_moments(2 + static_cast<std::size_t>(k) % 20, rng);
    all_monotone = all_monotone && monotone(solve_mv_pg(rm, 1.0 + k % 3).objective_history);
  }
  return {err <= 1e-4 && all_monotone,
          fmt("w = (%.6f, %.6f), max error %.1e (limit 1e-4); objective non-increasing on 51 problems: %s",
              r.weights[0], r.weights[1], err, all_monotone ? "yes" : "no")};
}

struct PipelineOutput {
  std::vector<std::uint8_t> checkpoint;
  std::string report;
  std::vector<std::uint8_t> audit_log;
  std::vector<Digest> digests;
  SolveResult solve;
};

PipelineOutput pipeline_once(const std::string& name) {
  const auto dir = fixtures::scratch(name);
  RunConfig cfg = RunConfig::load(fixtures::source_dir() / "configs" / "fixture.conf");
  cfg.data.path = fixtures::source_dir() / "data" / "fixture_5sym.csv";
  cfg.audit.enabled = true;
  cfg.audit.secret_key = dir / "hqfs.sk";
  cfg.audit.public_key = dir / "hqfs.pk";
  cfg.output_dir = dir;
  cfg.finalize();
  cfg.set_seed(5);
  const auto keys = lamport_keygen(seed_from_u64(99), 64);
  write_file_bytes(cfg.audit.secret_key, keys.sk.serialize());
  write_file_bytes(cfg.audit.public_key, keys.pk.serialize());

  run_ingest(cfg, dir);
  run_preprocess(cfg, dir);
  run_train(cfg, dir);
  const auto bt = run_backtest(cfg, dir);

  PipelineOutput out;
  out.checkpoint = read_file_bytes(dir / artifact::checkpoint);
  out.report = bt.report.dump();
  out.audit_log = read_file_bytes(dir / artifact::audit_log);
  for (const auto& r : read_audit_log(dir / artifact::audit_log)) out.digests.push_back(r.digest);

  std::mt19937_64 rng(1111);
  SolverConfig sc;
  sc.seed = 5;
  out.solve = solve_sa(encode_qubo(oracle::random_moments(30, rng, 1e-3), 1.0, 6), sc);
  return out;
}

Outcome determinism() {
  const auto a = pipeline_once("acceptance_det_a");
  const auto b = pipeline_once("acceptance_det_b");
  const bool ckpt = !a.checkpoint.empty() && a.checkpoint == b.checkpoint;
  const bool report = a.report == b.report;
  const bool audit = !a.digests.empty() && a.digests == b.digests && a.audit_log == b.audit_log;
  const bool solve = a.solve.x == b.solve.x && bit_equal(a.solve.energy, b.solve.energy) &&
                     a.solve.restart_energies.size() == b.solve.restart_energies.size() &&
                     std::equal(a.solve.restart_energies.begin(), a.solve.restart_energies.end(),
                                b.solve.restart_energies.begin(), [](double x, double y) { return bit_equal(x, y); });
  auto yn = [](bool v) { return v ? "identical" : "DIFFER"; };
  return {ckpt && report && audit && solve,
          fmt("checkpoint %s, backtest report %s, %zu audit digests %s, SA result %s", yn(ckpt), yn(report),
              a.digests.size(), yn(audit), yn(solve))};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  };

  SolvedSmall small;
  std::vector<SolveResult> large;
  std::optional<SmallRun> run;

  report(1, "gradient fidelity", gradient_fidelity);
  report(2, "statevector vs dense oracle", simulation_correctness);
  report(3, "SA optimality", [&] { return solver_optimality(small); });
  report(4, "encoding consistency", encoding_consistency);
  report(5, "solve time", [&] { return solve_time(large); });
  report(6, "leakage", leakage);
  report(7, "decode invariants", [&] {
    run = small_run();
    return decode_invariants(small, large, *run);
  });
  report(8, "audit", [&] {
    if (!run) run = small_run();
    return audit_suite(*run);
  });
  report(9, "planted signal", planted_signal);
  report(10, "MV-PG reference", mv_pg_reference);
  report(11, "determinism", determinism);

  std::printf("%d/11 criteria passed\n", 11 - failed);
  return failed == 0 ? 0 : 1;
}
