#include <benchmark/benchmark.h>

#include <filesystem>
#include <vector>

#include "hqfs/audit.hpp"

static void BM_CanonicalHash(benchmark::State& state) {
  std::vector<std::uint8_t> ckpt(static_cast<std::size_t>(state.range(0)), 0x5a);
  std::vector<double> w(30, 1.0 / 30);
  for (auto _ : state) benchmark::DoNotOptimize(hqfs::canonical_hash(ckpt, w, 1700000000));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_CanonicalHash)->Arg(1 << 10)->Arg(1 << 16);

static void BM_Keygen(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(hqfs::lamport_keygen(hqfs::seed_from_u64(1), static_cast<std::uint32_t>(state.range(0))));
  }
}
BENCHMARK(BM_Keygen)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_SignAndVerify(benchmark::State& state) {
  const auto keys = hqfs::lamport_keygen(hqfs::seed_from_u64(2), 1u << 12);
  hqfs::LamportSigner signer(keys.sk);
  signer.public_key();  // builds the hash tree outside the timed loop
  const auto msg = hqfs::sha256(std::string_view("rebalance"));
  for (auto _ : state) {
    const auto sig = signer.sign(msg);
    benchmark::DoNotOptimize(hqfs::verify_signature(keys.pk, msg, sig));
  }
}
BENCHMARK(BM_SignAndVerify)->Iterations(2000)->Unit(benchmark::kMicrosecond);

// Sign + append at the reference universe size, as done once per rebalance.
static void BM_AuditorRecord(benchmark::State& state) {
  const auto path = std::filesystem::temp_directory_path() / "hqfs_bench_audit.log";
  std::filesystem::remove(path);
  hqfs::LamportSigner signer(hqfs::lamport_keygen(hqfs::seed_from_u64(3), 1u << 12).sk);
  hqfs::AuditLog log(path);
  hqfs::Auditor auditor(signer, log, std::vector<std::uint8_t>(4096, 1));
  std::vector<double> w(30, 1.0 / 30);
  std::vector<std::string> tickers(30, "TICK");
  std::int64_t t = 0;
  for (auto _ : state) auditor.record(t += 86400, tickers, w);
  std::filesystem::remove(path);
}
BENCHMARK(BM_AuditorRecord)->Iterations(2000)->Unit(benchmark::kMicrosecond);
