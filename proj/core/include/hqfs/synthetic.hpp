#pragma once

#include <cstddef>
#include <cstdint>

#include "hqfs/market_data.hpp"

namespace hqfs {

/// Synthetic daily market with a planted, learnable signal.
///
/// Each asset's log-return follows r_t = drift + phi (r_{t-1} - drift) + s_t e_t
/// where e_t mixes a common market factor with an idiosyncratic shock and
/// s_t^2 follows a GARCH(1,1) recursion, so the previous return linearly
/// predicts the next one and volatility clusters.
struct SyntheticConfig {
  std::size_t assets = 20;
  std::size_t days = 600;
  double phi = 0.4;
  double drift = 2e-4;
  double base_vol = 0.012;        // unconditional shock volatility
  double garch_alpha = 0.08;
  double garch_beta = 0.88;
  double market_loading = 0.4;    // share of shock variance from the common factor
  double zero_phi_fraction = 0;   // share of assets with no autocorrelation
  std::uint64_t seed = 7;
  DayKey start_day = 16071;       // 2014-01-01
  bool skip_weekends = true;
};

PriceTable generate_market(const SyntheticConfig& config);

}  // namespace hqfs
