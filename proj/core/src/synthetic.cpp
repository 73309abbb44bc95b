#include "hqfs/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace hqfs {

namespace {

/// Box-Muller on raw engine output so the stream is identical across standard libraries.
class Normal {
 public:
  explicit Normal(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (cached_) {
      cached_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    cached_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0;
  bool cached_ = false;
};

}  // namespace

PriceTable generate_market(const SyntheticConfig& c) {
  if (c.assets == 0 || c.days < 2) throw std::invalid_argument("generate_market: need at least one asset and two days");
  if (!(std::abs(c.phi) < 1)) throw std::invalid_argument("generate_market: |phi| must be < 1");
  if (!(c.garch_alpha >= 0 && c.garch_beta >= 0 && c.garch_alpha + c.garch_beta < 1)) {
    throw std::invalid_argument("generate_market: GARCH parameters must satisfy alpha + beta < 1");
  }
  if (!(c.market_loading >= 0 && c.market_loading <= 1)) throw std::invalid_argument("generate_market: loading in [0, 1]");

  std::vector<std::string> symbols;
  for (std::size_t i = 0; i < c.assets; ++i) {
    std::string name = "S";
    if (i < 10) name += '0';
    symbols.push_back(name + std::to_string(i));
  }
  std::vector<DayKey> calendar;
  for (DayKey d = c.start_day; calendar.size() < c.days; ++d) {
    // 1970-01-01 was a Thursday; days 2 and 3 mod 7 are Saturday and Sunday.
    const auto wd = ((d % 7) + 7) % 7;
    if (c.skip_weekends && (wd == 2 || wd == 3)) continue;
    calendar.push_back(d);
  }
  PriceTable table(symbols, calendar);

  Normal gen(c.seed);
  const double omega = c.base_vol * c.base_vol * (1.0 - c.garch_alpha - c.garch_beta);
  const double load = std::sqrt(c.market_loading), idio = std::sqrt(1.0 - c.market_loading);

  std::vector<double> phi(c.assets), price(c.assets), var(c.assets), prev(c.assets), volume(c.assets), scale(c.assets);
  const auto zero_phi = static_cast<std::size_t>(std::floor(c.zero_phi_fraction * static_cast<double>(c.assets)));
  for (std::size_t i = 0; i < c.assets; ++i) {
    phi[i] = i < c.assets - zero_phi ? c.phi : 0.0;
    scale[i] = 0.7 + 0.6 * gen.uniform();               // per-asset vol level
    price[i] = 20.0 + 80.0 * gen.uniform();
    var[i] = c.base_vol * c.base_vol;
    prev[i] = c.drift;
    volume[i] = std::exp(13.0 + 1.5 * gen.uniform());   // shares per day
  }

  for (std::size_t t = 0; t < c.days; ++t) {
    const double market = gen();
    for (std::size_t i = 0; i < c.assets; ++i) {
      double r = 0;
      if (t > 0) {
        const double shock = std::sqrt(var[i]) * (load * market + idio * gen());
        r = c.drift + phi[i] * (prev[i] - c.drift) + scale[i] * shock;
        var[i] = omega + c.garch_alpha * shock * shock + c.garch_beta * var[i];
        prev[i] = r;
      }
      const double open = price[i];
      const double close = open * std::exp(r);
      const double range = std::abs(gen()) * 0.5 * std::sqrt(var[i]) * scale[i];
      PriceBar bar;
      bar.open = open;
      bar.close = close;
      bar.high = std::max(open, close) * (1.0 + range);
      bar.low = std::min(open, close) / (1.0 + range);
      bar.volume = std::round(volume[i] * std::exp(0.3 * gen() + 10.0 * std::abs(r)));
      table.set_bar(i, t, bar);
      price[i] = close;
    }
  }
  return table;
}

}  // namespace hqfs
