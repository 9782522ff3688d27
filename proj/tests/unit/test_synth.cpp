#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include <cmath>

#include "dkstn/error.hpp"
#include "dkstn/synth.hpp"

using namespace dkstn;

TEST(Synth, ShortSeriesIsParameterError) {
  try {
    synth_generate(GridSpec::desk(), 199, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parameter);
  }
}

TEST(Synth, PureFunctionOfArguments) {
  SynthParams p;
  p.phase_diffusion = 0.1;
  p.amplitude_variability = 0.2;
  const GriddedSeries a = synth_generate(GridSpec::desk(), 300, 42, p);
  const GriddedSeries b = synth_generate(GridSpec::desk(), 300, 42, p);
  EXPECT_EQ(a.values, b.values);
  const GriddedSeries c = synth_generate(GridSpec::desk(), 300, 43, p);
  EXPECT_NE(a.values, c.values);
}

TEST(Synth, SstLandStripeIsMasked) {
  const GriddedSeries s = synth_generate(GridSpec::desk(), 200, 3);
  const std::size_t sst = s.spec.channel("SST");
  for (std::size_t j = 0; j < s.spec.lon_count; ++j) {
    const double lon = s.spec.longitude(j);
    const bool land = lon >= 10.0 && lon < 40.0;
    EXPECT_EQ(s.at(17, 6, j, sst) == -32767.0, land) << "lon " << lon;
  }
}

TEST(Synth, WavePropagatesEastwardAtPeriodSpeed) {
  SynthParams p;
  p.annual_scale = p.drift_scale = p.noise_scale = 0.0;
  const GriddedSeries s = synth_generate(GridSpec::desk(), 400, 9, p);
  const std::size_t eq = 6, olr = 0;
  // The climatological mean is constant, so centre both series first.
  auto centered = [&](std::size_t j) {
    std::vector<double> x(400);
    for (std::size_t t = 0; t < 400; ++t) x[t] = s.at(t, eq, j, olr);
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / 400.0;
    for (auto& v : x) v -= m;
    return x;
  };
  const std::vector<double> west = centered(0), east = centered(9);
  // Lag (days) that best aligns lon 0 with lon 90E: expected 90/360*45.
  double best = -1e300;
  int best_lag = 0;
  for (int lag = 0; lag < 45; ++lag) {
    double c = 0;
    for (std::size_t t = 0; t < 300; ++t) c += west[t] * east[t + lag];
    if (c > best) {
      best = c;
      best_lag = lag;
    }
  }
  EXPECT_NEAR(best_lag, 11.25, 1.0);
}

TEST(Synth, ModelSeriesSharesSignalNotNoise) {
  SynthParams rea;
  SynthParams mod;
  mod.noise_seed = 999;
  mod.bias = 0.3;
  const GriddedSeries a = synth_generate(GridSpec::desk(), 400, 5, rea);
  const GriddedSeries b = synth_generate(GridSpec::desk(), 400, 5, mod);
  EXPECT_NE(a.values, b.values);
  double num = 0, da = 0, db = 0, ma = 0, mb = 0;
  const std::size_t olr = 0, n = 400;
  for (std::size_t t = 0; t < n; ++t) {
    ma += a.at(t, 6, 3, olr) / n;
    mb += b.at(t, 6, 3, olr) / n;
  }
  for (std::size_t t = 0; t < n; ++t) {
    const double x = a.at(t, 6, 3, olr) - ma, y = b.at(t, 6, 3, olr) - mb;
    num += x * y;
    da += x * x;
    db += y * y;
  }
  EXPECT_GT(num / std::sqrt(da * db), 0.8);
  EXPECT_NEAR(mb - ma, 0.3 * 6.0, 1.5);  // bias in OLR noise units, sampling slack
}
