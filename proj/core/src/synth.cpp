#include "dkstn/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "dkstn/error.hpp"

namespace dkstn {

namespace {

struct Climate {
  double mean, annual, drift, wave, phase, noise;
};

// Rough tropical magnitudes; drift is per day.
Climate climate_for(const std::string& name) {
  constexpr double pi = std::numbers::pi;
  if (name == "OLR") return {230.0, 12.0, 4e-3, 20.0, 0.0, 6.0};
  if (name == "U200") return {-2.0, 4.0, -2e-3, 6.0, pi, 2.0};
  if (name == "U850") return {1.0, 2.0, 1e-3, 3.0, 0.5 * pi, 1.5};
  if (name == "SST") return {300.0, 1.0, 2e-4, 0.3, -0.5 * pi, 0.2};
  return {0.0, 1.0, 1e-3, 1.0, 0.0, 0.5};
}

}  // namespace

GriddedSeries synth_generate(const GridSpec& spec, std::size_t days, std::uint64_t seed,
                             const SynthParams& params) {
  require(days >= 200, ErrorKind::parameter,
          "synthetic series needs at least 200 days, got " + std::to_string(days));
  require(params.wave_period > 0.0, ErrorKind::parameter, "wave_period must be positive");
  spec.validate();

  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double omega = two_pi / 365.25;
  const std::size_t l = spec.lat_count, w = spec.lon_count, c = spec.channel_count();

  std::vector<double> phase(days), log_amp(days, 0.0);
  {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    const double rho = std::exp(-1.0 / params.amplitude_timescale);
    const double innov = params.amplitude_variability * std::sqrt(1.0 - rho * rho);
    double p = 0.0, a = params.amplitude_variability * n01(rng);
    for (std::size_t t = 0; t < days; ++t) {
      phase[t] = p;
      log_amp[t] = a;
      p += two_pi / params.wave_period + params.phase_diffusion * n01(rng);
      a = rho * a + innov * n01(rng);
    }
  }

  std::vector<Climate> clim(c);
  for (std::size_t v = 0; v < c; ++v) clim[v] = climate_for(spec.variables[v].name);
  const auto sst = spec.find_channel("SST");

  GriddedSeries out(spec, params.start, days, params.source);
  std::mt19937_64 noise_rng(params.noise_seed != 0 ? params.noise_seed
                                                   : seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (std::size_t t = 0; t < days; ++t) {
    const double td = static_cast<double>(t);
    const double amp = std::exp(log_amp[t]);
    for (std::size_t i = 0; i < l; ++i) {
      const double lat = spec.latitude(i);
      const double profile = std::exp(-(lat / 12.0) * (lat / 12.0));
      const double hemi = lat / 15.0;
      for (std::size_t j = 0; j < w; ++j) {
        const double x = two_pi * static_cast<double>(j) / static_cast<double>(w);
        const double lon = spec.longitude(j);
        const bool land = lon >= params.mask_lon_begin && lon < params.mask_lon_end;
        for (std::size_t v = 0; v < c; ++v) {
          const Climate& k = clim[v];
          const double annual =
              std::cos(omega * td + 0.5 * std::numbers::pi * hemi + 0.3 * std::sin(x)) +
              0.3 * std::cos(2.0 * omega * td + 0.5 * x);
          const double wave = profile * amp * std::sin(x - phase[t] + k.phase);
          const double noise = n01(noise_rng);
          double value = k.mean + params.bias * k.noise +
                         params.annual_scale * k.annual * annual +
                         params.drift_scale * k.drift * td * (1.0 + 0.2 * std::cos(x)) +
                         params.wave_scale * k.wave * wave + params.noise_scale * k.noise * noise;
          if (sst && v == *sst && land) value = kLandMask;
          out.at(t, i, j, v) = value;
        }
      }
    }
  }
  return out;
}

}  // namespace dkstn
