#pragma once

#include <cstdint>

#include "dkstn/grid.hpp"

namespace dkstn {

/// Knobs of the synthetic tropical generator. Amplitude multipliers scale the
/// per-variable base climatology (see synth.cpp); 0 switches a term off.
struct SynthParams {
  Date start = Date::from_ymd(1990, 1, 1);
  double annual_scale = 1.0;
  double drift_scale = 1.0;
  double wave_scale = 1.0;
  double noise_scale = 1.0;
  double wave_period = 45.0;   // days
  double phase_diffusion = 0.0;  // rad per sqrt(day), random walk on the wave phase
  double amplitude_variability = 0.0;  // std of the log-amplitude AR(1) process
  double amplitude_timescale = 30.0;   // days
  double bias = 0.0;            // systematic offset, in units of each variable's noise std
  std::uint64_t noise_seed = 0;  // 0: derived from the signal seed
  double mask_lon_begin = 10.0;  // SST land stripe, degrees east [begin, end)
  double mask_lon_end = 40.0;
  SourceTag source = SourceTag::synthetic;
};

/// Annual harmonic + linear drift + eastward wave + white noise per variable;
/// SST carries a fixed land-mask stripe of -32767. Pure function of its
/// arguments. The stochastic phase/amplitude paths come from `seed`, the
/// white noise from `noise_seed`, so a pseudo-model series can share the
/// signal with a reanalysis series while its noise differs.
GriddedSeries synth_generate(const GridSpec& spec, std::size_t days, std::uint64_t seed,
                             const SynthParams& params = {});

constexpr double kLandMask = -32767.0;

}  // namespace dkstn
