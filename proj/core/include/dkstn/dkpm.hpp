#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dkstn/autograd.hpp"
#include "dkstn/grid.hpp"
#include "dkstn/param_io.hpp"

namespace dkstn {

/// Climatological annual cycle: a0 + sum_{n<=max_wave} a_n cos(n w t) +
/// b_n sin(n w t), with t in days since `origin`, per grid point and variable.
struct HarmonicFit {
  std::size_t max_wave = 3;
  double omega = 0.0;
  Date origin;
  std::size_t lat_count = 0, lon_count = 0;
  std::vector<std::string> variables;
  std::vector<bool> fitted;  // per variable; SST is left untouched
  Tensor coefficients;       // [l, w, c, 1 + 2*max_wave]: a0, a1, b1, a2, b2, ...

  std::size_t coefficient_count() const { return 1 + 2 * max_wave; }
  double coefficient(std::size_t i, std::size_t j, std::size_t c, std::size_t q) const {
    return coefficients[((i * lon_count + j) * variables.size() + c) * coefficient_count() + q];
  }
  /// Harmonic basis row for day `d`.
  std::vector<double> basis(Date d) const;
  double reconstruct(std::size_t i, std::size_t j, std::size_t c, Date d) const;

  std::vector<NamedTensor> to_entries(const std::string& prefix = "harmonics.") const;
  static HarmonicFit from_entries(const std::vector<NamedTensor>& entries,
                                  const std::string& prefix = "harmonics.");
};

inline constexpr double kAnnualPeriod = 365.25;
inline constexpr std::size_t kRunningMeanDays = 120;

/// Least-squares fit of the mean and waves 1..max_wave, one shared normal
/// matrix for all grid points.
HarmonicFit fit_harmonics(const GriddedSeries& series, std::size_t max_wave = 3);
GriddedSeries remove_cycles(const GriddedSeries& series, const HarmonicFit& fit);
/// X''(t) = X'(t) - mean(X'(t-window .. t-1)); drops the first `window` days.
/// SST is passed through (trimmed only).
GriddedSeries remove_running_mean(const GriddedSeries& series,
                                  std::size_t window = kRunningMeanDays);
/// Land-masked SST cells (-32767) become 0.
GriddedSeries mask_sst(const GriddedSeries& series);

struct PreprocessOptions {
  bool mask_sst = true;
  std::size_t running_mean_days = kRunningMeanDays;
};

/// remove_cycles -> remove_running_mean -> mask_sst with a precomputed fit.
GriddedSeries preprocess(const GriddedSeries& raw, const HarmonicFit& fit,
                         const PreprocessOptions& options = {});

void write_fit_file(const std::filesystem::path& path, const HarmonicFit& fit);
HarmonicFit read_fit_file(const std::filesystem::path& path);

/// Per-channel batch normalization over every leading position of x[..., c].
struct BatchNormState {
  enum class Mode { train, infer };

  explicit BatchNormState(std::size_t channels = 4);

  Parameter gamma;
  Parameter beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;
  Mode mode = Mode::train;
  /// When false, train mode uses batch statistics but leaves the running
  /// statistics untouched (used for loss evaluation passes).
  bool update_running = true;

  std::size_t channels() const { return gamma.value.size(); }
};

/// Differentiable in both modes. Train mode needs a leading batch extent >= 2
/// and updates running statistics (unbiased variance) unless disabled.
Var batchnorm_forward(Var x, BatchNormState& state);

}  // namespace dkstn
