#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dkstn/grid.hpp"
#include "dkstn/param_io.hpp"

namespace dkstn {

/// Per-day (RMM1, RMM2) pairs.
struct RmmSeries {
  std::vector<Date> dates;
  std::vector<double> rmm1;
  std::vector<double> rmm2;

  std::size_t size() const noexcept { return dates.size(); }
  void push_back(Date d, double a, double b);
  /// Index of `d`, if present. Dates must be strictly increasing.
  std::optional<std::size_t> find(Date d) const;
  void validate() const;
};

/// The three fields that enter the combined EOF, in state-vector order.
inline const std::array<std::string, 3> kRmmFields = {"OLR", "U200", "U850"};

/// Two leading combined EOFs of the meridionally averaged, per-field
/// normalized (OLR, U200, U850) state vector of length 3w.
struct EofBasis {
  std::size_t lon_count = 0;
  std::array<double, 3> field_scale{};  // global std of each averaged field
  Tensor patterns;                      // [2, 3w], orthonormal rows
  std::array<double, 2> pc_std{};       // std of the fitting-period PCs
  std::vector<double> eigenvalues;      // all, descending
  bool rank_deficient = false;          // T < 3w at fit time

  double explained(std::size_t mode) const;
  std::vector<NamedTensor> to_entries(const std::string& prefix = "eof.") const;
  static EofBasis from_entries(const std::vector<NamedTensor>& entries,
                               const std::string& prefix = "eof.");
};

/// Normalized state vector of day t: meridional mean of each field over
/// latitude, divided by the basis field scale, concatenated.
std::vector<double> rmm_state(const GriddedSeries& anomalies, std::size_t t,
                              const std::array<double, 3>& field_scale);

/// Eigen-analysis of the centered covariance of the state vectors. Sign
/// convention: EOF1's OLR segment sums negative; EOF2 is oriented so that it
/// leads EOF1 eastward, making eastward propagation a counterclockwise
/// (RMM1, RMM2) trajectory.
EofBasis compute_eof_basis(const GriddedSeries& anomalies);

RmmSeries project_rmm(const GriddedSeries& anomalies, const EofBasis& basis);

double rmm_amplitude(double rmm1, double rmm2);
/// Active MJO: amplitude strictly above 1.
bool mjo_active(double rmm1, double rmm2);
/// Octant 1..8 of atan2(rmm2, rmm1) on [-pi, pi), half-open sectors of
/// width pi/4 starting at -pi. Exact on boundary points.
int rmm_phase(double rmm1, double rmm2);

void write_rmm_csv(const std::filesystem::path& path, const RmmSeries& series);
RmmSeries read_rmm_csv(const std::filesystem::path& path);

void write_basis_file(const std::filesystem::path& path, const EofBasis& basis);
EofBasis read_basis_file(const std::filesystem::path& path);

}  // namespace dkstn
