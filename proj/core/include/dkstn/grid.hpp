#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dkstn/date.hpp"
#include "dkstn/tensor.hpp"

namespace dkstn {

struct Variable {
  std::string name;
  std::string unit;
};

enum class SourceTag { reanalysis, model, synthetic };

std::string to_string(SourceTag tag);
SourceTag parse_source_tag(const std::string& text);

/// Regular lat/lon grid plus the variable list. The default is the tropical
/// band 15N..15S at 2.5 degrees with OLR, U200, U850 and SST.
struct GridSpec {
  std::size_t lat_count = 13;
  std::size_t lon_count = 144;
  double lat_start = 15.0;
  double lat_step = -2.5;
  double lon_start = 0.0;
  double lon_step = 2.5;
  std::vector<Variable> variables = default_variables();

  static std::vector<Variable> default_variables();
  /// Same band at 10 degree longitude spacing (13 x 36); used by tests.
  static GridSpec desk();
  /// Evenly spaced 15N..15S, 0..360 geometry for the given extents.
  static GridSpec tropical_band(std::size_t lat_count, std::size_t lon_count,
                                std::vector<Variable> variables = default_variables());

  std::size_t channel_count() const noexcept { return variables.size(); }
  std::optional<std::size_t> find_channel(const std::string& name) const;
  /// Throws ErrorKind::channel when absent.
  std::size_t channel(const std::string& name) const;
  double latitude(std::size_t i) const { return lat_start + lat_step * static_cast<double>(i); }
  double longitude(std::size_t j) const { return lon_start + lon_step * static_cast<double>(j); }

  void validate() const;
  bool compatible(const GridSpec& other) const;  // same extents and variable names
};

/// Daily fields, values[T, lat, lon, var], consecutive calendar days.
struct GriddedSeries {
  GridSpec spec;
  Date start_date;
  Tensor values;
  SourceTag source = SourceTag::reanalysis;

  GriddedSeries() = default;
  GriddedSeries(GridSpec spec, Date start, std::size_t days, SourceTag source);
  GriddedSeries(GridSpec spec, Date start, Tensor values, SourceTag source);

  std::size_t days() const { return values.rank() == 0 ? 0 : values.dim(0); }
  Date date_at(std::size_t t) const { return start_date + static_cast<std::int64_t>(t); }
  Date end_date() const { return date_at(days() - 1); }
  std::size_t frame_size() const { return spec.lat_count * spec.lon_count * spec.channel_count(); }
  std::size_t index(std::size_t t, std::size_t i, std::size_t j, std::size_t c) const {
    return ((t * spec.lat_count + i) * spec.lon_count + j) * spec.channel_count() + c;
  }
  double& at(std::size_t t, std::size_t i, std::size_t j, std::size_t c) {
    return values[index(t, i, j, c)];
  }
  double at(std::size_t t, std::size_t i, std::size_t j, std::size_t c) const {
    return values[index(t, i, j, c)];
  }

  /// Days [first, first+count) as a new series.
  GriddedSeries slice(std::size_t first, std::size_t count) const;
  void validate() const;
};

/// "DKG1" grid file. The header stores extents, start date and variable
/// names only; geometry on read is the evenly spaced tropical band and units
/// are looked up from the known variable names.
void write_grid_file(const std::filesystem::path& path, const GriddedSeries& series);
GriddedSeries read_grid_file(const std::filesystem::path& path,
                             SourceTag source = SourceTag::reanalysis);

std::string encode_grid(const GriddedSeries& series);
GriddedSeries decode_grid(const std::string& bytes, SourceTag source = SourceTag::reanalysis);

}  // namespace dkstn
