#include "dkstn/grid.hpp"

#include <cmath>
#include <set>

#include "dkstn/binary_io.hpp"
#include "dkstn/error.hpp"

namespace dkstn {

namespace {

constexpr char kMagic[4] = {'D', 'K', 'G', '1'};
constexpr std::uint16_t kVersion = 1;

std::string known_unit(const std::string& name) {
  if (name == "OLR") return "W/m2";
  if (name == "U200" || name == "U850") return "m/s";
  if (name == "SST") return "K";
  return "";
}

}  // namespace

std::string to_string(SourceTag tag) {
  switch (tag) {
    case SourceTag::reanalysis: return "reanalysis";
    case SourceTag::model: return "model";
    case SourceTag::synthetic: return "synthetic";
  }
  return "?";
}

SourceTag parse_source_tag(const std::string& text) {
  if (text == "reanalysis") return SourceTag::reanalysis;
  if (text == "model") return SourceTag::model;
  if (text == "synthetic") return SourceTag::synthetic;
  fail(ErrorKind::parse, "unknown source tag '" + text + "'");
}

std::vector<Variable> GridSpec::default_variables() {
  return {{"OLR", "W/m2"}, {"U200", "m/s"}, {"U850", "m/s"}, {"SST", "K"}};
}

GridSpec GridSpec::desk() { return tropical_band(13, 36); }

GridSpec GridSpec::tropical_band(std::size_t lat_count, std::size_t lon_count,
                                 std::vector<Variable> variables) {
  GridSpec g;
  g.lat_count = lat_count;
  g.lon_count = lon_count;
  g.lat_start = lat_count > 1 ? 15.0 : 0.0;
  g.lat_step = lat_count > 1 ? -30.0 / static_cast<double>(lat_count - 1) : 0.0;
  g.lon_start = 0.0;
  g.lon_step = lon_count > 0 ? 360.0 / static_cast<double>(lon_count) : 0.0;
  g.variables = std::move(variables);
  return g;
}

std::optional<std::size_t> GridSpec::find_channel(const std::string& name) const {
  for (std::size_t c = 0; c < variables.size(); ++c)
    if (variables[c].name == name) return c;
  return std::nullopt;
}

std::size_t GridSpec::channel(const std::string& name) const {
  auto c = find_channel(name);
  if (!c) fail(ErrorKind::channel, "variable '" + name + "' not present in grid");
  return *c;
}

void GridSpec::validate() const {
  require(lat_count >= 1 && lon_count >= 1, ErrorKind::dimension,
          "grid extents must be positive");
  require(!variables.empty(), ErrorKind::dimension, "grid has no variables");
  std::set<std::string> names;
  for (const auto& v : variables)
    require(names.insert(v.name).second, ErrorKind::dimension,
            "duplicate variable name '" + v.name + "'");
}

bool GridSpec::compatible(const GridSpec& other) const {
  if (lat_count != other.lat_count || lon_count != other.lon_count ||
      variables.size() != other.variables.size())
    return false;
  for (std::size_t c = 0; c < variables.size(); ++c)
    if (variables[c].name != other.variables[c].name) return false;
  return true;
}

GriddedSeries::GriddedSeries(GridSpec spec_, Date start, std::size_t days, SourceTag source_)
    : spec(std::move(spec_)), start_date(start), source(source_) {
  spec.validate();
  require(days >= 1, ErrorKind::dimension, "series needs at least one day");
  values = Tensor({days, spec.lat_count, spec.lon_count, spec.channel_count()}, 0.0);
}

GriddedSeries::GriddedSeries(GridSpec spec_, Date start, Tensor values_, SourceTag source_)
    : spec(std::move(spec_)), start_date(start), values(std::move(values_)), source(source_) {
  validate();
}

GriddedSeries GriddedSeries::slice(std::size_t first, std::size_t count) const {
  require(count >= 1 && first + count <= days(), ErrorKind::coverage,
          "slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
              ") outside series of " + std::to_string(days()) + " days");
  const std::size_t f = frame_size();
  std::vector<double> data(values.values().begin() + static_cast<std::ptrdiff_t>(first * f),
                           values.values().begin() + static_cast<std::ptrdiff_t>((first + count) * f));
  Tensor t({count, spec.lat_count, spec.lon_count, spec.channel_count()}, std::move(data));
  return GriddedSeries(spec, date_at(first), std::move(t), source);
}

void GriddedSeries::validate() const {
  spec.validate();
  require(values.rank() == 4, ErrorKind::dimension,
          "series values must be [T,lat,lon,var], got " + shape_str(values.shape()));
  require(values.dim(1) == spec.lat_count && values.dim(2) == spec.lon_count &&
              values.dim(3) == spec.channel_count(),
          ErrorKind::dimension,
          "series values " + shape_str(values.shape()) + " do not match grid " +
              std::to_string(spec.lat_count) + "x" + std::to_string(spec.lon_count) + "x" +
              std::to_string(spec.channel_count()));
}

std::string encode_grid(const GriddedSeries& series) {
  series.validate();
  std::string out;
  out.reserve(64 + series.values.size() * 4);
  out.append(kMagic, 4);
  binary::put_le(out, kVersion);
  for (std::size_t d : series.values.shape()) binary::put_le(out, static_cast<std::uint32_t>(d));
  binary::put_string(out, series.start_date.iso());
  binary::put_le(out, static_cast<std::uint32_t>(series.spec.variables.size()));
  for (const auto& v : series.spec.variables) binary::put_string(out, v.name);
  for (double v : series.values.data()) binary::put_f32(out, static_cast<float>(v));
  return out;
}

GriddedSeries decode_grid(const std::string& bytes, SourceTag source) {
  binary::Reader in(bytes);
  const std::string magic = in.get_raw(4, "grid magic");
  if (magic != std::string(kMagic, 4)) fail(ErrorKind::format, "not a DKG1 grid file (bad magic)");
  const auto version = in.get<std::uint16_t>("grid version");
  if (version != kVersion)
    fail(ErrorKind::format, "unsupported grid file version " + std::to_string(version));
  Shape shape(4);
  for (auto& d : shape) d = in.get<std::uint32_t>("grid extents");
  for (auto d : shape) require(d >= 1, ErrorKind::format, "grid extent of zero in header");
  const Date start = Date::parse(in.get_string("start date"));
  const auto nvars = in.get<std::uint32_t>("variable count");
  require(nvars == shape[3], ErrorKind::format,
          "variable list has " + std::to_string(nvars) + " names for " + std::to_string(shape[3]) +
              " channels");
  std::vector<Variable> vars;
  for (std::uint32_t i = 0; i < nvars; ++i) {
    std::string name = in.get_string("variable name");
    vars.push_back({name, known_unit(name)});
  }
  const std::size_t count = shape_size(shape);
  if (in.remaining() != count * 4)
    fail(in.remaining() < count * 4 ? ErrorKind::length : ErrorKind::format,
         "grid payload holds " + std::to_string(in.remaining()) + " bytes, header requires " +
             std::to_string(count * 4));
  std::vector<double> data(count);
  for (auto& v : data) v = in.get_f32("grid payload");
  GridSpec spec = GridSpec::tropical_band(shape[1], shape[2], std::move(vars));
  return GriddedSeries(std::move(spec), start, Tensor(shape, std::move(data)), source);
}

void write_grid_file(const std::filesystem::path& path, const GriddedSeries& series) {
  binary::write_file(path.string(), encode_grid(series));
}

GriddedSeries read_grid_file(const std::filesystem::path& path, SourceTag source) {
  return decode_grid(binary::read_file(path.string()), source);
}

}  // namespace dkstn
