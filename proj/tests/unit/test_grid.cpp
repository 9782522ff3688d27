#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "dkstn/date.hpp"
#include "dkstn/error.hpp"
#include "dkstn/grid.hpp"

using namespace dkstn;

namespace {

GriddedSeries random_series(const GridSpec& spec, std::size_t days, std::mt19937_64& rng) {
  GriddedSeries s(spec, Date::from_ymd(1999, 12, 30), days, SourceTag::reanalysis);
  std::normal_distribution<float> nd(0.0f, 100.0f);
  for (auto& v : s.values.data()) v = static_cast<double>(nd(rng));  // float32-representable
  return s;
}

ErrorKind decode_kind(const std::string& bytes) {
  try {
    decode_grid(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::usage;
}

}  // namespace

TEST(Date, CalendarArithmetic) {
  const Date d = Date::parse("2000-02-28");
  EXPECT_EQ((d + 1).iso(), "2000-02-29");
  EXPECT_EQ((d + 2).iso(), "2000-03-01");
  EXPECT_EQ(Date::parse("1901-03-01") - Date::parse("1900-02-28"), 366);  // 1900 not leap
  EXPECT_EQ(Date::from_ymd(1970, 1, 1).serial(), 0);
  EXPECT_THROW(Date::parse("2001-02-29"), Error);
  EXPECT_THROW(Date::parse("2001-2-3"), Error);
}

TEST(GridSpec, DefaultIsTropicalBandAtTwoPointFiveDegrees) {
  const GridSpec g;
  EXPECT_EQ(g.lat_count, 13u);
  EXPECT_EQ(g.lon_count, 144u);
  EXPECT_DOUBLE_EQ(g.latitude(0), 15.0);
  EXPECT_DOUBLE_EQ(g.latitude(12), -15.0);
  EXPECT_DOUBLE_EQ(g.longitude(143), 357.5);
  ASSERT_EQ(g.channel_count(), 4u);
  EXPECT_EQ(g.variables[0].name, "OLR");
  EXPECT_EQ(g.variables[3].name, "SST");
  EXPECT_EQ(GridSpec::desk().lon_count, 36u);
  EXPECT_THROW(g.channel("Q850"), Error);
}

TEST(GridFile, SmallRoundTripsAreBitwise) {
  std::mt19937_64 rng(10);
  for (int rep = 0; rep < 100; ++rep) {
    const GridSpec spec = GridSpec::tropical_band(1 + rng() % 5, 1 + rng() % 9);
    const GriddedSeries s = random_series(spec, 1 + rng() % 12, rng);
    const GriddedSeries r = decode_grid(encode_grid(s));
    ASSERT_EQ(r.values, s.values);
    ASSERT_EQ(r.start_date, s.start_date);
    ASSERT_TRUE(r.spec.compatible(s.spec));
  }
}

TEST(GridFile, FullGridRoundTripThroughDisk) {
  std::mt19937_64 rng(11);
  const GriddedSeries s = random_series(GridSpec(), 10, rng);
  const auto path = std::filesystem::temp_directory_path() / "dkstn_grid_roundtrip.dkg";
  write_grid_file(path, s);
  const GriddedSeries r = read_grid_file(path);
  EXPECT_EQ(r.values, s.values);
  EXPECT_EQ(r.values.shape(), (Shape{10, 13, 144, 4}));
  std::filesystem::remove(path);
}

TEST(GridFile, BadMagicIsFormatError) {
  std::mt19937_64 rng(12);
  std::string bytes = encode_grid(random_series(GridSpec::tropical_band(2, 2), 3, rng));
  bytes.replace(0, 4, "XXXX");
  EXPECT_EQ(decode_kind(bytes), ErrorKind::format);
}

TEST(GridFile, TruncatedPayloadIsLengthErrorWithByteCounts) {
  std::mt19937_64 rng(13);
  const GriddedSeries s = random_series(GridSpec::tropical_band(2, 3), 5, rng);
  std::string bytes = encode_grid(s);
  bytes.resize(bytes.size() - s.frame_size() * sizeof(float));  // payload for T=4
  try {
    decode_grid(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::length);
    const std::string msg = e.what();
    EXPECT_NE(msg.find(std::to_string(5 * s.frame_size() * 4)), std::string::npos) << msg;
    EXPECT_NE(msg.find(std::to_string(4 * s.frame_size() * 4)), std::string::npos) << msg;
  }
}

TEST(GriddedSeries, SliceKeepsDates) {
  std::mt19937_64 rng(14);
  const GriddedSeries s = random_series(GridSpec::tropical_band(2, 2), 10, rng);
  const GriddedSeries t = s.slice(3, 4);
  EXPECT_EQ(t.start_date, s.date_at(3));
  EXPECT_EQ(t.days(), 4u);
  EXPECT_EQ(t.at(0, 1, 1, 2), s.at(3, 1, 1, 2));
}
