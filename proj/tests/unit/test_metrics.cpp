#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "dkstn/error.hpp"
#include "dkstn/metrics.hpp"
#include "oracles.hpp"

using namespace dkstn;

namespace {

Tensor constant_pairs(std::size_t M, std::size_t n, double a, double b) {
  Tensor t({M, n, 2});
  for (std::size_t i = 0; i < M * n; ++i) {
    t[2 * i] = a;
    t[2 * i + 1] = b;
  }
  return t;
}

}  // namespace

TEST(Cor, IdentityAndNegation) {
  std::mt19937_64 rng(1);
  const Tensor t = oracle::random_tensor({10, 5, 2}, rng);
  Tensor neg = t;
  for (auto& v : neg.data()) v = -v;
  for (double v : cor(t, t)) EXPECT_EQ(v, 1.0);
  for (double v : cor(neg, t)) EXPECT_EQ(v, -1.0);
}

TEST(Cor, ZeroNormNamesLead) {
  Tensor t = constant_pairs(3, 4, 1, 1);
  Tensor p = t;
  for (std::size_t m = 0; m < 3; ++m) p[(m * 4 + 2) * 2] = p[(m * 4 + 2) * 2 + 1] = 0;
  try {
    cor(p, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::undefined_metric);
    EXPECT_NE(std::string(e.what()).find("lead 3"), std::string::npos) << e.what();
  }
}

TEST(Cor, BoundedByCauchySchwarz) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    const Tensor a = oracle::random_tensor({1 + rng() % 5, 3, 2}, rng);
    const Tensor b = oracle::random_tensor(a.shape(), rng);
    for (double v : cor(a, b)) {
      EXPECT_LE(v, 1.0 + 1e-12);
      EXPECT_GE(v, -1.0 - 1e-12);
    }
  }
}

TEST(Rmse, Examples) {
  const Tensor t = constant_pairs(4, 3, 0.3, -0.2);
  for (double v : rmse(t, t)) EXPECT_EQ(v, 0.0);
  Tensor p = t;
  for (std::size_t i = 0; i < p.size(); i += 2) p[i] += 1.0;
  for (double v : rmse(p, t)) EXPECT_NEAR(v, 1.0, 1e-15);
  for (std::size_t i = 1; i < p.size(); i += 2) p[i] += 1.0;
  for (double v : rmse(p, t)) EXPECT_NEAR(v, std::sqrt(2.0), 1e-15);
  EXPECT_THROW(rmse(Tensor({2, 3, 2}), Tensor({3, 3, 2})), Error);
}

TEST(AmpError, ExamplesAndRotationInvariance) {
  std::mt19937_64 rng(3);
  Tensor t({6, 2, 2});
  for (std::size_t i = 0; i < 12; ++i) {
    const double th = 0.5 * i;
    t[2 * i] = std::cos(th);
    t[2 * i + 1] = std::sin(th);
  }
  for (double v : amp_error(t, t)) EXPECT_EQ(v, 0.0);
  Tensor twice = t;
  for (auto& v : twice.data()) v *= 2;
  for (double v : amp_error(twice, t)) EXPECT_NEAR(v, 1.0, 1e-15);
  const Tensor r = oracle::random_tensor({7, 3, 2}, rng);
  Tensor rot = r;
  for (std::size_t i = 0; i < 21; ++i) {
    const double th = 0.37 * i;
    rot[2 * i] = std::cos(th) * r[2 * i] - std::sin(th) * r[2 * i + 1];
    rot[2 * i + 1] = std::sin(th) * r[2 * i] + std::cos(th) * r[2 * i + 1];
  }
  for (double v : amp_error(rot, r)) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(PhaseError, IdentityRotationAndZeroDivisor) {
  std::mt19937_64 rng(4);
  const Tensor t = oracle::random_tensor({5, 3, 2}, rng, 0.1, 1.0);  // quadrant I
  for (auto mode : {PhaseMode::literal, PhaseMode::wrapped})
    for (double v : phase_error(t, t, mode)) EXPECT_EQ(v, 0.0);
  Tensor rot = t;
  const double a = std::numbers::pi / 8;
  for (std::size_t i = 0; i < 15; ++i) {
    rot[2 * i] = std::cos(a) * t[2 * i] - std::sin(a) * t[2 * i + 1];
    rot[2 * i + 1] = std::sin(a) * t[2 * i] + std::cos(a) * t[2 * i + 1];
  }
  for (double v : phase_error(rot, t, PhaseMode::wrapped)) EXPECT_NEAR(v, a, 1e-14);
  Tensor z = t;
  z[0] = 0.0;
  try {
    phase_error(z, t, PhaseMode::literal);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::undefined_metric);
  }
  EXPECT_NO_THROW(phase_error(z, t, PhaseMode::wrapped));
}

TEST(PhaseError, LiteralFormHasTheArctanDiscontinuity) {
  // Opposite vectors have identical arctan(y/x): literal error 0, wrapped pi.
  const Tensor t = constant_pairs(1, 1, 1.0, 0.5);
  const Tensor p = constant_pairs(1, 1, -1.0, -0.5);
  EXPECT_NEAR(phase_error(p, t, PhaseMode::literal)[0], 0.0, 1e-15);
  EXPECT_NEAR(phase_error(p, t, PhaseMode::wrapped)[0], std::numbers::pi, 1e-15);
}

TEST(SkillDays, Examples) {
  const std::vector<double> c = {.9, .8, .7, .6, .49, .6, .3};
  const std::vector<double> r(7, 1.0);
  EXPECT_EQ(skill_days(c, r).cor, 4u);
  EXPECT_EQ(skill_days(c, r).rmse, 7u);
  EXPECT_EQ(skill_days(std::vector<double>(35, 0.8), std::vector<double>(35, 0.3)),
            (SkillDays{35, 35, 35}));
  EXPECT_EQ(skill_days(std::vector<double>{0.5}, std::vector<double>{1.4}), (SkillDays{1, 1, 1}));
}

TEST(SkillDays, MonotoneInThreshold) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> c(20), r(20, 0.0);
    for (auto& v : c) v = std::uniform_real_distribution<double>(0, 1)(rng);
    std::size_t last = 0;
    for (double th = 1.0; th >= 0.0; th -= 0.05) {
      const std::size_t s = skill_days(c, r, th, 1.4).cor;
      EXPECT_GE(s, last);
      last = s;
    }
  }
}

TEST(Seasons, MonthTableAndSplit) {
  EXPECT_EQ(season_of(Date::from_ymd(2001, 12, 15)), Season::DJF);
  EXPECT_EQ(season_of(Date::from_ymd(2001, 3, 1)), Season::MAM);
  EXPECT_EQ(season_of(Date::from_ymd(2001, 2, 28)), Season::DJF);
  EXPECT_EQ(season_of(Date::from_ymd(2001, 8, 31)), Season::JJA);
  EXPECT_EQ(season_of(Date::from_ymd(2001, 9, 1)), Season::SON);

  std::mt19937_64 rng(6);
  std::vector<Date> july;
  for (int d = 1; d <= 20; ++d) july.push_back(Date::from_ymd(2003, 7, d));
  const Tensor p = oracle::random_tensor({20, 2, 2}, rng), t = oracle::random_tensor({20, 2, 2}, rng);
  const auto split = seasonal_split(july, p, t);
  EXPECT_FALSE(split[0].has_value());
  ASSERT_TRUE(split[1].has_value());
  EXPECT_EQ(split[1]->samples, 20u);
  EXPECT_FALSE(split[2].has_value());
  EXPECT_FALSE(split[3].has_value());

  std::vector<Date> year;
  for (int d = 0; d < 365; ++d) year.push_back(Date::from_ymd(2003, 3, 1) + d);
  const Tensor py = oracle::random_tensor({365, 1, 2}, rng), ty = oracle::random_tensor({365, 1, 2}, rng);
  const auto all = seasonal_split(year, py, ty);
  std::size_t total = 0;
  for (const auto& s : all) {
    ASSERT_TRUE(s.has_value());
    EXPECT_GE(s->samples, 90u);
    EXPECT_LE(s->samples, 92u);
    total += s->samples;
  }
  EXPECT_EQ(total, 365u);
}

TEST(Report, MatchesOraclesAndWritesCsv) {
  std::mt19937_64 rng(7);
  const Tensor t = oracle::random_tensor({30, 6, 2}, rng, -2, 2);
  Tensor p = t;
  for (auto& v : p.data()) v += std::normal_distribution<double>(0, 0.5)(rng);
  const SkillReport r = skill_report(p, t, PhaseMode::wrapped);
  EXPECT_EQ(r.samples, 30u);
  EXPECT_EQ(r.skill, oracle::skill_days(oracle::cor(p, t), oracle::rmse(p, t)));
  const auto path = std::filesystem::temp_directory_path() / "dkstn_report.csv";
  write_report_csv(path, r);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "lead,cor,rmse,ae,pe");
  std::size_t rows = 0, summary = 0;
  while (std::getline(in, line)) (line.front() == '#' ? summary : rows)++;
  EXPECT_EQ(rows, 6u);
  EXPECT_GE(summary, 5u);
  std::filesystem::remove(path);
}

TEST(ForecastCsv, RoundTripIsExact) {
  std::mt19937_64 rng(8);
  Forecast f{{Date::from_ymd(2000, 1, 1), Date::from_ymd(2000, 1, 9)},
             oracle::random_tensor({2, 3, 2}, rng)};
  const auto path = std::filesystem::temp_directory_path() / "dkstn_forecast.csv";
  write_forecast_csv(path, f);
  const Forecast g = read_forecast_csv(path);
  EXPECT_EQ(g.anchors, f.anchors);
  EXPECT_EQ(g.values, f.values);
  std::filesystem::remove(path);
}
