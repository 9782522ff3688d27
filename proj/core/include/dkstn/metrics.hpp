#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dkstn/date.hpp"
#include "dkstn/tensor.hpp"

namespace dkstn {

// All metrics take pred and truth of shape [M, n, 2] and return one value per
// lead j = 1..n.
std::vector<double> cor(const Tensor& pred, const Tensor& truth);
std::vector<double> rmse(const Tensor& pred, const Tensor& truth);
std::vector<double> amp_error(const Tensor& pred, const Tensor& truth);

enum class PhaseMode {
  literal,  // arctan(p2/p1) - arctan(t2/t1)
  wrapped,  // full-quadrant angle difference in (-pi, pi]
};

std::string to_string(PhaseMode mode);
PhaseMode parse_phase_mode(const std::string& text);

std::vector<double> phase_error(const Tensor& pred, const Tensor& truth, PhaseMode mode);

struct SkillDays {
  std::size_t cor = 0;       // leads before COR first drops below the threshold
  std::size_t rmse = 0;      // leads before RMSE first exceeds the threshold
  std::size_t combined = 0;  // min of the two

  friend bool operator==(const SkillDays&, const SkillDays&) = default;
};

SkillDays skill_days(std::span<const double> cor_curve, std::span<const double> rmse_curve,
                     double cor_threshold = 0.5, double rmse_threshold = 1.4);

struct SkillReport {
  std::size_t samples = 0;
  std::vector<double> cor, rmse, ae, pe;
  SkillDays skill;
  PhaseMode phase_mode = PhaseMode::literal;
};

SkillReport skill_report(const Tensor& pred, const Tensor& truth,
                         PhaseMode mode = PhaseMode::literal, double cor_threshold = 0.5,
                         double rmse_threshold = 1.4);

enum class Season { MAM, JJA, SON, DJF };
inline constexpr std::array<Season, 4> kSeasons = {Season::MAM, Season::JJA, Season::SON,
                                                   Season::DJF};
std::string to_string(Season s);
Season season_of(Date d);

/// Reports per season of the anchor date; seasons without samples are empty.
std::array<std::optional<SkillReport>, 4> seasonal_split(
    std::span<const Date> anchors, const Tensor& pred, const Tensor& truth,
    PhaseMode mode = PhaseMode::literal, double cor_threshold = 0.5, double rmse_threshold = 1.4);

/// Forecast table: one row per (anchor, lead) with columns anchor,lead,rmm1,rmm2.
struct Forecast {
  std::vector<Date> anchors;
  Tensor values;  // [M, n, 2]
};

void write_forecast_csv(const std::filesystem::path& path, const Forecast& forecast);
Forecast read_forecast_csv(const std::filesystem::path& path);

/// `lead,cor,rmse,ae,pe` rows followed by `#`-prefixed summary lines.
void write_report_csv(const std::filesystem::path& path, const SkillReport& report);

}  // namespace dkstn
