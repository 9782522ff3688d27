#include "dkstn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "dkstn/error.hpp"

namespace dkstn {

namespace {

void check_pair(const Tensor& pred, const Tensor& truth, const char* what) {
  require(pred.shape() == truth.shape() && pred.rank() == 3 && pred.dim(2) == 2,
          ErrorKind::dimension,
          std::string(what) + ": pred " + shape_str(pred.shape()) + " vs truth " +
              shape_str(truth.shape()) + " (expected equal [M,n,2])");
  require(pred.dim(0) >= 1, ErrorKind::dimension, std::string(what) + ": no samples");
}

double comp(const Tensor& t, std::size_t i, std::size_t j, std::size_t c) {
  return t[(i * t.dim(1) + j) * 2 + c];
}

}  // namespace

std::vector<double> cor(const Tensor& pred, const Tensor& truth) {
  check_pair(pred, truth, "cor");
  const std::size_t M = pred.dim(0), n = pred.dim(1);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double num = 0.0, pp = 0.0, tt = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      const double p1 = comp(pred, i, j, 0), p2 = comp(pred, i, j, 1);
      const double t1 = comp(truth, i, j, 0), t2 = comp(truth, i, j, 1);
      num += p1 * t1 + p2 * t2;
      pp += p1 * p1 + p2 * p2;
      tt += t1 * t1 + t2 * t2;
    }
    if (!(pp > 0.0) || !(tt > 0.0))
      fail(ErrorKind::undefined_metric,
           "COR undefined at lead " + std::to_string(j + 1) + ": zero-norm " +
               (pp > 0.0 ? "truth" : "prediction"));
    out[j] = num / std::sqrt(pp * tt);  // exact 1 when pred == truth
  }
  return out;
}

std::vector<double> rmse(const Tensor& pred, const Tensor& truth) {
  check_pair(pred, truth, "rmse");
  const std::size_t M = pred.dim(0), n = pred.dim(1);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      const double d1 = comp(pred, i, j, 0) - comp(truth, i, j, 0);
      const double d2 = comp(pred, i, j, 1) - comp(truth, i, j, 1);
      s += d1 * d1 + d2 * d2;
    }
    out[j] = std::sqrt(s / static_cast<double>(M));
  }
  return out;
}

std::vector<double> amp_error(const Tensor& pred, const Tensor& truth) {
  check_pair(pred, truth, "amp_error");
  const std::size_t M = pred.dim(0), n = pred.dim(1);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < M; ++i)
      s += std::sqrt(comp(pred, i, j, 0) * comp(pred, i, j, 0) +
                     comp(pred, i, j, 1) * comp(pred, i, j, 1)) -
           std::sqrt(comp(truth, i, j, 0) * comp(truth, i, j, 0) +
                     comp(truth, i, j, 1) * comp(truth, i, j, 1));
    out[j] = s / static_cast<double>(M);
  }
  return out;
}

std::string to_string(PhaseMode mode) { return mode == PhaseMode::literal ? "literal" : "wrapped"; }

PhaseMode parse_phase_mode(const std::string& text) {
  if (text == "literal") return PhaseMode::literal;
  if (text == "wrapped") return PhaseMode::wrapped;
  fail(ErrorKind::parse, "phase mode must be 'literal' or 'wrapped', got '" + text + "'");
}

std::vector<double> phase_error(const Tensor& pred, const Tensor& truth, PhaseMode mode) {
  check_pair(pred, truth, "phase_error");
  const std::size_t M = pred.dim(0), n = pred.dim(1);
  constexpr double pi = std::numbers::pi;
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      const double p1 = comp(pred, i, j, 0), p2 = comp(pred, i, j, 1);
      const double t1 = comp(truth, i, j, 0), t2 = comp(truth, i, j, 1);
      if (mode == PhaseMode::literal) {
        if (p1 == 0.0 || t1 == 0.0)
          fail(ErrorKind::undefined_metric, "literal phase error divides by a zero RMM1 at lead " +
                                                std::to_string(j + 1) + ", sample " +
                                                std::to_string(i + 1));
        s += std::atan(p2 / p1) - std::atan(t2 / t1);
      } else {
        double d = std::atan2(p2, p1) - std::atan2(t2, t1);
        while (d > pi) d -= 2.0 * pi;
        while (d <= -pi) d += 2.0 * pi;
        s += d;
      }
    }
    out[j] = s / static_cast<double>(M);
  }
  return out;
}

SkillDays skill_days(std::span<const double> cor_curve, std::span<const double> rmse_curve,
                     double cor_threshold, double rmse_threshold) {
  require(!cor_curve.empty() && !rmse_curve.empty(), ErrorKind::dimension,
          "skill_days needs non-empty curves");
  SkillDays s;
  s.cor = cor_curve.size();
  for (std::size_t j = 0; j < cor_curve.size(); ++j)
    if (cor_curve[j] < cor_threshold) {
      s.cor = j;
      break;
    }
  s.rmse = rmse_curve.size();
  for (std::size_t j = 0; j < rmse_curve.size(); ++j)
    if (rmse_curve[j] > rmse_threshold) {
      s.rmse = j;
      break;
    }
  s.combined = std::min(s.cor, s.rmse);
  return s;
}

SkillReport skill_report(const Tensor& pred, const Tensor& truth, PhaseMode mode,
                         double cor_threshold, double rmse_threshold) {
  SkillReport r;
  r.samples = pred.rank() > 0 ? pred.dim(0) : 0;
  r.cor = cor(pred, truth);
  r.rmse = rmse(pred, truth);
  r.ae = amp_error(pred, truth);
  r.pe = phase_error(pred, truth, mode);
  r.skill = skill_days(r.cor, r.rmse, cor_threshold, rmse_threshold);
  r.phase_mode = mode;
  return r;
}

std::string to_string(Season s) {
  switch (s) {
    case Season::MAM: return "MAM";
    case Season::JJA: return "JJA";
    case Season::SON: return "SON";
    case Season::DJF: return "DJF";
  }
  return "?";
}

Season season_of(Date d) {
  const unsigned m = d.month();
  if (m >= 3 && m <= 5) return Season::MAM;
  if (m >= 6 && m <= 8) return Season::JJA;
  if (m >= 9 && m <= 11) return Season::SON;
  return Season::DJF;
}

std::array<std::optional<SkillReport>, 4> seasonal_split(std::span<const Date> anchors,
                                                         const Tensor& pred, const Tensor& truth,
                                                         PhaseMode mode, double cor_threshold,
                                                         double rmse_threshold) {
  check_pair(pred, truth, "seasonal_split");
  require(anchors.size() == pred.dim(0), ErrorKind::dimension,
          "seasonal_split: " + std::to_string(anchors.size()) + " anchors for " +
              std::to_string(pred.dim(0)) + " samples");
  const std::size_t n = pred.dim(1), row = n * 2;
  std::array<std::optional<SkillReport>, 4> out;
  for (std::size_t s = 0; s < 4; ++s) {
    std::vector<double> p, t;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      if (season_of(anchors[i]) != kSeasons[s]) continue;
      p.insert(p.end(), pred.values().begin() + static_cast<std::ptrdiff_t>(i * row),
               pred.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * row));
      t.insert(t.end(), truth.values().begin() + static_cast<std::ptrdiff_t>(i * row),
               truth.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * row));
    }
    if (p.empty()) continue;
    const std::size_t m = p.size() / row;
    out[s] = skill_report(Tensor({m, n, 2}, std::move(p)), Tensor({m, n, 2}, std::move(t)), mode,
                          cor_threshold, rmse_threshold);
  }
  return out;
}

void write_forecast_csv(const std::filesystem::path& path, const Forecast& f) {
  require(f.values.rank() == 3 && f.values.dim(0) == f.anchors.size() && f.values.dim(2) == 2,
          ErrorKind::dimension, "forecast values must be [M,n,2] with one anchor per sample");
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << "anchor,lead,rmm1,rmm2\n";
  const std::size_t n = f.values.dim(1);
  char buf[112];
  for (std::size_t i = 0; i < f.anchors.size(); ++i) {
    const std::string a = f.anchors[i].iso();
    for (std::size_t j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g\n", a.c_str(), j + 1,
                    f.values[(i * n + j) * 2], f.values[(i * n + j) * 2 + 1]);
      out << buf;
    }
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

Forecast read_forecast_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "anchor,lead,rmm1,rmm2")
    fail(ErrorKind::format, path.string() + ": expected header 'anchor,lead,rmm1,rmm2'");
  std::vector<Date> anchors;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, l, r1, r2;
    if (!std::getline(ss, a, ',') || !std::getline(ss, l, ',') || !std::getline(ss, r1, ',') ||
        !std::getline(ss, r2))
      fail(ErrorKind::parse, path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    const Date d = Date::parse(a);
    std::size_t lead = 0;
    double v1 = 0.0, v2 = 0.0;
    try {
      lead = std::stoul(l);
      v1 = std::stod(r1);
      v2 = std::stod(r2);
    } catch (const std::logic_error&) {
      fail(ErrorKind::parse, path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
    if (anchors.empty() || anchors.back() != d) {
      anchors.push_back(d);
      rows.emplace_back();
    }
    require(lead == rows.back().size() / 2 + 1, ErrorKind::format,
            path.string() + ":" + std::to_string(lineno) + ": leads must run 1..n per anchor");
    rows.back().push_back(v1);
    rows.back().push_back(v2);
  }
  require(!anchors.empty(), ErrorKind::format, path.string() + ": no forecast rows");
  const std::size_t n = rows.front().size() / 2;
  std::vector<double> data;
  for (const auto& r : rows) {
    require(r.size() == 2 * n, ErrorKind::format, path.string() + ": ragged lead count");
    data.insert(data.end(), r.begin(), r.end());
  }
  return {anchors, Tensor({anchors.size(), n, 2}, std::move(data))};
}

void write_report_csv(const std::filesystem::path& path, const SkillReport& r) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << "lead,cor,rmse,ae,pe\n";
  char buf[160];
  for (std::size_t j = 0; j < r.cor.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", j + 1, r.cor[j], r.rmse[j],
                  r.ae[j], r.pe[j]);
    out << buf;
  }
  double ae = 0.0, pe = 0.0;
  for (std::size_t j = 0; j < r.ae.size(); ++j) {
    ae += r.ae[j];
    pe += r.pe[j];
  }
  const double n = static_cast<double>(std::max<std::size_t>(r.ae.size(), 1));
  out << "# samples=" << r.samples << "\n";
  out << "# phase_mode=" << to_string(r.phase_mode) << "\n";
  out << "# skill_cor=" << r.skill.cor << "\n";
  out << "# skill_rmse=" << r.skill.rmse << "\n";
  out << "# skill_combined=" << r.skill.combined << "\n";
  std::snprintf(buf, sizeof buf, "# mean_ae=%.17g\n# mean_pe=%.17g\n", ae / n, pe / n);
  out << buf;
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace dkstn
