#include "dkstn/rmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dkstn/error.hpp"
#include "dkstn/linalg.hpp"
#include "dkstn/parallel.hpp"

namespace dkstn {

void RmmSeries::push_back(Date d, double a, double b) {
  dates.push_back(d);
  rmm1.push_back(a);
  rmm2.push_back(b);
}

std::optional<std::size_t> RmmSeries::find(Date d) const {
  auto it = std::lower_bound(dates.begin(), dates.end(), d);
  if (it == dates.end() || *it != d) return std::nullopt;
  return static_cast<std::size_t>(it - dates.begin());
}

void RmmSeries::validate() const {
  require(rmm1.size() == dates.size() && rmm2.size() == dates.size(), ErrorKind::dimension,
          "RMM series columns differ in length");
  for (std::size_t i = 1; i < dates.size(); ++i)
    require(dates[i] > dates[i - 1], ErrorKind::alignment,
            "RMM dates not strictly increasing at " + dates[i].iso());
}

double EofBasis::explained(std::size_t mode) const {
  double total = 0.0;
  for (double v : eigenvalues) total += std::max(v, 0.0);
  return total > 0.0 ? eigenvalues.at(mode) / total : 0.0;
}

std::vector<NamedTensor> EofBasis::to_entries(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  out.push_back({prefix + "patterns", patterns});
  out.push_back({prefix + "field_scale",
                 Tensor({3}, std::vector<double>(field_scale.begin(), field_scale.end()))});
  out.push_back({prefix + "pc_std", Tensor({2}, std::vector<double>(pc_std.begin(), pc_std.end()))});
  out.push_back({prefix + "eigenvalues", Tensor({eigenvalues.size()}, eigenvalues)});
  out.push_back({prefix + "rank_deficient", Tensor::scalar(rank_deficient ? 1.0 : 0.0)});
  return out;
}

EofBasis EofBasis::from_entries(const std::vector<NamedTensor>& entries, const std::string& prefix) {
  EofBasis b;
  b.patterns = find_entry(entries, prefix + "patterns");
  require(b.patterns.rank() == 2 && b.patterns.dim(0) == 2 && b.patterns.dim(1) % 3 == 0,
          ErrorKind::format, "EOF patterns have shape " + shape_str(b.patterns.shape()));
  b.lon_count = b.patterns.dim(1) / 3;
  const Tensor& fs = find_entry(entries, prefix + "field_scale");
  const Tensor& ps = find_entry(entries, prefix + "pc_std");
  require(fs.size() == 3 && ps.size() == 2, ErrorKind::format, "EOF scale entries malformed");
  for (int i = 0; i < 3; ++i) b.field_scale[i] = fs[i];
  for (int i = 0; i < 2; ++i) b.pc_std[i] = ps[i];
  b.eigenvalues = find_entry(entries, prefix + "eigenvalues").values();
  b.rank_deficient = find_entry(entries, prefix + "rank_deficient")[0] != 0.0;
  return b;
}

namespace {

std::array<std::size_t, 3> field_channels(const GridSpec& spec) {
  return {spec.channel(kRmmFields[0]), spec.channel(kRmmFields[1]), spec.channel(kRmmFields[2])};
}

// Meridional means, [T, 3, w], unnormalized.
std::vector<double> meridional_means(const GriddedSeries& s) {
  const auto ch = field_channels(s.spec);
  const std::size_t T = s.days(), l = s.spec.lat_count, w = s.spec.lon_count;
  std::vector<double> out(T * 3 * w, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t j = 0; j < w; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < l; ++i) acc += s.at(t, i, j, ch[f]);
        out[(t * 3 + f) * w + j] = acc / static_cast<double>(l);
      }
  return out;
}

// Positive when `b` is `a` displaced eastward (toward increasing longitude
// index), summed over the three circular field segments.
double eastward_lead(const double* a, const double* b, std::size_t w) {
  double m = 0.0;
  for (std::size_t f = 0; f < 3; ++f) {
    const double* x = a + f * w;
    const double* y = b + f * w;
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t west = (j + w - 1) % w, east = (j + 1) % w;
      m += (x[west] - x[east]) * y[j];
    }
  }
  return m;
}

}  // namespace

std::vector<double> rmm_state(const GriddedSeries& anomalies, std::size_t t,
                              const std::array<double, 3>& field_scale) {
  const auto ch = field_channels(anomalies.spec);
  const std::size_t l = anomalies.spec.lat_count, w = anomalies.spec.lon_count;
  std::vector<double> v(3 * w);
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < l; ++i) acc += anomalies.at(t, i, j, ch[f]);
      v[f * w + j] = acc / static_cast<double>(l) / field_scale[f];
    }
  return v;
}

EofBasis compute_eof_basis(const GriddedSeries& anomalies) {
  anomalies.validate();
  const std::size_t T = anomalies.days(), w = anomalies.spec.lon_count, n = 3 * w;
  require(T >= 2, ErrorKind::coverage, "EOF analysis needs at least 2 days");
  std::vector<double> m = meridional_means(anomalies);

  EofBasis basis;
  basis.lon_count = w;
  basis.rank_deficient = T < n;
  for (std::size_t f = 0; f < 3; ++f) {
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < w; ++j) mean += m[(t * 3 + f) * w + j];
    mean /= static_cast<double>(T * w);
    double var = 0.0;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < w; ++j) {
        const double d = m[(t * 3 + f) * w + j] - mean;
        var += d * d;
      }
    const double sd = std::sqrt(var / static_cast<double>(T * w));
    require(sd > 0.0, ErrorKind::degeneracy, kRmmFields[f] + " field has zero variance");
    basis.field_scale[f] = sd;
  }
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t j = 0; j < w; ++j) m[(t * 3 + f) * w + j] /= basis.field_scale[f];

  std::vector<double> mean(n, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t q = 0; q < n; ++q) mean[q] += m[t * n + q];
  for (double& v : mean) v /= static_cast<double>(T);
  Tensor cov({n, n}, 0.0);
  std::vector<double> centered(T * n);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t q = 0; q < n; ++q) centered[t * n + q] = m[t * n + q] - mean[q];
  for (std::size_t t = 0; t < T; ++t) {
    const double* row = centered.data() + t * n;
    for (std::size_t p = 0; p < n; ++p) {
      const double rp = row[p];
      double* out = cov.raw() + p * n;
      for (std::size_t q = p; q < n; ++q) out[q] += rp * row[q];
    }
  }
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = p; q < n; ++q) {
      cov[p * n + q] /= static_cast<double>(T);
      cov[q * n + p] = cov[p * n + q];
    }

  auto eig = linalg::symmetric_eigen(cov);
  basis.eigenvalues = eig.values;
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
  };
  if (close(eig.values[0], eig.values[1]) || (n > 2 && close(eig.values[1], eig.values[2])))
    fail(ErrorKind::degeneracy, "leading eigenvalues are degenerate; EOF1/EOF2 not identifiable");

  basis.patterns = Tensor({2, n}, 0.0);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t q = 0; q < n; ++q) basis.patterns[k * n + q] = eig.vectors[q * n + k];

  double* e1 = basis.patterns.raw();
  double* e2 = e1 + n;
  double olr = 0.0, peak = 0.0;
  for (std::size_t j = 0; j < w; ++j) {
    olr += e1[j];
    if (std::abs(e1[j]) > std::abs(peak)) peak = e1[j];
  }
  const bool flip1 = std::abs(olr) > 1e-10 ? olr > 0.0 : peak > 0.0;
  if (flip1)
    for (std::size_t q = 0; q < n; ++q) e1[q] = -e1[q];
  if (eastward_lead(e1, e2, w) < 0.0)
    for (std::size_t q = 0; q < n; ++q) e2[q] = -e2[q];

  for (std::size_t k = 0; k < 2; ++k) {
    const double* e = basis.patterns.raw() + k * n;
    double s = 0.0, s2 = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      double pc = 0.0;
      for (std::size_t q = 0; q < n; ++q) pc += m[t * n + q] * e[q];
      s += pc;
      s2 += pc * pc;
    }
    const double mu = s / static_cast<double>(T);
    const double var = s2 / static_cast<double>(T) - mu * mu;
    require(var > 0.0, ErrorKind::degeneracy, "principal component has zero variance");
    basis.pc_std[k] = std::sqrt(var);
  }
  return basis;
}

RmmSeries project_rmm(const GriddedSeries& anomalies, const EofBasis& basis) {
  anomalies.validate();
  require(anomalies.spec.lon_count == basis.lon_count, ErrorKind::dimension,
          "EOF basis fitted on " + std::to_string(basis.lon_count) +
              " longitudes, anomalies have " + std::to_string(anomalies.spec.lon_count));
  const std::size_t T = anomalies.days(), n = 3 * basis.lon_count;
  std::vector<double> r1(T), r2(T);
  parallel_for(T, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const auto v = rmm_state(anomalies, t, basis.field_scale);
      double p1 = 0.0, p2 = 0.0;
      for (std::size_t q = 0; q < n; ++q) {
        p1 += v[q] * basis.patterns[q];
        p2 += v[q] * basis.patterns[n + q];
      }
      r1[t] = p1 / basis.pc_std[0];
      r2[t] = p2 / basis.pc_std[1];
    }
  });
  RmmSeries out;
  for (std::size_t t = 0; t < T; ++t) out.push_back(anomalies.date_at(t), r1[t], r2[t]);
  return out;
}

double rmm_amplitude(double rmm1, double rmm2) { return std::hypot(rmm1, rmm2); }

bool mjo_active(double rmm1, double rmm2) { return rmm_amplitude(rmm1, rmm2) > 1.0; }

int rmm_phase(double x, double y) {
  if (!(x != 0.0 || y != 0.0) || !std::isfinite(x) || !std::isfinite(y))
    fail(ErrorKind::undefined_phase, "RMM phase undefined for zero or non-finite vector");
  const double ax = std::abs(x), ay = std::abs(y);
  if (y < 0.0) {
    if (x < 0.0) return ay < ax ? 1 : 2;
    return ay > ax ? 3 : 4;
  }
  if (y == 0.0) return x < 0.0 ? 1 : 5;
  if (x > 0.0) return y < x ? 5 : 6;
  return y > ax ? 7 : 8;
}

void write_rmm_csv(const std::filesystem::path& path, const RmmSeries& series) {
  series.validate();
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << "date,rmm1,rmm2\n";
  char buf[96];
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g\n", series.dates[i].iso().c_str(),
                  series.rmm1[i], series.rmm2[i]);
    out << buf;
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

RmmSeries read_rmm_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "date,rmm1,rmm2")
    fail(ErrorKind::format, path.string() + ": expected header 'date,rmm1,rmm2'");
  RmmSeries s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string d, a, b;
    if (!std::getline(ss, d, ',') || !std::getline(ss, a, ',') || !std::getline(ss, b))
      fail(ErrorKind::parse, path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    try {
      s.push_back(Date::parse(d), std::stod(a), std::stod(b));
    } catch (const std::logic_error&) {
      fail(ErrorKind::parse, path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  s.validate();
  return s;
}

void write_basis_file(const std::filesystem::path& path, const EofBasis& basis) {
  write_param_file(path, basis.to_entries());
}

EofBasis read_basis_file(const std::filesystem::path& path) {
  return EofBasis::from_entries(read_param_file(path));
}

}  // namespace dkstn
