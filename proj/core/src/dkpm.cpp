#include "dkstn/dkpm.hpp"

#include <cmath>
#include <numbers>

#include "dkstn/error.hpp"
#include "dkstn/linalg.hpp"
#include "dkstn/parallel.hpp"
#include "dkstn/synth.hpp"

namespace dkstn {

namespace {

bool harmonic_exempt(const std::string& name) { return name == "SST"; }

void check_fit_compatible(const GriddedSeries& s, const HarmonicFit& fit) {
  bool ok = s.spec.lat_count == fit.lat_count && s.spec.lon_count == fit.lon_count &&
            s.spec.channel_count() == fit.variables.size();
  for (std::size_t c = 0; ok && c < fit.variables.size(); ++c)
    ok = s.spec.variables[c].name == fit.variables[c];
  require(ok, ErrorKind::dimension, "harmonic fit does not match the series grid");
}

}  // namespace

std::vector<double> HarmonicFit::basis(Date d) const {
  const double t = static_cast<double>(d - origin);
  std::vector<double> row(coefficient_count());
  row[0] = 1.0;
  for (std::size_t n = 1; n <= max_wave; ++n) {
    const double arg = static_cast<double>(n) * omega * t;
    row[2 * n - 1] = std::cos(arg);
    row[2 * n] = std::sin(arg);
  }
  return row;
}

double HarmonicFit::reconstruct(std::size_t i, std::size_t j, std::size_t c, Date d) const {
  const auto row = basis(d);
  double v = 0.0;
  for (std::size_t q = 0; q < row.size(); ++q) v += coefficient(i, j, c, q) * row[q];
  return v;
}

std::vector<NamedTensor> HarmonicFit::to_entries(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  out.push_back({prefix + "coefficients", coefficients});
  out.push_back({prefix + "omega", Tensor::scalar(omega)});
  out.push_back({prefix + "origin", Tensor::scalar(static_cast<double>(origin.serial()))});
  std::vector<double> mask;
  for (bool b : fitted) mask.push_back(b ? 1.0 : 0.0);
  out.push_back({prefix + "fitted", Tensor({mask.size()}, mask)});
  // Variable names as code points, NUL separated.
  std::vector<double> names;
  for (const auto& v : variables) {
    for (unsigned char ch : v) names.push_back(ch);
    names.push_back(0.0);
  }
  out.push_back({prefix + "variables", Tensor({names.size()}, names)});
  return out;
}

HarmonicFit HarmonicFit::from_entries(const std::vector<NamedTensor>& entries,
                                      const std::string& prefix) {
  HarmonicFit f;
  f.coefficients = find_entry(entries, prefix + "coefficients");
  require(f.coefficients.rank() == 4 && f.coefficients.dim(3) % 2 == 1, ErrorKind::format,
          "harmonic coefficients have shape " + shape_str(f.coefficients.shape()));
  f.lat_count = f.coefficients.dim(0);
  f.lon_count = f.coefficients.dim(1);
  f.max_wave = (f.coefficients.dim(3) - 1) / 2;
  f.omega = find_entry(entries, prefix + "omega")[0];
  f.origin = Date::from_serial(static_cast<std::int64_t>(find_entry(entries, prefix + "origin")[0]));
  for (double v : find_entry(entries, prefix + "fitted").data()) f.fitted.push_back(v != 0.0);
  std::string cur;
  for (double v : find_entry(entries, prefix + "variables").data()) {
    if (v == 0.0) {
      f.variables.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(static_cast<int>(v)));
    }
  }
  require(f.variables.size() == f.coefficients.dim(2) && f.fitted.size() == f.variables.size(),
          ErrorKind::format, "harmonic fit variable list does not match coefficients");
  return f;
}

HarmonicFit fit_harmonics(const GriddedSeries& series, std::size_t max_wave) {
  series.validate();
  const std::size_t T = series.days();
  const auto min_days = static_cast<std::size_t>(std::ceil(kAnnualPeriod));
  require(T >= min_days, ErrorKind::coverage,
          "harmonic fit needs at least " + std::to_string(min_days) + " days, series has " +
              std::to_string(T));
  require(max_wave >= 1, ErrorKind::parameter, "max_wave must be at least 1");

  HarmonicFit fit;
  fit.max_wave = max_wave;
  fit.omega = 2.0 * std::numbers::pi / kAnnualPeriod;
  fit.origin = series.start_date;
  fit.lat_count = series.spec.lat_count;
  fit.lon_count = series.spec.lon_count;
  const std::size_t C = series.spec.channel_count(), Q = fit.coefficient_count();
  for (const auto& v : series.spec.variables) {
    fit.variables.push_back(v.name);
    fit.fitted.push_back(!harmonic_exempt(v.name));
  }

  std::vector<double> phi(T * Q);
  for (std::size_t t = 0; t < T; ++t) {
    const auto row = fit.basis(series.date_at(t));
    std::copy(row.begin(), row.end(), phi.begin() + static_cast<std::ptrdiff_t>(t * Q));
  }
  Tensor gram({Q, Q}, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t p = 0; p < Q; ++p)
      for (std::size_t q = 0; q < Q; ++q) gram[p * Q + q] += phi[t * Q + p] * phi[t * Q + q];

  const std::size_t P = series.frame_size();
  fit.coefficients = Tensor({fit.lat_count, fit.lon_count, C, Q}, 0.0);
  const double* x = series.values.raw();
  parallel_for(P, [&](std::size_t begin, std::size_t end) {
    std::vector<double> rhs((end - begin) * Q, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      const double* row = phi.data() + t * Q;
      const double* frame = x + t * P;
      for (std::size_t p = begin; p < end; ++p) {
        const double v = frame[p];
        double* r = rhs.data() + (p - begin) * Q;
        for (std::size_t q = 0; q < Q; ++q) r[q] += row[q] * v;
      }
    }
    for (std::size_t p = begin; p < end; ++p) {
      if (!fit.fitted[p % C]) continue;
      std::vector<double> b(rhs.begin() + static_cast<std::ptrdiff_t>((p - begin) * Q),
                            rhs.begin() + static_cast<std::ptrdiff_t>((p - begin + 1) * Q));
      const auto sol = linalg::cholesky_solve(gram, b);
      std::copy(sol.begin(), sol.end(), fit.coefficients.raw() + p * Q);
    }
  });
  return fit;
}

GriddedSeries remove_cycles(const GriddedSeries& series, const HarmonicFit& fit) {
  series.validate();
  check_fit_compatible(series, fit);
  GriddedSeries out = series;
  const std::size_t T = series.days(), P = series.frame_size(), C = series.spec.channel_count();
  const std::size_t Q = fit.coefficient_count();
  parallel_for(T, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const auto row = fit.basis(series.date_at(t));
      double* frame = out.values.raw() + t * P;
      for (std::size_t p = 0; p < P; ++p) {
        if (!fit.fitted[p % C]) continue;
        const double* coef = fit.coefficients.raw() + p * Q;
        double clim = 0.0;
        for (std::size_t q = 0; q < Q; ++q) clim += coef[q] * row[q];
        frame[p] -= clim;
      }
    }
  });
  return out;
}

GriddedSeries remove_running_mean(const GriddedSeries& series, std::size_t window) {
  series.validate();
  const std::size_t T = series.days();
  require(window >= 1, ErrorKind::parameter, "running-mean window must be positive");
  require(T > window, ErrorKind::coverage,
          "running-mean removal needs more than " + std::to_string(window) +
              " days, series has " + std::to_string(T));
  const std::size_t P = series.frame_size(), C = series.spec.channel_count();
  std::vector<bool> exempt(C);
  for (std::size_t c = 0; c < C; ++c) exempt[c] = harmonic_exempt(series.spec.variables[c].name);

  GriddedSeries out = series.slice(window, T - window);
  const double* x = series.values.raw();
  const double inv = 1.0 / static_cast<double>(window);
  parallel_for(P, [&](std::size_t begin, std::size_t end) {
    std::vector<double> acc(end - begin, 0.0);
    for (std::size_t t = window; t < T; ++t) {
      // The window sum is rebuilt from scratch every `window` steps so
      // rounding drift from the rolling update stays bounded.
      if ((t - window) % window == 0) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t s = t - window; s < t; ++s)
          for (std::size_t p = begin; p < end; ++p) acc[p - begin] += x[s * P + p];
      } else {
        for (std::size_t p = begin; p < end; ++p)
          acc[p - begin] += x[(t - 1) * P + p] - x[(t - 1 - window) * P + p];
      }
      double* o = out.values.raw() + (t - window) * P;
      for (std::size_t p = begin; p < end; ++p)
        if (!exempt[p % C]) o[p] = x[t * P + p] - acc[p - begin] * inv;
    }
  });
  return out;
}

GriddedSeries mask_sst(const GriddedSeries& series) {
  series.validate();
  const std::size_t sst = series.spec.channel("SST");
  GriddedSeries out = series;
  const std::size_t C = series.spec.channel_count();
  for (std::size_t p = sst; p < out.values.size(); p += C)
    if (out.values[p] == kLandMask) out.values[p] = 0.0;
  return out;
}

GriddedSeries preprocess(const GriddedSeries& raw, const HarmonicFit& fit,
                         const PreprocessOptions& options) {
  GriddedSeries s = remove_running_mean(remove_cycles(raw, fit), options.running_mean_days);
  return options.mask_sst ? mask_sst(s) : s;
}

void write_fit_file(const std::filesystem::path& path, const HarmonicFit& fit) {
  write_param_file(path, fit.to_entries());
}

HarmonicFit read_fit_file(const std::filesystem::path& path) {
  return HarmonicFit::from_entries(read_param_file(path));
}

// ---------------------------------------------------------------------------
// Batch normalization

BatchNormState::BatchNormState(std::size_t channels)
    : gamma("bn.gamma", Tensor({channels}, 1.0)),
      beta("bn.beta", Tensor({channels}, 0.0)),
      running_mean({channels}, 0.0),
      running_var({channels}, 1.0) {}

Var batchnorm_forward(Var x, BatchNormState& state) {
  Tape& tape = *x.tape;
  const Tensor& xv = x.value();
  const std::size_t C = state.channels();
  require(xv.rank() >= 2 && xv.shape().back() == C, ErrorKind::dimension,
          "batchnorm: input " + shape_str(xv.shape()) + " does not end in " + std::to_string(C) +
              " channels");
  const bool training = state.mode == BatchNormState::Mode::train;
  if (training)
    require(xv.dim(0) >= 2, ErrorKind::batch,
            "batchnorm in train mode needs a batch of at least 2, got " +
                std::to_string(xv.dim(0)));
  const std::size_t N = xv.size() / C;

  std::vector<double> mu(C, 0.0), var(C, 0.0);
  if (training) {
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t c = 0; c < C; ++c) mu[c] += xv[r * C + c];
    for (auto& m : mu) m /= static_cast<double>(N);
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const double d = xv[r * C + c] - mu[c];
        var[c] += d * d;
      }
    for (auto& v : var) v /= static_cast<double>(N);
    if (state.update_running) {
      const double unbiased = N > 1 ? static_cast<double>(N) / static_cast<double>(N - 1) : 1.0;
      for (std::size_t c = 0; c < C; ++c) {
        state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mu[c];
        state.running_var[c] =
            (1.0 - state.momentum) * state.running_var[c] + state.momentum * var[c] * unbiased;
      }
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mu[c] = state.running_mean[c];
      var[c] = state.running_var[c];
    }
  }

  std::vector<double> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + state.epsilon);
  Var g = tape.param(state.gamma);
  Var b = tape.param(state.beta);
  const Tensor& gv = g.value();
  const Tensor& bv = b.value();
  Tensor xhat(xv.shape());
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t k = r * C + c;
      xhat[k] = (xv[k] - mu[c]) * inv_std[c];
      y[k] = xhat[k] * gv[c] + bv[c];
    }

  const std::size_t ix = x.id, ig = g.id, ib = b.id;
  auto saved = std::make_shared<Tensor>(std::move(xhat));
  return tape.record("batchnorm", std::move(y), {ix, ig, ib},
                     [=](Tape& t, std::size_t self) {
                       const Tensor& dy = *t.grad_for(self);
                       const Tensor& xh = *saved;
                       const Tensor& gam = t.value(ig);
                       std::vector<double> sum_dy(C, 0.0), sum_dy_xh(C, 0.0);
                       for (std::size_t r = 0; r < N; ++r)
                         for (std::size_t c = 0; c < C; ++c) {
                           sum_dy[c] += dy[r * C + c];
                           sum_dy_xh[c] += dy[r * C + c] * xh[r * C + c];
                         }
                       if (Tensor* gg = t.grad_for(ig))
                         for (std::size_t c = 0; c < C; ++c) (*gg)[c] += sum_dy_xh[c];
                       if (Tensor* gb = t.grad_for(ib))
                         for (std::size_t c = 0; c < C; ++c) (*gb)[c] += sum_dy[c];
                       Tensor* gx = t.grad_for(ix);
                       if (!gx) return;
                       const double n = static_cast<double>(N);
                       for (std::size_t r = 0; r < N; ++r)
                         for (std::size_t c = 0; c < C; ++c) {
                           const std::size_t k = r * C + c;
                           if (training)
                             (*gx)[k] += gam[c] * inv_std[c] *
                                         (dy[k] - sum_dy[c] / n - xh[k] * sum_dy_xh[c] / n);
                           else
                             (*gx)[k] += gam[c] * inv_std[c] * dy[k];
                         }
                     });
}

}  // namespace dkstn
