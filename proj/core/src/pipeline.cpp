#include "dkstn/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "dkstn/binary_io.hpp"
#include "dkstn/error.hpp"

#ifndef DKSTN_VERSION
#define DKSTN_VERSION "0.0.0"
#endif

namespace dkstn {

Periods split_periods(Date first, Date last, std::size_t valid_days, std::size_t test_days) {
  const auto total = last - first + 1;
  const auto held = static_cast<std::int64_t>(valid_days + test_days);
  require(valid_days >= 1 && test_days >= 1, ErrorKind::configuration,
          "valid_days and test_days must be positive");
  require(total > held, ErrorKind::coverage,
          "record of " + std::to_string(total) + " days cannot hold " + std::to_string(held) +
              " validation and test days plus a training period");
  Periods p;
  p.test_last = last;
  p.test_first = last - static_cast<std::int64_t>(test_days - 1);
  p.valid_last = p.test_first - 1;
  p.valid_first = p.valid_last - static_cast<std::int64_t>(valid_days - 1);
  p.train_last = p.valid_first - 1;
  p.train_first = first;
  return p;
}

SynthOutput synthesize(const RunConfig& config) {
  const GridSpec spec = config.grid();
  const std::size_t days = config.get_size("synth", "days");
  const auto seed = static_cast<std::uint64_t>(config.get_int("run", "seed"));
  SynthParams params = config.synth_params();
  SynthOutput out;
  params.source = SourceTag::reanalysis;
  out.reanalysis = synth_generate(spec, days, seed, params);
  const std::size_t sources = config.get_size("synth", "model_sources");
  for (std::size_t i = 0; i < sources; ++i) {
    SynthParams mp = params;
    mp.source = SourceTag::model;
    mp.noise_seed = seed * 1000003ULL + 7919ULL * (i + 1);
    mp.bias = config.get_double("synth", "model_bias");
    out.model.push_back(synth_generate(spec, days, seed, mp));
  }
  return out;
}

GriddedSeries clip_dates(const GriddedSeries& series, Date first, Date last) {
  const Date a = std::max(first, series.start_date);
  const Date b = std::min(last, series.end_date());
  require(a <= b, ErrorKind::coverage,
          "series " + series.start_date.iso() + ".." + series.end_date().iso() +
              " has no days inside " + first.iso() + ".." + last.iso());
  return series.slice(static_cast<std::size_t>(a - series.start_date),
                      static_cast<std::size_t>(b - a + 1));
}

Preprocessed preprocess_raw(const GriddedSeries& raw, std::optional<Date> fit_last,
                            const RunConfig& config) {
  const GriddedSeries fit_part =
      fit_last ? clip_dates(raw, raw.start_date, *fit_last) : raw;
  Preprocessed out;
  out.fit = fit_harmonics(fit_part, config.get_size("dkpm", "max_wave"));
  PreprocessOptions opt;
  opt.mask_sst = config.get_bool("dkpm", "mask_sst");
  opt.running_mean_days = config.get_size("dkpm", "running_mean_days");
  out.anomalies = preprocess(raw, out.fit, opt);
  return out;
}

Labels make_labels(const GriddedSeries& anomalies, std::optional<Date> fit_last) {
  const GriddedSeries fit_part =
      fit_last ? clip_dates(anomalies, anomalies.start_date, *fit_last) : anomalies;
  Labels out;
  out.basis = compute_eof_basis(fit_part);
  out.rmm = project_rmm(anomalies, out.basis);
  return out;
}

DkstnModel train_from_anomalies(const RunConfig& config,
                                std::shared_ptr<const GriddedSeries> reanalysis,
                                const std::vector<std::shared_ptr<const GriddedSeries>>& model,
                                const RmmSeries& labels, const HarmonicFit& fit,
                                std::vector<EpochLog>* history, const Logger& log) {
  const ModelConfig mc = config.model_config();
  const TrainConfig tc = config.train_config();
  // The anomaly record ends where the raw record ends, so the split matches
  // the one computed on raw dates.
  const Periods per = split_periods(reanalysis->start_date, reanalysis->end_date(),
                                    config.get_size("data", "valid_days"),
                                    config.get_size("data", "test_days"));

  auto train_part = std::make_shared<const GriddedSeries>(
      clip_dates(*reanalysis, per.train_first, per.train_last));
  std::vector<std::shared_ptr<const GriddedSeries>> model_parts;
  for (const auto& m : model)
    model_parts.push_back(
        std::make_shared<const GriddedSeries>(clip_dates(*m, m->start_date, per.train_last)));

  MergeConfig merge;
  merge.k = mc.taam.k;
  merge.n = mc.taam.n;
  merge.lead = 0;
  merge.reanalysis_stride = config.get_size("data", "reanalysis_stride");
  merge.model_strides = config.get_size_list("data", "model_stride");
  merge.merge = config.get_bool("data", "merge");
  merge.seed = tc.seed;
  MergeStats stats;
  const SampleSet train_set = merge_sources(train_part, model_parts, labels, merge, &stats);

  WindowConfig wc{mc.taam.k, mc.taam.n, 1, 0};
  const SampleSet valid_set =
      window_series(std::make_shared<const GriddedSeries>(
                        clip_dates(*reanalysis, per.valid_first, per.valid_last)),
                    labels, wc);
  if (log)
    log("train: " + std::to_string(train_set.size()) + " samples (" +
        std::to_string(stats.reanalysis_used) + " reanalysis, " + std::to_string(stats.model_used) +
        " model), " + std::to_string(valid_set.size()) + " validation samples");

  DkstnModel fresh(mc, tc.seed);
  fresh.harmonics = fit;
  auto on_epoch = [&](const EpochLog& e) {
    if (history) history->push_back(e);
    if (log) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "epoch %zu: train %.6f valid %.6f", e.epoch, e.train_loss,
                    e.valid_loss);
      log(buf);
    }
  };
  return train(std::move(fresh), train_set, valid_set, tc, on_epoch);
}

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& history) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << "epoch,train_loss,valid_loss\n";
  char buf[96];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e.epoch, e.train_loss, e.valid_loss);
    out << buf;
  }
}

Forecast predict_range(DkstnModel& model, const GriddedSeries& raw, Date from, Date to,
                       const RmmSeries* labels, Forecast* truth) {
  require(model.harmonics.has_value(), ErrorKind::configuration,
          "checkpoint carries no harmonic fit");
  const std::size_t k = model.config.taam.k, H = model.horizon();
  const Date earliest = raw.start_date + static_cast<std::int64_t>(kRunningMeanDays + k - 1);
  from = std::max(from, earliest);
  to = std::min(to, raw.end_date());
  require(from <= to, ErrorKind::coverage,
          "no forecast anchors with " + std::to_string(kRunningMeanDays + k) +
              " days of context in the requested range");

  // Preprocess the covering span once; anomalies[t] pairs with raw day t+120.
  const std::size_t first = static_cast<std::size_t>(from - raw.start_date) + 1 - k - kRunningMeanDays;
  const std::size_t last = static_cast<std::size_t>(to - raw.start_date);
  const GriddedSeries anomalies = preprocess(raw.slice(first, last - first + 1), *model.harmonics);

  std::vector<Date> anchors;
  std::vector<double> truth_values;
  for (Date a = from; a <= to; a = a + 1) {
    if (labels) {
      std::vector<double> row;
      for (std::size_t h = 1; h <= H; ++h) {
        auto idx = labels->find(a + static_cast<std::int64_t>(h));
        if (!idx) break;
        row.push_back(labels->rmm1[*idx]);
        row.push_back(labels->rmm2[*idx]);
      }
      if (row.size() != 2 * H) continue;
      truth_values.insert(truth_values.end(), row.begin(), row.end());
    }
    anchors.push_back(a);
  }
  require(!anchors.empty(), ErrorKind::coverage,
          "no forecast anchors have labels for all " + std::to_string(H) + " leads");

  const GridSpec& g = anomalies.spec;
  const std::size_t frame = anomalies.frame_size();
  Tensor inputs({anchors.size(), k, g.lat_count, g.lon_count, g.channel_count()}, 0.0);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const std::size_t end = static_cast<std::size_t>(anchors[i] - anomalies.start_date);
    std::copy(anomalies.values.raw() + (end + 1 - k) * frame,
              anomalies.values.raw() + (end + 1) * frame, inputs.raw() + i * k * frame);
  }
  Forecast out{anchors, model.predict(inputs)};
  if (truth) *truth = Forecast{anchors, Tensor({anchors.size(), H, 2}, std::move(truth_values))};
  return out;
}

SkillReport evaluate_forecasts(const Forecast& pred, const Forecast& truth,
                               const std::filesystem::path& out_csv, const EvalOptions& options) {
  require(pred.anchors == truth.anchors, ErrorKind::alignment,
          "prediction and truth tables have different anchors");
  const Tensor& p = pred.values;
  Tensor t = truth.values;
  if (t.dim(1) != p.dim(1)) {
    require(t.dim(1) > p.dim(1), ErrorKind::dimension, "truth has fewer leads than predictions");
    std::vector<double> cut;
    for (std::size_t i = 0; i < t.dim(0); ++i)
      cut.insert(cut.end(), t.values().begin() + static_cast<std::ptrdiff_t>(i * t.dim(1) * 2),
                 t.values().begin() + static_cast<std::ptrdiff_t>((i * t.dim(1) + p.dim(1)) * 2));
    t = Tensor(p.shape(), std::move(cut));
  }
  SkillReport report =
      skill_report(p, t, options.phase_mode, options.cor_threshold, options.rmse_threshold);
  write_report_csv(out_csv, report);
  if (options.seasonal) {
    const auto seasons = seasonal_split(pred.anchors, p, t, options.phase_mode,
                                        options.cor_threshold, options.rmse_threshold);
    for (std::size_t s = 0; s < seasons.size(); ++s) {
      if (!seasons[s]) continue;
      auto path = out_csv;
      path.replace_filename(out_csv.stem().string() + "_" + to_string(kSeasons[s]) +
                            out_csv.extension().string());
      write_report_csv(path, *seasons[s]);
    }
  }
  return report;
}

void Manifest::add_artifact(const std::string& name, const std::filesystem::path& path) {
  add("artifact." + name, path.filename().string());
  add("artifact." + name + ".fnv1a", hex64(fnv1a(binary::read_file(path.string()))));
}

void Manifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  for (const auto& [k, v] : entries) out << k << "=" << v << "\n";
}

namespace {

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
  }
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Manifest run_all(const RunConfig& config, const std::filesystem::path& config_path,
                 const std::filesystem::path& out_dir, const Logger& log) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto path = [&](const std::string& name) { return out_dir / name; };
  auto say = [&](const std::string& m) {
    if (log) log(m);
  };

  Manifest manifest;
  manifest.add("dkstn_version", DKSTN_VERSION);
  manifest.add("created", utc_now());
  manifest.add("config", config_path.string());
  manifest.add("config_hash", hex64(config.hash()));
  manifest.add("seed", config.get("run", "seed"));

  // Raw inputs always pass through the grid file format, so a staged CLI run
  // sees exactly the values this run sees.
  GriddedSeries raw;
  std::vector<GriddedSeries> raw_model;
  stage("synth", [&] {
    if (config.get("data", "reanalysis").empty()) {
      say("synth: generating series");
      SynthOutput s = synthesize(config);
      write_grid_file(path("reanalysis.dkg"), s.reanalysis);
      for (std::size_t i = 0; i < s.model.size(); ++i)
        write_grid_file(path("model_" + std::to_string(i + 1) + ".dkg"), s.model[i]);
      raw = read_grid_file(path("reanalysis.dkg"), SourceTag::reanalysis);
      for (std::size_t i = 0; i < s.model.size(); ++i)
        raw_model.push_back(
            read_grid_file(path("model_" + std::to_string(i + 1) + ".dkg"), SourceTag::model));
      manifest.add_artifact("reanalysis", path("reanalysis.dkg"));
      for (std::size_t i = 0; i < s.model.size(); ++i)
        manifest.add_artifact("model_" + std::to_string(i + 1),
                              path("model_" + std::to_string(i + 1) + ".dkg"));
    } else {
      raw = read_grid_file(config.get("data", "reanalysis"), SourceTag::reanalysis);
      for (const auto& m : config.get_list("data", "model"))
        raw_model.push_back(read_grid_file(m, SourceTag::model));
    }
    return 0;
  });

  const Periods per = split_periods(raw.start_date, raw.end_date(),
                                    config.get_size("data", "valid_days"),
                                    config.get_size("data", "test_days"));
  manifest.add("period.train", per.train_first.iso() + ".." + per.train_last.iso());
  manifest.add("period.valid", per.valid_first.iso() + ".." + per.valid_last.iso());
  manifest.add("period.test", per.test_first.iso() + ".." + per.test_last.iso());

  Preprocessed rea;
  std::vector<std::shared_ptr<const GriddedSeries>> model_anoms;
  stage("preprocess", [&] {
    say("preprocess: harmonic fit over " + per.train_first.iso() + ".." + per.train_last.iso());
    rea = preprocess_raw(raw, per.train_last, config);
    write_fit_file(path("fit.dkw"), rea.fit);
    write_grid_file(path("anomalies.dkg"), rea.anomalies);
    rea.anomalies = read_grid_file(path("anomalies.dkg"), SourceTag::reanalysis);
    manifest.add_artifact("fit", path("fit.dkw"));
    manifest.add_artifact("anomalies", path("anomalies.dkg"));
    for (std::size_t i = 0; i < raw_model.size(); ++i) {
      const std::string stem = "model_" + std::to_string(i + 1);
      Preprocessed m = preprocess_raw(raw_model[i], per.train_last, config);
      write_fit_file(path(stem + "_fit.dkw"), m.fit);
      write_grid_file(path(stem + "_anomalies.dkg"), m.anomalies);
      model_anoms.push_back(std::make_shared<const GriddedSeries>(
          read_grid_file(path(stem + "_anomalies.dkg"), SourceTag::model)));
      manifest.add_artifact(stem + "_anomalies", path(stem + "_anomalies.dkg"));
    }
    return 0;
  });

  Labels labels;
  stage("labels", [&] {
    labels = make_labels(rea.anomalies, per.train_last);
    if (labels.basis.rank_deficient)
      say("labels: warning: fewer days than state-vector entries; EOFs are rank deficient");
    write_basis_file(path("basis.dkw"), labels.basis);
    write_rmm_csv(path("labels.csv"), labels.rmm);
    labels.rmm = read_rmm_csv(path("labels.csv"));
    manifest.add_artifact("basis", path("basis.dkw"));
    manifest.add_artifact("labels", path("labels.csv"));
    return 0;
  });

  DkstnModel model;
  stage("train", [&] {
    std::vector<EpochLog> history;
    model = train_from_anomalies(config, std::make_shared<const GriddedSeries>(rea.anomalies),
                                 model_anoms, labels.rmm, rea.fit, &history, log);
    model.save(path("checkpoint.dkw"));
    write_train_log(path("train_log.csv"), history);
    model = DkstnModel::load(path("checkpoint.dkw"));
    manifest.add_artifact("checkpoint", path("checkpoint.dkw"));
    manifest.add_artifact("train_log", path("train_log.csv"));
    return 0;
  });

  Forecast pred, truth;
  stage("predict", [&] {
    pred = predict_range(model, raw, per.test_first, per.test_last, &labels.rmm, &truth);
    write_forecast_csv(path("predictions.csv"), pred);
    write_forecast_csv(path("truth.csv"), truth);
    pred = read_forecast_csv(path("predictions.csv"));
    truth = read_forecast_csv(path("truth.csv"));
    say("predict: " + std::to_string(pred.anchors.size()) + " forecasts");
    manifest.add_artifact("predictions", path("predictions.csv"));
    manifest.add_artifact("truth", path("truth.csv"));
    return 0;
  });

  stage("eval", [&] {
    EvalOptions opt;
    opt.phase_mode = parse_phase_mode(config.get("eval", "phase_mode"));
    opt.cor_threshold = config.get_double("eval", "cor_threshold");
    opt.rmse_threshold = config.get_double("eval", "rmse_threshold");
    opt.seasonal = config.get_bool("eval", "seasonal");
    const SkillReport r = evaluate_forecasts(pred, truth, path("report.csv"), opt);
    manifest.add_artifact("report", path("report.csv"));
    for (Season s : kSeasons) {
      const auto p = path("report_" + to_string(s) + ".csv");
      if (opt.seasonal && fs::exists(p)) manifest.add_artifact("report_" + to_string(s), p);
    }
    manifest.add("skill.cor", std::to_string(r.skill.cor));
    manifest.add("skill.rmse", std::to_string(r.skill.rmse));
    manifest.add("skill.combined", std::to_string(r.skill.combined));
    say("eval: skill cor/rmse/combined = " + std::to_string(r.skill.cor) + "/" +
        std::to_string(r.skill.rmse) + "/" + std::to_string(r.skill.combined));
    return 0;
  });

  manifest.write(path("manifest.txt"));
  return manifest;
}

}  // namespace dkstn
