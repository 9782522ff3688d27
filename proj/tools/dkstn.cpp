// dkstn: command-line front end over the dkstn core library.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>

#include "dkstn/config.hpp"
#include "dkstn/dkpm.hpp"
#include "dkstn/error.hpp"
#include "dkstn/grid.hpp"
#include "dkstn/metrics.hpp"
#include "dkstn/model.hpp"
#include "dkstn/pipeline.hpp"
#include "dkstn/rmm.hpp"
#include "dkstn/synth.hpp"
#include "dkstn/training.hpp"

namespace fs = std::filesystem;
using namespace dkstn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void info(const std::string& msg) { std::cerr << "dkstn: " << msg << "\n"; }

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig() : RunConfig::load(path);
}

std::optional<Date> optional_date(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return Date::parse(text);
}

struct SynthArgs {
  std::string config, out_dir = ".";
  long long days = -1, seed = -1;
};

int cmd_synth(const SynthArgs& a) {
  RunConfig cfg = load_config(a.config);
  if (a.days >= 0) cfg.set("synth", "days", std::to_string(a.days));
  if (a.seed >= 0) cfg.set("run", "seed", std::to_string(a.seed));
  fs::create_directories(a.out_dir);
  const SynthOutput s = synthesize(cfg);
  write_grid_file(fs::path(a.out_dir) / "reanalysis.dkg", s.reanalysis);
  for (std::size_t i = 0; i < s.model.size(); ++i)
    write_grid_file(fs::path(a.out_dir) / ("model_" + std::to_string(i + 1) + ".dkg"), s.model[i]);
  info("wrote reanalysis and " + std::to_string(s.model.size()) + " model series to " + a.out_dir);
  return kExitOk;
}

struct PreprocessArgs {
  std::string input, output, fit_out, fit_in, fit_until, config;
  bool skip_sst_mask = false;
};

int cmd_preprocess(const PreprocessArgs& a) {
  RunConfig cfg = load_config(a.config);
  if (a.skip_sst_mask) cfg.set("dkpm", "mask_sst", "false");
  const GriddedSeries raw = read_grid_file(a.input);
  HarmonicFit fit;
  GriddedSeries anomalies;
  if (!a.fit_in.empty()) {
    fit = read_fit_file(a.fit_in);
    PreprocessOptions opt;
    opt.mask_sst = cfg.get_bool("dkpm", "mask_sst");
    opt.running_mean_days = cfg.get_size("dkpm", "running_mean_days");
    anomalies = preprocess(raw, fit, opt);
  } else {
    Preprocessed p = preprocess_raw(raw, optional_date(a.fit_until), cfg);
    fit = std::move(p.fit);
    anomalies = std::move(p.anomalies);
  }
  write_grid_file(a.output, anomalies);
  if (!a.fit_out.empty()) write_fit_file(a.fit_out, fit);
  info("anomalies " + anomalies.start_date.iso() + ".." + anomalies.end_date().iso() + " -> " +
       a.output);
  return kExitOk;
}

struct LabelsArgs {
  std::string anomalies, basis_out, basis_in, labels_out, fit_until;
};

int cmd_labels(const LabelsArgs& a) {
  const GriddedSeries anomalies = read_grid_file(a.anomalies);
  EofBasis basis;
  RmmSeries rmm;
  if (!a.basis_in.empty()) {
    basis = read_basis_file(a.basis_in);
    rmm = project_rmm(anomalies, basis);
  } else {
    Labels l = make_labels(anomalies, optional_date(a.fit_until));
    basis = std::move(l.basis);
    rmm = std::move(l.rmm);
    if (basis.rank_deficient)
      info("warning: fewer days than state-vector entries; EOFs are rank deficient");
  }
  if (!a.basis_out.empty()) write_basis_file(a.basis_out, basis);
  write_rmm_csv(a.labels_out, rmm);
  char buf[128];
  std::snprintf(buf, sizeof buf, "EOF1/EOF2 explain %.1f%% / %.1f%% of variance",
                100.0 * basis.explained(0), 100.0 * basis.explained(1));
  info(buf);
  return kExitOk;
}

struct TrainArgs {
  std::string data, labels, config, checkpoint_out, log, fit;
  std::vector<std::string> model_data;
};

int cmd_train(const TrainArgs& a) {
  const RunConfig cfg = load_config(a.config);
  auto rea = std::make_shared<const GriddedSeries>(read_grid_file(a.data, SourceTag::reanalysis));
  std::vector<std::shared_ptr<const GriddedSeries>> models;
  for (const auto& m : a.model_data)
    models.push_back(std::make_shared<const GriddedSeries>(read_grid_file(m, SourceTag::model)));
  const RmmSeries labels = read_rmm_csv(a.labels);
  std::optional<HarmonicFit> fit;
  if (!a.fit.empty()) fit = read_fit_file(a.fit);
  std::vector<EpochLog> history;
  DkstnModel model = train_from_anomalies(cfg, rea, models, labels, fit ? *fit : HarmonicFit{},
                                          &history, info);
  if (!fit) model.harmonics.reset();
  model.save(a.checkpoint_out);
  if (!a.log.empty()) write_train_log(a.log, history);
  info("best epoch " + std::to_string(model.meta.best_epoch) + " -> " + a.checkpoint_out);
  return kExitOk;
}

struct PredictArgs {
  std::string checkpoint, data, labels, from, to, out, truth_out;
};

int cmd_predict(const PredictArgs& a) {
  DkstnModel model = DkstnModel::load(a.checkpoint);
  const GriddedSeries raw = read_grid_file(a.data);
  const Date from = a.from.empty() ? raw.start_date : Date::parse(a.from);
  const Date to = a.to.empty() ? raw.end_date() : Date::parse(a.to);
  std::optional<RmmSeries> labels;
  if (!a.labels.empty()) labels = read_rmm_csv(a.labels);
  if (!a.truth_out.empty() && !labels)
    fail(ErrorKind::usage, "--truth-out requires --labels");
  Forecast truth;
  const Forecast pred = predict_range(model, raw, from, to, labels ? &*labels : nullptr, &truth);
  write_forecast_csv(a.out, pred);
  if (!a.truth_out.empty()) write_forecast_csv(a.truth_out, truth);
  info(std::to_string(pred.anchors.size()) + " forecasts of " + std::to_string(model.horizon()) +
       " days -> " + a.out);
  return kExitOk;
}

struct ExtendArgs {
  std::string checkpoint, out;
  long long extra = 0;
};

int cmd_extend(const ExtendArgs& a) {
  if (a.extra < 1) fail(ErrorKind::parameter, "--extra-days must be at least 1");
  DkstnModel model = DkstnModel::load(a.checkpoint);
  model.decoder = extend_horizon(model.decoder, static_cast<std::size_t>(a.extra));
  model.save(a.out);
  info("horizon " + std::to_string(model.config.taam.n) + " -> " +
       std::to_string(model.horizon()) + " days");
  return kExitOk;
}

struct EvalArgs {
  std::string pred, truth, out_csv, phase_mode = "literal";
  bool seasonal = false;
  double cor_threshold = 0.5, rmse_threshold = 1.4;
};

int cmd_eval(const EvalArgs& a) {
  EvalOptions opt;
  opt.phase_mode = parse_phase_mode(a.phase_mode);
  opt.seasonal = a.seasonal;
  opt.cor_threshold = a.cor_threshold;
  opt.rmse_threshold = a.rmse_threshold;
  const SkillReport r =
      evaluate_forecasts(read_forecast_csv(a.pred), read_forecast_csv(a.truth), a.out_csv, opt);
  std::cout << "skill_cor=" << r.skill.cor << " skill_rmse=" << r.skill.rmse
            << " skill_combined=" << r.skill.combined << "\n";
  return kExitOk;
}

int cmd_inspect(const std::string& checkpoint) {
  DkstnModel model = DkstnModel::load(checkpoint);
  std::size_t total = 0;
  for (Parameter* p : model.parameters()) {
    std::cout << p->name << " " << shape_str(p->value.shape()) << "\n";
    total += p->value.size();
  }
  const ModelConfig& c = model.config;
  std::cout << "parameters " << total << "\n";
  std::cout << "config.grid " << c.lat << "x" << c.lon << "x" << c.channels << "\n";
  std::cout << "config.srcm layers=" << c.srcm.layers << " channels=" << c.srcm.channels
            << " first_kernel=" << c.srcm.first_kernel
            << " residual_kernel=" << c.srcm.residual_kernel
            << " first_stride=" << c.srcm.first_stride
            << " projection_dim=" << c.srcm.projection_dim << "\n";
  std::cout << "config.taam k=" << c.taam.k << " n=" << c.taam.n << " hidden=" << c.taam.hidden
            << " tied_decoder=" << (c.taam.tied_decoder ? "true" : "false") << "\n";
  std::cout << "n " << c.taam.n << "\n";
  std::cout << "n_extended " << model.horizon() << "\n";
  std::cout << "epochs_run " << model.meta.epochs_run << " best_epoch " << model.meta.best_epoch
            << " seed " << model.meta.seed << "\n";
  std::cout << "harmonic_fit " << (model.harmonics ? "yes" : "no") << "\n";
  return kExitOk;
}

struct AllArgs {
  std::string config, out;
};

int cmd_all(const AllArgs& a) {
  const RunConfig cfg = RunConfig::load(a.config);
  const fs::path out = a.out.empty() ? fs::path(cfg.get("run", "output_dir")) : fs::path(a.out);
  run_all(cfg, a.config, out, info);
  info("run complete; manifest at " + (out / "manifest.txt").string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dkstn: MJO forecasting toolkit (preprocessing, RMM labels, training, evaluation)"};
  app.set_version_flag("--version", DKSTN_VERSION);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate synthetic reanalysis and model series");
  s->add_option("--config", synth.config, "run config file");
  s->add_option("--out", synth.out_dir, "output directory");
  s->add_option("--days", synth.days, "override [synth] days");
  s->add_option("--seed", synth.seed, "override [run] seed");

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "remove annual cycle and 120-day mean, mask SST");
  p->add_option("--input", pre.input, "raw grid file")->required();
  p->add_option("--output", pre.output, "anomaly grid file")->required();
  p->add_option("--fit-out", pre.fit_out, "write the harmonic fit");
  p->add_option("--fit-in", pre.fit_in, "reuse a stored harmonic fit");
  p->add_option("--fit-until", pre.fit_until, "last day (YYYY-MM-DD) of the fitting period");
  p->add_option("--config", pre.config, "run config file");
  p->add_flag("--skip-sst-mask", pre.skip_sst_mask, "keep land-masked SST values");

  LabelsArgs lab;
  auto* l = app.add_subcommand("labels", "derive RMM labels from anomalies");
  l->add_option("--anomalies", lab.anomalies, "anomaly grid file")->required();
  l->add_option("--basis-out", lab.basis_out, "write the EOF basis");
  l->add_option("--basis-in", lab.basis_in, "project onto a stored EOF basis");
  l->add_option("--labels-out", lab.labels_out, "RMM CSV output")->required();
  l->add_option("--fit-until", lab.fit_until, "last day of the EOF fitting period");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model on anomalies and labels");
  t->add_option("--data", tr.data, "reanalysis anomaly grid file")->required();
  t->add_option("--model-data", tr.model_data, "model anomaly grid file (repeatable)");
  t->add_option("--labels", tr.labels, "RMM label CSV")->required();
  t->add_option("--config", tr.config, "run config file");
  t->add_option("--checkpoint-out", tr.checkpoint_out, "checkpoint path")->required();
  t->add_option("--log", tr.log, "epoch,train_loss,valid_loss CSV");
  t->add_option("--fit", tr.fit, "harmonic fit stored with the checkpoint for raw-data predict");

  PredictArgs pr;
  auto* d = app.add_subcommand("predict", "forecast RMM from raw fields");
  d->add_option("--checkpoint", pr.checkpoint, "checkpoint path")->required();
  d->add_option("--data", pr.data, "raw grid file")->required();
  d->add_option("--labels", pr.labels, "RMM CSV; restricts anchors to labelled leads");
  d->add_option("--from", pr.from, "first anchor date");
  d->add_option("--to", pr.to, "last anchor date");
  d->add_option("--out", pr.out, "forecast CSV")->required();
  d->add_option("--truth-out", pr.truth_out, "matching observed RMM CSV");

  ExtendArgs ex;
  auto* e = app.add_subcommand("extend", "extend the decoder horizon by copying the last step");
  e->add_option("--checkpoint", ex.checkpoint, "input checkpoint")->required();
  e->add_option("--extra-days", ex.extra, "additional lead days")->required();
  e->add_option("--out", ex.out, "output checkpoint")->required();

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "COR, RMSE, amplitude and phase error per lead");
  v->add_option("--pred", ev.pred, "forecast CSV")->required();
  v->add_option("--truth", ev.truth, "observed CSV")->required();
  v->add_option("--out-csv", ev.out_csv, "report CSV")->required();
  v->add_flag("--seasonal", ev.seasonal, "also write per-season reports");
  v->add_option("--phase-mode", ev.phase_mode, "literal or wrapped");
  v->add_option("--cor-threshold", ev.cor_threshold, "COR skill threshold");
  v->add_option("--rmse-threshold", ev.rmse_threshold, "RMSE skill threshold");

  std::string inspect_path;
  auto* i = app.add_subcommand("inspect", "summarize a checkpoint");
  i->add_option("--checkpoint", inspect_path, "checkpoint path")->required();

  AllArgs all;
  auto* a = app.add_subcommand("all", "synth, preprocess, labels, train, predict and eval");
  a->add_option("--config", all.config, "run config file")->required();
  a->add_option("--out", all.out, "artifact directory (default [run] output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "dkstn: error[usage]: " << ex.what() << "\n";
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth);
    if (p->parsed()) return cmd_preprocess(pre);
    if (l->parsed()) return cmd_labels(lab);
    if (t->parsed()) return cmd_train(tr);
    if (d->parsed()) return cmd_predict(pr);
    if (e->parsed()) return cmd_extend(ex);
    if (v->parsed()) return cmd_eval(ev);
    if (i->parsed()) return cmd_inspect(inspect_path);
    if (a->parsed()) return cmd_all(all);
  } catch (const Error& err) {
    std::cerr << "dkstn: error[" << to_string(err.kind()) << "]: " << err.what() << "\n";
    return err.kind() == ErrorKind::usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& err) {
    std::cerr << "dkstn: error[internal]: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
