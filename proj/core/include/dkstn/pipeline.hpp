#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dkstn/config.hpp"
#include "dkstn/dkpm.hpp"
#include "dkstn/metrics.hpp"
#include "dkstn/rmm.hpp"
#include "dkstn/samples.hpp"
#include "dkstn/training.hpp"

namespace dkstn {

using Logger = std::function<void(const std::string&)>;

/// Calendar split of a record: train, then validation, then test, all
/// inclusive ranges.
struct Periods {
  Date train_first, train_last;
  Date valid_first, valid_last;
  Date test_first, test_last;
};

Periods split_periods(Date first, Date last, std::size_t valid_days, std::size_t test_days);

struct SynthOutput {
  GriddedSeries reanalysis;
  std::vector<GriddedSeries> model;
};

/// Reanalysis stand-in plus pseudo-model series that share its signal seed
/// and differ in noise seed and bias.
SynthOutput synthesize(const RunConfig& config);

struct Preprocessed {
  HarmonicFit fit;
  GriddedSeries anomalies;
};

/// Fits harmonics on days up to `fit_last` (all days when unset) and applies
/// the preprocessing chain to the whole series.
Preprocessed preprocess_raw(const GriddedSeries& raw, std::optional<Date> fit_last,
                            const RunConfig& config);

struct Labels {
  EofBasis basis;
  RmmSeries rmm;
};

/// EOF basis from anomalies up to `fit_last`, projected over all days.
Labels make_labels(const GriddedSeries& anomalies, std::optional<Date> fit_last);

/// Days of `series` inside [first, last]; throws coverage when empty.
GriddedSeries clip_dates(const GriddedSeries& series, Date first, Date last);

/// Builds merged training samples and validation samples per the config and
/// trains a fresh model. `fit` is stored in the checkpoint for inference.
DkstnModel train_from_anomalies(const RunConfig& config,
                                std::shared_ptr<const GriddedSeries> reanalysis,
                                const std::vector<std::shared_ptr<const GriddedSeries>>& model,
                                const RmmSeries& labels, const HarmonicFit& fit,
                                std::vector<EpochLog>* history = nullptr,
                                const Logger& log = {});

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& history);

/// Forecasts at every anchor in [from, to] with full context in `raw`. When
/// `labels` is given, only anchors whose lead days are all labelled are used
/// and `truth` receives the matching observations.
Forecast predict_range(DkstnModel& model, const GriddedSeries& raw, Date from, Date to,
                       const RmmSeries* labels = nullptr, Forecast* truth = nullptr);

struct EvalOptions {
  PhaseMode phase_mode = PhaseMode::literal;
  double cor_threshold = 0.5;
  double rmse_threshold = 1.4;
  bool seasonal = false;
};

/// Writes the report to `out_csv` and, when seasonal, one file per populated
/// season next to it (`<stem>_<SEASON>.csv`). Returns the overall report.
SkillReport evaluate_forecasts(const Forecast& pred, const Forecast& truth,
                               const std::filesystem::path& out_csv, const EvalOptions& options);

struct Manifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
  void add_artifact(const std::string& name, const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;
};

/// synth -> preprocess -> labels -> train -> predict -> eval into `out_dir`.
/// Stage failures are rethrown with the stage name; files written before the
/// failure are kept.
Manifest run_all(const RunConfig& config, const std::filesystem::path& config_path,
                 const std::filesystem::path& out_dir, const Logger& log = {});

}  // namespace dkstn
