#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dkstn/grid.hpp"
#include "dkstn/rmm.hpp"

namespace dkstn {

struct WindowConfig {
  std::size_t k = 7;     // input days
  std::size_t n = 35;    // forecast days
  std::size_t stride = 1;
  std::size_t lead = 0;  // leading days that cannot be inputs (120 for raw series)
};

/// Anchor indices (last input day) of every window in a series of T days:
/// lead+k-1, lead+k-1+stride, ... while anchor+n < T. The count equals
/// floor((T-lead-k-n)/stride)+1 when T >= lead+k+n, else 0.
std::vector<std::size_t> window_anchors(std::size_t days, const WindowConfig& cfg);

/// Windowed (input, label) pairs over shared source series. Inputs are
/// materialized on demand to keep memory proportional to the sources.
class SampleSet {
 public:
  struct Entry {
    std::size_t source = 0;  // index into sources()
    std::size_t anchor = 0;  // day index of the last input day in the source
    Date anchor_date;
    SourceTag tag = SourceTag::reanalysis;
  };

  SampleSet() = default;
  SampleSet(std::vector<std::shared_ptr<const GriddedSeries>> sources, std::size_t k,
            std::size_t n);

  /// Appends a sample; `labels` is [n, 2] for days anchor+1 .. anchor+n.
  void add(std::size_t source, std::size_t anchor, const std::vector<double>& labels);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t k() const noexcept { return k_; }
  std::size_t n() const noexcept { return n_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const std::vector<std::shared_ptr<const GriddedSeries>>& sources() const noexcept {
    return sources_;
  }
  const GridSpec& spec() const;
  std::size_t count(SourceTag tag) const;

  /// [B, k, l, w, c] inputs and [B, n, 2] labels for the selected samples.
  Tensor inputs(std::span<const std::size_t> indices) const;
  Tensor labels(std::span<const std::size_t> indices) const;
  Tensor inputs() const;
  Tensor labels() const;

  SampleSet subset(std::span<const std::size_t> indices) const;
  /// Seeded Fisher-Yates permutation of the samples.
  void shuffle(std::uint64_t seed);

 private:
  std::vector<std::shared_ptr<const GriddedSeries>> sources_;
  std::vector<Entry> entries_;
  std::vector<double> labels_;  // [size, n, 2]
  std::size_t k_ = 0, n_ = 0;
};

/// Windows over one series; label days are looked up by date. Windows whose
/// label days are missing inside the label range are skipped; labels that do
/// not reach the last needed day raise an alignment error naming it.
SampleSet window_series(const GriddedSeries& series, const RmmSeries& labels,
                        const WindowConfig& cfg);
SampleSet window_series(std::shared_ptr<const GriddedSeries> series, const RmmSeries& labels,
                        const WindowConfig& cfg);

struct MergeConfig {
  std::size_t k = 7;
  std::size_t n = 35;
  std::size_t lead = 0;
  std::size_t reanalysis_stride = 1;
  std::vector<std::size_t> model_strides{1};  // one per model source, or one for all
  bool merge = true;  // enforce reanalysis:model = 1:1
  std::uint64_t seed = 0;
};

struct MergeStats {
  std::size_t reanalysis_candidates = 0;
  std::size_t model_candidates = 0;
  std::size_t reanalysis_used = 0;
  std::size_t model_used = 0;
};

/// Windows from the reanalysis and every model series, balanced to equal
/// counts by seeded subsampling of the larger side, then shuffled once.
/// Model samples are labelled with the reanalysis RMM of the same dates.
SampleSet merge_sources(std::shared_ptr<const GriddedSeries> reanalysis,
                        const std::vector<std::shared_ptr<const GriddedSeries>>& model,
                        const RmmSeries& labels, const MergeConfig& cfg,
                        MergeStats* stats = nullptr);

/// Samples whose whole span [anchor-k+1, anchor+n] lies inside [first, last].
std::vector<std::size_t> samples_within(const SampleSet& set, Date first, Date last);

}  // namespace dkstn
