#include "dkstn/samples.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>

#include "dkstn/error.hpp"

namespace dkstn {

std::vector<std::size_t> window_anchors(std::size_t days, const WindowConfig& cfg) {
  require(cfg.k >= 1 && cfg.n >= 1, ErrorKind::parameter, "window lengths must be positive");
  require(cfg.stride >= 1, ErrorKind::parameter, "window stride must be positive");
  std::vector<std::size_t> out;
  for (std::size_t a = cfg.lead + cfg.k - 1; a + cfg.n < days; a += cfg.stride) out.push_back(a);
  return out;
}

SampleSet::SampleSet(std::vector<std::shared_ptr<const GriddedSeries>> sources, std::size_t k,
                     std::size_t n)
    : sources_(std::move(sources)), k_(k), n_(n) {
  require(!sources_.empty(), ErrorKind::data, "sample set needs a source series");
  for (const auto& s : sources_)
    require(s && s->spec.compatible(sources_.front()->spec), ErrorKind::dimension,
            "sample sources do not share one grid");
}

const GridSpec& SampleSet::spec() const {
  require(!sources_.empty(), ErrorKind::data, "sample set has no sources");
  return sources_.front()->spec;
}

void SampleSet::add(std::size_t source, std::size_t anchor, const std::vector<double>& labels) {
  require(source < sources_.size(), ErrorKind::parameter, "unknown sample source");
  const GriddedSeries& s = *sources_[source];
  require(anchor + 1 >= k_ && anchor < s.days(), ErrorKind::coverage,
          "input window before anchor " + std::to_string(anchor) + " leaves the series");
  require(labels.size() == 2 * n_, ErrorKind::dimension, "sample labels must be [n, 2]");
  entries_.push_back({source, anchor, s.date_at(anchor), s.source});
  labels_.insert(labels_.end(), labels.begin(), labels.end());
}

std::size_t SampleSet::count(SourceTag tag) const {
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                [&](const Entry& e) { return e.tag == tag; }));
}

Tensor SampleSet::inputs(std::span<const std::size_t> indices) const {
  const GridSpec& g = spec();
  const std::size_t frame = g.lat_count * g.lon_count * g.channel_count();
  Tensor out({indices.size(), k_, g.lat_count, g.lon_count, g.channel_count()}, 0.0);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Entry& e = entries_.at(indices[b]);
    const GriddedSeries& s = *sources_[e.source];
    const double* src = s.values.raw() + (e.anchor + 1 - k_) * frame;
    std::memcpy(out.raw() + b * k_ * frame, src, k_ * frame * sizeof(double));
  }
  return out;
}

Tensor SampleSet::labels(std::span<const std::size_t> indices) const {
  Tensor out({indices.size(), n_, 2}, 0.0);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    require(indices[b] < entries_.size(), ErrorKind::parameter, "sample index out of range");
    std::memcpy(out.raw() + b * 2 * n_, labels_.data() + indices[b] * 2 * n_,
                2 * n_ * sizeof(double));
  }
  return out;
}

Tensor SampleSet::inputs() const {
  std::vector<std::size_t> all(size());
  std::iota(all.begin(), all.end(), 0);
  return inputs(all);
}

Tensor SampleSet::labels() const {
  std::vector<std::size_t> all(size());
  std::iota(all.begin(), all.end(), 0);
  return labels(all);
}

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
  SampleSet out(sources_, k_, n_);
  for (std::size_t i : indices) {
    require(i < entries_.size(), ErrorKind::parameter, "sample index out of range");
    out.entries_.push_back(entries_[i]);
    out.labels_.insert(out.labels_.end(), labels_.begin() + static_cast<std::ptrdiff_t>(i * 2 * n_),
                       labels_.begin() + static_cast<std::ptrdiff_t>((i + 1) * 2 * n_));
  }
  return out;
}

void SampleSet::shuffle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(size());
  std::iota(perm.begin(), perm.end(), 0);
  // Explicit Fisher-Yates so the order does not depend on the library's
  // std::shuffle implementation.
  for (std::size_t i = perm.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  *this = subset(perm);
}

namespace {

// Label block for days anchor+1..anchor+n, or nullopt when any day is absent.
std::optional<std::vector<double>> label_block(const GriddedSeries& s, std::size_t anchor,
                                               std::size_t n, const RmmSeries& labels) {
  std::vector<double> out(2 * n);
  for (std::size_t h = 1; h <= n; ++h) {
    auto idx = labels.find(s.date_at(anchor + h));
    if (!idx) return std::nullopt;
    out[2 * (h - 1)] = labels.rmm1[*idx];
    out[2 * (h - 1) + 1] = labels.rmm2[*idx];
  }
  return out;
}

void append_windows(SampleSet& set, std::size_t source, const RmmSeries& labels,
                    const std::vector<std::size_t>& anchors) {
  const GriddedSeries& s = *set.sources()[source];
  for (std::size_t a : anchors)
    if (auto block = label_block(s, a, set.n(), labels)) set.add(source, a, *block);
}

void check_label_coverage(const GriddedSeries& s, const RmmSeries& labels,
                          const std::vector<std::size_t>& anchors, std::size_t n) {
  if (anchors.empty()) return;
  require(labels.size() > 0, ErrorKind::alignment, "label series is empty");
  const Date first = s.date_at(anchors.front() + 1);
  const Date last = s.date_at(anchors.back() + n);
  if (first < labels.dates.front())
    fail(ErrorKind::alignment, "labels start " + labels.dates.front().iso() +
                                   "; first required label date " + first.iso());
  if (last > labels.dates.back())
    fail(ErrorKind::alignment, "labels end " + labels.dates.back().iso() +
                                   "; first missing label date " +
                                   (labels.dates.back() + 1).iso());
}

}  // namespace

SampleSet window_series(std::shared_ptr<const GriddedSeries> series, const RmmSeries& labels,
                        const WindowConfig& cfg) {
  require(series != nullptr, ErrorKind::data, "null series");
  labels.validate();
  const auto anchors = window_anchors(series->days(), cfg);
  check_label_coverage(*series, labels, anchors, cfg.n);
  SampleSet set({series}, cfg.k, cfg.n);
  append_windows(set, 0, labels, anchors);
  return set;
}

SampleSet window_series(const GriddedSeries& series, const RmmSeries& labels,
                        const WindowConfig& cfg) {
  return window_series(std::make_shared<const GriddedSeries>(series), labels, cfg);
}

SampleSet merge_sources(std::shared_ptr<const GriddedSeries> reanalysis,
                        const std::vector<std::shared_ptr<const GriddedSeries>>& model,
                        const RmmSeries& labels, const MergeConfig& cfg, MergeStats* stats) {
  require(reanalysis != nullptr, ErrorKind::data, "missing reanalysis series");
  labels.validate();
  if (cfg.merge)
    require(!model.empty(), ErrorKind::coverage,
            "source merging enabled but no model series were given");
  require(cfg.model_strides.size() == 1 || cfg.model_strides.size() == model.size(),
          ErrorKind::parameter,
          "expected 1 or " + std::to_string(model.size()) + " model strides, got " +
              std::to_string(cfg.model_strides.size()));

  const std::size_t need = cfg.lead + cfg.k + cfg.n;
  auto check_length = [&](const GriddedSeries& s, const char* what) {
    require(s.days() >= need, ErrorKind::coverage,
            std::string(what) + " series has " + std::to_string(s.days()) + " days, requires " +
                std::to_string(need) + " (lead " + std::to_string(cfg.lead) + " + k " +
                std::to_string(cfg.k) + " + n " + std::to_string(cfg.n) + ")");
  };
  check_length(*reanalysis, "reanalysis");
  std::vector<std::shared_ptr<const GriddedSeries>> sources{reanalysis};
  for (const auto& m : model) {
    require(m != nullptr, ErrorKind::data, "null model series");
    check_length(*m, "model");
    sources.push_back(m);
  }

  SampleSet all(sources, cfg.k, cfg.n);
  std::vector<std::size_t> rea_idx, mod_idx;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    WindowConfig wc{cfg.k, cfg.n, 1, cfg.lead};
    wc.stride = s == 0 ? cfg.reanalysis_stride
                       : cfg.model_strides[cfg.model_strides.size() == 1 ? 0 : s - 1];
    const auto anchors = window_anchors(sources[s]->days(), wc);
    check_label_coverage(*sources[s], labels, anchors, cfg.n);
    const std::size_t before = all.size();
    append_windows(all, s, labels, anchors);
    for (std::size_t i = before; i < all.size(); ++i) (s == 0 ? rea_idx : mod_idx).push_back(i);
  }

  MergeStats st;
  st.reanalysis_candidates = rea_idx.size();
  st.model_candidates = mod_idx.size();
  std::mt19937_64 rng(cfg.seed);
  if (cfg.merge) {
    const std::size_t m = std::min(rea_idx.size(), mod_idx.size());
    // Keep a uniformly random subset of the larger side, in original order.
    auto thin = [&](std::vector<std::size_t>& idx) {
      for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng() % i)]);
      idx.resize(m);
      std::sort(idx.begin(), idx.end());
    };
    if (rea_idx.size() > m) thin(rea_idx);
    if (mod_idx.size() > m) thin(mod_idx);
  }
  st.reanalysis_used = rea_idx.size();
  st.model_used = mod_idx.size();
  if (stats) *stats = st;

  std::vector<std::size_t> keep = rea_idx;
  keep.insert(keep.end(), mod_idx.begin(), mod_idx.end());
  SampleSet out = all.subset(keep);
  out.shuffle(rng());
  return out;
}

std::vector<std::size_t> samples_within(const SampleSet& set, Date first, Date last) {
  std::vector<std::size_t> out;
  const auto k = static_cast<std::int64_t>(set.k());
  const auto n = static_cast<std::int64_t>(set.n());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Date a = set.entries()[i].anchor_date;
    if (a - (k - 1) >= first && a + n <= last) out.push_back(i);
  }
  return out;
}

}  // namespace dkstn
