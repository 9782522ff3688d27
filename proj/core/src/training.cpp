#include "dkstn/training.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "dkstn/adam.hpp"
#include "dkstn/error.hpp"

namespace dkstn {

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorKind::configuration, "epochs must be at least 1");
  require(batch_size >= 2, ErrorKind::configuration, "batch_size must be at least 2");
  require(beta > 0.0 && gamma > 0.0, ErrorKind::configuration, "loss weights must be positive");
  require(learning_rate >= 0.0 && weight_decay >= 0.0, ErrorKind::configuration,
          "learning rate and weight decay must be non-negative");
}

Var loss_overall(Var pred, const Tensor& truth, double beta, double gamma) {
  const Tensor& p = pred.value();
  require(p.shape() == truth.shape() && p.rank() == 3 && p.dim(2) == 2, ErrorKind::dimension,
          "loss_overall: pred " + shape_str(p.shape()) + " vs truth " + shape_str(truth.shape()));
  const std::size_t M = p.dim(0), n = p.dim(1);
  const double inv = 1.0 / static_cast<double>(M * n);
  // Means over samples, then over leads, of squared errors per component.
  std::vector<double> per_lead1(n, 0.0), per_lead2(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t m = 0; m < M; ++m) {
      const double d1 = p[(m * n + j) * 2] - truth[(m * n + j) * 2];
      const double d2 = p[(m * n + j) * 2 + 1] - truth[(m * n + j) * 2 + 1];
      per_lead1[j] += d1 * d1;
      per_lead2[j] += d2 * d2;
    }
    per_lead1[j] /= static_cast<double>(M);
    per_lead2[j] /= static_cast<double>(M);
  }
  double l1 = 0.0, l2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    l1 += per_lead1[j];
    l2 += per_lead2[j];
  }
  const double value = beta * l1 / static_cast<double>(n) + gamma * l2 / static_cast<double>(n);
  const std::size_t ip = pred.id;
  auto truth_copy = std::make_shared<Tensor>(truth);
  return pred.tape->record("loss_overall", Tensor::scalar(value), {ip},
                           [=](Tape& t, std::size_t self) {
                             Tensor* gp = t.grad_for(ip);
                             if (!gp) return;
                             const double g = (*t.grad_for(self))[0];
                             const Tensor& pv = t.value(ip);
                             const Tensor& tv = *truth_copy;
                             for (std::size_t i = 0; i < pv.size(); ++i) {
                               const double w = (i % 2 == 0) ? beta : gamma;
                               (*gp)[i] += g * 2.0 * w * (pv[i] - tv[i]) * inv;
                             }
                           });
}

double loss_value(const Tensor& pred, const Tensor& truth, double beta, double gamma) {
  Tape tape;
  return loss_overall(tape.constant(pred), truth, beta, gamma).value()[0];
}

namespace {

// Contiguous batches over `order`; a trailing batch of one sample is merged
// into its predecessor because train-mode batchnorm needs two samples.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                   std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back()[0]);
    out.pop_back();
  }
  return out;
}

std::vector<std::size_t> iota_order(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5EEDu};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

double evaluate_loss(DkstnModel& model, const SampleSet& set, const TrainConfig& config) {
  require(!set.empty(), ErrorKind::data, "cannot evaluate loss on an empty sample set");
  const bool saved = model.bn.update_running;
  model.bn.update_running = false;
  double total = 0.0;
  for (const auto& batch : make_batches(iota_order(set.size()), config.batch_size)) {
    Tape tape;
    Var pred = model.forward(tape.constant(set.inputs(batch)));
    const Tensor truth = set.labels(batch);
    total += loss_overall(pred, truth, config.beta, config.gamma).value()[0] *
             static_cast<double>(batch.size());
  }
  model.bn.update_running = saved;
  return total / static_cast<double>(set.size());
}

namespace {

EpochLog evaluate_epoch(DkstnModel& model, const SampleSet& train_set, const SampleSet& valid_set,
                        const TrainConfig& config, std::size_t epoch) {
  EpochLog log;
  log.epoch = epoch;
  model.bn.mode = BatchNormState::Mode::train;
  log.train_loss = evaluate_loss(model, train_set, config);
  model.bn.mode = BatchNormState::Mode::infer;
  log.valid_loss = evaluate_loss(model, valid_set, config);
  model.bn.mode = BatchNormState::Mode::train;
  return log;
}

}  // namespace

DkstnModel train(DkstnModel model, const SampleSet& train_set, const SampleSet& valid_set,
                 const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  require(!train_set.empty(), ErrorKind::data, "training split is empty");
  require(!valid_set.empty(), ErrorKind::data, "validation split is empty");
  require(train_set.size() >= 2, ErrorKind::data, "training split needs at least 2 samples");
  require(train_set.k() == model.config.taam.k && train_set.n() == model.horizon(),
          ErrorKind::configuration,
          "samples have k=" + std::to_string(train_set.k()) + ", n=" +
              std::to_string(train_set.n()) + " but the model expects k=" +
              std::to_string(model.config.taam.k) + ", n=" + std::to_string(model.horizon()));

  AdamState adam;
  adam.config.learning_rate = config.learning_rate;
  adam.config.weight_decay = config.weight_decay;
  auto params = model.parameters();

  model.meta.train_loss.clear();
  model.meta.valid_loss.clear();
  model.meta.seed = config.seed;

  EpochLog log0 = evaluate_epoch(model, train_set, valid_set, config, 0);
  model.meta.train_loss.push_back(log0.train_loss);
  model.meta.valid_loss.push_back(log0.valid_loss);
  if (on_epoch) on_epoch(log0);
  DkstnModel best = model;
  double best_valid = log0.valid_loss;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = iota_order(train_set.size());
    std::mt19937_64 rng(epoch_seed(config.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    const auto batches = make_batches(order, config.batch_size);
    model.bn.mode = BatchNormState::Mode::train;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      model.zero_grad();
      Tape tape;
      tape.set_check_finite(config.check_finite);
      Var pred = model.forward(tape.constant(train_set.inputs(batches[b])));
      Var loss = loss_overall(pred, train_set.labels(batches[b]), config.beta, config.gamma);
      if (!std::isfinite(loss.value()[0]))
        fail(ErrorKind::training, "non-finite loss at epoch " + std::to_string(epoch) +
                                      ", batch " + std::to_string(b + 1));
      tape.backward(loss);
      adam_step(params, adam);
    }
    EpochLog log = evaluate_epoch(model, train_set, valid_set, config, epoch);
    if (!std::isfinite(log.train_loss) || !std::isfinite(log.valid_loss))
      fail(ErrorKind::training, "non-finite epoch loss at epoch " + std::to_string(epoch));
    model.meta.train_loss.push_back(log.train_loss);
    model.meta.valid_loss.push_back(log.valid_loss);
    model.meta.epochs_run = epoch;
    if (on_epoch) on_epoch(log);
    if (log.valid_loss < best_valid) {
      best_valid = log.valid_loss;
      best = model;
      best.meta.best_epoch = epoch;
    }
  }
  best.meta.train_loss = model.meta.train_loss;
  best.meta.valid_loss = model.meta.valid_loss;
  best.meta.epochs_run = model.meta.epochs_run;
  best.zero_grad();
  best.bn.mode = BatchNormState::Mode::infer;
  return best;
}

DkstnModel train(DkstnModel model, const SampleSet& samples, const DateSplit& split,
                 const TrainConfig& config, const EpochCallback& on_epoch) {
  std::vector<std::size_t> train_idx, valid_idx;
  const auto k = static_cast<std::int64_t>(samples.k());
  const auto n = static_cast<std::int64_t>(samples.n());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Date a = samples.entries()[i].anchor_date;
    const Date first = a - (k - 1), last = a + n;
    if (first >= split.valid_first && last <= split.valid_last)
      valid_idx.push_back(i);
    else if (last < split.valid_first || first > split.valid_last)
      train_idx.push_back(i);
  }
  return train(std::move(model), samples.subset(train_idx), samples.subset(valid_idx), config,
               on_epoch);
}

RmmSeries predict(DkstnModel& model, const GriddedSeries& raw, Date anchor) {
  require(model.harmonics.has_value(), ErrorKind::configuration,
          "model carries no harmonic fit; cannot preprocess raw fields");
  const std::size_t k = model.config.taam.k;
  const auto need = static_cast<std::int64_t>(kRunningMeanDays + k);
  const Date first = anchor - (need - 1);
  require(first >= raw.start_date && anchor <= raw.end_date(), ErrorKind::coverage,
          "forecast at " + anchor.iso() + " needs raw data from " + first.iso() + " to " +
              anchor.iso() + "; series covers " + raw.start_date.iso() + " to " +
              raw.end_date().iso());
  const auto offset = static_cast<std::size_t>(first - raw.start_date);
  GriddedSeries context = raw.slice(offset, static_cast<std::size_t>(need));
  GriddedSeries anomalies = preprocess(context, *model.harmonics);
  Tensor x = anomalies.values.reshaped(
      {1, k, anomalies.spec.lat_count, anomalies.spec.lon_count, anomalies.spec.channel_count()});
  Tensor y = model.predict(x);
  RmmSeries out;
  for (std::size_t h = 0; h < model.horizon(); ++h)
    out.push_back(anchor + static_cast<std::int64_t>(h + 1), y[2 * h], y[2 * h + 1]);
  return out;
}

}  // namespace dkstn
