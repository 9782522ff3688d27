#include "dkstn/model.hpp"

#include <algorithm>
#include <set>

#include "dkstn/error.hpp"

namespace dkstn {

void ModelConfig::validate() const {
  require(lat >= 1 && lon >= 1 && channels >= 1, ErrorKind::configuration,
          "model grid extents must be positive");
  require(srcm.input_channels == channels, ErrorKind::configuration,
          "srcm input channels differ from the model channel count");
  srcm.validate();
  taam.validate();
}

std::size_t ModelConfig::feature_dim() const { return srcm_geometry(srcm, lat, lon).features; }

std::size_t expected_parameter_count(const ModelConfig& cfg) {
  const auto geo = srcm_geometry(cfg.srcm, cfg.lat, cfg.lon);
  const std::size_t C = cfg.srcm.channels, k1 = cfg.srcm.first_kernel,
                    k2 = cfg.srcm.residual_kernel, D = cfg.taam.hidden;
  std::size_t n = 2 * cfg.channels;                      // batchnorm
  n += C * cfg.channels * k1 * k1 + C;                   // layer 1
  n += (cfg.srcm.layers - 1) * (C * C * k2 * k2 + C);    // residual layers
  if (cfg.srcm.projection_dim > 0) n += geo.flat * geo.features + geo.features;
  auto lstm = [&](std::size_t in) { return (D + in) * 4 * D + 4 * D; };
  n += lstm(geo.features);                               // encoder
  n += 3 * D * D;                                        // attention
  n += (cfg.taam.tied_decoder ? 1 : cfg.taam.n) * lstm(D);
  n += 2 * D + 2;                                        // head
  return n;
}

DkstnModel::DkstnModel(const ModelConfig& cfg, std::uint64_t seed) : config(cfg), bn(cfg.channels) {
  config.validate();
  std::mt19937_64 rng(seed);
  srcm = init_srcm(config.srcm, config.lat, config.lon, rng);
  encoder = init_lstm("taam.encoder", config.feature_dim(), config.taam.hidden, rng);
  attention = init_attention(config.taam.hidden, rng);
  decoder = init_decoder(config.taam, rng);
  meta.seed = seed;
}

std::vector<Parameter*> DkstnModel::parameters() {
  std::vector<Parameter*> out{&bn.gamma, &bn.beta};
  for (Parameter* p : srcm.parameters()) out.push_back(p);
  out.push_back(&encoder.weight);
  out.push_back(&encoder.bias);
  out.push_back(&attention.wq);
  out.push_back(&attention.wk);
  out.push_back(&attention.wv);
  for (Parameter* p : decoder.parameters()) out.push_back(p);
  return out;
}

std::size_t DkstnModel::parameter_count() {
  std::size_t n = 0;
  for (Parameter* p : parameters()) n += p->value.size();
  return n;
}

void DkstnModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

Var DkstnModel::forward(Var x) {
  require(x.value().rank() == 5 && x.dim(1) == config.taam.k && x.dim(2) == config.lat &&
              x.dim(3) == config.lon && x.dim(4) == config.channels,
          ErrorKind::dimension,
          "model input " + shape_str(x.shape()) + " does not match [B," +
              std::to_string(config.taam.k) + "," + std::to_string(config.lat) + "," +
              std::to_string(config.lon) + "," + std::to_string(config.channels) + "]");
  Var normed = batchnorm_forward(x, bn);
  Var features = srcm_forward_batch(normed, config.srcm, srcm);
  EncoderOutput enc = encode(features, encoder);
  AttentionOutput att = attend(enc.H, attention);
  return decode(att.out, enc.last, decoder, decoder.horizon);
}

Tensor DkstnModel::predict(const Tensor& inputs, std::size_t batch) {
  require(inputs.rank() == 5, ErrorKind::dimension,
          "predict expects [M,k,l,w,c], got " + shape_str(inputs.shape()));
  const auto saved_mode = bn.mode;
  bn.mode = BatchNormState::Mode::infer;
  const std::size_t M = inputs.dim(0), H = decoder.horizon;
  const std::size_t per = inputs.size() / M;
  Tensor out({M, H, 2}, 0.0);
  try {
    for (std::size_t begin = 0; begin < M; begin += batch) {
      const std::size_t b = std::min(batch, M - begin);
      Shape shape = inputs.shape();
      shape[0] = b;
      std::vector<double> chunk(inputs.values().begin() + static_cast<std::ptrdiff_t>(begin * per),
                                inputs.values().begin() + static_cast<std::ptrdiff_t>((begin + b) * per));
      Tape tape;
      Var y = forward(tape.constant(Tensor(shape, std::move(chunk))));
      std::copy(y.value().data().begin(), y.value().data().end(),
                out.raw() + begin * H * 2);
    }
  } catch (...) {
    bn.mode = saved_mode;
    throw;
  }
  bn.mode = saved_mode;
  return out;
}

namespace {

void put(std::vector<NamedTensor>& out, const std::string& name, double v) {
  out.push_back({name, Tensor::scalar(v)});
}

double get(const std::vector<NamedTensor>& in, const std::string& name) {
  const Tensor& t = find_entry(in, name);
  require(t.size() == 1, ErrorKind::format, "entry '" + name + "' is not a scalar");
  return t[0];
}

std::size_t get_size(const std::vector<NamedTensor>& in, const std::string& name) {
  const double v = get(in, name);
  require(v >= 0.0 && v == static_cast<double>(static_cast<std::size_t>(v)), ErrorKind::format,
          "entry '" + name + "' is not a count");
  return static_cast<std::size_t>(v);
}

Tensor history_tensor(const std::vector<double>& v) {
  return v.empty() ? Tensor({1}, 0.0) : Tensor({v.size()}, v);
}

}  // namespace

std::vector<NamedTensor> DkstnModel::to_entries() {
  std::vector<NamedTensor> out;
  put(out, "config.lat", static_cast<double>(config.lat));
  put(out, "config.lon", static_cast<double>(config.lon));
  put(out, "config.channels", static_cast<double>(config.channels));
  put(out, "config.srcm.layers", static_cast<double>(config.srcm.layers));
  put(out, "config.srcm.channels", static_cast<double>(config.srcm.channels));
  put(out, "config.srcm.first_kernel", static_cast<double>(config.srcm.first_kernel));
  put(out, "config.srcm.residual_kernel", static_cast<double>(config.srcm.residual_kernel));
  put(out, "config.srcm.first_stride", static_cast<double>(config.srcm.first_stride));
  put(out, "config.srcm.projection_dim", static_cast<double>(config.srcm.projection_dim));
  put(out, "config.taam.k", static_cast<double>(config.taam.k));
  put(out, "config.taam.n", static_cast<double>(config.taam.n));
  put(out, "config.taam.hidden", static_cast<double>(config.taam.hidden));
  put(out, "config.taam.tied_decoder", config.taam.tied_decoder ? 1.0 : 0.0);
  put(out, "config.taam.horizon", static_cast<double>(decoder.horizon));
  put(out, "meta.seed", static_cast<double>(meta.seed));
  put(out, "meta.epochs_run", static_cast<double>(meta.epochs_run));
  put(out, "meta.best_epoch", static_cast<double>(meta.best_epoch));
  put(out, "meta.history_length", static_cast<double>(meta.train_loss.size()));
  out.push_back({"meta.train_loss", history_tensor(meta.train_loss)});
  out.push_back({"meta.valid_loss", history_tensor(meta.valid_loss)});
  out.push_back({"bn.running_mean", bn.running_mean});
  out.push_back({"bn.running_var", bn.running_var});
  for (Parameter* p : parameters()) out.push_back({p->name, p->value});
  if (harmonics)
    for (auto& e : harmonics->to_entries()) out.push_back(std::move(e));
  return out;
}

DkstnModel DkstnModel::from_entries(const std::vector<NamedTensor>& in) {
  ModelConfig cfg;
  cfg.lat = get_size(in, "config.lat");
  cfg.lon = get_size(in, "config.lon");
  cfg.channels = get_size(in, "config.channels");
  cfg.srcm.input_channels = cfg.channels;
  cfg.srcm.layers = get_size(in, "config.srcm.layers");
  cfg.srcm.channels = get_size(in, "config.srcm.channels");
  cfg.srcm.first_kernel = get_size(in, "config.srcm.first_kernel");
  cfg.srcm.residual_kernel = get_size(in, "config.srcm.residual_kernel");
  cfg.srcm.first_stride = get_size(in, "config.srcm.first_stride");
  cfg.srcm.projection_dim = get_size(in, "config.srcm.projection_dim");
  cfg.taam.k = get_size(in, "config.taam.k");
  cfg.taam.n = get_size(in, "config.taam.n");
  cfg.taam.hidden = get_size(in, "config.taam.hidden");
  cfg.taam.tied_decoder = get(in, "config.taam.tied_decoder") != 0.0;
  const std::size_t horizon = get_size(in, "config.taam.horizon");
  require(horizon >= cfg.taam.n, ErrorKind::format, "checkpoint horizon shorter than n");

  DkstnModel m(cfg, 0);
  if (horizon > cfg.taam.n) m.decoder = extend_horizon(m.decoder, horizon - cfg.taam.n);

  m.meta.seed = static_cast<std::uint64_t>(get(in, "meta.seed"));
  m.meta.epochs_run = get_size(in, "meta.epochs_run");
  m.meta.best_epoch = get_size(in, "meta.best_epoch");
  const std::size_t hist = get_size(in, "meta.history_length");
  if (hist > 0) {
    const auto& tl = find_entry(in, "meta.train_loss").values();
    const auto& vl = find_entry(in, "meta.valid_loss").values();
    require(tl.size() == hist && vl.size() == hist, ErrorKind::format, "loss history malformed");
    m.meta.train_loss = tl;
    m.meta.valid_loss = vl;
  }
  m.bn.running_mean = find_entry(in, "bn.running_mean");
  m.bn.running_var = find_entry(in, "bn.running_var");
  require(m.bn.running_mean.size() == cfg.channels && m.bn.running_var.size() == cfg.channels,
          ErrorKind::format, "batchnorm statistics do not match channel count");

  std::set<std::string> used;
  for (Parameter* p : m.parameters()) {
    const Tensor& t = find_entry(in, p->name);
    require(t.shape() == p->value.shape(), ErrorKind::format,
            "parameter '" + p->name + "' has shape " + shape_str(t.shape()) + ", expected " +
                shape_str(p->value.shape()));
    p->value = t;
    p->zero_grad();
    require(used.insert(p->name).second, ErrorKind::format, "duplicate parameter " + p->name);
  }
  if (find_entry_opt(in, "harmonics.coefficients")) m.harmonics = HarmonicFit::from_entries(in);
  return m;
}

void DkstnModel::save(const std::filesystem::path& path) { write_param_file(path, to_entries()); }

DkstnModel DkstnModel::load(const std::filesystem::path& path) {
  return from_entries(read_param_file(path));
}

}  // namespace dkstn
