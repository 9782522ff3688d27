#include "dkstn/taam.hpp"

#include <cmath>
#include <cstdio>

#include "dkstn/error.hpp"
#include "dkstn/srcm.hpp"

namespace dkstn {

void TaamConfig::validate() const {
  require(k >= 1 && n >= 1 && hidden >= 1, ErrorKind::configuration,
          "taam k, n and hidden must be positive");
}

LstmWeights init_lstm(const std::string& name, std::size_t input, std::size_t hidden,
                      std::mt19937_64& rng, double forget_bias) {
  const double bound = std::sqrt(1.0 / static_cast<double>(input + hidden));
  LstmWeights w;
  w.weight = Parameter(name + ".weight", uniform_tensor({hidden + input, 4 * hidden}, bound, rng));
  Tensor b({4 * hidden}, 0.0);
  for (std::size_t i = 0; i < hidden; ++i) b[i] = forget_bias;
  w.bias = Parameter(name + ".bias", std::move(b));
  return w;
}

LstmState lstm_cell(Var x, LstmState prev, Var weight, Var bias) {
  const bool single = x.value().rank() == 1;
  if (single) {
    x = reshape(x, {1, x.dim(0)});
    require(prev.h.value().rank() == 1 && prev.c.value().rank() == 1, ErrorKind::dimension,
            "lstm_cell: states must be rank 1 for a rank-1 input");
    prev.h = reshape(prev.h, {1, prev.h.dim(0)});
    prev.c = reshape(prev.c, {1, prev.c.dim(0)});
  }
  require(x.value().rank() == 2 && prev.h.value().rank() == 2 &&
              prev.h.shape() == prev.c.shape() && prev.h.dim(0) == x.dim(0),
          ErrorKind::dimension,
          "lstm_cell: x " + shape_str(x.shape()) + ", h " + shape_str(prev.h.shape()) + ", c " +
              shape_str(prev.c.shape()));
  const std::size_t D = prev.h.dim(1);
  require(weight.value().rank() == 2 && weight.dim(0) == D + x.dim(1) &&
              weight.dim(1) == 4 * D && bias.value().size() == 4 * D,
          ErrorKind::dimension,
          "lstm_cell: weight " + shape_str(weight.shape()) + " / bias " +
              shape_str(bias.shape()) + " inconsistent with D=" + std::to_string(D) +
              ", D_in=" + std::to_string(x.dim(1)));
  Var gates = linear(concat_lastdim({prev.h, x}), weight, bias);
  Var f = sigmoid(slice_lastdim(gates, 0, D));
  Var i = sigmoid(slice_lastdim(gates, D, D));
  Var g = tanh(slice_lastdim(gates, 2 * D, D));
  Var o = sigmoid(slice_lastdim(gates, 3 * D, D));
  Var c = f * prev.c + i * g;
  Var h = o * tanh(c);
  if (single) return {reshape(h, {D}), reshape(c, {D})};
  return {h, c};
}

AttentionWeights init_attention(std::size_t hidden, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(hidden));
  AttentionWeights a;
  a.wq = Parameter("taam.attention.wq", uniform_tensor({hidden, hidden}, bound, rng));
  a.wk = Parameter("taam.attention.wk", uniform_tensor({hidden, hidden}, bound, rng));
  a.wv = Parameter("taam.attention.wv", uniform_tensor({hidden, hidden}, bound, rng));
  return a;
}

std::vector<Parameter*> DecoderStack::parameters() {
  std::vector<Parameter*> out;
  for (auto& s : steps) {
    out.push_back(&s.weight);
    out.push_back(&s.bias);
  }
  out.push_back(&head_weight);
  out.push_back(&head_bias);
  return out;
}

namespace {

std::string step_name(std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "taam.decoder.step%03zu", i + 1);
  return buf;
}

}  // namespace

DecoderStack init_decoder(const TaamConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  DecoderStack s;
  s.tied = cfg.tied_decoder;
  s.horizon = cfg.n;
  const std::size_t sets = cfg.tied_decoder ? 1 : cfg.n;
  for (std::size_t i = 0; i < sets; ++i)
    s.steps.push_back(init_lstm(cfg.tied_decoder ? std::string("taam.decoder.shared") : step_name(i),
                                cfg.hidden, cfg.hidden, rng));
  const double bound = std::sqrt(1.0 / static_cast<double>(cfg.hidden));
  s.head_weight = Parameter("taam.head.weight", uniform_tensor({cfg.hidden, 2}, bound, rng));
  s.head_bias = Parameter("taam.head.bias", Tensor({2}, 0.0));
  return s;
}

namespace {

// Runs an LSTM over seq [B, k, D_in]; returns stacked hidden states [B, k, D].
EncoderOutput run_sequence(Var seq, LstmState state, Var weight, Var bias) {
  const std::size_t k = seq.dim(1);
  std::vector<Var> hs;
  hs.reserve(k);
  for (std::size_t t = 0; t < k; ++t) {
    state = lstm_cell(select_axis1(seq, t), state, weight, bias);
    hs.push_back(state.h);
  }
  return {stack_axis1(hs), state};
}

}  // namespace

EncoderOutput encode(Var z, LstmWeights& weights) {
  const bool single = z.value().rank() == 2;
  if (single) z = reshape(z, {1, z.dim(0), z.dim(1)});
  require(z.value().rank() == 3, ErrorKind::dimension,
          "encode expects [B,k,D_in] or [k,D_in], got " + shape_str(z.shape()));
  require(z.dim(2) == weights.input(), ErrorKind::dimension,
          "encode: features of length " + std::to_string(z.dim(2)) + " but encoder expects " +
              std::to_string(weights.input()));
  Tape& tape = *z.tape;
  const std::size_t B = z.dim(0), D = weights.hidden();
  LstmState zero{tape.constant(Tensor({B, D}, 0.0)), tape.constant(Tensor({B, D}, 0.0))};
  EncoderOutput out = run_sequence(z, zero, tape.param(weights.weight), tape.param(weights.bias));
  if (single)
    return {reshape(out.H, {out.H.dim(1), D}),
            {reshape(out.last.h, {D}), reshape(out.last.c, {D})}};
  return out;
}

AttentionOutput attend(Var H, AttentionWeights& weights) {
  const bool single = H.value().rank() == 2;
  if (single) H = reshape(H, {1, H.dim(0), H.dim(1)});
  require(H.value().rank() == 3, ErrorKind::dimension,
          "attend expects [B,k,D] or [k,D], got " + shape_str(H.shape()));
  Tape& tape = *H.tape;
  const std::size_t B = H.dim(0), k = H.dim(1), D = H.dim(2);
  require(weights.wq.value.shape() == Shape{D, D}, ErrorKind::dimension,
          "attention weights do not match D=" + std::to_string(D));
  Var flat = reshape(H, {B * k, D});
  Var Q = reshape(matmul(flat, tape.param(weights.wq)), {B, k, D});
  Var K = reshape(matmul(flat, tape.param(weights.wk)), {B, k, D});
  Var V = reshape(matmul(flat, tape.param(weights.wv)), {B, k, D});
  Var scores = scale(bmm(Q, transpose_last2(K)), 1.0 / std::sqrt(static_cast<double>(D)));
  Var alpha = softmax_lastdim(scores);
  Var out = bmm(alpha, V);
  weights.last_alpha = alpha.value();
  if (single) return {reshape(out, {k, D}), reshape(alpha, {k, k})};
  return {out, alpha};
}

Var decode(Var Hstar, LstmState encoder_last, DecoderStack& stack, std::size_t horizon) {
  const bool single = Hstar.value().rank() == 2;
  if (single) {
    Hstar = reshape(Hstar, {1, Hstar.dim(0), Hstar.dim(1)});
    encoder_last.h = reshape(encoder_last.h, {1, encoder_last.h.dim(0)});
    encoder_last.c = reshape(encoder_last.c, {1, encoder_last.c.dim(0)});
  }
  require(Hstar.value().rank() == 3, ErrorKind::dimension,
          "decode expects [B,k,D] or [k,D], got " + shape_str(Hstar.shape()));
  require(horizon >= 1, ErrorKind::configuration, "decode horizon must be positive");
  require(stack.tied ? !stack.steps.empty() && horizon <= stack.horizon
                     : stack.steps.size() >= horizon,
          ErrorKind::configuration,
          "decoder stack has " + std::to_string(stack.tied ? stack.horizon : stack.steps.size()) +
              " steps, " + std::to_string(horizon) + " requested");
  Tape& tape = *Hstar.tape;
  Var head_w = tape.param(stack.head_weight);
  Var head_b = tape.param(stack.head_bias);
  Var shared_w{}, shared_b{};
  if (stack.tied) {
    shared_w = tape.param(stack.steps[0].weight);
    shared_b = tape.param(stack.steps[0].bias);
  }
  Var seq = Hstar;
  LstmState state = encoder_last;
  std::vector<Var> preds;
  preds.reserve(horizon);
  for (std::size_t i = 0; i < horizon; ++i) {
    Var w = stack.tied ? shared_w : tape.param(stack.steps[i].weight);
    Var b = stack.tied ? shared_b : tape.param(stack.steps[i].bias);
    EncoderOutput step = run_sequence(seq, state, w, b);
    seq = step.H;
    state = step.last;
    preds.push_back(linear(state.h, head_w, head_b));
  }
  Var out = stack_axis1(preds);
  if (single) return reshape(out, {horizon, 2});
  return out;
}

DecoderStack extend_horizon(const DecoderStack& stack, std::size_t extra) {
  require(extra >= 1, ErrorKind::parameter, "extend_horizon needs extra >= 1");
  require(!stack.steps.empty(), ErrorKind::configuration, "decoder stack is empty");
  DecoderStack out = stack;
  out.horizon = stack.horizon + extra;
  if (stack.tied) return out;
  const LstmWeights& last = stack.steps.back();
  for (std::size_t e = 0; e < extra; ++e) {
    LstmWeights copy = last;
    const std::size_t index = out.steps.size();
    copy.weight.name = step_name(index) + ".weight";
    copy.bias.name = step_name(index) + ".bias";
    copy.weight.zero_grad();
    copy.bias.zero_grad();
    out.steps.push_back(std::move(copy));
  }
  return out;
}

}  // namespace dkstn
