#pragma once

#include <random>
#include <vector>

#include "dkstn/autograd.hpp"

namespace dkstn {

struct TaamConfig {
  std::size_t k = 7;
  std::size_t n = 35;
  std::size_t hidden = 256;  // D, also d_k
  bool tied_decoder = false;

  void validate() const;
};

/// Gate order in the packed matrices is f, i, g, o. weight is [D + D_in, 4D]
/// acting on [h_prev, x].
struct LstmWeights {
  Parameter weight;
  Parameter bias;

  std::size_t hidden() const { return bias.value.size() / 4; }
  std::size_t input() const { return weight.value.dim(0) - hidden(); }
};

LstmWeights init_lstm(const std::string& name, std::size_t input, std::size_t hidden,
                      std::mt19937_64& rng, double forget_bias = 1.0);

struct LstmState {
  Var h;
  Var c;
};

/// One cell. x is [D_in] or [B, D_in]; h, c match with D.
LstmState lstm_cell(Var x, LstmState prev, Var weight, Var bias);

struct AttentionWeights {
  Parameter wq, wk, wv;  // [D, D]
  Tensor last_alpha;     // [B, k, k] from the latest attend()
};

AttentionWeights init_attention(std::size_t hidden, std::mt19937_64& rng);

struct DecoderStack {
  std::vector<LstmWeights> steps;  // one per lead, or a single shared set
  Parameter head_weight;           // [D, 2]
  Parameter head_bias;             // [2]
  bool tied = false;
  std::size_t horizon = 0;

  const LstmWeights& step(std::size_t i) const { return steps[tied ? 0 : i]; }
  LstmWeights& step(std::size_t i) { return steps[tied ? 0 : i]; }
  std::vector<Parameter*> parameters();
};

DecoderStack init_decoder(const TaamConfig& cfg, std::mt19937_64& rng);

struct EncoderOutput {
  Var H;  // [B, k, D] (or [k, D])
  LstmState last;
};

/// z is [B, k, D_in] or [k, D_in]; states start at zero.
EncoderOutput encode(Var z, LstmWeights& weights);

struct AttentionOutput {
  Var out;    // H*, same shape as H
  Var alpha;  // [B, k, k] (or [k, k])
};

AttentionOutput attend(Var H, AttentionWeights& weights);

/// Step i runs an LSTM over the previous step's k-length output sequence
/// (H* for step 1) starting from the previous final states; the head maps
/// every step's final hidden state to (RMM1, RMM2). Returns [B, horizon, 2]
/// (or [horizon, 2]).
Var decode(Var Hstar, LstmState encoder_last, DecoderStack& stack, std::size_t horizon);

/// Appends `extra` steps copied bit-for-bit from the last step.
DecoderStack extend_horizon(const DecoderStack& stack, std::size_t extra);

}  // namespace dkstn
