#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsidn/data_model.hpp"
#include "lsidn/tensor.hpp"

namespace lsidn {

// --- parameter groups ---------------------------------------------------------

// Single-layer self-attention block: multi-head attention, residual + layer
// norm, position-wise feed-forward (width 4d), residual + layer norm. Learned
// positional embeddings are added per in-session offset unless disabled.
struct SessionEncoderParams {
  Tensor wq, wk, wv, wo;  // d x d
  Tensor pos;             // max_positions x d
  Tensor ln1_g, ln1_b, ln2_g, ln2_b;  // 1 x d
  Tensor ff1_w, ff1_b;    // d x 4d, 1 x 4d
  Tensor ff2_w, ff2_b;    // 4d x d, 1 x d
  int heads = 2;
  bool use_positions = true;

  int dim() const { return wq.rows(); }
};

// Gate order in the fused matrices: reset, update, candidate.
struct GruParams {
  Tensor wx, wh;  // d x 3d
  Tensor b;       // 1 x 3d
};

// LSTM with two extra sigmoid time gates, each a scalar per step computed
// from the input and one log-scaled time feature; their product rescales the
// candidate cell update. Gate order in the fused matrices: input, forget,
// candidate, output.
struct Time4LstmParams {
  Tensor wx, wh;          // d x 4d
  Tensor b;               // 1 x 4d
  Tensor tp_w, tq_w;      // d x 1
  Tensor tp_v, tq_v;      // 1 x 1, weight on the time feature
  Tensor tp_b, tq_b;      // 1 x 1
};

struct LongTermParams {
  SessionEncoderParams enc;
  GruParams gru;
  Tensor attn_intra_w;   // d x d
  Tensor attn_inter_w;   // d x d
  Tensor empty_history;  // 1 x 2d, substituted when a user has no history
};

struct ShortTermParams {
  SessionEncoderParams enc;  // independently parameterized current-session encoder
  Time4LstmParams lstm;
  Tensor attn_recent_w;  // d x d
};

SessionEncoderParams make_session_encoder(int d, int max_positions, int heads,
                                          bool use_positions, Rng& rng,
                                          std::vector<Parameter>* registry,
                                          const std::string& prefix);
GruParams make_gru(int d, Rng& rng, std::vector<Parameter>* registry,
                   const std::string& prefix);
Time4LstmParams make_time4lstm(int d, Rng& rng, std::vector<Parameter>* registry,
                               const std::string& prefix);
LongTermParams make_long_term(int d, int max_positions, int heads, bool use_positions,
                              Rng& rng, std::vector<Parameter>* registry,
                              const std::string& prefix);
ShortTermParams make_short_term(int d, int max_positions, int heads, bool use_positions,
                                Rng& rng, std::vector<Parameter>* registry,
                                const std::string& prefix);

// --- batched building blocks ----------------------------------------------------

// x: (blocks*block_len) x d with row mask (0 = padding). Returns the encoded
// rows, same shape. Fully masked blocks pass through as garbage rows that the
// caller must keep masked.
Tensor session_encode_batch(const Tensor& x, const std::vector<double>& mask,
                            int block_len, const SessionEncoderParams& p);

// One recurrence step each; state carried by the caller. step_mask is B x 1
// with 0 rows forcing the state to zero (left-padded sequences restart from
// the zero state for free).
Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p);
std::vector<Tensor> gru_batch(const std::vector<Tensor>& xs,
                              const std::vector<Tensor>& step_masks, const GruParams& p);

struct LstmState {
  Tensor h, c;
};
LstmState time4lstm_cell(const Tensor& x, const LstmState& state, const Tensor& dp,
                         const Tensor& dq, const Time4LstmParams& p);
std::vector<Tensor> time4lstm_batch(const std::vector<Tensor>& xs,
                                    const std::vector<Tensor>& dps,
                                    const std::vector<Tensor>& dqs,
                                    const std::vector<Tensor>& step_masks,
                                    const Time4LstmParams& p);

// --- single-instance reference ops ------------------------------------------------

// Self-attention block + masked mean pooling of one session. x is l x d,
// pad_mask marks real rows; at least one row must be real.
Tensor sess_enc_forward(const Tensor& x, const std::vector<bool>& pad_mask,
                        const SessionEncoderParams& p);

// Standard GRU over 1 x d inputs from the zero state; returns every hidden state.
std::vector<Tensor> gru_forward(const std::vector<Tensor>& inputs, const GruParams& p);

// a_i = softmax_i(items_i W targetT); returns sum_i a_i items_i as 1 x d.
Tensor attn_pool(const Tensor& target, const Tensor& items, const Tensor& w);

// Log-scaled gaps for a run of events ending just before a prediction at
// target_time: delta_prev[i] = log1p(t_i - t_{i-1}) (0 for the first),
// delta_target[i] = log1p(target_time - t_i). Throws on non-monotone input.
struct TimeFeatures {
  std::vector<double> delta_prev, delta_target;
};
TimeFeatures time_features(const std::vector<Event>& events, std::int64_t target_time);

std::vector<Tensor> time4lstm_forward(const std::vector<Tensor>& inputs,
                                      const TimeFeatures& tf, const Time4LstmParams& p);

// sessions: one n_i x d embedding matrix per non-empty historical session.
Tensor long_term_forward(const std::vector<Tensor>& sessions, const Tensor& target,
                         const LongTermParams& p);

struct ShortTermInput {
  Tensor past;    // n_p x d or undefined
  Tensor recent;  // n_r x d or undefined
  TimeFeatures recent_times;
};
Tensor short_term_forward(const ShortTermInput& in, const Tensor& target,
                          const ShortTermParams& p, bool recent_enabled,
                          bool current_enabled);

}  // namespace lsidn
