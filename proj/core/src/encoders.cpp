#include "lsidn/encoders.hpp"

#include <cmath>
#include <stdexcept>

namespace lsidn {

namespace {

constexpr double kInitLo = -0.01, kInitHi = 0.01;

Tensor reg(std::vector<Parameter>* registry, const std::string& name, Tensor t) {
  if (registry) registry->push_back({name, t});
  return t;
}

Tensor one_minus(const Tensor& t) { return add_scalar(neg(t), 1.0); }

}  // namespace

SessionEncoderParams make_session_encoder(int d, int max_positions, int heads,
                                          bool use_positions, Rng& rng,
                                          std::vector<Parameter>* registry,
                                          const std::string& prefix) {
  if (d % heads != 0)
    throw std::invalid_argument("session encoder: d must be divisible by head count");
  SessionEncoderParams p;
  p.heads = heads;
  p.use_positions = use_positions;
  auto w = [&](const char* name) {
    return reg(registry, prefix + "/" + name, Tensor::uniform(d, d, kInitLo, kInitHi, rng));
  };
  p.wq = w("wq");
  p.wk = w("wk");
  p.wv = w("wv");
  p.wo = w("wo");
  p.pos = reg(registry, prefix + "/pos",
              Tensor::uniform(max_positions, d, kInitLo, kInitHi, rng));
  p.ln1_g = reg(registry, prefix + "/ln1_g", Tensor::from_values(1, d, std::vector<double>(d, 1.0), true));
  p.ln1_b = reg(registry, prefix + "/ln1_b", Tensor::zeros(1, d, true));
  p.ln2_g = reg(registry, prefix + "/ln2_g", Tensor::from_values(1, d, std::vector<double>(d, 1.0), true));
  p.ln2_b = reg(registry, prefix + "/ln2_b", Tensor::zeros(1, d, true));
  p.ff1_w = reg(registry, prefix + "/ff1_w", Tensor::uniform(d, 4 * d, kInitLo, kInitHi, rng));
  p.ff1_b = reg(registry, prefix + "/ff1_b", Tensor::zeros(1, 4 * d, true));
  p.ff2_w = reg(registry, prefix + "/ff2_w", Tensor::uniform(4 * d, d, kInitLo, kInitHi, rng));
  p.ff2_b = reg(registry, prefix + "/ff2_b", Tensor::zeros(1, d, true));
  return p;
}

GruParams make_gru(int d, Rng& rng, std::vector<Parameter>* registry,
                   const std::string& prefix) {
  GruParams p;
  p.wx = reg(registry, prefix + "/wx", Tensor::uniform(d, 3 * d, kInitLo, kInitHi, rng));
  p.wh = reg(registry, prefix + "/wh", Tensor::uniform(d, 3 * d, kInitLo, kInitHi, rng));
  p.b = reg(registry, prefix + "/b", Tensor::zeros(1, 3 * d, true));
  return p;
}

Time4LstmParams make_time4lstm(int d, Rng& rng, std::vector<Parameter>* registry,
                               const std::string& prefix) {
  Time4LstmParams p;
  p.wx = reg(registry, prefix + "/wx", Tensor::uniform(d, 4 * d, kInitLo, kInitHi, rng));
  p.wh = reg(registry, prefix + "/wh", Tensor::uniform(d, 4 * d, kInitLo, kInitHi, rng));
  p.b = reg(registry, prefix + "/b", Tensor::zeros(1, 4 * d, true));
  p.tp_w = reg(registry, prefix + "/tp_w", Tensor::uniform(d, 1, kInitLo, kInitHi, rng));
  p.tq_w = reg(registry, prefix + "/tq_w", Tensor::uniform(d, 1, kInitLo, kInitHi, rng));
  p.tp_v = reg(registry, prefix + "/tp_v", Tensor::uniform(1, 1, kInitLo, kInitHi, rng));
  p.tq_v = reg(registry, prefix + "/tq_v", Tensor::uniform(1, 1, kInitLo, kInitHi, rng));
  p.tp_b = reg(registry, prefix + "/tp_b", Tensor::zeros(1, 1, true));
  p.tq_b = reg(registry, prefix + "/tq_b", Tensor::zeros(1, 1, true));
  return p;
}

LongTermParams make_long_term(int d, int max_positions, int heads, bool use_positions,
                              Rng& rng, std::vector<Parameter>* registry,
                              const std::string& prefix) {
  LongTermParams p;
  p.enc = make_session_encoder(d, max_positions, heads, use_positions, rng, registry,
                               prefix + "/enc");
  p.gru = make_gru(d, rng, registry, prefix + "/gru");
  p.attn_intra_w =
      reg(registry, prefix + "/attn_intra_w", Tensor::uniform(d, d, kInitLo, kInitHi, rng));
  p.attn_inter_w =
      reg(registry, prefix + "/attn_inter_w", Tensor::uniform(d, d, kInitLo, kInitHi, rng));
  p.empty_history = reg(registry, prefix + "/empty_history",
                        Tensor::uniform(1, 2 * d, kInitLo, kInitHi, rng));
  return p;
}

ShortTermParams make_short_term(int d, int max_positions, int heads, bool use_positions,
                                Rng& rng, std::vector<Parameter>* registry,
                                const std::string& prefix) {
  ShortTermParams p;
  p.enc = make_session_encoder(d, max_positions, heads, use_positions, rng, registry,
                               prefix + "/enc");
  p.lstm = make_time4lstm(d, rng, registry, prefix + "/lstm");
  p.attn_recent_w =
      reg(registry, prefix + "/attn_recent_w", Tensor::uniform(d, d, kInitLo, kInitHi, rng));
  return p;
}

// --- batched building blocks ----------------------------------------------------

Tensor session_encode_batch(const Tensor& x, const std::vector<double>& mask,
                            int block_len, const SessionEncoderParams& p) {
  const int d = p.dim();
  if (x.cols() != d)
    throw std::invalid_argument("session_encode_batch: input width != d");
  Tensor h = x;
  if (p.use_positions) {
    if (block_len > p.pos.rows())
      throw std::invalid_argument("session_encode_batch: block_len exceeds position table");
    std::vector<int> pos_idx(static_cast<std::size_t>(x.rows()));
    for (int r = 0; r < x.rows(); ++r) pos_idx[static_cast<std::size_t>(r)] = r % block_len;
    h = add(h, gather_rows(p.pos, pos_idx));
  }
  Tensor q = matmul(h, p.wq);
  Tensor k = matmul(h, p.wk);
  Tensor v = matmul(h, p.wv);
  const int dh = d / p.heads;
  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(p.heads));
  for (int i = 0; i < p.heads; ++i) {
    Tensor qh = slice_cols(q, i * dh, (i + 1) * dh);
    Tensor kh = slice_cols(k, i * dh, (i + 1) * dh);
    Tensor vh = slice_cols(v, i * dh, (i + 1) * dh);
    heads.push_back(
        session_attention(qh, kh, vh, mask, block_len, 1.0 / std::sqrt(double(dh))));
  }
  Tensor attn = matmul(concat_cols(heads), p.wo);
  Tensor ln1 = layer_norm(add(h, attn), p.ln1_g, p.ln1_b);
  Tensor ff = add_rowvec(
      matmul(relu(add_rowvec(matmul(ln1, p.ff1_w), p.ff1_b)), p.ff2_w), p.ff2_b);
  return layer_norm(add(ln1, ff), p.ln2_g, p.ln2_b);
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p) {
  const int d = x.cols();
  Tensor gx = matmul(x, p.wx);
  Tensor hh = matmul(h, p.wh);
  Tensor r = sigmoid(add_rowvec(add(slice_cols(gx, 0, d), slice_cols(hh, 0, d)),
                                slice_cols(p.b, 0, d)));
  Tensor z = sigmoid(add_rowvec(add(slice_cols(gx, d, 2 * d), slice_cols(hh, d, 2 * d)),
                                slice_cols(p.b, d, 2 * d)));
  Tensor n = tanh(add_rowvec(
      add(slice_cols(gx, 2 * d, 3 * d), mul(r, slice_cols(hh, 2 * d, 3 * d))),
      slice_cols(p.b, 2 * d, 3 * d)));
  return add(mul(z, h), mul(one_minus(z), n));
}

std::vector<Tensor> gru_batch(const std::vector<Tensor>& xs,
                              const std::vector<Tensor>& step_masks, const GruParams& p) {
  std::vector<Tensor> out;
  if (xs.empty()) return out;
  Tensor h = Tensor::zeros(xs.front().rows(), xs.front().cols());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    h = gru_cell(xs[t], h, p);
    if (t < step_masks.size() && step_masks[t].defined()) h = mul_colvec(h, step_masks[t]);
    out.push_back(h);
  }
  return out;
}

LstmState time4lstm_cell(const Tensor& x, const LstmState& state, const Tensor& dp,
                         const Tensor& dq, const Time4LstmParams& p) {
  const int d = x.cols();
  Tensor pre = add_rowvec(add(matmul(x, p.wx), matmul(state.h, p.wh)), p.b);
  Tensor i = sigmoid(slice_cols(pre, 0, d));
  Tensor f = sigmoid(slice_cols(pre, d, 2 * d));
  Tensor g = tanh(slice_cols(pre, 2 * d, 3 * d));
  Tensor o = sigmoid(slice_cols(pre, 3 * d, 4 * d));
  Tensor tp = sigmoid(add_rowvec(add(matmul(x, p.tp_w), matmul(dp, p.tp_v)), p.tp_b));
  Tensor tq = sigmoid(add_rowvec(add(matmul(x, p.tq_w), matmul(dq, p.tq_v)), p.tq_b));
  LstmState next;
  next.c = add(mul(f, state.c), mul(i, mul_colvec(g, mul(tp, tq))));
  next.h = mul(o, tanh(next.c));
  return next;
}

std::vector<Tensor> time4lstm_batch(const std::vector<Tensor>& xs,
                                    const std::vector<Tensor>& dps,
                                    const std::vector<Tensor>& dqs,
                                    const std::vector<Tensor>& step_masks,
                                    const Time4LstmParams& p) {
  std::vector<Tensor> out;
  if (xs.empty()) return out;
  LstmState s;
  s.h = Tensor::zeros(xs.front().rows(), xs.front().cols());
  s.c = Tensor::zeros(xs.front().rows(), xs.front().cols());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    s = time4lstm_cell(xs[t], s, dps[t], dqs[t], p);
    if (t < step_masks.size() && step_masks[t].defined()) {
      s.h = mul_colvec(s.h, step_masks[t]);
      s.c = mul_colvec(s.c, step_masks[t]);
    }
    out.push_back(s.h);
  }
  return out;
}

// --- single-instance reference ops ------------------------------------------------

Tensor sess_enc_forward(const Tensor& x, const std::vector<bool>& pad_mask,
                        const SessionEncoderParams& p) {
  if (pad_mask.size() != static_cast<std::size_t>(x.rows()))
    throw std::invalid_argument("sess_enc_forward: mask size != rows");
  std::vector<double> mask(pad_mask.size(), 0.0);
  bool any = false;
  for (std::size_t i = 0; i < pad_mask.size(); ++i)
    if (pad_mask[i]) mask[i] = 1.0, any = true;
  if (!any) throw std::invalid_argument("sess_enc_forward: all positions masked");
  Tensor encoded = session_encode_batch(x, mask, x.rows(), p);
  return segment_masked_mean(encoded, mask, x.rows());
}

std::vector<Tensor> gru_forward(const std::vector<Tensor>& inputs, const GruParams& p) {
  if (inputs.empty()) throw std::invalid_argument("gru_forward: empty input list");
  return gru_batch(inputs, {}, p);
}

Tensor attn_pool(const Tensor& target, const Tensor& items, const Tensor& w) {
  if (!items.defined() || items.rows() < 1)
    throw std::invalid_argument("attn_pool: empty item list");
  Tensor logits = matmul(matmul(items, w), transpose(target));  // k x 1
  Tensor weights = softmax_rows(reshape(logits, 1, items.rows()));
  return matmul(weights, items);
}

TimeFeatures time_features(const std::vector<Event>& events, std::int64_t target_time) {
  TimeFeatures tf;
  tf.delta_prev.reserve(events.size());
  tf.delta_target.reserve(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i > 0 && events[i].timestamp < events[i - 1].timestamp)
      throw std::invalid_argument("time_features: non-monotone timestamps");
    tf.delta_prev.push_back(
        i == 0 ? 0.0 : std::log1p(double(events[i].timestamp - events[i - 1].timestamp)));
    if (target_time < events[i].timestamp)
      throw std::invalid_argument("time_features: event after prediction time");
    tf.delta_target.push_back(std::log1p(double(target_time - events[i].timestamp)));
  }
  return tf;
}

std::vector<Tensor> time4lstm_forward(const std::vector<Tensor>& inputs,
                                      const TimeFeatures& tf, const Time4LstmParams& p) {
  if (inputs.empty()) throw std::invalid_argument("time4lstm_forward: empty input list");
  if (tf.delta_prev.size() != inputs.size() || tf.delta_target.size() != inputs.size())
    throw std::invalid_argument("time4lstm_forward: time feature count mismatch");
  std::vector<Tensor> dps, dqs;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    dps.push_back(Tensor::constant(inputs[t].rows(), 1, tf.delta_prev[t]));
    dqs.push_back(Tensor::constant(inputs[t].rows(), 1, tf.delta_target[t]));
  }
  return time4lstm_batch(inputs, dps, dqs, {}, p);
}

Tensor long_term_forward(const std::vector<Tensor>& sessions, const Tensor& target,
                         const LongTermParams& p) {
  if (sessions.empty())
    throw std::invalid_argument("long_term_forward: no historical sessions");
  std::vector<Tensor> intra;
  intra.reserve(sessions.size());
  for (const Tensor& s : sessions)
    intra.push_back(sess_enc_forward(s, std::vector<bool>(s.rows(), true), p.enc));
  std::vector<Tensor> inter = gru_forward(intra, p.gru);
  Tensor uh = attn_pool(target, concat_rows(intra), p.attn_intra_w);
  Tensor uhp = attn_pool(target, concat_rows(inter), p.attn_inter_w);
  return concat_cols({uh, uhp});
}

Tensor short_term_forward(const ShortTermInput& in, const Tensor& target,
                          const ShortTermParams& p, bool recent_enabled,
                          bool current_enabled) {
  if (!in.past.defined() && !in.recent.defined())
    throw std::invalid_argument("short_term_forward: past and recent both empty");
  const int d = p.enc.dim();
  Tensor uc = current_enabled && in.past.defined()
                  ? sess_enc_forward(in.past, std::vector<bool>(in.past.rows(), true), p.enc)
                  : Tensor::zeros(1, d);
  Tensor ur = Tensor::zeros(1, d);
  if (recent_enabled && in.recent.defined()) {
    std::vector<Tensor> steps;
    for (int t = 0; t < in.recent.rows(); ++t)
      steps.push_back(slice_rows(in.recent, t, t + 1));
    std::vector<Tensor> hs = time4lstm_forward(steps, in.recent_times, p.lstm);
    ur = attn_pool(target, concat_rows(hs), p.attn_recent_w);
  }
  return concat_cols({ur, uc});
}

}  // namespace lsidn
