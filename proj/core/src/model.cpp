#include "lsidn/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lsidn {

// --- fusion and prediction -----------------------------------------------------

Fused adaptive_fuse(const Tensor& u_long, const Tensor& u_short, const Tensor& target,
                    const FusionParams& p) {
  const int d = target.cols();
  if (u_long.cols() != 2 * d || u_short.cols() != 2 * d)
    throw std::invalid_argument("adaptive_fuse: interest vectors must be 2d wide");
  if (p.w.rows() != 5 * d || p.w.cols() != 1)
    throw std::invalid_argument("adaptive_fuse: fusion weight must be 5d x 1");
  Tensor zf = concat_cols({u_long, u_short, target});
  Fused out;
  out.alpha = sigmoid(add_rowvec(matmul(zf, p.w), p.b));
  Tensor complement = add_scalar(neg(out.alpha), 1.0);
  out.fused = add(mul_colvec(u_long, out.alpha), mul_colvec(u_short, complement));
  return out;
}

Tensor predict(const Tensor& fused, const Tensor& target, const MlpParams& p) {
  Tensor x = concat_cols({fused, target});
  Tensor hidden = relu(add_rowvec(matmul(x, p.w1), p.b1));
  return sigmoid(add_rowvec(matmul(hidden, p.w2), p.b2));
}

// --- losses ---------------------------------------------------------------------

double main_loss(const std::vector<double>& y_hat, const std::vector<int>& labels) {
  if (y_hat.empty() || y_hat.size() != labels.size())
    throw std::invalid_argument("main_loss: need matching non-empty predictions/labels");
  constexpr double kLo = 1e-12, kHi = 1.0 - 1e-12;
  double total = 0.0;
  for (std::size_t i = 0; i < y_hat.size(); ++i) {
    double p = std::clamp(y_hat[i], kLo, kHi);
    total -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(y_hat.size());
}

Tensor main_loss(const Tensor& y_hat, const std::vector<int>& labels) {
  return binary_cross_entropy(y_hat, labels);
}

Tensor nt_xent_loss(const Tensor& p_reps, const Tensor& f_reps, double tau,
                    SslDenominator denom, SslSimilarity sim) {
  if (tau <= 0.0) throw std::invalid_argument("nt_xent_loss: tau must be positive");
  if (!p_reps.defined() || !f_reps.defined()) return Tensor();
  if (p_reps.rows() != f_reps.rows() || p_reps.cols() != f_reps.cols())
    throw std::invalid_argument("nt_xent_loss: view shapes differ");
  const int m = p_reps.rows();
  if (m < 2) return Tensor();  // too few pairs, term is skipped

  Tensor u = concat_rows({p_reps, f_reps});  // 2m x d
  if (sim == SslSimilarity::kCosine) {
    Tensor inv_norm =
        exp(scale(log(add_scalar(row_sum(mul(u, u)), 1e-12)), -0.5));
    u = mul_colvec(u, inv_norm);
  }
  Tensor s = scale(matmul(u, transpose(u)), 1.0 / tau);  // 2m x 2m

  const int n = 2 * m;
  std::vector<double> mask(static_cast<std::size_t>(n) * n, 1.0);
  std::vector<int> pos_rows, pos_cols;
  pos_rows.reserve(static_cast<std::size_t>(n));
  pos_cols.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int pos = i < m ? m + i : i - m;
    mask[static_cast<std::size_t>(i) * n + i] = 0.0;  // never compare with self
    if (denom == SslDenominator::kLiteral)
      mask[static_cast<std::size_t>(i) * n + pos] = 0.0;
    pos_rows.push_back(i);
    pos_cols.push_back(pos);
  }
  Tensor logsum = masked_row_logsumexp(s, mask);          // 2m x 1
  Tensor pos_sim = gather_elements(s, pos_rows, pos_cols);  // 2m x 1
  return mean_all(sub(logsum, pos_sim));
}

TotalLoss total_loss(const Tensor& main, const Tensor& ssl,
                     const std::vector<Parameter>& reg_params, double lambda,
                     double beta) {
  if (lambda < 0.0 || beta < 0.0)
    throw std::invalid_argument("total_loss: weights must be non-negative");
  TotalLoss out;
  Tensor total = main;
  out.bundle.main = main.scalar();
  out.bundle.lambda = lambda;
  out.bundle.beta = beta;
  if (ssl.defined()) {
    total = add(total, scale(ssl, lambda));
    out.bundle.ssl = ssl.scalar();
    out.bundle.has_ssl = true;
  }
  Tensor reg;
  for (const auto& p : reg_params) {
    Tensor sq = sum_squares(p.tensor);
    reg = reg.defined() ? add(reg, sq) : sq;
  }
  if (reg.defined()) {
    out.bundle.reg = reg.scalar();
    total = add(total, scale(reg, beta));
  }
  out.total = total;
  out.bundle.total = total.scalar();
  return out;
}

// --- the assembled model -----------------------------------------------------------

namespace {

std::vector<Event> cap_last(const std::vector<Event>& v, std::size_t k) {
  if (v.size() <= k) return v;
  return {v.end() - static_cast<std::ptrdiff_t>(k), v.end()};
}

std::vector<Event> cap_first(const std::vector<Event>& v, std::size_t k) {
  if (v.size() <= k) return v;
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k)};
}

bool keeps_ssl(Variant v) {
  return v == Variant::kFull || v == Variant::kWoLd || v == Variant::kWoRi ||
         v == Variant::kWoLi;
}

bool ssl_eligible(const TrainingInstance& inst) {
  return inst.has_future && !inst.past.events.empty() && !inst.future.events.empty();
}

}  // namespace

LsidnModel::LsidnModel(const ExperimentConfig& cfg, int n_items, int n_categories,
                       std::vector<int> item_category)
    : cfg_(cfg),
      n_items_(n_items),
      n_categories_(n_categories),
      item_category_(std::move(item_category)) {
  validate_config(cfg_);
  if (n_items_ <= 0 || n_categories_ <= 0)
    throw std::invalid_argument("model: need positive item and category counts");
  if (item_category_.size() != static_cast<std::size_t>(n_items_))
    throw std::invalid_argument("model: item_category size mismatch");
  for (int c : item_category_)
    if (c < 0 || c >= n_categories_)
      throw std::invalid_argument("model: item_category entry out of range");

  Rng rng(derive_seed(cfg_.seed, "init"));
  const int d = cfg_.d;
  auto& all = params_.all;
  params_.item_embed = Tensor::uniform(n_items_ + 2, d, -0.01, 0.01, rng);
  all.push_back({"embed/items", params_.item_embed});
  params_.cat_embed = Tensor::uniform(n_categories_ + 1, d, -0.01, 0.01, rng);
  all.push_back({"embed/cats", params_.cat_embed});
  params_.long_term = make_long_term(d, cfg_.max_seq_len, cfg_.heads, cfg_.use_positions,
                                     rng, &all, "long");
  params_.short_term = make_short_term(d, cfg_.max_seq_len, cfg_.heads,
                                       cfg_.use_positions, rng, &all, "short");
  params_.fusion.w = Tensor::uniform(5 * d, 1, -0.01, 0.01, rng);
  all.push_back({"fusion/w", params_.fusion.w});
  params_.fusion.b = Tensor::zeros(1, 1, true);
  all.push_back({"fusion/b", params_.fusion.b});
  params_.head.w1 = Tensor::uniform(3 * d, 2 * d, -0.01, 0.01, rng);
  all.push_back({"head/w1", params_.head.w1});
  params_.head.b1 = Tensor::zeros(1, 2 * d, true);
  all.push_back({"head/b1", params_.head.b1});
  params_.head.w2 = Tensor::uniform(2 * d, 1, -0.01, 0.01, rng);
  all.push_back({"head/w2", params_.head.w2});
  params_.head.b2 = Tensor::zeros(1, 1, true);
  all.push_back({"head/b2", params_.head.b2});
}

std::vector<Parameter> LsidnModel::active_params() const {
  const Variant v = cfg_.variant;
  const bool drop_long = v == Variant::kWoLi;
  const bool drop_current = v == Variant::kWoCi || v == Variant::kWoSi;
  const bool drop_recent = v == Variant::kWoRi || v == Variant::kWoSi;
  std::vector<Parameter> out;
  for (const auto& p : params_.all) {
    if (drop_long && p.name.rfind("long/", 0) == 0) continue;
    if (drop_current && p.name.rfind("short/enc/", 0) == 0) continue;
    if (drop_recent &&
        (p.name.rfind("short/lstm/", 0) == 0 || p.name == "short/attn_recent_w"))
      continue;
    out.push_back(p);
  }
  return out;
}

namespace {

// Everything needed to assemble one scoring graph over a uniform candidate
// count. Index bookkeeping lives here; the tensor ops stay readable.
struct GraphContext {
  const ExperimentConfig& cfg;
  const LsidnParams& params;
  const std::vector<int>& item_category;
  int n_items;
  int n_categories;

  int mask_row() const { return n_items; }
  int item_pad() const { return n_items + 1; }
  int cat_pad() const { return n_categories; }

  int item_row(int item) const {
    if (item == kMaskItem) return mask_row();
    if (item < 0 || item >= n_items)
      throw std::out_of_range("model: item id " + std::to_string(item) + " out of range");
    return item;
  }
  int cat_row_for_item(int item) const {
    return item == kMaskItem ? cat_pad() : item_category[static_cast<std::size_t>(item)];
  }

  void push_event(std::vector<int>& items, std::vector<int>& cats, const Event& ev) const {
    items.push_back(item_row(ev.item));
    cats.push_back(ev.item == kMaskItem ? cat_pad() : ev.category);
  }
  void push_pad(std::vector<int>& items, std::vector<int>& cats) const {
    items.push_back(item_pad());
    cats.push_back(cat_pad());
  }

  Tensor embed(const std::vector<int>& items, const std::vector<int>& cats) const {
    return add(gather_rows(params.item_embed, items), gather_rows(params.cat_embed, cats));
  }

  Tensor embed_events(const std::vector<Event>& events) const {
    std::vector<int> items, cats;
    items.reserve(events.size());
    cats.reserve(events.size());
    for (const Event& ev : events) push_event(items, cats, ev);
    return embed(items, cats);
  }

  // target-conditioned softmax pooling over S slots per candidate
  Tensor pool_slots(const Tensor& reps_slot_major, const Tensor& w, const Tensor& v_t,
                    const std::vector<double>& slot_mask, int B, int S, int N) const {
    const int total = B * N;
    std::vector<int> tile_idx(static_cast<std::size_t>(total) * S);
    std::vector<int> cand_idx(static_cast<std::size_t>(total) * S);
    std::vector<double> mask_tiled(static_cast<std::size_t>(total) * S);
    for (int j = 0; j < total; ++j) {
      const int i = j / N;
      for (int s = 0; s < S; ++s) {
        tile_idx[static_cast<std::size_t>(j) * S + s] = i * S + s;
        cand_idx[static_cast<std::size_t>(j) * S + s] = j;
        mask_tiled[static_cast<std::size_t>(j) * S + s] =
            slot_mask[static_cast<std::size_t>(i) * S + s];
      }
    }
    Tensor proj = matmul(reps_slot_major, w);
    Tensor scores = row_sum(mul(gather_rows(proj, tile_idx), gather_rows(v_t, cand_idx)));
    Tensor weights = masked_softmax_rows(reshape(scores, total, S), mask_tiled);
    return segment_weighted_sum(weights, gather_rows(reps_slot_major, tile_idx));
  }
};

struct ScoreGraph {
  Tensor y_hat;
  Tensor alpha;
};

ScoreGraph build_score_graph(const GraphContext& ctx,
                             const std::vector<TrainingInstance>& insts,
                             const std::vector<std::vector<int>>& candidates) {
  const auto& cfg = ctx.cfg;
  const auto& P = ctx.params;
  const int B = static_cast<int>(insts.size());
  if (B == 0) throw std::invalid_argument("model: empty batch");
  const int N = static_cast<int>(candidates.front().size());
  for (const auto& c : candidates)
    if (static_cast<int>(c.size()) != N)
      throw std::invalid_argument("model: candidate lists must have uniform size");
  const int total = B * N;
  const int d = cfg.d;

  const Variant variant = cfg.variant;
  const bool long_on = variant != Variant::kWoLi;
  const bool current_on = variant != Variant::kWoCi && variant != Variant::kWoSi;
  const bool recent_on = variant != Variant::kWoRi && variant != Variant::kWoSi;
  const bool short_on = variant != Variant::kWoSi;

  // candidate embeddings
  std::vector<int> cand_items, cand_cats;
  cand_items.reserve(static_cast<std::size_t>(total));
  cand_cats.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < B; ++i)
    for (int item : candidates[static_cast<std::size_t>(i)]) {
      cand_items.push_back(ctx.item_row(item));
      cand_cats.push_back(ctx.cat_row_for_item(item));
    }
  Tensor v_t = ctx.embed(cand_items, cand_cats);  // total x d

  std::vector<int> cand2inst(static_cast<std::size_t>(total));
  for (int j = 0; j < total; ++j) cand2inst[static_cast<std::size_t>(j)] = j / N;

  // --- long-term interest -----------------------------------------------------
  Tensor u_long;
  if (long_on) {
    const bool merged = variant == Variant::kWoLd;
    const int S = merged ? 1 : cfg.b;
    const int L = merged ? cfg.max_seq_len : cfg.l;

    std::vector<std::vector<std::vector<Event>>> hist(static_cast<std::size_t>(B));
    for (int i = 0; i < B; ++i) {
      const auto& inst = insts[static_cast<std::size_t>(i)];
      if (merged) {
        std::vector<Event> flat;
        for (const Session& s : inst.historical)
          flat.insert(flat.end(), s.events.begin(), s.events.end());
        if (!flat.empty())
          hist[static_cast<std::size_t>(i)].push_back(cap_last(flat, std::size_t(L)));
      } else {
        for (const Session& s : inst.historical)
          hist[static_cast<std::size_t>(i)].push_back(cap_last(s.events, std::size_t(L)));
      }
    }

    std::vector<int> items, cats;
    items.reserve(static_cast<std::size_t>(B) * S * L);
    cats.reserve(items.capacity());
    std::vector<double> row_mask(static_cast<std::size_t>(B) * S * L, 0.0);
    std::vector<double> slot_mask(static_cast<std::size_t>(B) * S, 0.0);
    for (int i = 0; i < B; ++i) {
      const auto& sessions = hist[static_cast<std::size_t>(i)];
      const int si = static_cast<int>(sessions.size());
      for (int s = 0; s < S; ++s) {
        const int k = s - (S - si);  // left-padded slot assignment
        const std::vector<Event>* sess = k >= 0 ? &sessions[static_cast<std::size_t>(k)] : nullptr;
        if (sess) slot_mask[static_cast<std::size_t>(i) * S + s] = 1.0;
        for (int j = 0; j < L; ++j) {
          if (sess && j < static_cast<int>(sess->size())) {
            ctx.push_event(items, cats, (*sess)[static_cast<std::size_t>(j)]);
            row_mask[(static_cast<std::size_t>(i) * S + s) * L + j] = 1.0;
          } else {
            ctx.push_pad(items, cats);
          }
        }
      }
    }

    Tensor x = ctx.embed(items, cats);
    Tensor encoded = session_encode_batch(x, row_mask, L, P.long_term.enc);
    Tensor reps_intra = segment_masked_mean(encoded, row_mask, L);  // (B*S) x d

    std::vector<Tensor> xs, step_masks;
    for (int t = 0; t < S; ++t) {
      std::vector<int> idx(static_cast<std::size_t>(B));
      std::vector<double> m(static_cast<std::size_t>(B));
      for (int i = 0; i < B; ++i) {
        idx[static_cast<std::size_t>(i)] = i * S + t;
        m[static_cast<std::size_t>(i)] = slot_mask[static_cast<std::size_t>(i) * S + t];
      }
      xs.push_back(gather_rows(reps_intra, idx));
      step_masks.push_back(Tensor::from_values(B, 1, std::move(m)));
    }
    std::vector<Tensor> hs = gru_batch(xs, step_masks, P.long_term.gru);
    std::vector<int> perm(static_cast<std::size_t>(B) * S);
    for (int i = 0; i < B; ++i)
      for (int t = 0; t < S; ++t)
        perm[static_cast<std::size_t>(i) * S + t] = t * B + i;
    Tensor reps_inter = gather_rows(concat_rows(hs), perm);  // (B*S) x d

    Tensor uh = ctx.pool_slots(reps_intra, P.long_term.attn_intra_w, v_t, slot_mask, B, S, N);
    Tensor uhp = ctx.pool_slots(reps_inter, P.long_term.attn_inter_w, v_t, slot_mask, B, S, N);
    Tensor raw = concat_cols({uh, uhp});

    // users with no history fall back to a learned vector
    std::vector<double> have(static_cast<std::size_t>(total));
    for (int j = 0; j < total; ++j)
      have[static_cast<std::size_t>(j)] = hist[static_cast<std::size_t>(j / N)].empty() ? 0.0 : 1.0;
    Tensor hm = Tensor::from_values(total, 1, std::move(have));
    Tensor fallback = gather_rows(P.long_term.empty_history, std::vector<int>(total, 0));
    u_long = add(mul_colvec(raw, hm), mul_colvec(fallback, add_scalar(neg(hm), 1.0)));
  } else {
    u_long = Tensor::zeros(total, 2 * d);
  }

  // --- short-term interest -----------------------------------------------------
  Tensor u_current;
  if (current_on) {
    std::vector<int> items, cats;
    std::vector<double> row_mask(static_cast<std::size_t>(B) * cfg.l, 0.0);
    for (int i = 0; i < B; ++i) {
      std::vector<Event> past = cap_last(insts[static_cast<std::size_t>(i)].past.events,
                                         std::size_t(cfg.l));
      for (int j = 0; j < cfg.l; ++j) {
        if (j < static_cast<int>(past.size())) {
          ctx.push_event(items, cats, past[static_cast<std::size_t>(j)]);
          row_mask[static_cast<std::size_t>(i) * cfg.l + j] = 1.0;
        } else {
          ctx.push_pad(items, cats);
        }
      }
    }
    Tensor x = ctx.embed(items, cats);
    Tensor encoded = session_encode_batch(x, row_mask, cfg.l, P.short_term.enc);
    Tensor reps = segment_masked_mean(encoded, row_mask, cfg.l);  // B x d
    u_current = gather_rows(reps, cand2inst);
  } else {
    u_current = Tensor::zeros(total, d);
  }

  Tensor u_recent;
  if (recent_on) {
    const int r = cfg.r;
    std::vector<std::vector<Event>> recent(static_cast<std::size_t>(B));
    std::vector<TimeFeatures> tfs(static_cast<std::size_t>(B));
    for (int i = 0; i < B; ++i) {
      const auto& inst = insts[static_cast<std::size_t>(i)];
      recent[static_cast<std::size_t>(i)] = cap_last(inst.recent, std::size_t(r));
      tfs[static_cast<std::size_t>(i)] =
          time_features(recent[static_cast<std::size_t>(i)], inst.target.timestamp);
    }
    std::vector<Tensor> xs, dps, dqs, step_masks;
    bool any_step = false;
    for (int t = 0; t < r; ++t) {
      std::vector<int> items, cats;
      std::vector<double> dp(static_cast<std::size_t>(B), 0.0);
      std::vector<double> dq(static_cast<std::size_t>(B), 0.0);
      std::vector<double> m(static_cast<std::size_t>(B), 0.0);
      for (int i = 0; i < B; ++i) {
        const auto& ev = recent[static_cast<std::size_t>(i)];
        const int n = static_cast<int>(ev.size());
        const int k = t - (r - n);  // left padding
        if (k >= 0) {
          ctx.push_event(items, cats, ev[static_cast<std::size_t>(k)]);
          dp[static_cast<std::size_t>(i)] = tfs[static_cast<std::size_t>(i)].delta_prev[static_cast<std::size_t>(k)];
          dq[static_cast<std::size_t>(i)] = tfs[static_cast<std::size_t>(i)].delta_target[static_cast<std::size_t>(k)];
          m[static_cast<std::size_t>(i)] = 1.0;
          any_step = true;
        } else {
          ctx.push_pad(items, cats);
        }
      }
      xs.push_back(ctx.embed(items, cats));
      dps.push_back(Tensor::from_values(B, 1, std::move(dp)));
      dqs.push_back(Tensor::from_values(B, 1, std::move(dq)));
      step_masks.push_back(Tensor::from_values(B, 1, std::move(m)));
    }
    if (any_step) {
      std::vector<Tensor> hs = time4lstm_batch(xs, dps, dqs, step_masks, P.short_term.lstm);
      Tensor h_tmajor = concat_rows(hs);  // (r*B) x d
      std::vector<int> tile_idx(static_cast<std::size_t>(total) * r);
      std::vector<int> cand_idx(static_cast<std::size_t>(total) * r);
      std::vector<double> mask_tiled(static_cast<std::size_t>(total) * r, 0.0);
      for (int j = 0; j < total; ++j) {
        const int i = j / N;
        const int n = static_cast<int>(recent[static_cast<std::size_t>(i)].size());
        for (int t = 0; t < r; ++t) {
          tile_idx[static_cast<std::size_t>(j) * r + t] = t * B + i;
          cand_idx[static_cast<std::size_t>(j) * r + t] = j;
          if (t >= r - n) mask_tiled[static_cast<std::size_t>(j) * r + t] = 1.0;
        }
      }
      Tensor proj = matmul(h_tmajor, P.short_term.attn_recent_w);
      Tensor scores =
          row_sum(mul(gather_rows(proj, tile_idx), gather_rows(v_t, cand_idx)));
      Tensor weights = masked_softmax_rows(reshape(scores, total, r), mask_tiled);
      u_recent = segment_weighted_sum(weights, gather_rows(h_tmajor, tile_idx));
    } else {
      u_recent = Tensor::zeros(total, d);
    }
  } else {
    u_recent = Tensor::zeros(total, d);
  }

  Tensor u_short =
      short_on ? concat_cols({u_recent, u_current}) : Tensor::zeros(total, 2 * d);

  Fused fused = adaptive_fuse(u_long, u_short, v_t, P.fusion);
  ScoreGraph out;
  out.alpha = fused.alpha;
  out.y_hat = predict(fused.fused, v_t, P.head);
  return out;
}

}  // namespace

ForwardResult LsidnModel::forward_batch(const std::vector<TrainingInstance>& batch,
                                        Rng& aug_rng) {
  const int N = cfg_.n_scored;
  std::vector<std::vector<int>> candidates(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& inst = batch[i];
    if (static_cast<int>(inst.negative_items.size()) != N - 1)
      throw std::invalid_argument("forward_batch: instance lacks its sampled negatives");
    candidates[i].push_back(inst.target.item);
    candidates[i].insert(candidates[i].end(), inst.negative_items.begin(),
                         inst.negative_items.end());
  }

  GraphContext ctx{cfg_, params_, item_category_, n_items_, n_categories_};
  ScoreGraph graph = build_score_graph(ctx, batch, candidates);

  std::vector<int> labels;
  labels.reserve(batch.size() * static_cast<std::size_t>(N));
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (int c = 0; c < N; ++c) labels.push_back(c == 0 ? 1 : 0);
  Tensor main = main_loss(graph.y_hat, labels);

  // contrastive branch over instances with usable sub-session pairs
  Tensor ssl;
  std::size_t ssl_pairs = 0;
  if (keeps_ssl(cfg_.variant) && cfg_.lambda > 0.0) {
    std::vector<std::vector<Event>> views1, views2;
    for (const auto& inst : batch) {
      if (!ssl_eligible(inst)) continue;
      Session past;
      past.events = cap_last(inst.past.events, std::size_t(cfg_.l));
      Session future;
      future.events = cap_first(inst.future.events, std::size_t(cfg_.l));
      if (cfg_.augmentation == AugmentKind::kExchange) {
        SelectionPlan plan = select_indices(past, future, cfg_.gamma, aug_rng);
        auto [v1, v2] = exchange_and_sort(past, future, plan);
        views1.push_back(cap_last(v1.events, std::size_t(cfg_.l)));
        views2.push_back(cap_last(v2.events, std::size_t(cfg_.l)));
      } else {
        views1.push_back(
            baseline_augment(past, cfg_.augmentation, cfg_.gamma, aug_rng).events);
        views2.push_back(
            baseline_augment(past, cfg_.augmentation, cfg_.gamma, aug_rng).events);
      }
    }
    if (views1.size() >= 2) {
      ssl_pairs = views1.size();
      auto encode_views = [&](const std::vector<std::vector<Event>>& views) {
        const int V = static_cast<int>(views.size());
        std::vector<int> items, cats;
        std::vector<double> mask(static_cast<std::size_t>(V) * cfg_.l, 0.0);
        for (int i = 0; i < V; ++i) {
          for (int j = 0; j < cfg_.l; ++j) {
            if (j < static_cast<int>(views[static_cast<std::size_t>(i)].size())) {
              ctx.push_event(items, cats, views[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
              mask[static_cast<std::size_t>(i) * cfg_.l + j] = 1.0;
            } else {
              ctx.push_pad(items, cats);
            }
          }
        }
        Tensor x = ctx.embed(items, cats);
        Tensor encoded = session_encode_batch(x, mask, cfg_.l, params_.short_term.enc);
        return segment_masked_mean(encoded, mask, cfg_.l);
      };
      ssl = nt_xent_loss(encode_views(views1), encode_views(views2), cfg_.tau,
                         cfg_.ssl_denominator, cfg_.ssl_similarity);
    }
  }

  TotalLoss tl = total_loss(main, ssl, active_params(), cfg_.lambda, cfg_.beta);
  ForwardResult out;
  out.total = tl.total;
  out.bundle = tl.bundle;
  out.y_hat = graph.y_hat;
  out.alpha = graph.alpha;
  out.labels = std::move(labels);
  out.ssl_pairs = ssl_pairs;
  return out;
}

EvalScores LsidnModel::score_candidates(const std::vector<TrainingInstance>& instances,
                                        const std::vector<std::vector<int>>& candidates) const {
  if (instances.size() != candidates.size())
    throw std::invalid_argument("score_candidates: instance/candidate count mismatch");
  EvalScores out;
  out.scores.resize(instances.size());
  out.alphas.resize(instances.size());
  if (instances.empty()) return out;

  const int N = static_cast<int>(candidates.front().size());
  GraphContext ctx{cfg_, params_, item_category_, n_items_, n_categories_};
  const std::size_t heavy = static_cast<std::size_t>(std::max(N, cfg_.b * cfg_.l));
  const std::size_t chunk = std::max<std::size_t>(1, 4096 / heavy * 4);

  NoGradGuard eval_only;
  for (std::size_t at = 0; at < instances.size(); at += chunk) {
    std::size_t hi = std::min(at + chunk, instances.size());
    std::vector<TrainingInstance> insts(instances.begin() + static_cast<std::ptrdiff_t>(at),
                                        instances.begin() + static_cast<std::ptrdiff_t>(hi));
    std::vector<std::vector<int>> cands(candidates.begin() + static_cast<std::ptrdiff_t>(at),
                                        candidates.begin() + static_cast<std::ptrdiff_t>(hi));
    ScoreGraph graph = build_score_graph(ctx, insts, cands);
    for (std::size_t i = 0; i < insts.size(); ++i) {
      out.scores[at + i].resize(static_cast<std::size_t>(N));
      out.alphas[at + i].resize(static_cast<std::size_t>(N));
      for (int c = 0; c < N; ++c) {
        out.scores[at + i][static_cast<std::size_t>(c)] =
            graph.y_hat.at(static_cast<int>(i) * N + c, 0);
        out.alphas[at + i][static_cast<std::size_t>(c)] =
            graph.alpha.at(static_cast<int>(i) * N + c, 0);
      }
    }
  }
  return out;
}

std::pair<double, double> LsidnModel::forward_instance(const TrainingInstance& inst,
                                                       int candidate_item) const {
  NoGradGuard eval_only;
  GraphContext ctx{cfg_, params_, item_category_, n_items_, n_categories_};
  const int d = cfg_.d;
  const Variant variant = cfg_.variant;

  Tensor v_t = ctx.embed({ctx.item_row(candidate_item)},
                         {ctx.cat_row_for_item(candidate_item)});

  Tensor u_long;
  if (variant == Variant::kWoLi) {
    u_long = Tensor::zeros(1, 2 * d);
  } else {
    std::vector<std::vector<Event>> sessions;
    if (variant == Variant::kWoLd) {
      std::vector<Event> flat;
      for (const Session& s : inst.historical)
        flat.insert(flat.end(), s.events.begin(), s.events.end());
      if (!flat.empty()) sessions.push_back(cap_last(flat, std::size_t(cfg_.max_seq_len)));
    } else {
      for (const Session& s : inst.historical)
        sessions.push_back(cap_last(s.events, std::size_t(cfg_.l)));
    }
    if (sessions.empty()) {
      u_long = params_.long_term.empty_history;
    } else {
      std::vector<Tensor> embedded;
      for (const auto& s : sessions) embedded.push_back(ctx.embed_events(s));
      u_long = long_term_forward(embedded, v_t, params_.long_term);
    }
  }

  Tensor u_short;
  if (variant == Variant::kWoSi) {
    u_short = Tensor::zeros(1, 2 * d);
  } else {
    ShortTermInput in;
    std::vector<Event> past = cap_last(inst.past.events, std::size_t(cfg_.l));
    if (!past.empty()) in.past = ctx.embed_events(past);
    std::vector<Event> recent = cap_last(inst.recent, std::size_t(cfg_.r));
    if (!recent.empty()) {
      in.recent = ctx.embed_events(recent);
      in.recent_times = time_features(recent, inst.target.timestamp);
    }
    u_short = short_term_forward(in, v_t, params_.short_term,
                                 variant != Variant::kWoRi, variant != Variant::kWoCi);
  }

  Fused fused = adaptive_fuse(u_long, u_short, v_t, params_.fusion);
  Tensor y = predict(fused.fused, v_t, params_.head);
  return {y.scalar(), fused.alpha.scalar()};
}

}  // namespace lsidn
