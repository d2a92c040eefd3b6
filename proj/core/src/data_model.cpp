#include "lsidn/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace lsidn {

const char* behavior_token(Behavior b) {
  switch (b) {
    case Behavior::kClick: return "click";
    case Behavior::kFavorite: return "fav";
    case Behavior::kCart: return "cart";
    case Behavior::kPurchase: return "buy";
  }
  return "click";
}

std::optional<Behavior> behavior_from_token(const std::string& token) {
  if (token == "click") return Behavior::kClick;
  if (token == "fav") return Behavior::kFavorite;
  if (token == "cart") return Behavior::kCart;
  if (token == "buy") return Behavior::kPurchase;
  return std::nullopt;
}

namespace {

[[noreturn]] void fail_line(const std::string& origin, std::size_t line_no,
                            const std::string& what) {
  std::ostringstream msg;
  msg << origin << ":" << line_no << ": " << what;
  throw std::runtime_error(msg.str());
}

std::int64_t parse_timestamp(const std::string& tok, const std::string& origin,
                             std::size_t line_no) {
  try {
    std::size_t pos = 0;
    std::int64_t v = std::stoll(tok, &pos);
    if (pos != tok.size() || v < 0)
      fail_line(origin, line_no, "bad timestamp '" + tok + "'");
    return v;
  } catch (const std::logic_error&) {
    fail_line(origin, line_no, "bad timestamp '" + tok + "'");
  }
}

}  // namespace

ParsedEvents parse_events_stream(std::istream& in, const std::string& origin) {
  ParsedEvents out;
  std::unordered_map<std::string, int> user_ix, item_ix, cat_ix;
  // item -> category -> count, to pick the dominant category per item
  std::vector<std::map<int, int>> item_cat_counts;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string cols[5];
    std::size_t start = 0;
    int n = 0;
    for (; n < 5; ++n) {
      std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        cols[n] = line.substr(start);
        ++n;
        break;
      }
      cols[n] = line.substr(start, tab - start);
      start = tab + 1;
    }
    if (n != 5 || cols[4].find('\t') != std::string::npos)
      fail_line(origin, line_no, "expected 5 tab-separated fields");
    for (int i = 0; i < 5; ++i)
      if (cols[i].empty()) fail_line(origin, line_no, "empty field " + std::to_string(i + 1));

    auto behavior = behavior_from_token(cols[3]);
    if (!behavior) fail_line(origin, line_no, "unknown behavior '" + cols[3] + "'");

    auto intern = [](std::unordered_map<std::string, int>& ix,
                     std::vector<std::string>& names, const std::string& key) {
      auto [it, fresh] = ix.emplace(key, static_cast<int>(names.size()));
      if (fresh) names.push_back(key);
      return it->second;
    };
    Event ev;
    ev.user = intern(user_ix, out.vocab.users, cols[0]);
    ev.item = intern(item_ix, out.vocab.items, cols[1]);
    ev.category = intern(cat_ix, out.vocab.categories, cols[2]);
    ev.behavior = *behavior;
    ev.timestamp = parse_timestamp(cols[4], origin, line_no);

    if (ev.user == static_cast<int>(out.sequences.size())) {
      out.sequences.push_back(Sequence{ev.user, {}});
    }
    out.sequences[ev.user].events.push_back(ev);
    if (ev.item == static_cast<int>(item_cat_counts.size())) item_cat_counts.emplace_back();
    item_cat_counts[ev.item][ev.category]++;
  }

  for (auto& seq : out.sequences) {
    std::stable_sort(seq.events.begin(), seq.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
  }
  out.vocab.item_category.resize(item_cat_counts.size());
  for (std::size_t i = 0; i < item_cat_counts.size(); ++i) {
    int best_cat = 0, best_count = -1;
    for (auto [cat, count] : item_cat_counts[i]) {
      if (count > best_count) {
        best_cat = cat;
        best_count = count;
      }
    }
    out.vocab.item_category[i] = best_cat;
  }
  return out;
}

ParsedEvents parse_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open events file: " + path);
  return parse_events_stream(in, path);
}

std::vector<Session> sess_div(const Sequence& seq, std::int64_t omega_seconds,
                              std::size_t max_len) {
  std::vector<Session> sessions;
  if (seq.events.empty()) return sessions;
  if (omega_seconds <= 0) throw std::invalid_argument("omega must be positive");

  Session cur;
  cur.index = 0;
  cur.events.push_back(seq.events.front());
  for (std::size_t i = 1; i < seq.events.size(); ++i) {
    const Event& ev = seq.events[i];
    if (ev.timestamp - cur.events.back().timestamp >= omega_seconds) {
      sessions.push_back(std::move(cur));
      cur = Session{};
      cur.index = static_cast<int>(sessions.size());
    }
    cur.events.push_back(ev);
  }
  sessions.push_back(std::move(cur));

  if (max_len != kNoSessionCap) {
    for (auto& s : sessions) {
      if (s.events.size() > max_len)
        s.events.erase(s.events.begin(),
                       s.events.end() - static_cast<std::ptrdiff_t>(max_len));
    }
  }
  return sessions;
}

Sequence truncate_sequence(const Sequence& seq, std::size_t max_len) {
  Sequence out;
  out.user = seq.user;
  if (seq.events.size() <= max_len) {
    out.events = seq.events;
  } else {
    out.events.assign(seq.events.end() - static_cast<std::ptrdiff_t>(max_len),
                      seq.events.end());
  }
  return out;
}

std::vector<TrainingInstance> prefix_expand(const std::vector<Session>& sessions,
                                            std::size_t r, std::size_t b) {
  std::vector<TrainingInstance> out;
  if (sessions.empty()) return out;
  const int user = sessions.front().events.empty() ? 0 : sessions.front().events.front().user;

  // flattened (session, offset) positions in chronological order
  std::vector<Event> flat;
  for (const auto& s : sessions) flat.insert(flat.end(), s.events.begin(), s.events.end());

  std::size_t global = 0;
  for (std::size_t si = 0; si < sessions.size(); ++si) {
    const Session& sess = sessions[si];
    for (std::size_t off = 0; off < sess.events.size(); ++off, ++global) {
      if (global == 0) continue;  // nothing to condition on

      TrainingInstance inst;
      inst.user = user;
      inst.target = sess.events[off];
      inst.label = 1;

      std::size_t first_hist = si > b ? si - b : 0;
      for (std::size_t h = first_hist; h < si; ++h) inst.historical.push_back(sessions[h]);

      inst.past.index = sess.index;
      inst.past.events.assign(sess.events.begin(),
                              sess.events.begin() + static_cast<std::ptrdiff_t>(off));
      inst.future.index = sess.index;
      inst.future.events.assign(sess.events.begin() + static_cast<std::ptrdiff_t>(off) + 1,
                                sess.events.end());
      inst.has_future = !inst.future.events.empty();

      std::size_t take = std::min(r, global);
      inst.recent.assign(flat.begin() + static_cast<std::ptrdiff_t>(global - take),
                         flat.begin() + static_cast<std::ptrdiff_t>(global));
      out.push_back(std::move(inst));
    }
  }
  return out;
}

double session_entropy(const Session& sess) {
  if (sess.events.empty()) return 0.0;
  std::map<int, int> counts;
  for (const Event& ev : sess.events) counts[ev.category]++;
  const double n = static_cast<double>(sess.events.size());
  double h = 0.0;
  for (auto [cat, count] : counts) {
    double p = count / n;
    h -= p * std::log(p);
  }
  return h;
}

double session_gini(const Session& sess, int support_size) {
  if (support_size <= 0) throw std::invalid_argument("support_size must be positive");
  if (sess.events.empty()) return 0.0;
  std::vector<double> counts(static_cast<std::size_t>(support_size), 0.0);
  for (const Event& ev : sess.events) {
    if (ev.category < 0 || ev.category >= support_size)
      throw std::out_of_range("category " + std::to_string(ev.category) +
                              " outside support of size " + std::to_string(support_size));
    counts[static_cast<std::size_t>(ev.category)] += 1.0;
  }
  double total = static_cast<double>(sess.events.size());
  double abs_diff_sum = 0.0;
  for (double a : counts)
    for (double b : counts) abs_diff_sum += std::abs(a - b);
  return abs_diff_sum / (2.0 * support_size * total);
}

DiversityReport diversity_diagnostics(const std::vector<std::vector<Session>>& per_user,
                                      int support_size, Rng& rng) {
  DiversityReport rep;
  for (const auto& sessions : per_user) {
    if (sessions.size() < 2) continue;
    auto picks = rng.sample_indices(sessions.size(), 2);
    const Session& a = sessions[picks[0]];
    const Session& b = sessions[picks[1]];
    Session merged;
    merged.events = a.events;
    merged.events.insert(merged.events.end(), b.events.begin(), b.events.end());

    rep.mean_session_entropy += 0.5 * (session_entropy(a) + session_entropy(b));
    rep.mean_merged_entropy += session_entropy(merged);
    rep.mean_session_gini += 0.5 * (session_gini(a, support_size) + session_gini(b, support_size));
    rep.mean_merged_gini += session_gini(merged, support_size);
    rep.pairs++;
  }
  if (rep.pairs > 0) {
    double inv = 1.0 / static_cast<double>(rep.pairs);
    rep.mean_session_entropy *= inv;
    rep.mean_merged_entropy *= inv;
    rep.mean_session_gini *= inv;
    rep.mean_merged_gini *= inv;
  }
  return rep;
}

void sample_in_batch_negatives(std::vector<TrainingInstance>& batch,
                               std::size_t n_scored, Rng& rng) {
  if (n_scored < 2) {
    for (auto& inst : batch) inst.negative_items.clear();
    return;
  }
  std::vector<int> positives;
  positives.reserve(batch.size());
  for (const auto& inst : batch) positives.push_back(inst.target.item);
  {
    std::vector<int> distinct = positives;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2)
      throw std::runtime_error("in-batch negative sampling needs >= 2 distinct positives");
  }
  for (auto& inst : batch) {
    inst.negative_items.clear();
    while (inst.negative_items.size() < n_scored - 1) {
      int cand = positives[rng.uniform_index(positives.size())];
      if (cand != inst.target.item) inst.negative_items.push_back(cand);
    }
  }
}

}  // namespace lsidn
