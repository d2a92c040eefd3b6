#include "lsidn/synthetic.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "lsidn/data_model.hpp"

namespace lsidn {

void validate_spec(const SyntheticSpec& spec) {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("synthetic spec: " + what);
  };
  if (spec.n_users < 1) fail("n_users must be >= 1");
  if (spec.n_categories < 2) fail("n_categories must be >= 2");
  if (spec.n_items < spec.n_categories) fail("n_items must cover every category");
  if (spec.sessions_per_user < 1) fail("sessions_per_user must be >= 1");
  if (spec.session_len_min < 1 || spec.session_len_max < spec.session_len_min)
    fail("session length range is empty");
  if (spec.intra_gap_max_seconds < 1) fail("intra_gap_max_seconds must be >= 1");
  if (spec.inter_gap_seconds <= spec.intra_gap_max_seconds)
    fail("inter_gap_seconds must exceed intra_gap_max_seconds");
  if (spec.long_pref_strength < 0.0 || spec.long_pref_strength > 1.0)
    fail("long_pref_strength must lie in [0,1]");
  if (spec.intent_switch_prob < 0.0 || spec.intent_switch_prob > 1.0)
    fail("intent_switch_prob must lie in [0,1]");
  if (spec.noise_rate < 0.0 || spec.noise_rate > 1.0)
    fail("noise_rate must lie in [0,1]");
}

namespace {

// items of category c are {c, c+K, c+2K, ...}
int pool_size(const SyntheticSpec& spec, int category) {
  return (spec.n_items - category + spec.n_categories - 1) / spec.n_categories;
}

int draw_item(const SyntheticSpec& spec, int category, Rng& rng) {
  const int k = static_cast<int>(rng.uniform_index(
      static_cast<std::uint64_t>(pool_size(spec, category))));
  return category + k * spec.n_categories;
}

Behavior draw_behavior(bool from_pref, Rng& rng) {
  const double u = rng.uniform();
  if (from_pref) {
    // stable-preference interactions convert more often
    if (u < 0.20) return Behavior::kPurchase;
    if (u < 0.30) return Behavior::kCart;
    if (u < 0.40) return Behavior::kFavorite;
    return Behavior::kClick;
  }
  if (u < 0.02) return Behavior::kPurchase;
  if (u < 0.10) return Behavior::kCart;
  if (u < 0.20) return Behavior::kFavorite;
  return Behavior::kClick;
}

}  // namespace

std::string generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);
  std::ostringstream out;
  constexpr std::int64_t kEpochBase = 1'500'000'000;

  for (int u = 0; u < spec.n_users; ++u) {
    const int pref = static_cast<int>(rng.uniform_index(spec.n_categories));
    int intent = static_cast<int>(rng.uniform_index(spec.n_categories));
    std::int64_t t = kEpochBase + std::int64_t(u) * 97;

    for (int s = 0; s < spec.sessions_per_user; ++s) {
      if (s > 0) {
        if (rng.bernoulli(spec.intent_switch_prob))
          intent = static_cast<int>(rng.uniform_index(spec.n_categories));
        t += spec.inter_gap_seconds + static_cast<std::int64_t>(rng.uniform_index(3600));
      }
      const int len =
          spec.session_len_min +
          static_cast<int>(rng.uniform_index(
              static_cast<std::uint64_t>(spec.session_len_max - spec.session_len_min + 1)));
      for (int e = 0; e < len; ++e) {
        if (e > 0)
          t += 1 + static_cast<std::int64_t>(
                       rng.uniform_index(static_cast<std::uint64_t>(spec.intra_gap_max_seconds)));
        const bool from_pref = rng.bernoulli(spec.long_pref_strength);
        int item = draw_item(spec, from_pref ? pref : intent, rng);
        if (spec.noise_rate > 0.0 && rng.bernoulli(spec.noise_rate))
          item = static_cast<int>(rng.uniform_index(spec.n_items));
        const int category = item % spec.n_categories;
        const Behavior behavior = draw_behavior(from_pref, rng);
        out << 'u' << u << '\t' << 'i' << item << '\t' << 'c' << category << '\t'
            << behavior_token(behavior) << '\t' << t << '\n';
      }
    }
  }
  return out.str();
}

void write_synthetic(const SyntheticSpec& spec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("synthetic: cannot open " + path);
  out << generate_synthetic(spec);
  if (!out) throw std::runtime_error("synthetic: failed writing " + path);
}

void set_spec_key(SyntheticSpec& spec, const std::string& key, const std::string& value) {
  auto parse_int = [&](const std::string& v) {
    std::size_t used = 0;
    int parsed = std::stoi(v, &used);
    if (used != v.size()) throw std::runtime_error("synthetic spec: bad integer '" + v + "'");
    return parsed;
  };
  auto parse_i64 = [&](const std::string& v) {
    std::size_t used = 0;
    long long parsed = std::stoll(v, &used);
    if (used != v.size()) throw std::runtime_error("synthetic spec: bad integer '" + v + "'");
    return static_cast<std::int64_t>(parsed);
  };
  auto parse_real = [&](const std::string& v) {
    std::size_t used = 0;
    double parsed = std::stod(v, &used);
    if (used != v.size()) throw std::runtime_error("synthetic spec: bad number '" + v + "'");
    return parsed;
  };

  if (key == "n_users") spec.n_users = parse_int(value);
  else if (key == "n_items") spec.n_items = parse_int(value);
  else if (key == "n_categories") spec.n_categories = parse_int(value);
  else if (key == "sessions_per_user") spec.sessions_per_user = parse_int(value);
  else if (key == "session_len_min") spec.session_len_min = parse_int(value);
  else if (key == "session_len_max") spec.session_len_max = parse_int(value);
  else if (key == "intra_gap_max_seconds") spec.intra_gap_max_seconds = parse_i64(value);
  else if (key == "inter_gap_seconds") spec.inter_gap_seconds = parse_i64(value);
  else if (key == "long_pref_strength") spec.long_pref_strength = parse_real(value);
  else if (key == "intent_switch_prob") spec.intent_switch_prob = parse_real(value);
  else if (key == "noise_rate") spec.noise_rate = parse_real(value);
  else if (key == "seed") spec.seed = static_cast<std::uint64_t>(parse_i64(value));
  else throw std::runtime_error("synthetic spec: unknown key '" + key + "'");
}

SyntheticSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("synthetic spec: cannot open " + path);
  SyntheticSpec spec;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
    try {
      set_spec_key(spec, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return spec;
}

}  // namespace lsidn
