#pragma once

#include <cstdint>
#include <string>

#include "lsidn/rng.hpp"

namespace lsidn {

// Planted-structure behavior simulator. Every user keeps one stable preferred
// category; each session adds a transient intent category. Items are drawn
// from the preferred category with probability long_pref_strength, otherwise
// from the session intent. Item i belongs to category i % n_categories, so
// the dominant-category vocabulary reconstruction is exact.
//
// Timestamp gaps are bounded so that session division with any omega in
// (intra_gap_max_seconds, inter_gap_seconds] recovers the planted sessions.
struct SyntheticSpec {
  int n_users = 200;
  int n_items = 500;
  int n_categories = 20;
  int sessions_per_user = 6;
  int session_len_min = 4;
  int session_len_max = 10;
  std::int64_t intra_gap_max_seconds = 300;  // 5 min
  std::int64_t inter_gap_seconds = 25200;    // 7 h
  double long_pref_strength = 0.7;
  double intent_switch_prob = 0.8;  // chance a new session picks a fresh intent
  double noise_rate = 0.0;          // chance an event is replaced by a random item
  std::uint64_t seed = 7;
};

void validate_spec(const SyntheticSpec& spec);

// Renders the generated events as TSV lines (user item category behavior
// timestamp), byte-identical for equal specs.
std::string generate_synthetic(const SyntheticSpec& spec);

void write_synthetic(const SyntheticSpec& spec, const std::string& path);

// Plain-text "key = value" spec files, same conventions as the experiment
// config. Unknown keys throw.
SyntheticSpec parse_spec_file(const std::string& path);
void set_spec_key(SyntheticSpec& spec, const std::string& key, const std::string& value);

}  // namespace lsidn
