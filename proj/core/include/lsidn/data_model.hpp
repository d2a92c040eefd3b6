#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lsidn/rng.hpp"

namespace lsidn {

enum class Behavior { kClick, kFavorite, kCart, kPurchase };

// TSV tokens for Behavior. Parsing rejects anything else.
const char* behavior_token(Behavior b);
std::optional<Behavior> behavior_from_token(const std::string& token);

struct Event {
  int user = 0;
  int item = 0;
  int category = 0;
  Behavior behavior = Behavior::kClick;
  std::int64_t timestamp = 0;  // seconds
};

// A user's full event timeline, sorted by timestamp (stable on ties).
struct Sequence {
  int user = 0;
  std::vector<Event> events;
};

// A maximal run of events whose consecutive gaps are < omega.
struct Session {
  std::vector<Event> events;
  int index = 0;  // position among the user's sessions, 0-based
};

// One supervised example: predict `target` from everything before it.
// `future` holds the tail of the target's session; it exists only at
// training time and is consumed solely by the contrastive branch.
struct TrainingInstance {
  int user = 0;
  std::vector<Session> historical;  // up to b complete sessions, chronological
  Session past;                     // same-session events before target (may be empty)
  Session future;                   // same-session events after target
  bool has_future = false;
  std::vector<Event> recent;        // latest r events before target, chronological
  Event target;
  int label = 1;
  std::vector<int> negative_items;  // filled by sample_in_batch_negatives
};

// --- parsing ---------------------------------------------------------------

// Vocabulary maps between opaque TSV ids and dense indices.
struct Vocab {
  std::vector<std::string> users, items, categories;
  std::vector<int> item_category;  // dominant category index per item
};

struct ParsedEvents {
  std::vector<Sequence> sequences;  // ordered by first appearance in the file
  Vocab vocab;
};

// Reads `user<TAB>item<TAB>category<TAB>behavior<TAB>timestamp` lines.
// Throws std::runtime_error naming the offending line on malformed input.
ParsedEvents parse_events(const std::string& path);
ParsedEvents parse_events_stream(std::istream& in, const std::string& origin);

// --- sessionization ---------------------------------------------------------

inline constexpr std::size_t kNoSessionCap = std::numeric_limits<std::size_t>::max();

// Splits a sorted sequence at every gap >= omega_seconds. With max_len set,
// each session keeps only its most recent max_len events afterward.
std::vector<Session> sess_div(const Sequence& seq, std::int64_t omega_seconds,
                              std::size_t max_len = kNoSessionCap);

// Keeps the most recent max_len events of a sequence.
Sequence truncate_sequence(const Sequence& seq, std::size_t max_len);

// --- training instances ------------------------------------------------------

// Expands sessions into one instance per event with at least one predecessor
// on the user's timeline. r bounds `recent`, b bounds `historical` (the b most
// recent complete sessions before the target's session).
std::vector<TrainingInstance> prefix_expand(const std::vector<Session>& sessions,
                                            std::size_t r, std::size_t b);

// --- diversity diagnostics ----------------------------------------------------

// Shannon entropy (natural log) of the session's category proportions.
double session_entropy(const Session& sess);

// Gini coefficient (mean-absolute-difference form) of the session's category
// counts padded with zeros to `support_size` categories. Category ids must lie
// in [0, support_size). Uniform spread -> 0, full concentration -> (m-1)/m.
double session_gini(const Session& sess, int support_size);

struct DiversityReport {
  double mean_session_entropy = 0.0;
  double mean_merged_entropy = 0.0;
  double mean_session_gini = 0.0;
  double mean_merged_gini = 0.0;
  std::size_t pairs = 0;
};

// For each user with >= 2 sessions, samples two distinct sessions, compares
// their individual diversity against the merged session's.
DiversityReport diversity_diagnostics(const std::vector<std::vector<Session>>& per_user,
                                      int support_size, Rng& rng);

// --- negative sampling --------------------------------------------------------

// Gives every instance n_scored-1 negatives drawn from other instances'
// positives in the same batch, never equal to its own positive. Throws if the
// batch has fewer than two distinct positive items.
void sample_in_batch_negatives(std::vector<TrainingInstance>& batch,
                               std::size_t n_scored, Rng& rng);

}  // namespace lsidn
