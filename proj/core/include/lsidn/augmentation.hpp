#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lsidn/data_model.hpp"
#include "lsidn/rng.hpp"

namespace lsidn {

// Item id standing in for masked-out positions. The embedding layer maps it
// to a dedicated row; it never appears in real data (dense ids are >= 0).
inline constexpr int kMaskItem = -1;

struct SelectionPlan {
  std::vector<std::size_t> past_selected;    // sorted, distinct
  std::vector<std::size_t> future_selected;  // sorted, distinct
  double gamma = 0.0;
};

// Picks floor(gamma*n) indices uniformly from each sub-session.
SelectionPlan select_indices(const Session& past, const Session& future, double gamma,
                             Rng& rng);

// Swaps the selected events between the two sub-sessions and re-sorts each
// result by timestamp. Ties keep past-origin events first.
std::pair<Session, Session> exchange_and_sort(const Session& past, const Session& future,
                                              const SelectionPlan& plan);

enum class AugmentKind { kExchange, kCrop, kMask, kReorder };

const char* augment_token(AugmentKind k);
std::optional<AugmentKind> augment_from_token(const std::string& token);

// Traditional augmentations, applied to a single session.
// crop keeps a random contiguous run of ceil((1-ratio)*n) events, mask
// replaces floor(ratio*n) items with kMaskItem, reorder shuffles a random
// contiguous window of floor(ratio*n) events.
Session baseline_augment(const Session& sess, AugmentKind kind, double ratio, Rng& rng);

}  // namespace lsidn
