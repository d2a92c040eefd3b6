#include "lsidn/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lsidn {

const char* augment_token(AugmentKind k) {
  switch (k) {
    case AugmentKind::kExchange: return "exchange";
    case AugmentKind::kCrop: return "crop";
    case AugmentKind::kMask: return "mask";
    case AugmentKind::kReorder: return "reorder";
  }
  return "exchange";
}

std::optional<AugmentKind> augment_from_token(const std::string& token) {
  if (token == "exchange") return AugmentKind::kExchange;
  if (token == "crop") return AugmentKind::kCrop;
  if (token == "mask") return AugmentKind::kMask;
  if (token == "reorder") return AugmentKind::kReorder;
  return std::nullopt;
}

SelectionPlan select_indices(const Session& past, const Session& future, double gamma,
                             Rng& rng) {
  if (past.events.empty() || future.events.empty())
    throw std::invalid_argument("select_indices needs non-empty sub-sessions");
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("selection ratio must lie in [0, 1]");

  SelectionPlan plan;
  plan.gamma = gamma;
  auto count = [gamma](std::size_t n) {
    return static_cast<std::size_t>(std::floor(gamma * static_cast<double>(n)));
  };
  plan.past_selected = rng.sample_indices(past.events.size(), count(past.events.size()));
  plan.future_selected = rng.sample_indices(future.events.size(), count(future.events.size()));
  return plan;
}

namespace {

// origin 0 = past, 1 = future; equal timestamps keep past-origin events first
struct Tagged {
  Event ev;
  int origin;
};

Session merge_sorted(std::vector<Tagged> pool, int index) {
  std::sort(pool.begin(), pool.end(), [](const Tagged& a, const Tagged& b) {
    if (a.ev.timestamp != b.ev.timestamp) return a.ev.timestamp < b.ev.timestamp;
    return a.origin < b.origin;
  });
  Session out;
  out.index = index;
  out.events.reserve(pool.size());
  for (auto& t : pool) out.events.push_back(t.ev);
  return out;
}

void check_plan_side(const std::vector<std::size_t>& sel, std::size_t n, const char* side) {
  for (std::size_t i = 0; i < sel.size(); ++i) {
    if (sel[i] >= n) throw std::invalid_argument(std::string("selection index out of range for ") + side);
    if (i > 0 && sel[i] <= sel[i - 1])
      throw std::invalid_argument(std::string("selection indices must be sorted and distinct for ") + side);
  }
}

}  // namespace

std::pair<Session, Session> exchange_and_sort(const Session& past, const Session& future,
                                              const SelectionPlan& plan) {
  check_plan_side(plan.past_selected, past.events.size(), "past");
  check_plan_side(plan.future_selected, future.events.size(), "future");

  std::vector<Tagged> to_past, to_future;
  std::size_t sel_at = 0;
  for (std::size_t i = 0; i < past.events.size(); ++i) {
    bool selected = sel_at < plan.past_selected.size() && plan.past_selected[sel_at] == i;
    if (selected) {
      to_future.push_back({past.events[i], 0});
      ++sel_at;
    } else {
      to_past.push_back({past.events[i], 0});
    }
  }
  sel_at = 0;
  for (std::size_t i = 0; i < future.events.size(); ++i) {
    bool selected = sel_at < plan.future_selected.size() && plan.future_selected[sel_at] == i;
    if (selected) {
      to_past.push_back({future.events[i], 1});
      ++sel_at;
    } else {
      to_future.push_back({future.events[i], 1});
    }
  }
  return {merge_sorted(std::move(to_past), past.index),
          merge_sorted(std::move(to_future), future.index)};
}

Session baseline_augment(const Session& sess, AugmentKind kind, double ratio, Rng& rng) {
  if (sess.events.empty()) throw std::invalid_argument("baseline_augment needs a non-empty session");
  if (ratio <= 0.0 || ratio >= 1.0)
    throw std::invalid_argument("augmentation ratio must lie in (0, 1)");

  const std::size_t n = sess.events.size();
  Session out;
  out.index = sess.index;

  switch (kind) {
    case AugmentKind::kExchange:
      throw std::invalid_argument("exchange works on sub-session pairs, not baseline_augment");
    case AugmentKind::kCrop: {
      auto keep = static_cast<std::size_t>(
          std::ceil((1.0 - ratio) * static_cast<double>(n)));
      if (keep == 0) throw std::runtime_error("crop would empty the session");
      std::size_t start = rng.uniform_index(n - keep + 1);
      out.events.assign(sess.events.begin() + static_cast<std::ptrdiff_t>(start),
                        sess.events.begin() + static_cast<std::ptrdiff_t>(start + keep));
      return out;
    }
    case AugmentKind::kMask: {
      auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
      out.events = sess.events;
      for (std::size_t i : rng.sample_indices(n, k)) out.events[i].item = kMaskItem;
      return out;
    }
    case AugmentKind::kReorder: {
      auto w = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
      out.events = sess.events;
      if (w >= 2) {
        std::size_t start = rng.uniform_index(n - w + 1);
        std::vector<Event> window(out.events.begin() + static_cast<std::ptrdiff_t>(start),
                                  out.events.begin() + static_cast<std::ptrdiff_t>(start + w));
        rng.shuffle(window);
        std::copy(window.begin(), window.end(),
                  out.events.begin() + static_cast<std::ptrdiff_t>(start));
      }
      return out;
    }
  }
  return out;
}

}  // namespace lsidn
