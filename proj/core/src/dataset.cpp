#include "lsidn/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace lsidn {

Dataset build_dataset(const ParsedEvents& parsed, const ExperimentConfig& cfg) {
  validate_config(cfg);
  Dataset ds;
  ds.vocab = parsed.vocab;
  ds.user_sessions.resize(parsed.vocab.users.size());
  ds.user_seen.resize(parsed.vocab.users.size());

  for (const Sequence& seq : parsed.sequences) {
    auto sessions = sess_div(seq, cfg.omega_seconds(), std::size_t(cfg.max_seq_len));
    const std::size_t u = static_cast<std::size_t>(seq.user);
    for (const Event& ev : seq.events) ds.user_seen[u].insert(ev.item);

    auto instances = prefix_expand(sessions, std::size_t(cfg.r), std::size_t(cfg.b));
    const int k = static_cast<int>(sessions.size());
    const int test_idx = k >= 2 ? k - 1 : -1;
    const int val_idx = k >= 3 ? k - 2 : -1;
    for (TrainingInstance& inst : instances) {
      const int si = inst.past.index;  // the target's session decides the split
      if (si == test_idx || si == val_idx) {
        inst.future = Session{};
        inst.has_future = false;
        (si == test_idx ? ds.split.test : ds.split.val).push_back(std::move(inst));
      } else {
        ds.split.train.push_back(std::move(inst));
      }
    }
    ds.user_sessions[u] = std::move(sessions);
  }
  return ds;
}

std::vector<std::vector<int>> build_eval_pools(const Dataset& ds,
                                               const std::vector<TrainingInstance>& instances,
                                               int n_negatives, std::uint64_t base_seed) {
  if (n_negatives < 0) throw std::invalid_argument("build_eval_pools: negative count");
  const int n_items = ds.n_items();
  std::vector<std::vector<int>> pools(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    const auto& seen = ds.user_seen[static_cast<std::size_t>(inst.user)];
    if (n_items - static_cast<int>(seen.size()) < n_negatives)
      throw std::runtime_error("build_eval_pools: user " +
                               ds.vocab.users[static_cast<std::size_t>(inst.user)] +
                               " has too few unseen items");
    Rng rng(derive_seed(base_seed, "evalneg", static_cast<std::uint64_t>(inst.user),
                        static_cast<std::uint64_t>(i)));
    auto& pool = pools[i];
    pool.reserve(std::size_t(n_negatives) + 1);
    pool.push_back(inst.target.item);
    std::unordered_set<int> taken;
    while (static_cast<int>(taken.size()) < n_negatives) {
      const int item = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_items)));
      if (seen.count(item) || taken.count(item)) continue;
      taken.insert(item);
      pool.push_back(item);
    }
  }
  return pools;
}

void inject_noise(std::vector<TrainingInstance>& instances, double rate,
                  const Dataset& ds, Rng& rng) {
  if (rate < 0.0 || rate > 0.5)
    throw std::invalid_argument("inject_noise: rate must lie in [0, 0.5]");
  const std::size_t add = static_cast<std::size_t>(rate * static_cast<double>(instances.size()));
  if (add == 0) return;
  const int n_items = ds.n_items();
  const std::size_t base = instances.size();
  instances.reserve(base + add);
  for (std::size_t k = 0; k < add; ++k) {
    TrainingInstance fake = instances[rng.uniform_index(base)];
    const auto& seen = ds.user_seen[static_cast<std::size_t>(fake.user)];
    if (static_cast<int>(seen.size()) >= n_items)
      throw std::runtime_error("inject_noise: user has interacted with every item");
    int item = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_items)));
    while (seen.count(item))
      item = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_items)));
    fake.target.item = item;
    fake.target.category = ds.vocab.item_category[static_cast<std::size_t>(item)];
    fake.label = 1;
    instances.push_back(std::move(fake));
  }
}

namespace {

void collect_visible(const TrainingInstance& inst, std::vector<const Event*>& out) {
  for (const Session& s : inst.historical)
    for (const Event& ev : s.events) out.push_back(&ev);
  for (const Event& ev : inst.past.events) out.push_back(&ev);
  for (const Event& ev : inst.future.events) out.push_back(&ev);
  for (const Event& ev : inst.recent) out.push_back(&ev);
  out.push_back(&inst.target);
}

}  // namespace

void audit_split_hygiene(const Dataset& ds) {
  // timestamps of each user's test-session events
  std::vector<std::unordered_set<std::int64_t>> test_events(ds.user_sessions.size());
  for (std::size_t u = 0; u < ds.user_sessions.size(); ++u) {
    const auto& sessions = ds.user_sessions[u];
    if (sessions.size() < 2) continue;
    for (const Event& ev : sessions.back().events) test_events[u].insert(ev.timestamp);
  }
  std::vector<const Event*> visible;
  for (const TrainingInstance& inst : ds.split.train) {
    visible.clear();
    collect_visible(inst, visible);
    for (const Event* ev : visible)
      if (test_events[static_cast<std::size_t>(inst.user)].count(ev->timestamp))
        throw std::logic_error("split hygiene: test event visible from a train instance");
  }
}

void audit_future_hygiene(const DatasetSplit& split) {
  for (const auto* part : {&split.val, &split.test})
    for (const TrainingInstance& inst : *part)
      if (inst.has_future || !inst.future.events.empty())
        throw std::logic_error("future hygiene: evaluation instance carries a future sub-session");
}

void write_dataset_dir(const std::string& events_tsv_path, const std::string& out_dir,
                       int omega_minutes) {
  namespace fs = std::filesystem;
  ParsedEvents parsed = parse_events(events_tsv_path);  // validates before copying

  fs::create_directories(out_dir);
  fs::copy_file(events_tsv_path, fs::path(out_dir) / "events.tsv",
                fs::copy_options::overwrite_existing);

  std::size_t n_sessions = 0, n_events = 0;
  for (const Sequence& seq : parsed.sequences) {
    n_events += seq.events.size();
    n_sessions += sess_div(seq, std::int64_t(omega_minutes) * 60).size();
  }
  std::ofstream meta(fs::path(out_dir) / "meta.txt");
  if (!meta) throw std::runtime_error("preprocess: cannot write meta.txt");
  meta << "omega_minutes = " << omega_minutes << '\n'
       << "users = " << parsed.vocab.users.size() << '\n'
       << "items = " << parsed.vocab.items.size() << '\n'
       << "categories = " << parsed.vocab.categories.size() << '\n'
       << "events = " << n_events << '\n'
       << "sessions = " << n_sessions << '\n';
}

Dataset load_dataset(const std::string& dir, const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path events = fs::path(dir) / "events.tsv";
  if (!fs::exists(events))
    throw std::runtime_error("load_dataset: " + events.string() + " not found");
  return build_dataset(parse_events(events.string()), cfg);
}

}  // namespace lsidn
