#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "lsidn/config.hpp"
#include "lsidn/data_model.hpp"

namespace lsidn {

struct DatasetSplit {
  std::vector<TrainingInstance> train, val, test;
};

// Session-divided corpus with a per-user temporal split: last session -> test,
// second-last -> val, earlier sessions -> train. Users with two sessions skip
// val; single-session users only feed train. Val/test instances carry no
// future sub-session.
struct Dataset {
  Vocab vocab;
  std::vector<std::vector<Session>> user_sessions;
  DatasetSplit split;
  std::vector<std::unordered_set<int>> user_seen;  // items interacted, any split

  int n_items() const { return static_cast<int>(vocab.items.size()); }
  int n_categories() const { return static_cast<int>(vocab.categories.size()); }
  int n_users() const { return static_cast<int>(vocab.users.size()); }
};

Dataset build_dataset(const ParsedEvents& parsed, const ExperimentConfig& cfg);

// Candidate pools for evaluation: positive first, then `n_negatives` distinct
// items the user never interacted with, sampled via per-instance derived
// seeds. Throws when a user's unseen catalogue is too small.
std::vector<std::vector<int>> build_eval_pools(const Dataset& ds,
                                               const std::vector<TrainingInstance>& instances,
                                               int n_negatives, std::uint64_t base_seed);

// Adds floor(rate * instances.size()) positive-labeled instances whose targets
// are items the cloned instance's user never interacted with. rate must lie in
// [0, 0.5]. Never touches anything but `instances`.
void inject_noise(std::vector<TrainingInstance>& instances, double rate,
                  const Dataset& ds, Rng& rng);

// Split-hygiene audits; each throws std::logic_error on violation.
// No event of a user's test session may be visible from any train instance,
// and no val/test instance may carry a future sub-session.
void audit_split_hygiene(const Dataset& ds);
void audit_future_hygiene(const DatasetSplit& split);

// Serialization of a preprocessed directory: events.tsv is copied through,
// the split is derived on load. `preprocess` writes, `load_dataset` reads.
void write_dataset_dir(const std::string& events_tsv_path, const std::string& out_dir,
                       int omega_minutes);
Dataset load_dataset(const std::string& dir, const ExperimentConfig& cfg);

}  // namespace lsidn
