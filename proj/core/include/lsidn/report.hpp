#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace lsidn {

// One emitted measurement. `extra` carries runner-specific columns (noise
// rate, sweep value, ...) already formatted; key order is preserved.
struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::string split;
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> extra;
};

// One JSON object per line, keys in declaration order. Deterministic: no
// timestamps, shortest round-trip doubles.
std::string rows_to_jsonl(const std::vector<MetricRow>& rows);

// metric,value,split,variant,seed plus the union of extra keys in first
// appearance order.
std::string rows_to_csv(const std::vector<MetricRow>& rows);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace lsidn
