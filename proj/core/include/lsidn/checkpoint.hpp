#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lsidn/tensor.hpp"

namespace lsidn {

// Text container for trained parameters plus the effective configuration.
// Layout (all ASCII, '\n' separated):
//   lsidn-checkpoint v1
//   config <n>          then n "key = value" lines
//   params <m>          then m blocks of:
//     param <name> <rows> <cols>
//     one line per row, space-separated values, printed with %.17g
//   end
struct Checkpoint {
  struct Entry {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<double> values;
  };
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<Entry> params;
};

std::string format_double(double v);  // %.17g, round-trip exact

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& config,
                     const std::vector<Parameter>& params);

Checkpoint load_checkpoint(const std::string& path);

// Copies values into matching parameters; unknown or missing names, or shape
// mismatches, are errors.
void apply_checkpoint(const Checkpoint& ck, std::vector<Parameter>& params);

}  // namespace lsidn
