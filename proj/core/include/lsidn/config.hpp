#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lsidn/augmentation.hpp"

namespace lsidn {

enum class Variant { kFull, kWoLd, kWoSd, kWoRi, kWoCi, kWoLi, kWoSi };

const char* variant_token(Variant v);
std::optional<Variant> variant_from_token(const std::string& token);
const std::vector<Variant>& all_variants();

enum class SslDenominator { kStandard, kLiteral };
enum class SslSimilarity { kDot, kCosine };

struct ExperimentConfig {
  int d = 40;
  int batch = 500;
  int max_seq_len = 50;
  int b = 5;
  int l = 10;
  int r = 30;
  double gamma = 0.4;
  double lambda = 0.1;
  double beta = 0.1;
  double tau = 0.2;
  int omega_minutes = 360;
  int n_scored = 2;        // items scored per training instance (1 positive + rest)
  double lr = 1e-3;
  int patience = 5;
  int max_epochs = 50;
  std::uint64_t seed = 42;
  Variant variant = Variant::kFull;
  SslDenominator ssl_denominator = SslDenominator::kStandard;
  SslSimilarity ssl_similarity = SslSimilarity::kDot;
  AugmentKind augmentation = AugmentKind::kExchange;
  double noise_rate = 0.0;
  bool use_positions = true;
  int heads = 2;
  int eval_negatives = 49;  // candidate pool = 1 positive + this many

  std::int64_t omega_seconds() const { return std::int64_t(omega_minutes) * 60; }
};

// Sets one field from its config-file key. Unknown keys and unparsable values
// throw std::runtime_error.
void set_config_key(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

// Plain-text "key = value" lines; '#' starts a comment, blank lines ignored.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_lines(const std::vector<std::string>& lines,
                                    const std::string& origin);

void validate_config(const ExperimentConfig& cfg);

// Stable key order, round-trips through set_config_key.
std::vector<std::pair<std::string, std::string>> config_to_pairs(
    const ExperimentConfig& cfg);
ExperimentConfig config_from_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace lsidn
