#include "lsidn/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lsidn/checkpoint.hpp"

namespace lsidn {

const char* variant_token(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kWoLd: return "wo_ld";
    case Variant::kWoSd: return "wo_sd";
    case Variant::kWoRi: return "wo_ri";
    case Variant::kWoCi: return "wo_ci";
    case Variant::kWoLi: return "wo_li";
    case Variant::kWoSi: return "wo_si";
  }
  return "full";
}

std::optional<Variant> variant_from_token(const std::string& token) {
  for (Variant v : all_variants())
    if (token == variant_token(v)) return v;
  return std::nullopt;
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> kAll = {
      Variant::kFull, Variant::kWoLd, Variant::kWoSd, Variant::kWoRi,
      Variant::kWoCi, Variant::kWoLi, Variant::kWoSi};
  return kAll;
}

namespace {

[[noreturn]] void bad(const std::string& what) {
  throw std::runtime_error("config: " + what);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::logic_error&) {
    bad("bad integer for " + key + ": '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(out)) throw std::invalid_argument("");
    return out;
  } catch (const std::logic_error&) {
    bad("bad real for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad("bad boolean for " + key + ": '" + v + "' (want true/false)");
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void set_config_key(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  if (key == "d") cfg.d = parse_int(key, value);
  else if (key == "batch") cfg.batch = parse_int(key, value);
  else if (key == "max_seq_len") cfg.max_seq_len = parse_int(key, value);
  else if (key == "b") cfg.b = parse_int(key, value);
  else if (key == "l") cfg.l = parse_int(key, value);
  else if (key == "r") cfg.r = parse_int(key, value);
  else if (key == "gamma") cfg.gamma = parse_real(key, value);
  else if (key == "lambda") cfg.lambda = parse_real(key, value);
  else if (key == "beta") cfg.beta = parse_real(key, value);
  else if (key == "tau") cfg.tau = parse_real(key, value);
  else if (key == "omega_minutes") cfg.omega_minutes = parse_int(key, value);
  else if (key == "n_scored") cfg.n_scored = parse_int(key, value);
  else if (key == "lr") cfg.lr = parse_real(key, value);
  else if (key == "patience") cfg.patience = parse_int(key, value);
  else if (key == "max_epochs") cfg.max_epochs = parse_int(key, value);
  else if (key == "seed") {
    try {
      cfg.seed = std::stoull(value);
    } catch (const std::logic_error&) {
      bad("bad seed: '" + value + "'");
    }
  } else if (key == "variant") {
    auto v = variant_from_token(value);
    if (!v) bad("unknown variant '" + value + "'");
    cfg.variant = *v;
  } else if (key == "ssl_denominator") {
    if (value == "standard") cfg.ssl_denominator = SslDenominator::kStandard;
    else if (value == "literal") cfg.ssl_denominator = SslDenominator::kLiteral;
    else bad("unknown ssl_denominator '" + value + "' (want standard/literal)");
  } else if (key == "ssl_similarity") {
    if (value == "dot") cfg.ssl_similarity = SslSimilarity::kDot;
    else if (value == "cosine") cfg.ssl_similarity = SslSimilarity::kCosine;
    else bad("unknown ssl_similarity '" + value + "' (want dot/cosine)");
  } else if (key == "augmentation") {
    auto a = augment_from_token(value);
    if (!a) bad("unknown augmentation '" + value + "'");
    cfg.augmentation = *a;
  } else if (key == "noise_rate") cfg.noise_rate = parse_real(key, value);
  else if (key == "use_positions") cfg.use_positions = parse_bool(key, value);
  else if (key == "heads") cfg.heads = parse_int(key, value);
  else if (key == "eval_negatives") cfg.eval_negatives = parse_int(key, value);
  else bad("unknown key '" + key + "'");
}

ExperimentConfig parse_config_lines(const std::vector<std::string>& lines,
                                    const std::string& origin) {
  ExperimentConfig cfg;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      bad(origin + ":" + std::to_string(i + 1) + ": expected 'key = value', got '" +
          line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      bad(origin + ":" + std::to_string(i + 1) + ": empty key or value");
    try {
      set_config_key(cfg, key, value);
    } catch (const std::runtime_error& e) {
      bad(origin + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  validate_config(cfg);
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return parse_config_lines(lines, path);
}

void validate_config(const ExperimentConfig& cfg) {
  auto positive = [](int v, const char* name) {
    if (v <= 0) bad(std::string(name) + " must be positive");
  };
  positive(cfg.d, "d");
  positive(cfg.batch, "batch");
  positive(cfg.max_seq_len, "max_seq_len");
  positive(cfg.b, "b");
  positive(cfg.l, "l");
  positive(cfg.r, "r");
  positive(cfg.omega_minutes, "omega_minutes");
  positive(cfg.patience, "patience");
  positive(cfg.max_epochs, "max_epochs");
  positive(cfg.heads, "heads");
  positive(cfg.eval_negatives, "eval_negatives");
  if (cfg.n_scored < 1) bad("n_scored must be at least 1");
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) bad("gamma must lie in [0, 1]");
  if (cfg.noise_rate < 0.0 || cfg.noise_rate > 1.0) bad("noise_rate must lie in [0, 1]");
  if (cfg.lambda < 0.0) bad("lambda must be non-negative");
  if (cfg.beta < 0.0) bad("beta must be non-negative");
  if (cfg.tau <= 0.0) bad("tau must be positive");
  if (cfg.lr <= 0.0) bad("lr must be positive");
  if (cfg.d % cfg.heads != 0) bad("d must be divisible by heads");
  if (cfg.l > cfg.max_seq_len) bad("l must not exceed max_seq_len");
}

std::vector<std::pair<std::string, std::string>> config_to_pairs(
    const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  auto put = [&out](const char* k, const std::string& v) { out.emplace_back(k, v); };
  put("d", std::to_string(cfg.d));
  put("batch", std::to_string(cfg.batch));
  put("max_seq_len", std::to_string(cfg.max_seq_len));
  put("b", std::to_string(cfg.b));
  put("l", std::to_string(cfg.l));
  put("r", std::to_string(cfg.r));
  put("gamma", format_double(cfg.gamma));
  put("lambda", format_double(cfg.lambda));
  put("beta", format_double(cfg.beta));
  put("tau", format_double(cfg.tau));
  put("omega_minutes", std::to_string(cfg.omega_minutes));
  put("n_scored", std::to_string(cfg.n_scored));
  put("lr", format_double(cfg.lr));
  put("patience", std::to_string(cfg.patience));
  put("max_epochs", std::to_string(cfg.max_epochs));
  put("seed", std::to_string(cfg.seed));
  put("variant", variant_token(cfg.variant));
  put("ssl_denominator",
      cfg.ssl_denominator == SslDenominator::kStandard ? "standard" : "literal");
  put("ssl_similarity", cfg.ssl_similarity == SslSimilarity::kDot ? "dot" : "cosine");
  put("augmentation", augment_token(cfg.augmentation));
  put("noise_rate", format_double(cfg.noise_rate));
  put("use_positions", cfg.use_positions ? "true" : "false");
  put("heads", std::to_string(cfg.heads));
  put("eval_negatives", std::to_string(cfg.eval_negatives));
  return out;
}

ExperimentConfig config_from_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  ExperimentConfig cfg;
  for (const auto& [k, v] : pairs) set_config_key(cfg, k, v);
  validate_config(cfg);
  return cfg;
}

}  // namespace lsidn
