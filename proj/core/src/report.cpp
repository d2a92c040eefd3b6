#include "lsidn/report.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace lsidn {

std::string rows_to_jsonl(const std::vector<MetricRow>& rows) {
  std::string out;
  for (const MetricRow& row : rows) {
    nlohmann::ordered_json obj;
    obj["metric"] = row.metric;
    obj["value"] = row.value;
    obj["split"] = row.split;
    obj["variant"] = row.variant;
    obj["seed"] = row.seed;
    for (const auto& [key, value] : row.extra) obj[key] = value;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::string rows_to_csv(const std::vector<MetricRow>& rows) {
  std::vector<std::string> extra_keys;
  for (const MetricRow& row : rows)
    for (const auto& [key, value] : row.extra) {
      (void)value;
      bool known = false;
      for (const auto& k : extra_keys) known = known || k == key;
      if (!known) extra_keys.push_back(key);
    }

  auto escape = [](const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string quoted = "\"";
    for (char c : field) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    quoted += '"';
    return quoted;
  };

  std::string out = "metric,value,split,variant,seed";
  for (const auto& key : extra_keys) out += "," + escape(key);
  out += '\n';
  for (const MetricRow& row : rows) {
    out += escape(row.metric) + ",";
    out += nlohmann::json(row.value).dump() + ",";
    out += escape(row.split) + "," + escape(row.variant) + "," + std::to_string(row.seed);
    for (const auto& key : extra_keys) {
      std::string cell;
      for (const auto& [k, v] : row.extra)
        if (k == key) cell = v;
      out += "," + escape(cell);
    }
    out += '\n';
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace lsidn
