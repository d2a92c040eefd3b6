#include "lsidn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace lsidn {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw std::runtime_error("checkpoint " + path + ": " + what);
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& config,
                     const std::vector<Parameter>& params) {
  std::ofstream out(path);
  if (!out) bad(path, "cannot open for writing");
  out << "lsidn-checkpoint v1\n";
  out << "config " << config.size() << "\n";
  for (const auto& [k, v] : config) out << k << " = " << v << "\n";
  out << "params " << params.size() << "\n";
  for (const auto& p : params) {
    const Node& node = *p.tensor.node();
    out << "param " << p.name << " " << node.rows << " " << node.cols << "\n";
    for (int r = 0; r < node.rows; ++r) {
      for (int c = 0; c < node.cols; ++c) {
        if (c) out << ' ';
        out << format_double(node.value[static_cast<std::size_t>(r) * node.cols + c]);
      }
      out << '\n';
    }
  }
  out << "end\n";
  if (!out) bad(path, "write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad(path, "cannot open");
  std::string line;
  if (!std::getline(in, line) || line != "lsidn-checkpoint v1")
    bad(path, "bad header '" + line + "'");

  Checkpoint ck;
  std::size_t n_config = 0;
  if (!(in >> line >> n_config) || line != "config") bad(path, "missing config section");
  std::getline(in, line);
  for (std::size_t i = 0; i < n_config; ++i) {
    if (!std::getline(in, line)) bad(path, "truncated config section");
    auto eq = line.find(" = ");
    if (eq == std::string::npos) bad(path, "malformed config line '" + line + "'");
    ck.config.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }

  std::size_t n_params = 0;
  if (!(in >> line >> n_params) || line != "params") bad(path, "missing params section");
  for (std::size_t i = 0; i < n_params; ++i) {
    Checkpoint::Entry e;
    if (!(in >> line >> e.name >> e.rows >> e.cols) || line != "param")
      bad(path, "malformed param header");
    if (e.rows <= 0 || e.cols <= 0) bad(path, "bad shape for " + e.name);
    e.values.resize(static_cast<std::size_t>(e.rows) * e.cols);
    for (double& v : e.values)
      if (!(in >> v)) bad(path, "truncated values for " + e.name);
    ck.params.push_back(std::move(e));
  }
  if (!(in >> line) || line != "end") bad(path, "missing end marker");
  return ck;
}

void apply_checkpoint(const Checkpoint& ck, std::vector<Parameter>& params) {
  std::unordered_map<std::string, const Checkpoint::Entry*> by_name;
  for (const auto& e : ck.params) by_name[e.name] = &e;
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint: missing parameter " + p.name);
    const auto& e = *it->second;
    Node& node = *p.tensor.node();
    if (e.rows != node.rows || e.cols != node.cols)
      throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
    node.value = e.values;
    by_name.erase(it);
  }
  if (!by_name.empty())
    throw std::runtime_error("checkpoint: unknown parameter " + by_name.begin()->first);
}

}  // namespace lsidn
