#include <cstdint>
#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lsidn/checkpoint.hpp"
#include "lsidn/experiments.hpp"
#include "lsidn/synthetic.hpp"

namespace fs = std::filesystem;
using namespace lsidn;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> parts;
  std::size_t at = 0;
  while (at <= csv.size()) {
    const auto comma = csv.find(',', at);
    const auto end = comma == std::string::npos ? csv.size() : comma;
    parts.push_back(csv.substr(at, end - at));
    if (comma == std::string::npos) break;
    at = comma + 1;
  }
  return parts;
}

std::vector<double> parse_doubles(const std::string& csv, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : split_list(csv)) {
    std::size_t used = 0;
    double v = std::stod(part, &used);
    if (used != part.size())
      throw std::runtime_error(what + ": bad number '" + part + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split_list(csv)) {
    std::size_t used = 0;
    unsigned long long v = std::stoull(part, &used);
    if (used != part.size()) throw std::runtime_error("--seeds: bad seed '" + part + "'");
    out.push_back(v);
  }
  return out;
}

ParsedEvents load_events_dir(const std::string& dir) {
  const fs::path events = fs::path(dir) / "events.tsv";
  if (!fs::exists(events))
    throw std::runtime_error(events.string() + " not found (run preprocess first)");
  return parse_events(events.string());
}

void emit(const std::vector<MetricRow>& rows, const std::string& out_dir,
          const std::string& stem) {
  fs::create_directories(out_dir);
  const std::string jsonl = rows_to_jsonl(rows);
  write_text_file((fs::path(out_dir) / (stem + ".jsonl")).string(), jsonl);
  write_text_file((fs::path(out_dir) / (stem + ".csv")).string(), rows_to_csv(rows));
  std::cout << jsonl;
}

struct CheckpointedModel {
  ExperimentConfig cfg;
  Dataset dataset;
  LsidnModel model;
};

CheckpointedModel load_model(const std::string& checkpoint_path, const std::string& data_dir) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  ExperimentConfig cfg = config_from_pairs(ck.config);
  Dataset ds = load_dataset(data_dir, cfg);
  LsidnModel model(cfg, ds.n_items(), ds.n_categories(), ds.vocab.item_category);
  apply_checkpoint(ck, model.all_params());
  return {cfg, std::move(ds), std::move(model)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lsidn: session-aware sequential recommendation experiments"};
  app.require_subcommand(1);

  std::string spec_file, events_file, config_file, data_dir, out_path, checkpoint_file;
  std::string rates_csv = "0,0.1,0.2,0.3", seeds_csv, param_name, values_csv;
  int omega_minutes = 360;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic event log");
  synth->add_option("--spec", spec_file, "Spec file (key = value); defaults when omitted");
  synth->add_option("--out", out_path, "Output TSV path")->required();
  synth->callback([&] {
    SyntheticSpec spec = spec_file.empty() ? SyntheticSpec{} : parse_spec_file(spec_file);
    write_synthetic(spec, out_path);
  });

  auto* preprocess = app.add_subcommand("preprocess", "Validate events and stage a data directory");
  preprocess->add_option("--events", events_file, "Raw event TSV")->required();
  preprocess->add_option("--omega", omega_minutes, "Session gap threshold, minutes")->required();
  preprocess->add_option("--out", data_dir, "Data directory to create")->required();
  preprocess->callback([&] { write_dataset_dir(events_file, data_dir, omega_minutes); });

  auto* train = app.add_subcommand("train", "Train one model");
  train->add_option("--config", config_file, "Experiment config")->required();
  train->add_option("--data", data_dir, "Data directory")->required();
  train->add_option("--out", out_path, "Output directory")->required();
  train->callback([&] {
    ExperimentConfig cfg = parse_config_file(config_file);
    Dataset ds = load_dataset(data_dir, cfg);
    if (cfg.noise_rate > 0.0) {
      Rng noise_rng(derive_seed(cfg.seed, "noise"));
      inject_noise(ds.split.train, cfg.noise_rate, ds, noise_rng);
      inject_noise(ds.split.val, cfg.noise_rate, ds, noise_rng);
    }
    LsidnModel model(cfg, ds.n_items(), ds.n_categories(), ds.vocab.item_category);
    TrainResult res = train_model(model, ds);

    fs::create_directories(out_path);
    save_checkpoint((fs::path(out_path) / "checkpoint.txt").string(),
                    config_to_pairs(cfg), model.all_params());

    const std::string variant = variant_token(cfg.variant);
    std::vector<MetricRow> rows;
    for (const EpochLog& row : res.log) {
      const std::vector<std::pair<std::string, std::string>> extra = {
          {"epoch", std::to_string(row.epoch)}};
      rows.push_back({"train_loss", row.train_loss, "train", variant, cfg.seed, extra});
      rows.push_back({"val_auc", row.val_auc, "val", variant, cfg.seed, extra});
    }
    rows.push_back({"best_val_auc", res.best_val_auc, "val", variant, cfg.seed, {}});
    rows.push_back({"best_epoch", double(res.best_epoch), "val", variant, cfg.seed, {}});
    emit(rows, out_path, "train_log");
  });

  auto* evaluate = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  evaluate->add_option("--checkpoint", checkpoint_file, "Checkpoint file")->required();
  evaluate->add_option("--data", data_dir, "Data directory")->required();
  evaluate->add_option("--out", out_path, "Output directory")->capture_default_str();
  evaluate->callback([&] {
    CheckpointedModel loaded = load_model(checkpoint_file, data_dir);
    const auto pools = build_eval_pools(loaded.dataset, loaded.dataset.split.test,
                                        loaded.cfg.eval_negatives,
                                        derive_seed(loaded.cfg.seed, "test"));
    MetricReport report =
        evaluate_pools(score_pools(loaded.model, loaded.dataset.split.test, pools));
    const std::string variant = variant_token(loaded.cfg.variant);
    std::vector<MetricRow> rows = {
        {"auc", report.auc, "test", variant, loaded.cfg.seed, {}},
        {"gauc", report.gauc, "test", variant, loaded.cfg.seed, {}},
        {"mrr", report.mrr, "test", variant, loaded.cfg.seed, {}},
        {"ndcg@5", report.ndcg5, "test", variant, loaded.cfg.seed, {}},
        {"ndcg@10", report.ndcg10, "test", variant, loaded.cfg.seed, {}},
    };
    emit(rows, out_path.empty() ? "." : out_path, "eval");
  });

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every variant");
  ablate->add_option("--config", config_file, "Experiment config")->required();
  ablate->add_option("--data", data_dir, "Data directory")->required();
  ablate->add_option("--seeds", seeds_csv, "Comma-separated seeds (default: config seed)");
  ablate->add_option("--out", out_path, "Output directory")->capture_default_str();
  ablate->callback([&] {
    ExperimentConfig cfg = parse_config_file(config_file);
    ParsedEvents events = load_events_dir(data_dir);
    const auto seeds = seeds_csv.empty() ? std::vector<std::uint64_t>{cfg.seed}
                                         : parse_seeds(seeds_csv);
    emit(run_ablation(cfg, events, seeds), out_path.empty() ? "." : out_path, "ablation");
  });

  auto* robustness = app.add_subcommand("robustness", "Noise-injection study");
  robustness->add_option("--config", config_file, "Experiment config")->required();
  robustness->add_option("--data", data_dir, "Data directory")->required();
  robustness->add_option("--rates", rates_csv, "Noise rates, first must be 0")
      ->capture_default_str();
  robustness->add_option("--out", out_path, "Output directory")->capture_default_str();
  robustness->callback([&] {
    ExperimentConfig cfg = parse_config_file(config_file);
    ParsedEvents events = load_events_dir(data_dir);
    emit(run_robustness(cfg, events, parse_doubles(rates_csv, "--rates")),
         out_path.empty() ? "." : out_path, "robustness");
  });

  auto* sweep = app.add_subcommand("sweep", "One-dimensional hyperparameter sweep");
  sweep->add_option("--config", config_file, "Experiment config")->required();
  sweep->add_option("--data", data_dir, "Data directory")->required();
  sweep->add_option("--param", param_name, "tau, lambda, or omega")->required();
  sweep->add_option("--values", values_csv, "Comma-separated values")->required();
  sweep->add_option("--out", out_path, "Output directory")->capture_default_str();
  sweep->callback([&] {
    ExperimentConfig cfg = parse_config_file(config_file);
    ParsedEvents events = load_events_dir(data_dir);
    emit(run_sweep(cfg, events, param_name, parse_doubles(values_csv, "--values")),
         out_path.empty() ? "." : out_path, "sweep_" + param_name);
  });

  auto* alpha = app.add_subcommand("analyze-alpha", "Fusion gate statistics by behavior type");
  alpha->add_option("--checkpoint", checkpoint_file, "Checkpoint file")->required();
  alpha->add_option("--data", data_dir, "Data directory")->required();
  alpha->add_option("--out", out_path, "Output directory")->capture_default_str();
  alpha->callback([&] {
    CheckpointedModel loaded = load_model(checkpoint_file, data_dir);
    if (loaded.dataset.split.test.empty())
      throw std::runtime_error("analyze-alpha: empty test split");
    const auto groups = alpha_split_analysis(loaded.model, loaded.dataset.split.test);
    const std::string variant = variant_token(loaded.cfg.variant);
    std::vector<MetricRow> rows;
    for (const AlphaGroup& g : groups) {
      const std::vector<std::pair<std::string, std::string>> extra = {
          {"behavior", behavior_token(g.behavior)},
          {"count", std::to_string(g.count)}};
      rows.push_back({"alpha_mean", g.mean_alpha, "test", variant, loaded.cfg.seed, extra});
    }
    emit(rows, out_path.empty() ? "." : out_path, "alpha");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
