#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lsidn/config.hpp"
#include "lsidn/dataset.hpp"
#include "lsidn/evaluation.hpp"
#include "lsidn/experiments.hpp"
#include "lsidn/report.hpp"
#include "lsidn/synthetic.hpp"
#include "lsidn/trainer.hpp"

using namespace lsidn;

namespace {

namespace fs = std::filesystem;

// per-process scratch directory, wiped lazily by the OS
fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("lsidn_harness_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// small but non-degenerate: every split populated, multiple categories
SyntheticSpec micro_spec() {
  SyntheticSpec spec;
  spec.n_users = 18;
  spec.n_items = 30;
  spec.n_categories = 3;
  spec.sessions_per_user = 4;
  spec.session_len_min = 3;
  spec.session_len_max = 5;
  spec.seed = 21;
  return spec;
}

ExperimentConfig micro_config() {
  ExperimentConfig cfg;
  cfg.d = 4;
  cfg.heads = 2;
  cfg.batch = 64;
  cfg.max_seq_len = 10;
  cfg.b = 2;
  cfg.l = 3;
  cfg.r = 4;
  cfg.lr = 0.01;
  cfg.beta = 0.0;
  cfg.lambda = 0.1;
  cfg.n_scored = 2;
  cfg.eval_negatives = 5;
  cfg.max_epochs = 1;
  cfg.seed = 3;
  return cfg;
}

ParsedEvents micro_events() {
  std::istringstream in(generate_synthetic(micro_spec()));
  return parse_events_stream(in, "micro");
}

ParsedEvents events_from(const std::string& tsv) {
  std::istringstream in(tsv);
  return parse_events_stream(in, "inline");
}

bool rows_equal(const MetricRow& a, const MetricRow& b) {
  return a.metric == b.metric && a.value == b.value && a.split == b.split &&
         a.variant == b.variant && a.seed == b.seed && a.extra == b.extra;
}

}  // namespace

TEST_CASE("config defaults match the published operating point") {
  ExperimentConfig cfg;
  CHECK(cfg.d == 40);
  CHECK(cfg.batch == 500);
  CHECK(cfg.max_seq_len == 50);
  CHECK(cfg.b == 5);
  CHECK(cfg.l == 10);
  CHECK(cfg.r == 30);
  CHECK(cfg.gamma == 0.4);
  CHECK(cfg.lambda == 0.1);
  CHECK(cfg.beta == 0.1);
  CHECK(cfg.tau == 0.2);
  CHECK(cfg.omega_minutes == 360);
  CHECK(cfg.omega_seconds() == 21600);
  CHECK(cfg.n_scored == 2);
  CHECK(cfg.lr == 1e-3);
  CHECK(cfg.patience == 5);
  CHECK(cfg.max_epochs == 50);
  CHECK(cfg.seed == 42);
  CHECK(cfg.variant == Variant::kFull);
  CHECK(cfg.ssl_denominator == SslDenominator::kStandard);
  CHECK(cfg.ssl_similarity == SslSimilarity::kDot);
  CHECK(cfg.augmentation == AugmentKind::kExchange);
  CHECK(cfg.noise_rate == 0.0);
  CHECK(cfg.use_positions);
  CHECK(cfg.heads == 2);
  CHECK(cfg.eval_negatives == 49);
}

TEST_CASE("set_config_key reaches every field") {
  ExperimentConfig cfg;
  set_config_key(cfg, "d", "8");
  set_config_key(cfg, "batch", "16");
  set_config_key(cfg, "max_seq_len", "20");
  set_config_key(cfg, "b", "3");
  set_config_key(cfg, "l", "4");
  set_config_key(cfg, "r", "6");
  set_config_key(cfg, "gamma", "0.25");
  set_config_key(cfg, "lambda", "0.05");
  set_config_key(cfg, "beta", "0.01");
  set_config_key(cfg, "tau", "0.7");
  set_config_key(cfg, "omega_minutes", "60");
  set_config_key(cfg, "n_scored", "3");
  set_config_key(cfg, "lr", "0.002");
  set_config_key(cfg, "patience", "2");
  set_config_key(cfg, "max_epochs", "9");
  set_config_key(cfg, "seed", "123");
  set_config_key(cfg, "variant", "wo_ld");
  set_config_key(cfg, "ssl_denominator", "literal");
  set_config_key(cfg, "ssl_similarity", "cosine");
  set_config_key(cfg, "augmentation", "crop");
  set_config_key(cfg, "noise_rate", "0.2");
  set_config_key(cfg, "use_positions", "false");
  set_config_key(cfg, "heads", "4");
  set_config_key(cfg, "eval_negatives", "19");

  CHECK(cfg.d == 8);
  CHECK(cfg.batch == 16);
  CHECK(cfg.max_seq_len == 20);
  CHECK(cfg.b == 3);
  CHECK(cfg.l == 4);
  CHECK(cfg.r == 6);
  CHECK(cfg.gamma == 0.25);
  CHECK(cfg.lambda == 0.05);
  CHECK(cfg.beta == 0.01);
  CHECK(cfg.tau == 0.7);
  CHECK(cfg.omega_minutes == 60);
  CHECK(cfg.n_scored == 3);
  CHECK(cfg.lr == 0.002);
  CHECK(cfg.patience == 2);
  CHECK(cfg.max_epochs == 9);
  CHECK(cfg.seed == 123);
  CHECK(cfg.variant == Variant::kWoLd);
  CHECK(cfg.ssl_denominator == SslDenominator::kLiteral);
  CHECK(cfg.ssl_similarity == SslSimilarity::kCosine);
  CHECK(cfg.augmentation == AugmentKind::kCrop);
  CHECK(cfg.noise_rate == 0.2);
  CHECK_FALSE(cfg.use_positions);
  CHECK(cfg.heads == 4);
  CHECK(cfg.eval_negatives == 19);

  SUBCASE("rejects unknown keys and unparsable values") {
    CHECK_THROWS_WITH_AS(set_config_key(cfg, "dd", "8"),
                         doctest::Contains("unknown key"), std::runtime_error);
    CHECK_THROWS_WITH_AS(set_config_key(cfg, "d", "8x"),
                         doctest::Contains("bad integer"), std::runtime_error);
    CHECK_THROWS_WITH_AS(set_config_key(cfg, "tau", "warm"),
                         doctest::Contains("bad real"), std::runtime_error);
    CHECK_THROWS_WITH_AS(set_config_key(cfg, "tau", "inf"),
                         doctest::Contains("bad real"), std::runtime_error);
    CHECK_THROWS_WITH_AS(set_config_key(cfg, "use_positions", "1"),
                         doctest::Contains("bad boolean"), std::runtime_error);
    CHECK_THROWS_WITH_AS(set_config_key(cfg, "variant", "wo_xy"),
                         doctest::Contains("unknown variant"), std::runtime_error);
    CHECK_THROWS_WITH_AS(set_config_key(cfg, "ssl_denominator", "both"),
                         doctest::Contains("unknown ssl_denominator"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(set_config_key(cfg, "augmentation", "flip"),
                         doctest::Contains("unknown augmentation"),
                         std::runtime_error);
  }
}

TEST_CASE("parse_config_lines handles comments and reports line numbers") {
  const std::vector<std::string> lines = {
      "# experiment",
      "",
      "  d = 8   # narrow",
      "heads=2",
      "tau = 0.5",
  };
  ExperimentConfig cfg = parse_config_lines(lines, "inline");
  CHECK(cfg.d == 8);
  CHECK(cfg.heads == 2);
  CHECK(cfg.tau == 0.5);
  CHECK(cfg.batch == 500);  // untouched default

  CHECK_THROWS_WITH_AS(parse_config_lines({"d 8"}, "inline"),
                       doctest::Contains("inline:1"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_config_lines({"", "d ="}, "inline"),
                       doctest::Contains("inline:2"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_config_lines({"d = 8", "dd = 9"}, "inline"),
                       doctest::Contains("inline:2"), std::runtime_error);
  // parsed configs are validated as a whole
  CHECK_THROWS_WITH_AS(parse_config_lines({"d = 7", "heads = 2"}, "inline"),
                       doctest::Contains("divisible"), std::runtime_error);
}

TEST_CASE("parse_config_file matches in-memory parsing") {
  const fs::path path = scratch_dir() / "exp.cfg";
  write_text_file(path.string(), "d = 8\nheads = 2\nlambda = 0 # off\n");
  ExperimentConfig cfg = parse_config_file(path.string());
  CHECK(cfg.d == 8);
  CHECK(cfg.lambda == 0.0);
  CHECK_THROWS_WITH_AS(parse_config_file((scratch_dir() / "absent.cfg").string()),
                       doctest::Contains("cannot open"), std::runtime_error);
}

TEST_CASE("validate_config guards the awkward combinations") {
  auto broken = [](auto mutate) {
    ExperimentConfig cfg;
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.d = 0; })),
                  std::runtime_error);
  CHECK_THROWS_WITH_AS(
      validate_config(broken([](auto& c) { c.d = 6; c.heads = 4; })),
      doctest::Contains("divisible"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      validate_config(broken([](auto& c) { c.l = 60; })),
      doctest::Contains("max_seq_len"), std::runtime_error);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.tau = 0.0; })),
                  std::runtime_error);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.gamma = 1.5; })),
                  std::runtime_error);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.lambda = -0.1; })),
                  std::runtime_error);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.lr = 0.0; })),
                  std::runtime_error);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.n_scored = 0; })),
                  std::runtime_error);
}

TEST_CASE("config round-trips through its pair form") {
  ExperimentConfig cfg;
  cfg.d = 12;
  cfg.batch = 7;
  cfg.max_seq_len = 31;
  cfg.b = 4;
  cfg.l = 9;
  cfg.r = 11;
  cfg.gamma = 0.125;
  cfg.lambda = 0.3;
  cfg.beta = 0.07;
  cfg.tau = 1.25;
  cfg.omega_minutes = 45;
  cfg.n_scored = 4;
  cfg.lr = 0.0005;
  cfg.patience = 3;
  cfg.max_epochs = 17;
  cfg.seed = 9876543210ULL;
  cfg.variant = Variant::kWoRi;
  cfg.ssl_denominator = SslDenominator::kLiteral;
  cfg.ssl_similarity = SslSimilarity::kCosine;
  cfg.augmentation = AugmentKind::kReorder;
  cfg.noise_rate = 0.1;
  cfg.use_positions = false;
  cfg.heads = 3;
  cfg.eval_negatives = 13;

  const auto pairs = config_to_pairs(cfg);
  CHECK(pairs.size() == 24);
  CHECK(pairs.front().first == "d");
  const ExperimentConfig back = config_from_pairs(pairs);
  CHECK(config_to_pairs(back) == pairs);
  CHECK(back.seed == cfg.seed);
  CHECK(back.variant == cfg.variant);
  CHECK(back.lr == cfg.lr);
  CHECK_FALSE(back.use_positions);
}

TEST_CASE("synthetic generation is deterministic and structured") {
  const SyntheticSpec spec = micro_spec();
  const std::string a = generate_synthetic(spec);
  CHECK(a == generate_synthetic(spec));

  SyntheticSpec other = spec;
  other.seed = 22;
  CHECK(a != generate_synthetic(other));

  ParsedEvents parsed = events_from(a);
  CHECK(parsed.sequences.size() == std::size_t(spec.n_users));

  SUBCASE("planted sessions are recovered by any omega inside the gap window") {
    for (std::int64_t omega :
         {spec.intra_gap_max_seconds + 1, std::int64_t(21600), spec.inter_gap_seconds}) {
      for (const Sequence& seq : parsed.sequences) {
        const auto sessions = sess_div(seq, omega);
        REQUIRE(sessions.size() == std::size_t(spec.sessions_per_user));
        for (const Session& s : sessions) {
          CHECK(s.events.size() >= std::size_t(spec.session_len_min));
          CHECK(s.events.size() <= std::size_t(spec.session_len_max));
        }
      }
    }
  }

  SUBCASE("item-to-category assignment is exact, so the vocab map is too") {
    for (const Sequence& seq : parsed.sequences)
      for (const Event& ev : seq.events)
        CHECK(parsed.vocab.item_category[std::size_t(ev.item)] == ev.category);
  }

  SUBCASE("full preference strength pins every event to one category per user") {
    SyntheticSpec pinned = spec;
    pinned.long_pref_strength = 1.0;
    ParsedEvents pp = events_from(generate_synthetic(pinned));
    for (const Sequence& seq : pp.sequences) {
      REQUIRE(!seq.events.empty());
      for (const Event& ev : seq.events)
        CHECK(ev.category == seq.events.front().category);
    }
  }
}

TEST_CASE("synthetic spec validation and key parsing") {
  CHECK_THROWS_AS(validate_spec([] {
                    SyntheticSpec s;
                    s.n_categories = 1;
                    return s;
                  }()),
                  std::invalid_argument);
  CHECK_THROWS_WITH_AS(validate_spec([] {
                         SyntheticSpec s;
                         s.inter_gap_seconds = s.intra_gap_max_seconds;
                         return s;
                       }()),
                       doctest::Contains("inter_gap_seconds"), std::invalid_argument);
  CHECK_THROWS_AS(validate_spec([] {
                    SyntheticSpec s;
                    s.session_len_max = s.session_len_min - 1;
                    return s;
                  }()),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_spec([] {
                    SyntheticSpec s;
                    s.long_pref_strength = 1.5;
                    return s;
                  }()),
                  std::invalid_argument);

  SyntheticSpec spec;
  set_spec_key(spec, "n_users", "11");
  set_spec_key(spec, "inter_gap_seconds", "9000");
  set_spec_key(spec, "long_pref_strength", "0.9");
  set_spec_key(spec, "seed", "77");
  CHECK(spec.n_users == 11);
  CHECK(spec.inter_gap_seconds == 9000);
  CHECK(spec.long_pref_strength == 0.9);
  CHECK(spec.seed == 77);
  CHECK_THROWS_WITH_AS(set_spec_key(spec, "users", "5"),
                       doctest::Contains("unknown key"), std::runtime_error);
  CHECK_THROWS_WITH_AS(set_spec_key(spec, "n_users", "5.5"),
                       doctest::Contains("bad integer"), std::runtime_error);

  const fs::path path = scratch_dir() / "gen.spec";
  write_text_file(path.string(), "# tiny\nn_users = 11\n\nseed = 77\n");
  SyntheticSpec from_file = parse_spec_file(path.string());
  CHECK(from_file.n_users == 11);
  CHECK(from_file.seed == 77);
  CHECK(from_file.n_items == 500);  // untouched default

  write_text_file(path.string(), "n_users = 11\nn_users 12\n");
  CHECK_THROWS_WITH_AS(parse_spec_file(path.string()), doctest::Contains(":2"),
                       std::runtime_error);

  const fs::path events = scratch_dir() / "gen_events.tsv";
  write_synthetic(micro_spec(), events.string());
  std::ifstream in(events.string(), std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  CHECK(buffer.str() == generate_synthetic(micro_spec()));
}

TEST_CASE("build_dataset routes sessions into splits by recency") {
  // u0: 4 planted sessions of 2 events; u1: 2 sessions; u2: 1 session
  const std::string tsv =
      "u0\ti0\tc0\tclick\t1000\n"
      "u0\ti1\tc1\tclick\t1060\n"
      "u0\ti2\tc0\tclick\t100000\n"
      "u0\ti3\tc1\tclick\t100060\n"
      "u0\ti4\tc0\tclick\t200000\n"
      "u0\ti5\tc1\tclick\t200060\n"
      "u0\ti6\tc0\tclick\t300000\n"
      "u0\ti7\tc1\tclick\t300060\n"
      "u1\ti0\tc0\tclick\t1000\n"
      "u1\ti2\tc0\tclick\t1060\n"
      "u1\ti3\tc1\tclick\t100000\n"
      "u1\ti4\tc0\tclick\t100060\n"
      "u2\ti5\tc1\tclick\t1000\n"
      "u2\ti6\tc0\tclick\t1060\n";
  ExperimentConfig cfg = micro_config();
  cfg.omega_minutes = 360;  // 21600 s splits the 100000-second jumps

  Dataset ds = build_dataset(events_from(tsv), cfg);
  CHECK(ds.n_users() == 3);
  CHECK(ds.n_items() == 8);
  CHECK(ds.user_sessions[0].size() == 4);
  CHECK(ds.user_sessions[1].size() == 2);
  CHECK(ds.user_sessions[2].size() == 1);

  // u0: 7 targets (first event has no predecessor); last session -> test,
  // second-last -> val. u1: 3 targets, no val at two sessions. u2: 1 target.
  CHECK(ds.split.test.size() == 4);   // u0 {i6,i7} + u1 {i3,i4}
  CHECK(ds.split.val.size() == 2);    // u0 {i4,i5}
  CHECK(ds.split.train.size() == 5);  // u0 {i1,i2,i3} + u1 {i2} + u2 {i6}

  for (const TrainingInstance& inst : ds.split.test) CHECK_FALSE(inst.has_future);
  for (const TrainingInstance& inst : ds.split.val) {
    CHECK_FALSE(inst.has_future);
    CHECK(inst.future.events.empty());
  }

  std::set<int> train_users, test_users;
  for (const auto& inst : ds.split.train) train_users.insert(inst.user);
  for (const auto& inst : ds.split.test) test_users.insert(inst.user);
  CHECK((train_users == std::set<int>{0, 1, 2}));
  CHECK((test_users == std::set<int>{0, 1}));

  CHECK(ds.user_seen[0].size() == 8);
  CHECK((ds.user_seen[2] == std::unordered_set<int>{5, 6}));

  SUBCASE("hygiene audits pass on a clean build") {
    CHECK_NOTHROW(audit_split_hygiene(ds));
    CHECK_NOTHROW(audit_future_hygiene(ds.split));
  }

  SUBCASE("a test instance leaked into train trips the split audit") {
    Dataset leaky = ds;
    leaky.split.train.push_back(leaky.split.test.front());
    CHECK_THROWS_AS(audit_split_hygiene(leaky), std::logic_error);
  }

  SUBCASE("an evaluation instance with a future tail trips the future audit") {
    Dataset leaky = ds;
    leaky.split.val.front().has_future = true;
    CHECK_THROWS_AS(audit_future_hygiene(leaky.split), std::logic_error);
  }
}

TEST_CASE("build_eval_pools draws distinct unseen negatives deterministically") {
  ExperimentConfig cfg = micro_config();
  Dataset ds = build_dataset(micro_events(), cfg);
  REQUIRE(!ds.split.test.empty());

  const auto pools = build_eval_pools(ds, ds.split.test, 5, 99);
  REQUIRE(pools.size() == ds.split.test.size());
  for (std::size_t i = 0; i < pools.size(); ++i) {
    const auto& pool = pools[i];
    REQUIRE(pool.size() == 6);
    CHECK(pool[0] == ds.split.test[i].target.item);
    const auto& seen = ds.user_seen[std::size_t(ds.split.test[i].user)];
    std::set<int> negs(pool.begin() + 1, pool.end());
    CHECK(negs.size() == 5);  // distinct
    for (int item : negs) {
      CHECK(item >= 0);
      CHECK(item < ds.n_items());
      CHECK(seen.count(item) == 0);
    }
  }
  CHECK(pools == build_eval_pools(ds, ds.split.test, 5, 99));
  CHECK(pools != build_eval_pools(ds, ds.split.test, 5, 100));

  SUBCASE("a saturated user cannot fill a pool") {
    const std::string tsv =
        "u0\ti0\tc0\tclick\t1000\n"
        "u0\ti1\tc1\tclick\t1060\n"
        "u0\ti2\tc0\tclick\t1120\n";
    Dataset tiny = build_dataset(events_from(tsv), cfg);
    REQUIRE(!tiny.split.train.empty());
    CHECK_THROWS_WITH_AS(build_eval_pools(tiny, tiny.split.train, 5, 1),
                         doctest::Contains("too few unseen"), std::runtime_error);
  }
}

TEST_CASE("inject_noise appends mislabeled unseen-item clones") {
  ExperimentConfig cfg = micro_config();
  Dataset ds = build_dataset(micro_events(), cfg);
  const auto original = ds.split.train;
  REQUIRE(original.size() >= 10);

  Rng rng(5);
  inject_noise(ds.split.train, 0.3, ds, rng);
  const std::size_t expected = std::size_t(0.3 * double(original.size()));
  REQUIRE(ds.split.train.size() == original.size() + expected);
  CHECK(expected > 0);

  for (std::size_t i = 0; i < original.size(); ++i)  // originals untouched
    CHECK(ds.split.train[i].target.item == original[i].target.item);

  for (std::size_t i = original.size(); i < ds.split.train.size(); ++i) {
    const TrainingInstance& fake = ds.split.train[i];
    CHECK(fake.label == 1);
    CHECK(ds.user_seen[std::size_t(fake.user)].count(fake.target.item) == 0);
    CHECK(fake.target.category ==
          ds.vocab.item_category[std::size_t(fake.target.item)]);
  }

  SUBCASE("rate zero leaves the split alone") {
    auto copy = original;
    Rng r2(5);
    inject_noise(copy, 0.0, ds, r2);
    CHECK(copy.size() == original.size());
  }

  SUBCASE("rates outside [0, 0.5] are rejected") {
    auto copy = original;
    Rng r2(5);
    CHECK_THROWS_AS(inject_noise(copy, 0.6, ds, r2), std::invalid_argument);
    CHECK_THROWS_AS(inject_noise(copy, -0.1, ds, r2), std::invalid_argument);
  }

  SUBCASE("a user who has seen the whole catalogue cannot be noised") {
    const std::string tsv =
        "u0\ti0\tc0\tclick\t1000\n"
        "u0\ti1\tc1\tclick\t1060\n"
        "u0\ti2\tc0\tclick\t1120\n";
    Dataset full_view = build_dataset(events_from(tsv), cfg);
    Rng r2(5);
    CHECK_THROWS_WITH_AS(inject_noise(full_view.split.train, 0.5, full_view, r2),
                         doctest::Contains("every item"), std::runtime_error);
  }
}

TEST_CASE("train_model logs per-epoch progress and keeps the best weights") {
  ExperimentConfig cfg = micro_config();
  cfg.max_epochs = 3;
  Dataset ds = build_dataset(micro_events(), cfg);
  LsidnModel model(cfg, ds.n_items(), ds.n_categories(), ds.vocab.item_category);

  TrainResult result = train_model(model, ds);
  REQUIRE(result.epochs_run == 3);  // patience 5 cannot trigger in 3 epochs
  REQUIRE(result.log.size() == 3);
  double best = -1.0;
  for (std::size_t i = 0; i < result.log.size(); ++i) {
    const EpochLog& row = result.log[i];
    CHECK(row.epoch == int(i) + 1);
    CHECK(std::isfinite(row.train_loss));
    CHECK(row.main > 0.0);
    CHECK(row.reg > 0.0);  // the raw squared-norm sum, reported even at beta 0
    CHECK(row.val_auc >= 0.0);
    CHECK(row.val_auc <= 1.0);
    CHECK(row.improved == (row.val_auc > best));
    best = std::max(best, row.val_auc);
  }
  CHECK(result.best_val_auc == best);
  CHECK(result.log[std::size_t(result.best_epoch) - 1].val_auc == best);

  // the model returns holding the best-epoch parameters: rescoring the
  // validation pools reproduces best_val_auc exactly
  const auto val_pools = build_eval_pools(ds, ds.split.val, cfg.eval_negatives,
                                          derive_seed(cfg.seed, "val"));
  CHECK(auc(score_pools(model, ds.split.val, val_pools)) == result.best_val_auc);
}

TEST_CASE("a zero ssl weight and the discarded-ssl variant train identically") {
  ExperimentConfig a = micro_config();
  a.max_epochs = 2;
  a.lambda = 0.0;
  ExperimentConfig b = a;
  b.lambda = 0.1;
  b.variant = Variant::kWoSd;

  Dataset ds_a = build_dataset(micro_events(), a);
  Dataset ds_b = build_dataset(micro_events(), b);
  LsidnModel ma(a, ds_a.n_items(), ds_a.n_categories(), ds_a.vocab.item_category);
  LsidnModel mb(b, ds_b.n_items(), ds_b.n_categories(), ds_b.vocab.item_category);

  TrainResult ra = train_model(ma, ds_a);
  TrainResult rb = train_model(mb, ds_b);
  REQUIRE(ra.log.size() == rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    CHECK(ra.log[i].train_loss == rb.log[i].train_loss);
    CHECK(ra.log[i].val_auc == rb.log[i].val_auc);
  }
  const auto& pa = ma.all_params();
  const auto& pb = mb.all_params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i].tensor.values() == pb[i].tensor.values());
}

TEST_CASE("training reduces the loss on most seeds") {
  int improved = 0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    ExperimentConfig cfg = micro_config();
    cfg.max_epochs = 3;
    cfg.seed = seed;
    Dataset ds = build_dataset(micro_events(), cfg);
    LsidnModel model(cfg, ds.n_items(), ds.n_categories(), ds.vocab.item_category);
    TrainResult result = train_model(model, ds);
    if (result.log.back().train_loss < result.log.front().train_loss) ++improved;
  }
  CHECK(improved >= 2);
}

TEST_CASE("train_model refuses empty splits") {
  ExperimentConfig cfg = micro_config();

  // two sessions per user: test populated, val empty
  const std::string two_sessions =
      "u0\ti0\tc0\tclick\t1000\n"
      "u0\ti1\tc1\tclick\t1060\n"
      "u0\ti2\tc0\tclick\t100000\n"
      "u0\ti3\tc1\tclick\t100060\n";
  Dataset no_val = build_dataset(events_from(two_sessions), cfg);
  REQUIRE(no_val.split.val.empty());
  REQUIRE(!no_val.split.train.empty());
  LsidnModel m1(cfg, no_val.n_items(), no_val.n_categories(),
                no_val.vocab.item_category);
  CHECK_THROWS_WITH_AS(train_model(m1, no_val), doctest::Contains("validation"),
                       std::runtime_error);

  Dataset no_train = build_dataset(events_from("u0\ti0\tc0\tclick\t1000\n"), cfg);
  REQUIRE(no_train.split.train.empty());
  LsidnModel m2(cfg, no_train.n_items(), no_train.n_categories(),
                no_train.vocab.item_category);
  CHECK_THROWS_WITH_AS(train_model(m2, no_train), doctest::Contains("train"),
                       std::runtime_error);
}

TEST_CASE("run_single emits the standard metric rows deterministically") {
  const ExperimentConfig cfg = micro_config();
  const ParsedEvents events = micro_events();
  RunOutput out = run_single(cfg, events);

  REQUIRE(out.rows.size() == 6);
  CHECK(out.rows[0].metric == "auc");
  CHECK(out.rows[0].split == "val");
  CHECK(out.rows[0].value == out.training.best_val_auc);
  const std::vector<std::string> metrics = {"auc",    "auc",    "gauc",
                                            "mrr",    "ndcg@5", "ndcg@10"};
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    CHECK(out.rows[i].metric == metrics[i]);
    CHECK(out.rows[i].variant == "full");
    CHECK(out.rows[i].seed == cfg.seed);
    CHECK(out.rows[i].extra.empty());
    if (i > 0) CHECK(out.rows[i].split == "test");
    CHECK(out.rows[i].value >= 0.0);
    CHECK(out.rows[i].value <= 1.0);
  }
  CHECK(out.rows[1].value == out.test.auc);
  CHECK(out.rows[2].value == out.test.gauc);
  CHECK(out.test.pools > 0);
  CHECK(out.training.epochs_run == 1);

  RunOutput again = run_single(cfg, events);
  CHECK(rows_to_jsonl(out.rows) == rows_to_jsonl(again.rows));

  ExperimentConfig noisy = cfg;
  noisy.noise_rate = 0.3;
  RunOutput contaminated = run_single(noisy, events);  // exercises injection
  CHECK(contaminated.rows.size() == 6);
}

TEST_CASE("run_sweep decorates run_single rows with the swept value") {
  ExperimentConfig base = micro_config();
  const ParsedEvents events = micro_events();

  const auto rows = run_sweep(base, events, "tau", {0.5});
  ExperimentConfig manual = base;
  manual.tau = 0.5;
  const RunOutput single = run_single(manual, events);
  REQUIRE(rows.size() == single.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    MetricRow expect = single.rows[i];
    expect.extra.emplace_back("tau", "0.5");
    CHECK(rows_equal(rows[i], expect));
  }

  const auto lambda_rows = run_sweep(base, events, "lambda", {0.0, 0.1});
  CHECK(lambda_rows.size() == 12);
  CHECK((lambda_rows[0].extra == decltype(lambda_rows[0].extra){{"lambda", "0"}}));

  const auto omega_rows = run_sweep(base, events, "omega", {60.0});
  CHECK(omega_rows.size() == 6);

  CHECK_THROWS_AS(run_sweep(base, events, "tau", {}), std::invalid_argument);
  CHECK_THROWS_AS(run_sweep(base, events, "omega", {90.5}), std::invalid_argument);
  CHECK_THROWS_WITH_AS(run_sweep(base, events, "batch", {16.0}),
                       doctest::Contains("unknown parameter"),
                       std::invalid_argument);
}

TEST_CASE("run_ablation covers every variant once per seed") {
  const ExperimentConfig base = micro_config();
  const ParsedEvents events = micro_events();
  const auto rows = run_ablation(base, events, {3});
  REQUIRE(rows.size() == 7 * 6);

  std::vector<std::string> order;
  for (std::size_t i = 0; i < rows.size(); i += 6) order.push_back(rows[i].variant);
  CHECK((order == std::vector<std::string>{"full", "wo_ld", "wo_sd", "wo_ri",
                                           "wo_ci", "wo_li", "wo_si"}));
  for (const MetricRow& row : rows) CHECK(row.seed == 3);

  CHECK_THROWS_AS(run_ablation(base, events, {}), std::invalid_argument);
}

TEST_CASE("run_robustness reports drop rates against the clean baseline") {
  const ExperimentConfig base = micro_config();
  const ParsedEvents events = micro_events();
  const auto rows = run_robustness(base, events, {0.0, 0.3});

  // 5 cells x 2 rates x (auc, gauc, auc_drop)
  REQUIRE(rows.size() == 30);
  std::set<std::pair<std::string, std::string>> cells;
  for (const MetricRow& row : rows) {
    REQUIRE(row.extra.size() == 2);
    CHECK(row.extra[0].first == "rate");
    CHECK(row.extra[1].first == "augmentation");
    cells.insert({row.variant, row.extra[1].second});
    if (row.metric == "auc_drop" && row.extra[0].second == "0")
      CHECK(row.value == 0.0);
  }
  CHECK((cells == std::set<std::pair<std::string, std::string>>{
                      {"full", "exchange"},
                      {"full", "crop"},
                      {"full", "mask"},
                      {"full", "reorder"},
                      {"wo_sd", "exchange"}}));

  // drop rate is (baseline - noisy) / baseline over the cell's own baseline
  for (std::size_t i = 0; i < rows.size(); i += 6) {
    const double base_auc = rows[i].value;
    const double noisy_auc = rows[i + 3].value;
    CHECK(rows[i + 5].metric == "auc_drop");
    CHECK(rows[i + 5].value ==
          doctest::Approx((base_auc - noisy_auc) / base_auc).epsilon(1e-12));
  }

  CHECK_THROWS_AS(run_robustness(base, events, {}), std::invalid_argument);
  CHECK_THROWS_AS(run_robustness(base, events, {0.1, 0.3}), std::invalid_argument);
}

TEST_CASE("metric rows render to stable jsonl and csv") {
  std::vector<MetricRow> rows;
  rows.push_back({"auc", 0.5, "test", "full", 42, {}});
  rows.push_back({"auc_drop", 0.125, "test", "wo_sd", 7, {{"rate", "0.3"}}});
  rows.push_back({"auc", 1.0, "test", "full", 42, {{"tau", "0.2"}, {"note", "a,b"}}});

  CHECK(rows_to_jsonl(rows) ==
        "{\"metric\":\"auc\",\"value\":0.5,\"split\":\"test\",\"variant\":\"full\","
        "\"seed\":42}\n"
        "{\"metric\":\"auc_drop\",\"value\":0.125,\"split\":\"test\",\"variant\":"
        "\"wo_sd\",\"seed\":7,\"rate\":\"0.3\"}\n"
        "{\"metric\":\"auc\",\"value\":1.0,\"split\":\"test\",\"variant\":\"full\","
        "\"seed\":42,\"tau\":\"0.2\",\"note\":\"a,b\"}\n");

  // extra columns appear in first-appearance order; commas force quoting
  CHECK(rows_to_csv(rows) ==
        "metric,value,split,variant,seed,rate,tau,note\n"
        "auc,0.5,test,full,42,,,\n"
        "auc_drop,0.125,test,wo_sd,7,0.3,,\n"
        "auc,1.0,test,full,42,,0.2,\"a,b\"\n");

  const std::string quoted = rows_to_csv({{"m\"x", 0.0, "s", "v", 1, {}}});
  CHECK(quoted == "metric,value,split,variant,seed\n\"m\"\"x\",0.0,s,v,1\n");

  SUBCASE("write_text_file round-trips and reports unwritable paths") {
    const fs::path path = scratch_dir() / "report.jsonl";
    write_text_file(path.string(), rows_to_jsonl(rows));
    std::ifstream in(path.string(), std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    CHECK(buffer.str() == rows_to_jsonl(rows));
    CHECK_THROWS_WITH_AS(
        write_text_file((scratch_dir() / "absent" / "x.txt").string(), "y"),
        doctest::Contains("cannot open"), std::runtime_error);
  }
}

TEST_CASE("preprocess directories round-trip through load_dataset") {
  const fs::path events_path = scratch_dir() / "pre_events.tsv";
  write_synthetic(micro_spec(), events_path.string());
  const fs::path dir = scratch_dir() / "pre_out";
  write_dataset_dir(events_path.string(), dir.string(), 360);

  CHECK(fs::exists(dir / "events.tsv"));
  std::ifstream meta((dir / "meta.txt").string());
  REQUIRE(meta.good());
  std::string meta_text((std::istreambuf_iterator<char>(meta)),
                        std::istreambuf_iterator<char>());
  CHECK(meta_text.find("omega_minutes = 360") != std::string::npos);
  CHECK(meta_text.find("users = 18") != std::string::npos);

  const ExperimentConfig cfg = micro_config();
  Dataset loaded = load_dataset(dir.string(), cfg);
  Dataset direct = build_dataset(micro_events(), cfg);
  CHECK(loaded.split.train.size() == direct.split.train.size());
  CHECK(loaded.split.val.size() == direct.split.val.size());
  CHECK(loaded.split.test.size() == direct.split.test.size());
  CHECK(loaded.vocab.items == direct.vocab.items);

  CHECK_THROWS_WITH_AS(load_dataset((scratch_dir() / "nowhere").string(), cfg),
                       doctest::Contains("not found"), std::runtime_error);
}
