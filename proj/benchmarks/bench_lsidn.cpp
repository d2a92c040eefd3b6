#include <benchmark/benchmark.h>

#include <sstream>

#include "lsidn/dataset.hpp"
#include "lsidn/model.hpp"
#include "lsidn/optimizer.hpp"
#include "lsidn/synthetic.hpp"

namespace {

using namespace lsidn;

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor a = Tensor::uniform(n, n, -1.0, 1.0, rng);
  Tensor b = Tensor::uniform(n, n, -1.0, 1.0, rng);
  for (auto _ : state) {
    NoGradGuard no_grad;
    benchmark::DoNotOptimize(matmul(a, b));
  }
}
BENCHMARK(BM_Matmul)->Arg(40)->Arg(128);

void BM_SessionAttention(benchmark::State& state) {
  const int blocks = static_cast<int>(state.range(0));
  const int len = 10, d = 40;
  Rng rng(2);
  Tensor q = Tensor::uniform(blocks * len, d, -1.0, 1.0, rng);
  Tensor k = Tensor::uniform(blocks * len, d, -1.0, 1.0, rng);
  Tensor v = Tensor::uniform(blocks * len, d, -1.0, 1.0, rng);
  std::vector<double> mask(static_cast<std::size_t>(blocks) * len, 1.0);
  for (auto _ : state) {
    NoGradGuard no_grad;
    benchmark::DoNotOptimize(session_attention(q, k, v, mask, len, 1.0 / 6.32));
  }
}
BENCHMARK(BM_SessionAttention)->Arg(64)->Arg(512);

struct TrainFixture {
  ExperimentConfig cfg;
  Dataset ds;
  LsidnModel model;

  static TrainFixture make() {
    SyntheticSpec spec;
    spec.n_users = 40;
    spec.n_items = 200;
    spec.n_categories = 10;
    spec.seed = 3;
    std::istringstream tsv(generate_synthetic(spec));
    ParsedEvents events = parse_events_stream(tsv, "bench");

    ExperimentConfig cfg;
    cfg.d = 40;
    cfg.batch = 128;
    cfg.seed = 3;
    Dataset ds = build_dataset(events, cfg);
    LsidnModel model(cfg, ds.n_items(), ds.n_categories(), ds.vocab.item_category);
    return {cfg, std::move(ds), std::move(model)};
  }
};

void BM_ForwardBatch(benchmark::State& state) {
  auto fx = TrainFixture::make();
  std::vector<TrainingInstance> batch(fx.ds.split.train.begin(),
                                      fx.ds.split.train.begin() + 128);
  Rng neg_rng(7);
  sample_in_batch_negatives(batch, 2, neg_rng);
  Rng aug_rng(8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fx.model.forward_batch(batch, aug_rng));
  }
}
BENCHMARK(BM_ForwardBatch);

void BM_TrainStep(benchmark::State& state) {
  auto fx = TrainFixture::make();
  std::vector<TrainingInstance> batch(fx.ds.split.train.begin(),
                                      fx.ds.split.train.begin() + 128);
  Rng neg_rng(7);
  sample_in_batch_negatives(batch, 2, neg_rng);
  Rng aug_rng(8);
  std::vector<Parameter> active = fx.model.active_params();
  Adam opt(&active, 1e-3);
  for (auto _ : state) {
    ForwardResult fwd = fx.model.forward_batch(batch, aug_rng);
    backward(fwd.total);
    opt.step();
  }
}
BENCHMARK(BM_TrainStep);

void BM_ScoreCandidates(benchmark::State& state) {
  auto fx = TrainFixture::make();
  std::vector<TrainingInstance> insts(fx.ds.split.test.begin(),
                                      fx.ds.split.test.begin() + 64);
  const auto pools = build_eval_pools(fx.ds, insts, 49, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fx.model.score_candidates(insts, pools));
  }
}
BENCHMARK(BM_ScoreCandidates);

}  // namespace

BENCHMARK_MAIN();
