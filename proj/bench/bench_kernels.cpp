// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "cir/judgments.hpp"
#include "cir/kernels.hpp"
#include "cir/rng.hpp"

namespace {

using namespace cir;

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(standard_normal(rng));
  return v;
}

template <bool kParallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_floats(n * n, 1), b = random_floats(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (kParallel) {
      kernels::gemm_parallel<float>(false, false, n, n, n, a.data(), b.data(), 0.0f, c.data());
    } else {
      kernels::gemm_serial<float>(false, false, n, n, n, a.data(), b.data(), 0.0f, c.data());
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256)->Arg(512)->UseRealTime();
BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Arg(64)->Arg(256)->Arg(512)->UseRealTime();

// Queries against a catalog, d = 64.
template <bool kParallel>
void BM_DotScores(benchmark::State& state) {
  const auto nc = static_cast<std::size_t>(state.range(0));
  const std::size_t nq = 256, d = 64;
  const auto q = random_floats(nq * d, 3), c = random_floats(nc * d, 4);
  std::vector<float> s(nq * nc);
  for (auto _ : state) {
    if constexpr (kParallel) {
      kernels::dot_scores_parallel<float>(nq, nc, d, q.data(), c.data(), s.data());
    } else {
      kernels::dot_scores_serial<float>(nq, nc, d, q.data(), c.data(), s.data());
    }
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(nq * nc));
}
BENCHMARK(BM_DotScores<false>)->Name("dot_scores/serial")->Arg(1024)->Arg(16384)->UseRealTime();
BENCHMARK(BM_DotScores<true>)->Name("dot_scores/parallel")->Arg(1024)->Arg(16384)->UseRealTime();

// CFQ-style mAP over many judged queries.
template <Exec kExec>
void BM_MapCfq(benchmark::State& state) {
  const auto queries = static_cast<std::size_t>(state.range(0));
  const std::size_t items = 200;
  std::vector<std::string> ids;
  for (std::size_t c = 0; c < items; ++c) ids.push_back("c" + std::to_string(c));
  std::vector<ScoreMatrix::RowKey> rows;
  std::vector<JudgmentRecord> records;
  Rng rng(5);
  for (std::size_t q = 0; q < queries; ++q) {
    const std::string qid = "q" + std::to_string(q);
    for (std::size_t p = 0; p < 4; ++p) rows.push_back({qid, p});
    for (const auto& c : ids) {
      std::array<int, 3> a{}, r{};
      for (auto& x : a) x = static_cast<int>(uniform_index(rng, 3)) - 1;
      for (auto& x : r) x = static_cast<int>(uniform_index(rng, 3)) - 1;
      records.push_back({qid, c, Question::kAccurate, a});
      records.push_back({qid, c, Question::kReasonable, r});
    }
  }
  ScoreMatrix scores(rows, ids);
  for (std::size_t r = 0; r < rows.size(); ++r) scores.set_row(r, random_floats(items, 10 + r));
  const GradedJudgments judged = aggregate_judgments(records);
  for (auto _ : state) {
    benchmark::DoNotOptimize(map_cfq(scores, judged, Question::kRelevant, {}, kExec).map);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries));
}
BENCHMARK(BM_MapCfq<Exec::kSerial>)->Name("map_cfq/serial")->Arg(64)->Arg(512)->UseRealTime();
BENCHMARK(BM_MapCfq<Exec::kParallel>)->Name("map_cfq/parallel")->Arg(64)->Arg(512)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
