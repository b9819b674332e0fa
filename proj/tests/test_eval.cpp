#include <doctest.h>

#include <map>

#include "biasbench/errors.hpp"
#include "biasbench/eval.hpp"
#include "biasbench/knn.hpp"
#include "biasbench/random.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace biasbench;
using namespace biasbench::eval;

namespace {

struct Fixture {
  Corpus corpus;
  std::vector<EmbeddingSet> sets;
};

// Same documents embedded four ways, with increasing cluster overlap.
Fixture make_fixture(std::size_t per_class, std::size_t dim = 8) {
  const auto base = testsupport::four_clusters(per_class, dim, 20.0, 1);
  Fixture f{testsupport::corpus_for(base.labels), {}};
  const std::vector<std::pair<std::string, double>> models{
      {"full_bert", 20.0}, {"mini_bert", 30.0}, {"full_roberta", 12.0}, {"raw_roberta", 3.0}};
  std::uint64_t seed = 10;
  for (const auto& [name, sep] : models) {
    const auto data = testsupport::four_clusters(per_class, dim, sep, seed++);
    f.sets.push_back(testsupport::embedding_set_for(name, f.corpus, data.points));
  }
  return f;
}

ExperimentConfig grid_config(std::size_t runs, std::uint64_t seed = 5) {
  ExperimentConfig c;
  c.runs = runs;
  c.master_seed = seed;
  return c;
}

std::vector<RunResult> constant_results(const std::string& model, std::size_t k, std::vector<double> accs) {
  std::vector<RunResult> out;
  for (std::size_t i = 0; i < accs.size(); ++i) out.push_back({model, k, i, accs[i], ""});
  return out;
}

}  // namespace

TEST_CASE("grid cardinality and canonical order") {
  const auto f = make_fixture(30);
  const auto exp = run_grid(f.sets, f.corpus, grid_config(50));
  CHECK(exp.results.size() == 600);
  CHECK(exp.splits.size() == 50);
  std::size_t idx = 0;
  for (const auto& set : f.sets)
    for (std::size_t k : {3u, 10u, 25u})
      for (std::size_t r = 0; r < 50; ++r, ++idx) {
        CHECK(exp.results[idx].model_name == set.model_name());
        CHECK(exp.results[idx].k == k);
        CHECK(exp.results[idx].run_index == r);
        CHECK(exp.results[idx].accuracy >= 0.0);
        CHECK(exp.results[idx].accuracy <= 1.0);
      }
}

TEST_CASE("every cell of a run shares the run's split") {
  const auto f = make_fixture(20);
  const auto exp = run_grid(f.sets, f.corpus, grid_config(6));
  for (const auto& r : exp.results) CHECK(r.split_digest == exp.splits[r.run_index].digest);
  CHECK(exp.splits[0].digest != exp.splits[1].digest);
  CHECK(exp.splits[0].seed == derive_seed(5, 0));
  CHECK(exp.splits[0].train_size + exp.splits[0].test_size == f.corpus.size());
}

TEST_CASE("perfectly separated clusters classify perfectly") {
  const auto data = testsupport::four_clusters(30, 10, 60.0, 3);
  const Corpus corpus = testsupport::corpus_for(data.labels);
  const std::vector<EmbeddingSet> sets{testsupport::embedding_set_for("sep", corpus, data.points)};
  auto cfg = grid_config(1);
  cfg.k_values = {1, 3, 10, 21};
  const auto exp = run_grid(sets, corpus, cfg);
  for (const auto& r : exp.results) CHECK(r.accuracy == 1.0);
}

TEST_CASE("grid accuracies agree with an independent KNN loop") {
  const auto f = make_fixture(15, 4);
  auto cfg = grid_config(2);
  const auto exp = run_grid(f.sets, f.corpus, cfg);
  const auto split = stratified_split(f.corpus, cfg.train_fraction, derive_seed(cfg.master_seed, 1));
  const Matrix all = f.sets[3].matrix();
  Matrix train(split.train_positions.size(), all.cols());
  std::vector<BiasClass> labels;
  for (std::size_t i = 0; i < split.train_positions.size(); ++i) {
    for (std::size_t j = 0; j < all.cols(); ++j) train(i, j) = all(split.train_positions[i], j);
    labels.push_back(f.corpus[split.train_positions[i]].label);
  }
  for (std::size_t ki = 0; ki < 3; ++ki) {
    const std::size_t k = cfg.k_values[ki];
    std::size_t hits = 0;
    for (auto pos : split.test_positions)
      hits += oracle::knn_predict(train, labels, k, all.row(pos)) == f.corpus[pos].label;
    const double expected = static_cast<double>(hits) / static_cast<double>(split.test_positions.size());
    const auto& r = exp.results[(3 * 3 + ki) * 2 + 1];
    REQUIRE(r.model_name == "raw_roberta");
    REQUIRE(r.run_index == 1);
    CHECK(r.accuracy == expected);
  }
}

TEST_CASE("grid is deterministic and independent of worker count") {
  const auto f = make_fixture(20);
  auto cfg = grid_config(7);
  const auto a = run_grid(f.sets, f.corpus, cfg);
  cfg.jobs = 3;
  const auto b = run_grid(f.sets, f.corpus, cfg);
  CHECK(a.results == b.results);
  cfg.master_seed = 6;
  CHECK(run_grid(f.sets, f.corpus, cfg).results != a.results);
}

TEST_CASE("grid rejects k larger than the training split") {
  const auto f = make_fixture(5);
  auto cfg = grid_config(1);
  cfg.k_values = {3, 15};
  CHECK_THROWS_AS(run_grid(f.sets, f.corpus, cfg), DataError);
}

TEST_CASE("run_experiment checks balance and alignment") {
  const auto f = make_fixture(10);
  const auto dir = testsupport::scratch_dir("eval_files");
  ExperimentConfig cfg = grid_config(2);
  cfg.per_class = 10;
  for (const auto& s : f.sets) {
    write_embeddings(s, dir / (s.model_name() + ".jsonl"));
    cfg.embedding_paths.push_back({s.model_name(), dir / (s.model_name() + ".jsonl")});
  }
  const auto exp = run_experiment(cfg, f.corpus);
  CHECK(exp.results.size() == 4 * 3 * 2);

  cfg.per_class = 11;
  CHECK_THROWS_AS(run_experiment(cfg, f.corpus), DataError);

  cfg.per_class = 10;
  cfg.embedding_paths[1].path = dir / "missing.jsonl";
  CHECK_THROWS_WITH_AS(run_experiment(cfg, f.corpus), doctest::Contains("mini_bert"), DataError);
}

TEST_CASE("summarize") {
  const auto flat = summarize(constant_results("m", 3, std::vector<double>(50, 0.99)));
  REQUIRE(flat.size() == 1);
  CHECK(flat[0].cell.mean == doctest::Approx(0.99));
  CHECK(flat[0].cell.low == 0.99);
  CHECK(flat[0].cell.high == 0.99);
  CHECK(flat[0].cell.low <= flat[0].cell.mean);
  CHECK(flat[0].cell.mean <= flat[0].cell.high);

  const auto two = summarize(constant_results("m", 3, {0.98, 1.00}));
  CHECK(two[0].cell.mean == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(two[0].cell.low == 0.98);
  CHECK(two[0].cell.high == 1.00);
  CHECK(two[0].cell.ci95_low < two[0].cell.mean);

  CHECK_THROWS_AS(summarize(std::vector<RunResult>{}), DataError);
}

TEST_CASE("compare flags disjoint accuracy ranges") {
  std::vector<RunResult> results;
  Rng rng(4);
  for (std::size_t r = 0; r < 50; ++r) {
    results.push_back({"full_bert", 3, r, 0.97 + 0.03 * rng.uniform(), ""});
    results.push_back({"raw_roberta", 3, r, 0.84 + 0.06 * rng.uniform(), ""});
  }
  const auto report = compare(results);
  CHECK(report.family_size == 1);
  REQUIRE(report.tests.size() == 1);
  CHECK(report.tests[0].adjusted_p < 0.01);
  CHECK(report.tests[0].significant);
  const auto& claim = report.claims[0];
  CHECK(claim.id == "bert_over_raw_roberta");
  CHECK(claim.status == ClaimStatus::pass);
  // k claims cannot be evaluated with a single k.
  for (const auto& c : report.claims)
    if (c.id == "small_k_over_k25") CHECK(c.status == ClaimStatus::not_evaluated);
  CHECK(report.warnings.empty());
}

TEST_CASE("compare of a model with itself") {
  std::vector<RunResult> results;
  for (std::size_t r = 0; r < 10; ++r) {
    const double acc = 0.9 + 0.01 * static_cast<double>(r % 3);
    results.push_back({"a", 3, r, acc, ""});
    results.push_back({"b", 3, r, acc, ""});
  }
  const auto report = compare(results);
  REQUIRE(report.tests.size() == 1);
  CHECK(report.tests[0].result.t_stat == 0.0);
  CHECK(report.tests[0].adjusted_p == 1.0);
  CHECK_FALSE(report.tests[0].significant);
  CHECK(report.warnings.size() == 1);  // 10 runs is below power
}

TEST_CASE("compare family size for the full grid is 21") {
  const auto f = make_fixture(20);
  const auto exp = run_grid(f.sets, f.corpus, grid_config(30));
  const auto report = compare(exp.results);
  CHECK(report.family_size == 21);
  CHECK(report.tests.size() == 21);
  CHECK(report.grid.size() == 12);
  CHECK(report.claims.size() == 4);
  for (const auto& t : report.tests) {
    CHECK(t.adjusted_p >= t.result.p_two_sided);
    CHECK(t.adjusted_p == doctest::Approx(std::min(1.0, 21.0 * t.result.p_two_sided)));
  }
  CHECK(report.warnings.empty());
}

TEST_CASE("compare handles zero-variance cells") {
  auto results = constant_results("full_bert", 3, std::vector<double>(5, 1.0));
  auto other = constant_results("raw_roberta", 3, std::vector<double>(5, 1.0));
  results.insert(results.end(), other.begin(), other.end());
  auto report = compare(results);
  CHECK(report.tests[0].adjusted_p == 1.0);
  CHECK_FALSE(report.tests[0].note.empty());

  other = constant_results("raw_roberta", 3, std::vector<double>(5, 0.8));
  results.resize(5);
  results.insert(results.end(), other.begin(), other.end());
  report = compare(results);
  CHECK(report.tests[0].adjusted_p == 0.0);
  CHECK(report.claims[0].status == ClaimStatus::pass);
}

TEST_CASE("compare error paths") {
  CHECK_THROWS_AS(compare(constant_results("a", 3, {0.9, 0.8})), DataError);
  auto results = constant_results("a", 3, {0.9});
  results.push_back({"b", 3, 0, 0.8, ""});
  CHECK_THROWS_WITH_AS(compare(results), doctest::Contains("insufficient runs"), DataError);
}

TEST_CASE("results csv round trips") {
  const auto f = make_fixture(10);
  auto exp = run_grid(f.sets, f.corpus, grid_config(3));
  const std::string text = results_csv(exp.results);
  CHECK(text.rfind("model,k,run,accuracy\n", 0) == 0);
  auto back = parse_results_csv(text);
  for (auto& r : exp.results) r.split_digest.clear();
  CHECK(back == exp.results);
  CHECK_THROWS_AS(parse_results_csv("a,b\n"), FormatError);
  CHECK_THROWS_AS(parse_results_csv("model,k,run,accuracy\nm,3,0,1.5\n"), FormatError);
}

TEST_CASE("table layout mirrors the accuracy grid") {
  std::vector<RunResult> results;
  for (std::size_t r = 0; r < 40; ++r) {
    results.push_back({"mini_bert", 3, r, r % 2 ? 0.98 : 1.00, ""});
    results.push_back({"mini_bert", 10, r, r % 2 ? 0.97 : 1.00, ""});
  }
  const auto table = render_table(compare(results));
  CHECK(table.find("Mini BERT") != std::string::npos);
  CHECK(table.find("0.99 (0.98,1.00)") != std::string::npos);
  CHECK(table.find("K=10") != std::string::npos);
  CHECK(table.find("m = 1") != std::string::npos);

  ReportContext ctx;
  ctx.master_seed = 9;
  ctx.k_values = {3, 10};
  const auto json = report_json(compare(results), ctx);
  CHECK(json.find("\"family_size\": 1") != std::string::npos);
  CHECK(json.find("\"ci95_low\"") != std::string::npos);
}
