#include <doctest.h>

#include <cmath>

#include "biasbench/embedding_store.hpp"
#include "biasbench/errors.hpp"
#include "biasbench/io.hpp"
#include "biasbench/random.hpp"
#include "support/synthetic.hpp"

using namespace biasbench;

namespace {

std::string header(std::size_t dim, std::size_t count) {
  return R"({"format":"bias-bench-emb/1","model":"m","dim":)" + std::to_string(dim) +
         ",\"count\":" + std::to_string(count) + "}\n";
}

std::string record(const std::string& id, const std::string& label, std::size_t dim, double base = 0.5) {
  std::string s = "{\"doc_id\":\"" + id + "\",\"label\":\"" + label + "\",\"vector\":[";
  for (std::size_t i = 0; i < dim; ++i) s += (i ? "," : "") + format_general(base + 0.001 * i, 9);
  return s + "]}\n";
}

}  // namespace

TEST_CASE("read_embeddings loads a 2016 x 384 file") {
  const auto dir = testsupport::scratch_dir("emb_read");
  std::string text = header(384, 2016);
  for (std::size_t i = 0; i < 2016; ++i)
    text += record("d" + std::to_string(i), std::string(to_string(kAllClasses[i % 4])), 384, 0.001 * i);
  write_file(dir / "mini.jsonl", text);
  const auto set = read_embeddings(dir / "mini.jsonl");
  CHECK(set.size() == 2016);
  CHECK(set.dim() == 384);
  CHECK(set.model_name() == "m");
  CHECK(set.records()[5].doc_id == "d5");
  CHECK(set.records()[5].label == BiasClass::race);
  CHECK(set.matrix().rows() == 2016);
}

TEST_CASE("read_embeddings names the offending line") {
  std::string text = header(384, 3) + record("a", "race", 384) + record("b", "race", 384) + record("c", "race", 383);
  CHECK_THROWS_WITH_AS(parse_embeddings(text, "f"), doctest::Contains("f:4"), FormatError);
  CHECK_THROWS_WITH(parse_embeddings(text, "f"), doctest::Contains("dimension mismatch"));
}

TEST_CASE("read_embeddings error paths") {
  CHECK_THROWS_WITH_AS(parse_embeddings(header(3, 0)), doctest::Contains("empty embedding set"), FormatError);
  CHECK_THROWS_WITH_AS(parse_embeddings(""), doctest::Contains("missing header"), FormatError);
  CHECK_THROWS_WITH_AS(parse_embeddings(record("a", "race", 3)), doctest::Contains("missing header"), FormatError);
  CHECK_THROWS_WITH_AS(parse_embeddings(header(3, 2) + record("a", "race", 3) + record("a", "race", 3)),
                       doctest::Contains("duplicate doc_id"), FormatError);
  CHECK_THROWS_AS(parse_embeddings(header(2, 1) + "{\"doc_id\":\"a\",\"label\":\"race\",\"vector\":[1,NaN]}\n"),
                  FormatError);
  CHECK_THROWS_WITH_AS(parse_embeddings(header(2, 1) + "{\"doc_id\":\"a\",\"label\":\"race\",\"vector\":[1,1e999]}\n"),
                       doctest::Contains("non-finite"), FormatError);
  CHECK_THROWS_AS(parse_embeddings(header(3, 2) + record("a", "race", 3)), FormatError);  // count mismatch
  CHECK_THROWS_AS(parse_embeddings(header(3, 1) + record("a", "politics", 3)), FormatError);
  CHECK_THROWS_AS(parse_embeddings(header(3, 1) + record("a", "race", 3) + "\n"), FormatError);  // blank line
}

TEST_CASE("canonical writer is byte-stable after one round trip") {
  Rng rng(42);
  std::vector<EmbeddingRecord> recs;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v(7);
    for (auto& x : v) x = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(12)) - 6.0);
    recs.push_back({"id\"" + std::to_string(i), kAllClasses[i % 4], v});
  }
  const EmbeddingSet set("model \"x\"", 7, recs);
  const std::string once = format_embeddings(set);
  const auto back = parse_embeddings(once);
  CHECK(format_embeddings(back) == once);
  CHECK(back.model_name() == set.model_name());
  // 32-bit values survive exactly at 9 significant digits.
  const float f = 0.1234567f;
  const EmbeddingSet single("f", 1, {{"a", BiasClass::race, {static_cast<double>(f)}}});
  CHECK(static_cast<float>(parse_embeddings(format_embeddings(single)).records()[0].vector[0]) == f);
}

TEST_CASE("align filters and reorders to corpus order") {
  std::vector<BiasClass> labels{BiasClass::race, BiasClass::gender, BiasClass::religion};
  const Corpus corpus = testsupport::corpus_for(labels);
  std::vector<EmbeddingRecord> recs{{"extra", BiasClass::race, {9.0}},
                                    {"doc2", BiasClass::religion, {2.0}},
                                    {"doc0", BiasClass::race, {0.0}},
                                    {"doc1", BiasClass::gender, {1.0}}};
  const auto aligned = align(EmbeddingSet("m", 1, recs), corpus);
  REQUIRE(aligned.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(aligned.records()[i].doc_id == corpus[i].id);
    CHECK(aligned.records()[i].vector[0] == static_cast<double>(i));
  }

  std::vector<EmbeddingRecord> missing{{"doc0", BiasClass::race, {0.0}}, {"doc2", BiasClass::religion, {2.0}}};
  CHECK_THROWS_WITH_AS(align(EmbeddingSet("m", 1, missing), corpus), doctest::Contains("doc1"), DataError);

  auto wrong = recs;
  wrong[1].label = BiasClass::orientation;
  CHECK_THROWS_WITH_AS(align(EmbeddingSet("m", 1, wrong), corpus), doctest::Contains("label disagreement"), DataError);
}

TEST_CASE("align undoes an arbitrary shuffle") {
  const auto data = testsupport::four_clusters(10, 3, 5.0, 3);
  const Corpus corpus = testsupport::corpus_for(data.labels);
  auto recs = testsupport::embedding_set_for("m", corpus, data.points).records();
  Rng rng(5);
  rng.shuffle(std::span<EmbeddingRecord>(recs));
  const auto aligned = align(EmbeddingSet("m", 3, recs), corpus);
  CHECK(aligned.matrix() == data.points);
}

TEST_CASE("euclidean distance") {
  const std::vector<double> a{0.0, 0.0}, b{3.0, 4.0};
  CHECK(euclidean(a, b) == 5.0);
  CHECK(euclidean(b, b) == 0.0);
  CHECK_THROWS_AS(euclidean(a, std::vector<double>{1.0}), std::invalid_argument);

  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(10), y(10), z(10);
    for (int i = 0; i < 10; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
      z[i] = rng.normal();
    }
    // Reverse-order long double accumulation as the oracle.
    long double s = 0;
    for (int i = 9; i >= 0; --i) s += (static_cast<long double>(x[i]) - y[i]) * (static_cast<long double>(x[i]) - y[i]);
    const double expected = static_cast<double>(std::sqrt(s));
    CHECK(std::abs(euclidean(x, y) - expected) <= 1e-12 * expected);
    CHECK(euclidean(x, y) == euclidean(y, x));
    CHECK(euclidean(x, z) <= euclidean(x, y) + euclidean(y, z) + 1e-9);
  }
}
