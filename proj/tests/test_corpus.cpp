#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "biasbench/corpus.hpp"
#include "biasbench/csv.hpp"
#include "biasbench/errors.hpp"
#include "biasbench/io.hpp"
#include "support/synthetic.hpp"

using namespace biasbench;

namespace {

// RedditBias-sized class mix: 2139 religion, 504 of each other class.
Corpus reddit_sized_corpus() {
  std::vector<Document> docs;
  const std::size_t sizes[4] = {2139, 504, 504, 504};
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < sizes[c]; ++i)
      docs.push_back({std::string(to_string(kAllClasses[c])) + "-" + std::to_string(i), "t", kAllClasses[c]});
  return Corpus(std::move(docs), "test");
}

Corpus corpus_with_counts(std::size_t per_class) {
  std::vector<BiasClass> labels;
  for (auto c : kAllClasses)
    for (std::size_t i = 0; i < per_class; ++i) labels.push_back(c);
  return testsupport::corpus_for(labels);
}

std::vector<std::string> ids(const Corpus& c) {
  std::vector<std::string> out;
  for (const auto& d : c.documents()) out.push_back(d.id);
  return out;
}

}  // namespace

TEST_CASE("bias class labels parse exactly") {
  CHECK(parse_bias_class("religion") == BiasClass::religion);
  CHECK(parse_bias_class("orientation") == BiasClass::orientation);
  for (auto c : kAllClasses) CHECK(parse_bias_class(to_string(c)) == c);
  CHECK_THROWS_AS(parse_bias_class("Religion"), DataError);
  CHECK_THROWS_AS(parse_bias_class("politics"), DataError);
  CHECK_THROWS_AS(parse_bias_class(""), DataError);
}

TEST_CASE("corpus rejects duplicate ids") {
  std::vector<Document> docs{{"a", "x", BiasClass::race}, {"a", "y", BiasClass::gender}};
  CHECK_THROWS_AS(Corpus(docs, "dup"), DataError);
}

TEST_CASE("csv parser handles RFC 4180 quoting") {
  const auto recs = csv::parse("a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\n\"multi\nline\",z\n");
  REQUIRE(recs.size() == 3);
  CHECK(recs[1].fields == std::vector<std::string>{"x, y", "say \"hi\""});
  CHECK(recs[2].fields == std::vector<std::string>{"multi\nline", "z"});
  CHECK(recs[2].line == 3);
  CHECK_THROWS_AS(csv::parse("a\n\"open"), FormatError);
  CHECK_THROWS_AS(csv::parse("a\nab\"c\n"), FormatError);
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,\"b\"") == "\"a,\"\"b\"\"\"");
}

TEST_CASE("load_corpus reads a RedditBias-sized csv") {
  const auto dir = testsupport::scratch_dir("corpus_csv");
  std::string text = "id,comment,bias\n";
  const std::size_t sizes[4] = {2139, 504, 504, 504};
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < sizes[c]; ++i)
      text += "c" + std::to_string(c) + "_" + std::to_string(i) + ",\"text, with \"\"quotes\"\" " + std::to_string(i) +
              "\"," + std::string(to_string(kAllClasses[c])) + "\n";
  write_file(dir / "reddit.csv", text);

  ColumnConfig cols;
  cols.text_column = "comment";
  cols.label_column = "bias";
  const auto loaded = load_corpus(dir / "reddit.csv", cols);
  CHECK(loaded.corpus.size() == 3651);
  CHECK(loaded.skipped_empty_text == 0);
  const auto counts = loaded.corpus.class_counts();
  CHECK(counts == std::array<std::size_t, 4>{2139, 504, 504, 504});
  CHECK(loaded.corpus[0].text == "text, with \"quotes\" 0");
}

TEST_CASE("load_corpus with per-file label and synthesized ids") {
  const auto dir = testsupport::scratch_dir("corpus_fixed");
  write_file(dir / "gender.csv", "comment,other\nfirst,1\n,2\nthird,3\n");
  ColumnConfig cols;
  cols.text_column = "comment";
  cols.fixed_label = BiasClass::gender;
  cols.id_column = "";
  const auto loaded = load_corpus(dir / "gender.csv", cols);
  REQUIRE(loaded.corpus.size() == 2);
  CHECK(loaded.skipped_empty_text == 1);
  CHECK(loaded.corpus[0].id == "gender:1");
  CHECK(loaded.corpus[1].id == "gender:3");
  CHECK(loaded.corpus[1].label == BiasClass::gender);
}

TEST_CASE("load_corpus error paths") {
  const auto dir = testsupport::scratch_dir("corpus_errors");
  write_file(dir / "empty.csv", "id,text,label\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir / "empty.csv", {}), doctest::Contains("empty corpus"), DataError);

  write_file(dir / "nocol.csv", "id,body,label\n1,x,race\n");
  CHECK_THROWS_AS(load_corpus(dir / "nocol.csv", {}), FormatError);

  write_file(dir / "badlabel.csv", "id,text,label\n1,x,race\n2,y,politics\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir / "badlabel.csv", {}), doctest::Contains("badlabel.csv:3"), DataError);

  CHECK_THROWS_AS(load_corpus(dir / "missing.csv", {}), Error);

  write_file(dir / "ragged.csv", "id,text,label\n1,x\n");
  CHECK_THROWS_AS(load_corpus(dir / "ragged.csv", {}), FormatError);
}

TEST_CASE("load_corpus reads json-lines and skips empty text") {
  const auto dir = testsupport::scratch_dir("corpus_jsonl");
  write_file(dir / "c.jsonl",
             "{\"id\":\"a\",\"text\":\"hello\",\"label\":\"race\"}\n"
             "{\"id\":\"b\",\"text\":\"\",\"label\":\"gender\"}\n"
             "{\"id\":\"c\",\"text\":\"world\",\"label\":\"orientation\"}\n");
  const auto loaded = load_corpus(dir / "c.jsonl", {});
  CHECK(loaded.corpus.size() == 2);
  CHECK(loaded.skipped_empty_text == 1);
  CHECK(ids(loaded.corpus) == std::vector<std::string>{"a", "c"});

  write_file(dir / "bad.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n");
  CHECK_THROWS_AS(load_corpus(dir / "bad.jsonl", {}), FormatError);
  write_file(dir / "blank.jsonl", "\n");
  CHECK_THROWS_WITH(load_corpus(dir / "blank.jsonl", {}), doctest::Contains("empty corpus"));
}

TEST_CASE("jsonl serialization round trips through load_corpus") {
  const auto dir = testsupport::scratch_dir("corpus_roundtrip");
  std::vector<Document> docs{{"x1", "line\nbreak \"q\" \xC3\xA9", BiasClass::religion}, {"x2", "plain", BiasClass::race}};
  const Corpus c(docs, "rt");
  write_file(dir / "c.jsonl", to_jsonl(c));
  const auto back = load_corpus(dir / "c.jsonl", {});
  CHECK(back.corpus.documents() == c.documents());
  CHECK(to_jsonl(back.corpus) == to_jsonl(c));
}

TEST_CASE("balance_subsample draws 504 per class from the RedditBias mix") {
  const Corpus full = reddit_sized_corpus();
  const Corpus bal = balance_subsample(full, 504, 7);
  CHECK(bal.size() == 2016);
  CHECK(bal.class_counts() == std::array<std::size_t, 4>{504, 504, 504, 504});

  // Classes already at size pass through untouched, in order.
  std::vector<std::string> race_in, race_out;
  for (const auto& d : full.documents())
    if (d.label == BiasClass::race) race_in.push_back(d.id);
  for (const auto& d : bal.documents())
    if (d.label == BiasClass::race) race_out.push_back(d.id);
  CHECK(race_in == race_out);

  // Determinism and seed sensitivity.
  CHECK(ids(balance_subsample(full, 504, 7)) == ids(bal));
  CHECK(ids(balance_subsample(full, 504, 8)) != ids(bal));
}

TEST_CASE("balance_subsample identity and errors") {
  const Corpus c = corpus_with_counts(5);
  CHECK(ids(balance_subsample(c, 5, 1)) == ids(c));
  CHECK_THROWS_WITH_AS(balance_subsample(c, 6, 1), doctest::Contains("religion"), DataError);
  CHECK_THROWS_AS(balance_subsample(c, 0, 1), ConfigError);
}

TEST_CASE("balance_subsample histogram is flat for every seed") {
  const Corpus full = reddit_sized_corpus();
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto bal = balance_subsample(full, 100, seed);
    CHECK(bal.class_counts() == std::array<std::size_t, 4>{100, 100, 100, 100});
    // Output keeps input order.
    std::vector<std::size_t> positions;
    for (const auto& d : bal.documents()) {
      const auto& docs = full.documents();
      positions.push_back(static_cast<std::size_t>(
          std::find_if(docs.begin(), docs.end(), [&](const Document& x) { return x.id == d.id; }) - docs.begin()));
    }
    CHECK(std::is_sorted(positions.begin(), positions.end()));
  }
}

TEST_CASE("stratified_split on the balanced corpus at 70/30") {
  const Corpus c = corpus_with_counts(504);
  const auto split = stratified_split(c, 0.7, 11);
  // floor(0.7*504)=352 per class, round(0.7*2016)=1411, remainder 3 to the first classes.
  CHECK(split.train.size() == 1411);
  CHECK(split.test.size() == 605);
  std::array<std::size_t, 4> per_class{};
  for (auto i : split.train_positions) ++per_class[class_index(c[i].label)];
  CHECK(per_class == std::array<std::size_t, 4>{353, 353, 353, 352});
  for (auto n : per_class) CHECK(std::abs(static_cast<double>(n) - std::round(0.7 * 504)) <= 1.0);
}

TEST_CASE("stratified_split partitions the corpus for many seeds") {
  const Corpus c = corpus_with_counts(37);
  const auto all_ids = ids(c);
  const std::set<std::string> all(all_ids.begin(), all_ids.end());
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = stratified_split(c, 0.6, seed);
    std::set<std::string> train(s.train.begin(), s.train.end()), test(s.test.begin(), s.test.end());
    CHECK(train.size() == s.train.size());
    std::vector<std::string> inter;
    std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(inter));
    CHECK(inter.empty());
    std::set<std::string> uni = train;
    uni.insert(test.begin(), test.end());
    CHECK(uni == all);
    CHECK(stratified_split(c, 0.6, seed).train == s.train);
  }
}

TEST_CASE("stratified_split seeds permute membership but not counts") {
  const Corpus c = corpus_with_counts(50);
  const auto a = stratified_split(c, 0.7, 1);
  const auto b = stratified_split(c, 0.7, 2);
  CHECK(a.train != b.train);
  CHECK(a.digest() != b.digest());
  auto counts = [&](const SplitIndices& s) {
    std::array<std::size_t, 4> n{};
    for (auto i : s.train_positions) ++n[class_index(c[i].label)];
    return n;
  };
  CHECK(counts(a) == counts(b));
}

TEST_CASE("stratified_split smallest stratum and errors") {
  const Corpus two = corpus_with_counts(2);
  const auto s = stratified_split(two, 0.5, 3);
  CHECK(s.train.size() == 4);
  CHECK(s.test.size() == 4);

  CHECK_THROWS_AS(stratified_split(two, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(stratified_split(two, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(stratified_split(two, 1.5, 1), ConfigError);
  CHECK_THROWS_AS(stratified_split(corpus_with_counts(1), 0.5, 1), DataError);
  // 0.9 of 2 rounds to 1 train, but the remainder pushes class 0 to 2 of 2.
  CHECK_THROWS_AS(stratified_split(two, 0.9, 1), DataError);
}
