#include "biasbench/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "biasbench/csv.hpp"
#include "biasbench/errors.hpp"
#include "biasbench/io.hpp"
#include "biasbench/knn.hpp"
#include "biasbench/random.hpp"

namespace biasbench::eval {

namespace {

std::size_t resolve_jobs(std::size_t jobs) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  return jobs;
}

bool is_bert(std::string_view name) {
  return name.find("roberta") == std::string_view::npos && name.size() >= 4 &&
         name.substr(name.size() - 4) == "bert";
}
bool is_roberta(std::string_view name) { return name.find("roberta") != std::string_view::npos; }

std::vector<double> accuracies(std::span<const RunResult> results, auto&& keep) {
  std::vector<double> out;
  for (const auto& r : results)
    if (keep(r)) out.push_back(r.accuracy);
  return out;
}

PairwiseTest run_test(std::string name, std::string group_a, std::string group_b, std::span<const double> a,
                      std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw DataError("compare: insufficient runs (< 2) for " + (a.size() < 2 ? group_a : group_b));
  PairwiseTest t;
  t.name = std::move(name);
  t.group_a = std::move(group_a);
  t.group_b = std::move(group_b);
  t.mean_a = stats::mean(a);
  t.mean_b = stats::mean(b);
  if (stats::sample_variance(a) == 0.0 && stats::sample_variance(b) == 0.0) {
    // Welch's t is undefined; resolve by the means alone.
    t.result.df = static_cast<double>(a.size() + b.size() - 2);
    if (t.mean_a == t.mean_b) {
      t.result.t_stat = 0.0;
      t.result.p_two_sided = 1.0;
      t.note = "zero variance in both samples, equal means";
    } else {
      t.result.t_stat = t.mean_a > t.mean_b ? std::numeric_limits<double>::infinity()
                                            : -std::numeric_limits<double>::infinity();
      t.result.p_two_sided = 0.0;
      t.note = "zero variance in both samples, different means";
    }
  } else {
    t.result = stats::welch_t_test(a, b);
  }
  return t;
}

}  // namespace

Experiment run_experiment(const ExperimentConfig& config, const Corpus& corpus) {
  const auto counts = corpus.class_counts();
  for (BiasClass c : kAllClasses) {
    const auto n = counts[class_index(c)];
    if (n != 0 && n != config.per_class)
      throw DataError("corpus is not balanced: class " + std::string(to_string(c)) + " has " + std::to_string(n) +
                      " documents, per_class is " + std::to_string(config.per_class));
  }
  std::vector<EmbeddingSet> aligned;
  aligned.reserve(config.embedding_paths.size());
  for (const auto& input : config.embedding_paths) {
    try {
      auto set = read_embeddings(input.path);
      aligned.push_back(align(EmbeddingSet(input.name, set.dim(), set.records()), corpus));
    } catch (const Error& e) {
      throw DataError("model " + input.name + ": " + e.what());
    }
  }
  return run_grid(aligned, corpus, config);
}

Experiment run_grid(std::span<const EmbeddingSet> aligned, const Corpus& corpus, const ExperimentConfig& config) {
  if (aligned.empty()) throw ConfigError("no embedding sets configured");
  if (config.k_values.empty()) throw ConfigError("no k values configured");
  if (config.runs == 0) throw ConfigError("runs must be positive");
  for (auto k : config.k_values)
    if (k == 0) throw ConfigError("k must be positive");
  for (const auto& set : aligned) {
    if (set.size() != corpus.size()) throw DataError("embedding set " + set.model_name() + " is not aligned to the corpus");
    for (std::size_t i = 0; i < set.size(); ++i)
      if (set.records()[i].doc_id != corpus[i].id)
        throw DataError("embedding set " + set.model_name() + " is not aligned to the corpus");
  }
  for (std::size_t i = 0; i < aligned.size(); ++i)
    for (std::size_t j = i + 1; j < aligned.size(); ++j)
      if (aligned[i].model_name() == aligned[j].model_name())
        throw ConfigError("duplicate model name " + aligned[i].model_name());

  const std::size_t max_k = *std::max_element(config.k_values.begin(), config.k_values.end());
  const std::size_t n_models = aligned.size();
  const std::size_t n_k = config.k_values.size();
  const std::size_t runs = config.runs;

  std::vector<Matrix> matrices;
  for (const auto& set : aligned) matrices.push_back(set.matrix());
  std::vector<BiasClass> truth;
  for (const auto& d : corpus.documents()) truth.push_back(d.label);

  Experiment exp;
  exp.results.resize(n_models * n_k * runs);
  exp.splits.resize(runs);

  auto run_one = [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(config.master_seed, r);
    const SplitIndices split = stratified_split(corpus, config.train_fraction, seed);
    if (max_k > split.train_positions.size())
      throw DataError("k=" + std::to_string(max_k) + " exceeds training size " +
                      std::to_string(split.train_positions.size()) + " in run " + std::to_string(r));
    const std::string digest = split.digest();
    exp.splits[r] = {r, seed, digest, split.train_positions.size(), split.test_positions.size()};

    std::vector<BiasClass> train_labels;
    std::vector<BiasClass> test_truth;
    for (auto i : split.train_positions) train_labels.push_back(truth[i]);
    for (auto i : split.test_positions) test_truth.push_back(truth[i]);

    for (std::size_t m = 0; m < n_models; ++m) {
      const Matrix& all = matrices[m];
      Matrix train(split.train_positions.size(), all.cols());
      for (std::size_t i = 0; i < split.train_positions.size(); ++i) {
        const auto src = all.row(split.train_positions[i]);
        std::copy(src.begin(), src.end(), train.row(i).begin());
      }
      const knn::KnnModel model(std::move(train), train_labels, max_k);
      // Neighbour lists are computed once at the largest k; each smaller k
      // votes over a prefix.
      std::vector<std::vector<BiasClass>> predicted(n_k);
      for (auto pos : split.test_positions) {
        const auto neighbors = model.nearest(all.row(pos), max_k);
        for (std::size_t ki = 0; ki < n_k; ++ki) predicted[ki].push_back(model.vote(neighbors, config.k_values[ki]));
      }
      for (std::size_t ki = 0; ki < n_k; ++ki) {
        auto& slot = exp.results[(m * n_k + ki) * runs + r];
        slot.model_name = aligned[m].model_name();
        slot.k = config.k_values[ki];
        slot.run_index = r;
        slot.accuracy = knn::accuracy(predicted[ki], test_truth);
        slot.split_digest = digest;
      }
    }
  };

  const std::size_t jobs = std::min(resolve_jobs(config.jobs), runs);
  if (jobs <= 1) {
    for (std::size_t r = 0; r < runs; ++r) run_one(r);
    return exp;
  }
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < jobs; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t r = t; r < runs; r += jobs) run_one(r);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return exp;
}

std::vector<GridCell> summarize(std::span<const RunResult> results) {
  if (results.empty()) throw DataError("summarize: no results");
  std::vector<GridCell> grid;
  std::vector<std::vector<double>> samples;
  for (const auto& r : results) {
    auto it = std::find_if(grid.begin(), grid.end(),
                           [&](const GridCell& c) { return c.model_name == r.model_name && c.k == r.k; });
    if (it == grid.end()) {
      grid.push_back({r.model_name, r.k, {}});
      samples.emplace_back();
      it = grid.end() - 1;
    }
    samples[static_cast<std::size_t>(it - grid.begin())].push_back(r.accuracy);
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& xs = samples[i];
    auto& cell = grid[i].cell;
    cell.runs = xs.size();
    cell.mean = stats::mean(xs);
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    cell.low = *lo;
    cell.high = *hi;
    // Guard against the mean drifting outside the range by rounding.
    cell.mean = std::clamp(cell.mean, cell.low, cell.high);
    cell.sd = xs.size() > 1 ? std::sqrt(stats::sample_variance(xs)) : 0.0;
    const double half = 1.96 * cell.sd / std::sqrt(static_cast<double>(xs.size()));
    cell.ci95_low = cell.mean - half;
    cell.ci95_high = cell.mean + half;
  }
  return grid;
}

std::string_view to_string(ClaimStatus status) noexcept {
  switch (status) {
    case ClaimStatus::pass: return "pass";
    case ClaimStatus::fail: return "fail";
    case ClaimStatus::not_evaluated: return "not evaluated";
  }
  return "unknown";
}

ComparisonReport compare(std::span<const RunResult> results, double alpha) {
  ComparisonReport report;
  report.alpha = alpha;
  report.grid = summarize(results);

  std::vector<std::string> models;
  std::vector<std::size_t> ks;
  for (const auto& c : report.grid) {
    if (std::find(models.begin(), models.end(), c.model_name) == models.end()) models.push_back(c.model_name);
    if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) ks.push_back(c.k);
  }
  if (models.size() < 2 && ks.size() < 2) throw DataError("compare: need at least two models or two k values");

  std::size_t min_runs = std::numeric_limits<std::size_t>::max();
  for (const auto& c : report.grid) min_runs = std::min(min_runs, c.cell.runs);
  if (min_runs < 2) throw DataError("compare: insufficient runs (< 2) in at least one cell");
  if (min_runs < kMinPoweredRuns)
    report.warnings.push_back("below-power run count: " + std::to_string(min_runs) + " runs per cell (at least " +
                              std::to_string(kMinPoweredRuns) + " recommended)");

  auto model_test_name = [](const std::string& a, const std::string& b, std::size_t k) {
    return a + " vs " + b + " @ k=" + std::to_string(k);
  };
  auto k_test_name = [](std::size_t a, std::size_t b) {
    return "k=" + std::to_string(a) + " vs k=" + std::to_string(b) + " (pooled)";
  };

  for (auto k : ks)
    for (std::size_t i = 0; i < models.size(); ++i)
      for (std::size_t j = i + 1; j < models.size(); ++j) {
        const auto a = accuracies(results, [&](const RunResult& r) { return r.model_name == models[i] && r.k == k; });
        const auto b = accuracies(results, [&](const RunResult& r) { return r.model_name == models[j] && r.k == k; });
        report.tests.push_back(run_test(model_test_name(models[i], models[j], k), models[i] + "@k=" + std::to_string(k),
                                        models[j] + "@k=" + std::to_string(k), a, b));
      }
  for (std::size_t i = 0; i < ks.size(); ++i)
    for (std::size_t j = i + 1; j < ks.size(); ++j) {
      const auto a = accuracies(results, [&](const RunResult& r) { return r.k == ks[i]; });
      const auto b = accuracies(results, [&](const RunResult& r) { return r.k == ks[j]; });
      report.tests.push_back(run_test(k_test_name(ks[i], ks[j]), "k=" + std::to_string(ks[i]),
                                      "k=" + std::to_string(ks[j]), a, b));
    }

  report.family_size = report.tests.size();
  std::vector<double> raw;
  for (const auto& t : report.tests) raw.push_back(t.result.p_two_sided);
  const auto adjusted = stats::bonferroni(raw, report.family_size);
  for (std::size_t i = 0; i < report.tests.size(); ++i) {
    report.tests[i].adjusted_p = adjusted[i];
    report.tests[i].significant = adjusted[i] < alpha;
  }

  // A directional requirement "winner beats loser" resolved against the family.
  struct Requirement {
    std::string test_name;
    bool winner_is_a;
  };
  auto find_test = [&](const std::string& name) -> const PairwiseTest* {
    for (const auto& t : report.tests)
      if (t.name == name) return &t;
    return nullptr;
  };
  auto model_requirement = [&](const std::string& winner, const std::string& loser, std::size_t k) {
    const auto wi = std::find(models.begin(), models.end(), winner) - models.begin();
    const auto li = std::find(models.begin(), models.end(), loser) - models.begin();
    return wi < li ? Requirement{model_test_name(winner, loser, k), true}
                   : Requirement{model_test_name(loser, winner, k), false};
  };
  auto k_requirement = [&](std::size_t winner, std::size_t loser) {
    const auto wi = std::find(ks.begin(), ks.end(), winner) - ks.begin();
    const auto li = std::find(ks.begin(), ks.end(), loser) - ks.begin();
    return wi < li ? Requirement{k_test_name(winner, loser), true} : Requirement{k_test_name(loser, winner), false};
  };
  auto resolve = [&](std::string id, std::string description, bool gated, const std::vector<Requirement>& reqs) {
    Claim claim;
    claim.id = std::move(id);
    claim.description = std::move(description);
    claim.gated = gated;
    if (reqs.empty()) {
      claim.status = ClaimStatus::not_evaluated;
      report.claims.push_back(std::move(claim));
      return;
    }
    bool ok = true;
    claim.max_adjusted_p = 0.0;
    for (const auto& req : reqs) {
      const auto* t = find_test(req.test_name);
      claim.tests.push_back(req.test_name);
      const bool direction = req.winner_is_a ? t->mean_a > t->mean_b : t->mean_b > t->mean_a;
      ok = ok && direction && t->significant;
      claim.max_adjusted_p = std::max(claim.max_adjusted_p, t->adjusted_p);
    }
    claim.status = ok ? ClaimStatus::pass : ClaimStatus::fail;
    report.claims.push_back(std::move(claim));
  };
  auto has_model = [&](std::string_view m) { return std::find(models.begin(), models.end(), m) != models.end(); };
  auto has_k = [&](std::size_t k) { return std::find(ks.begin(), ks.end(), k) != ks.end(); };

  {
    std::vector<Requirement> reqs;
    if (has_model("raw_roberta"))
      for (const auto& m : models)
        if (is_bert(m))
          for (auto k : ks) reqs.push_back(model_requirement(m, "raw_roberta", k));
    resolve("bert_over_raw_roberta", "each BERT embedding outperforms raw RoBERTa at every k", true, reqs);
  }
  {
    std::vector<Requirement> reqs;
    for (const auto& m : models)
      if (is_bert(m))
        for (const auto& other : models)
          if (is_roberta(other))
            for (auto k : ks) reqs.push_back(model_requirement(m, other, k));
    resolve("bert_over_roberta", "BERT embeddings outperform RoBERTa embeddings across k", false, reqs);
  }
  {
    std::vector<Requirement> reqs;
    if (has_k(25)) {
      if (has_k(3)) reqs.push_back(k_requirement(3, 25));
      if (has_k(10)) reqs.push_back(k_requirement(10, 25));
    }
    resolve("small_k_over_k25", "k=3 and k=10 outperform k=25 across embeddings", false, reqs);
  }
  {
    std::vector<Requirement> reqs;
    if (has_model("mini_bert") && has_k(3))
      for (const auto& m : models)
        if (m != "mini_bert") reqs.push_back(model_requirement("mini_bert", m, 3));
    resolve("mini_bert_best_at_k3", "mini BERT outperforms every other embedding at k=3", false, reqs);
  }
  return report;
}

std::string results_csv(std::span<const RunResult> results) {
  std::string out = "model,k,run,accuracy\n";
  for (const auto& r : results) {
    out += csv::escape(r.model_name);
    out += ',' + std::to_string(r.k) + ',' + std::to_string(r.run_index) + ',' + format_general(r.accuracy, 17) + '\n';
  }
  return out;
}

std::vector<RunResult> parse_results_csv(std::string_view text) {
  const auto records = csv::parse(text);
  if (records.empty() || records.front().fields != std::vector<std::string>{"model", "k", "run", "accuracy"})
    throw FormatError("results csv: expected header model,k,run,accuracy");
  std::vector<RunResult> out;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    if (f.size() != 4) throw FormatError("results csv line " + std::to_string(records[i].line) + ": expected 4 fields");
    try {
      RunResult r;
      r.model_name = f[0];
      r.k = std::stoul(f[1]);
      r.run_index = std::stoul(f[2]);
      r.accuracy = std::stod(f[3]);
      if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0)) throw std::out_of_range("accuracy");
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("results csv line " + std::to_string(records[i].line) + ": bad value");
    }
  }
  return out;
}

std::string display_name(std::string_view model_name) {
  static const std::map<std::string_view, std::string_view> kNames = {
      {"full_bert", "Full BERT"}, {"mini_bert", "Mini BERT"}, {"full_roberta", "Full RoBERTa"}, {"raw_roberta", "Raw RoBERTa"}};
  const auto it = kNames.find(model_name);
  return std::string(it == kNames.end() ? model_name : it->second);
}

namespace {

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string format_p(double p) {
  if (p < 1e-4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", p);
    return buf;
  }
  return format_fixed(p, 4);
}

}  // namespace

std::string render_table(const ComparisonReport& report) {
  std::vector<std::string> models;
  std::vector<std::size_t> ks;
  for (const auto& c : report.grid) {
    if (std::find(models.begin(), models.end(), c.model_name) == models.end()) models.push_back(c.model_name);
    if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) ks.push_back(c.k);
  }
  std::size_t name_width = std::string("Embedding").size();
  for (const auto& m : models) name_width = std::max(name_width, display_name(m).size());
  constexpr std::size_t kCellWidth = 18;

  std::string out = "Embedding Results (mean accuracy, (min,max) over runs)\n\n";
  out += pad("Embedding", name_width);
  for (auto k : ks) out += " | " + pad("K=" + std::to_string(k), kCellWidth);
  out += '\n' + std::string(name_width, '-');
  for (std::size_t i = 0; i < ks.size(); ++i) out += "-+-" + std::string(kCellWidth, '-');
  out += '\n';
  for (const auto& m : models) {
    out += pad(display_name(m), name_width);
    for (auto k : ks) {
      const auto it = std::find_if(report.grid.begin(), report.grid.end(),
                                   [&](const GridCell& c) { return c.model_name == m && c.k == k; });
      std::string cell = "-";
      if (it != report.grid.end())
        cell = format_fixed(it->cell.mean, 2) + " (" + format_fixed(it->cell.low, 2) + "," +
               format_fixed(it->cell.high, 2) + ")";
      out += " | " + pad(cell, kCellWidth);
    }
    out += '\n';
  }

  out += "\nWelch t-tests, Bonferroni family size m = " + std::to_string(report.family_size) +
         ", significance level " + format_general(report.alpha, 3) + "\n";
  for (const auto& t : report.tests) {
    out += "  " + pad(t.name, 40) + " t=" + pad(format_general(t.result.t_stat, 5), 11) +
           " adj.p=" + pad(format_p(t.adjusted_p), 10) + (t.significant ? " *" : "  ");
    if (!t.note.empty()) out += "  (" + t.note + ")";
    out += '\n';
  }
  out += "\nClaims\n";
  for (const auto& c : report.claims) {
    out += "  [" + std::string(to_string(c.status)) + "] " + c.description + (c.gated ? "" : " (reported, not gated)");
    if (c.status != ClaimStatus::not_evaluated) out += "  max adj.p=" + format_p(c.max_adjusted_p);
    out += '\n';
  }
  out += "\nSplits are shared across embeddings and k within each run (paired design).\n";
  for (const auto& w : report.warnings) out += "warning: " + w + '\n';
  return out;
}

std::string report_json(const ComparisonReport& report, const ReportContext& context) {
  using nlohmann::ordered_json;
  auto finite_or_null = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };

  ordered_json j;
  j["format"] = "bias-bench-report/1";
  j["config_digest"] = context.config_digest;
  j["seeds"] = {{"master_seed", context.master_seed}, {"corpus_seed", context.corpus_seed}};
  j["train_fraction"] = context.train_fraction;
  j["runs"] = context.runs;
  j["k_values"] = context.k_values;
  j["pairing"] = "train/test split shared across all embeddings and k values within a run";
  j["interval_note"] = "low/high are observed min/max over runs; ci95 is mean +/- 1.96 sd/sqrt(runs)";

  ordered_json cells = ordered_json::array();
  for (const auto& c : report.grid) {
    cells.push_back({{"model", c.model_name},
                     {"k", c.k},
                     {"runs", c.cell.runs},
                     {"mean", c.cell.mean},
                     {"low", c.cell.low},
                     {"high", c.cell.high},
                     {"sd", c.cell.sd},
                     {"ci95_low", c.cell.ci95_low},
                     {"ci95_high", c.cell.ci95_high}});
  }
  j["cells"] = cells;

  j["test"] = "welch";
  j["correction"] = "bonferroni";
  j["family_size"] = report.family_size;
  j["alpha"] = report.alpha;
  ordered_json tests = ordered_json::array();
  for (const auto& t : report.tests) {
    ordered_json e{{"name", t.name},
                   {"a", t.group_a},
                   {"b", t.group_b},
                   {"mean_a", t.mean_a},
                   {"mean_b", t.mean_b},
                   {"t", finite_or_null(t.result.t_stat)},
                   {"df", finite_or_null(t.result.df)},
                   {"p", t.result.p_two_sided},
                   {"adjusted_p", t.adjusted_p},
                   {"significant", t.significant}};
    if (!t.note.empty()) e["note"] = t.note;
    tests.push_back(std::move(e));
  }
  j["tests"] = tests;

  ordered_json claims = ordered_json::array();
  for (const auto& c : report.claims) {
    ordered_json e{{"id", c.id}, {"description", c.description}, {"gated", c.gated}, {"status", to_string(c.status)}};
    if (c.status != ClaimStatus::not_evaluated) e["max_adjusted_p"] = c.max_adjusted_p;
    e["tests"] = c.tests;
    claims.push_back(std::move(e));
  }
  j["claims"] = claims;

  ordered_json splits = ordered_json::array();
  for (const auto& s : context.splits)
    splits.push_back({{"run", s.run_index}, {"seed", s.seed}, {"digest", s.digest}, {"train", s.train_size}, {"test", s.test_size}});
  j["splits"] = splits;
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

}  // namespace biasbench::eval
