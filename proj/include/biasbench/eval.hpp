#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "biasbench/corpus.hpp"
#include "biasbench/embedding_store.hpp"
#include "biasbench/stats.hpp"

namespace biasbench::eval {

struct ModelInput {
  std::string name;
  std::filesystem::path path;
};

struct ExperimentConfig {
  /// Models in report order.
  std::vector<ModelInput> embedding_paths;
  std::vector<std::size_t> k_values{3, 10, 25};
  std::size_t runs = 50;
  double train_fraction = 0.7;
  std::uint64_t master_seed = 0;
  std::size_t per_class = 504;
  /// Worker threads; 0 means one per hardware thread.
  std::size_t jobs = 1;
};

struct RunResult {
  std::string model_name;
  std::size_t k = 0;
  std::size_t run_index = 0;
  double accuracy = 0.0;
  /// Digest of the train/test split this run used (empty when read back from CSV).
  std::string split_digest;

  friend bool operator==(const RunResult&, const RunResult&) = default;
};

struct SplitRecord {
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
  std::string digest;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

struct Experiment {
  /// Ordered by (model, k, run) following the configured model and k order.
  std::vector<RunResult> results;
  std::vector<SplitRecord> splits;
};

/// Loads every configured embedding file, aligns it to `corpus`, and runs the
/// grid. The corpus must already be balanced at `config.per_class`.
Experiment run_experiment(const ExperimentConfig& config, const Corpus& corpus);

/// Runs the repeated-split KNN grid over already aligned embedding sets.
/// Run r uses split seed derive_seed(master_seed, r) for every model and k.
Experiment run_grid(std::span<const EmbeddingSet> aligned, const Corpus& corpus, const ExperimentConfig& config);

/// Mean and observed range over runs, plus a normal-approximation 95% CI.
struct SummaryCell {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
  double sd = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  std::size_t runs = 0;
};

struct GridCell {
  std::string model_name;
  std::size_t k = 0;
  SummaryCell cell;
};

/// One cell per (model, k), in order of first appearance.
std::vector<GridCell> summarize(std::span<const RunResult> results);

struct PairwiseTest {
  std::string name;
  std::string group_a;
  std::string group_b;
  double mean_a = 0.0;
  double mean_b = 0.0;
  stats::TestResult result;
  double adjusted_p = 1.0;
  /// adjusted_p below the significance level.
  bool significant = false;
  /// Set when the test was resolved without a t statistic (zero variance).
  std::string note;
};

enum class ClaimStatus { pass, fail, not_evaluated };

std::string_view to_string(ClaimStatus status) noexcept;

struct Claim {
  std::string id;
  std::string description;
  /// Gated claims decide acceptance; the rest are reported only.
  bool gated = false;
  ClaimStatus status = ClaimStatus::not_evaluated;
  std::vector<std::string> tests;
  double max_adjusted_p = 1.0;
};

struct ComparisonReport {
  std::vector<GridCell> grid;
  std::vector<PairwiseTest> tests;
  std::size_t family_size = 0;
  double alpha = 0.01;
  std::vector<Claim> claims;
  std::vector<std::string> warnings;
};

/// Run counts below this are flagged in reports.
inline constexpr std::size_t kMinPoweredRuns = 30;

/// Welch tests for every model pair within each k and every k pair pooled
/// across models; Bonferroni over the whole family.
ComparisonReport compare(std::span<const RunResult> results, double alpha = 0.01);

/// "model,k,run,accuracy" with a header row.
std::string results_csv(std::span<const RunResult> results);
std::vector<RunResult> parse_results_csv(std::string_view text);

/// Human-readable name for the standard model aliases ("mini_bert" -> "Mini BERT").
std::string display_name(std::string_view model_name);

/// Accuracy grid laid out with one row per model and one column per k,
/// followed by the pairwise tests and claim outcomes.
std::string render_table(const ComparisonReport& report);

struct ReportContext {
  std::uint64_t master_seed = 0;
  std::uint64_t corpus_seed = 0;
  double train_fraction = 0.0;
  std::size_t runs = 0;
  std::vector<std::size_t> k_values;
  std::vector<SplitRecord> splits;
  std::string config_digest;
};

std::string report_json(const ComparisonReport& report, const ReportContext& context);

}  // namespace biasbench::eval
