#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "biasbench/corpus.hpp"
#include "biasbench/eval.hpp"
#include "biasbench/plot.hpp"
#include "biasbench/tsne.hpp"

namespace biasbench::pipeline {

inline constexpr std::string_view kVersion = "1.0.0";

struct CorpusSource {
  std::filesystem::path path;
  ColumnConfig columns;
};

/// Everything the subcommands need, parsed from one JSON document.
/// Relative paths resolve against the config file's directory.
struct PipelineConfig {
  std::vector<CorpusSource> corpus_sources;
  /// Balanced corpus to read in tsne/eval; defaults to <output_dir>/corpus.jsonl.
  std::optional<std::filesystem::path> balanced_corpus;
  std::size_t per_class = 504;
  std::uint64_t corpus_seed = 0;
  std::uint64_t master_seed = 0;
  std::vector<eval::ModelInput> embeddings;
  tsne::TsneConfig tsne;
  std::vector<std::size_t> k_values{3, 10, 25};
  std::size_t runs = 50;
  double train_fraction = 0.7;
  std::filesystem::path output_dir = "out";
  plot::PlotStyle plot;
  std::size_t jobs = 0;

  std::filesystem::path corpus_path() const {
    return balanced_corpus.value_or(output_dir / "corpus.jsonl");
  }
};

/// Throws ConfigError on unknown keys, wrong types or missing seeds.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the effective configuration and its digest.
std::string canonical_config(const PipelineConfig& config);
std::string config_digest(const PipelineConfig& config);

struct SampleSummary {
  std::size_t documents = 0;
  std::array<std::size_t, kNumClasses> counts{};
  std::size_t skipped_empty_text = 0;
  std::string corpus_digest;
};

/// Loads every source, balances classes, writes corpus.jsonl and
/// sample_manifest.json to the output directory.
SampleSummary cmd_sample(const PipelineConfig& config);

struct TsneSummary {
  std::size_t points = 0;
  double final_kl = 0.0;
  double neighbor_purity = 0.0;
  std::size_t unconverged_rows = 0;
};

/// Projects one model's embeddings; writes tsne_<model>.csv, tsne_<model>_kl.csv
/// and tsne_<model>.svg.
TsneSummary cmd_tsne(const PipelineConfig& config, const std::string& model_name);

/// Runs the full grid; writes results.csv, report.json and table.txt only after
/// every run has succeeded.
eval::ComparisonReport cmd_eval(const PipelineConfig& config);

/// Rebuilds report.json and table.txt from an existing results.csv.
eval::ComparisonReport cmd_report(const PipelineConfig& config);

/// Serializations shared by the commands.
std::string projection_csv(const Corpus& corpus, const Matrix& coords);
std::string kl_trace_csv(std::span<const double> kl_trace);

}  // namespace biasbench::pipeline
