#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace biasbench {

enum class BiasClass { religion = 0, race = 1, gender = 2, orientation = 3 };

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<BiasClass, kNumClasses> kAllClasses = {
    BiasClass::religion, BiasClass::race, BiasClass::gender, BiasClass::orientation};

std::string_view to_string(BiasClass c) noexcept;

/// Parses one of "religion", "race", "gender", "orientation" (exact match).
/// Throws DataError on anything else.
BiasClass parse_bias_class(std::string_view label);

inline std::size_t class_index(BiasClass c) noexcept { return static_cast<std::size_t>(c); }

struct Document {
  std::string id;
  std::string text;
  BiasClass label;

  friend bool operator==(const Document&, const Document&) = default;
};

/// Ordered, id-unique collection of labeled documents.
class Corpus {
public:
  Corpus() = default;
  /// Throws DataError on empty or duplicate ids.
  Corpus(std::vector<Document> documents, std::string provenance);

  const std::vector<Document>& documents() const noexcept { return documents_; }
  const std::string& provenance() const noexcept { return provenance_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }
  const Document& operator[](std::size_t i) const { return documents_[i]; }

  /// Number of documents per class, indexed by class_index().
  std::array<std::size_t, kNumClasses> class_counts() const;

private:
  std::vector<Document> documents_;
  std::string provenance_;
};

enum class CorpusFormat { automatic, csv, jsonl };

/// Column mapping for corpus files. Either `label_column` names a column of
/// label strings, or `fixed_label` assigns one class to every row of the file.
/// When `id_column` is empty, ids are synthesized as "<file stem>:<row>".
struct ColumnConfig {
  std::string text_column = "text";
  std::string label_column = "label";
  std::optional<BiasClass> fixed_label;
  std::string id_column = "id";
  CorpusFormat format = CorpusFormat::automatic;
};

struct LoadedCorpus {
  Corpus corpus;
  std::size_t skipped_empty_text = 0;
};

/// Reads a CSV (RFC 4180, header row) or JSON-lines corpus file.
/// Rows with empty text are skipped and counted.
LoadedCorpus load_corpus(const std::filesystem::path& path, const ColumnConfig& columns);

/// Concatenates corpora in order. Throws DataError on id collisions.
Corpus merge_corpora(const std::vector<Corpus>& parts);

/// Draws exactly `per_class` documents of every class present, uniformly
/// without replacement. Output keeps the input order.
Corpus balance_subsample(const Corpus& corpus, std::size_t per_class, std::uint64_t seed);

struct SplitIndices {
  std::vector<std::string> train;
  std::vector<std::string> test;
  /// Corpus positions of `train` / `test`, ascending.
  std::vector<std::size_t> train_positions;
  std::vector<std::size_t> test_positions;
  std::uint64_t seed = 0;
  double train_fraction = 0.0;

  /// FNV-1a digest of the train id list; identifies the split.
  std::string digest() const;
};

/// Stratified train/test split. Each class contributes floor(f * n_c) train
/// documents; the remaining round(f * N) - sum(floor) train slots go one per
/// class in class order.
SplitIndices stratified_split(const Corpus& corpus, double train_fraction, std::uint64_t seed);

/// Canonical JSON-lines serialization ({"id","text","label"} per line).
std::string to_jsonl(const Corpus& corpus);

}  // namespace biasbench
