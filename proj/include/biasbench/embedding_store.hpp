#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "biasbench/corpus.hpp"
#include "biasbench/matrix.hpp"

namespace biasbench {

inline constexpr std::string_view kEmbeddingFormat = "bias-bench-emb/1";

struct EmbeddingRecord {
  std::string doc_id;
  BiasClass label;
  std::vector<double> vector;
};

/// Vectors from one embedding model, one per document, all of length `dim`.
class EmbeddingSet {
public:
  EmbeddingSet() = default;
  /// Validates dimension, finiteness and id uniqueness; throws DataError.
  EmbeddingSet(std::string model_name, std::size_t dim, std::vector<EmbeddingRecord> records);

  const std::string& model_name() const noexcept { return model_name_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<EmbeddingRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  /// Packs the vectors into a size() x dim() matrix in record order.
  Matrix matrix() const;
  std::vector<BiasClass> labels() const;

private:
  std::string model_name_;
  std::size_t dim_ = 0;
  std::vector<EmbeddingRecord> records_;
};

/// Reads the bias-bench-emb/1 JSON-lines format. Errors name the offending
/// 1-based file line.
EmbeddingSet read_embeddings(const std::filesystem::path& path);
EmbeddingSet parse_embeddings(std::string_view contents, const std::string& source_name = "<memory>");

/// Canonical serialization: fixed key order, 9 significant digits per value.
std::string format_embeddings(const EmbeddingSet& set);
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

/// Filters and reorders `set` to the corpus id order, checking labels.
EmbeddingSet align(const EmbeddingSet& set, const Corpus& corpus);

/// Euclidean distance. Throws std::invalid_argument on length mismatch.
double euclidean(std::span<const double> a, std::span<const double> b);

}  // namespace biasbench
