#include "biasbench/embedding_store.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "biasbench/errors.hpp"
#include "biasbench/io.hpp"

namespace biasbench {

EmbeddingSet::EmbeddingSet(std::string model_name, std::size_t dim, std::vector<EmbeddingRecord> records)
    : model_name_(std::move(model_name)), dim_(dim), records_(std::move(records)) {
  if (dim_ == 0) throw DataError("embedding dimension must be positive");
  if (records_.empty()) throw DataError("empty embedding set");
  std::unordered_set<std::string_view> ids;
  for (const auto& r : records_) {
    if (r.vector.size() != dim_)
      throw DataError("record \"" + r.doc_id + "\" has " + std::to_string(r.vector.size()) +
                      " values, expected " + std::to_string(dim_));
    for (double v : r.vector)
      if (!std::isfinite(v)) throw DataError("record \"" + r.doc_id + "\" has a non-finite value");
    if (!ids.insert(r.doc_id).second) throw DataError("duplicate doc_id \"" + r.doc_id + "\"");
  }
}

Matrix EmbeddingSet::matrix() const {
  Matrix m(records_.size(), dim_);
  for (std::size_t i = 0; i < records_.size(); ++i)
    std::copy(records_[i].vector.begin(), records_[i].vector.end(), m.row(i).begin());
  return m;
}

std::vector<BiasClass> EmbeddingSet::labels() const {
  std::vector<BiasClass> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.label);
  return out;
}

EmbeddingSet parse_embeddings(std::string_view contents, const std::string& source_name) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < contents.size();) {
    auto end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    lines.push_back(contents.substr(pos, end - pos));
    pos = end + 1;
  }
  auto where = [&](std::size_t line) { return source_name + ":" + std::to_string(line) + ": "; };
  auto parse_line = [&](std::size_t index) {
    if (lines[index].empty()) throw FormatError(where(index + 1) + "blank line");
    try {
      auto obj = nlohmann::json::parse(lines[index]);
      if (!obj.is_object()) throw FormatError(where(index + 1) + "expected a JSON object");
      return obj;
    } catch (const nlohmann::json::out_of_range& e) {
      if (e.id == 406) throw FormatError(where(index + 1) + "non-finite value (number overflow)");
      throw FormatError(where(index + 1) + "invalid JSON: " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where(index + 1) + "invalid JSON: " + e.what());
    }
  };

  if (lines.empty()) throw FormatError(source_name + ": missing header");
  const auto header = parse_line(0);
  if (!header.contains("format") || header["format"] != kEmbeddingFormat)
    throw FormatError(where(1) + "missing header (expected format \"" + std::string(kEmbeddingFormat) + "\")");
  std::string model;
  std::size_t dim = 0;
  std::size_t count = 0;
  try {
    model = header.at("model").get<std::string>();
    dim = header.at("dim").get<std::size_t>();
    count = header.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where(1) + "bad header: " + e.what());
  }
  if (dim == 0) throw FormatError(where(1) + "dim must be positive");
  if (lines.size() == 1 || count == 0) throw FormatError(source_name + ": empty embedding set");

  std::vector<EmbeddingRecord> records;
  records.reserve(count);
  std::unordered_set<std::string> ids;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto obj = parse_line(i);
    EmbeddingRecord rec;
    try {
      rec.doc_id = obj.at("doc_id").get<std::string>();
      rec.label = parse_bias_class(obj.at("label").get<std::string>());
      const auto& vec = obj.at("vector");
      if (!vec.is_array()) throw FormatError("vector is not an array");
      rec.vector.reserve(vec.size());
      for (const auto& v : vec) {
        if (!v.is_number()) throw FormatError("vector holds a non-number");
        rec.vector.push_back(v.get<double>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where(i + 1) + e.what());
    } catch (const Error& e) {
      throw FormatError(where(i + 1) + e.what());
    }
    if (rec.vector.size() != dim)
      throw FormatError(where(i + 1) + "dimension mismatch: " + std::to_string(rec.vector.size()) +
                        " values, header dim " + std::to_string(dim));
    for (double v : rec.vector)
      if (!std::isfinite(v)) throw FormatError(where(i + 1) + "non-finite value");
    if (!ids.insert(rec.doc_id).second) throw FormatError(where(i + 1) + "duplicate doc_id \"" + rec.doc_id + "\"");
    records.push_back(std::move(rec));
  }
  if (records.size() != count)
    throw FormatError(source_name + ": header count " + std::to_string(count) + " but " +
                      std::to_string(records.size()) + " records");
  return EmbeddingSet(std::move(model), dim, std::move(records));
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(read_file(path), path.string());
}

std::string format_embeddings(const EmbeddingSet& set) {
  std::string out;
  out += R"({"format":")";
  out += kEmbeddingFormat;
  out += R"(","model":)" + nlohmann::json(set.model_name()).dump();
  out += ",\"dim\":" + std::to_string(set.dim());
  out += ",\"count\":" + std::to_string(set.size()) + "}\n";
  for (const auto& r : set.records()) {
    out += "{\"doc_id\":" + nlohmann::json(r.doc_id).dump();
    out += ",\"label\":\"" + std::string(to_string(r.label)) + "\",\"vector\":[";
    for (std::size_t j = 0; j < r.vector.size(); ++j) {
      if (j) out += ',';
      out += format_general(r.vector[j], 9);
    }
    out += "]}\n";
  }
  return out;
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  write_file(path, format_embeddings(set));
}

EmbeddingSet align(const EmbeddingSet& set, const Corpus& corpus) {
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) index.emplace(set.records()[i].doc_id, i);

  std::vector<EmbeddingRecord> out;
  out.reserve(corpus.size());
  for (const auto& doc : corpus.documents()) {
    const auto it = index.find(doc.id);
    if (it == index.end())
      throw DataError("embedding set \"" + set.model_name() + "\" is missing document \"" + doc.id + "\"");
    const auto& rec = set.records()[it->second];
    if (rec.label != doc.label)
      throw DataError("label disagreement for \"" + doc.id + "\": corpus " + std::string(to_string(doc.label)) +
                      ", embeddings " + std::string(to_string(rec.label)));
    out.push_back(rec);
  }
  return EmbeddingSet(set.model_name(), set.dim(), std::move(out));
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("euclidean: length mismatch (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace biasbench
