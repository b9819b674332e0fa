#include "biasbench/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "biasbench/csv.hpp"
#include "biasbench/digest.hpp"
#include "biasbench/errors.hpp"
#include "biasbench/io.hpp"
#include "biasbench/random.hpp"

namespace biasbench {

namespace {

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

CorpusFormat detect_format(const std::filesystem::path& path, CorpusFormat requested) {
  if (requested != CorpusFormat::automatic) return requested;
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") return CorpusFormat::jsonl;
  return CorpusFormat::csv;
}

std::string context(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

struct RowBuilder {
  const std::filesystem::path& path;
  const ColumnConfig& columns;
  std::vector<Document> documents;
  std::size_t skipped = 0;

  void add(std::size_t line, std::size_t row_number, std::string id, std::string text,
           std::string_view label_text) {
    if (is_blank(text)) {
      ++skipped;
      return;
    }
    if (!valid_utf8(text)) throw FormatError(context(path, line) + "text is not valid UTF-8");
    BiasClass label;
    if (columns.fixed_label) {
      label = *columns.fixed_label;
    } else {
      try {
        label = parse_bias_class(label_text);
      } catch (const DataError& e) {
        throw DataError(context(path, line) + e.what());
      }
    }
    if (columns.id_column.empty()) id = path.stem().string() + ":" + std::to_string(row_number);
    if (id.empty()) throw DataError(context(path, line) + "empty document id");
    documents.push_back({std::move(id), std::move(text), label});
  }
};

void read_csv(std::string_view contents, RowBuilder& rows) {
  const auto records = csv::parse(contents);
  if (records.empty()) throw DataError(rows.path.string() + ": empty corpus");
  const auto& header = records.front().fields;
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw FormatError(rows.path.string() + ": missing column \"" + name + "\"");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t text_col = column(rows.columns.text_column);
  const std::size_t label_col = rows.columns.fixed_label ? 0 : column(rows.columns.label_column);
  const std::size_t id_col = rows.columns.id_column.empty() ? 0 : column(rows.columns.id_column);

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size())
      throw FormatError(context(rows.path, rec.line) + "expected " + std::to_string(header.size()) +
                        " fields, found " + std::to_string(rec.fields.size()));
    rows.add(rec.line, r, rows.columns.id_column.empty() ? std::string{} : rec.fields[id_col],
             rec.fields[text_col], rows.columns.fixed_label ? std::string_view{} : rec.fields[label_col]);
  }
}

void read_jsonl(std::string_view contents, RowBuilder& rows) {
  std::size_t line_no = 0;
  std::size_t row_number = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    auto line = contents.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (is_blank(line)) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(context(rows.path, line_no) + "invalid JSON: " + e.what());
    }
    if (!obj.is_object()) throw FormatError(context(rows.path, line_no) + "expected a JSON object");
    auto field = [&](const std::string& name) -> std::string {
      const auto it = obj.find(name);
      if (it == obj.end()) throw FormatError(context(rows.path, line_no) + "missing key \"" + name + "\"");
      if (!it->is_string()) throw FormatError(context(rows.path, line_no) + "key \"" + name + "\" is not a string");
      return it->get<std::string>();
    };
    ++row_number;
    std::string id = rows.columns.id_column.empty() ? std::string{} : field(rows.columns.id_column);
    std::string text = field(rows.columns.text_column);
    std::string label = rows.columns.fixed_label ? std::string{} : field(rows.columns.label_column);
    rows.add(line_no, row_number, std::move(id), std::move(text), label);
  }
}

}  // namespace

std::string_view to_string(BiasClass c) noexcept {
  switch (c) {
    case BiasClass::religion: return "religion";
    case BiasClass::race: return "race";
    case BiasClass::gender: return "gender";
    case BiasClass::orientation: return "orientation";
  }
  return "unknown";
}

BiasClass parse_bias_class(std::string_view label) {
  for (BiasClass c : kAllClasses)
    if (label == to_string(c)) return c;
  throw DataError("unknown label \"" + std::string(label) + "\"");
}

Corpus::Corpus(std::vector<Document> documents, std::string provenance)
    : documents_(std::move(documents)), provenance_(std::move(provenance)) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(documents_.size());
  for (const auto& d : documents_) {
    if (d.id.empty()) throw DataError("document with empty id");
    if (!seen.insert(d.id).second) throw DataError("duplicate document id \"" + d.id + "\"");
  }
}

std::array<std::size_t, kNumClasses> Corpus::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& d : documents_) ++counts[class_index(d.label)];
  return counts;
}

LoadedCorpus load_corpus(const std::filesystem::path& path, const ColumnConfig& columns) {
  const std::string contents = read_file(path);
  const auto format = detect_format(path, columns.format);
  RowBuilder rows{path, columns, {}, 0};
  if (format == CorpusFormat::csv)
    read_csv(contents, rows);
  else
    read_jsonl(contents, rows);
  if (rows.documents.empty()) throw DataError(path.string() + ": empty corpus");
  std::string provenance = path.string() + (format == CorpusFormat::csv ? " (csv)" : " (jsonl)");
  try {
    return {Corpus(std::move(rows.documents), std::move(provenance)), rows.skipped};
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Corpus merge_corpora(const std::vector<Corpus>& parts) {
  std::vector<Document> docs;
  std::string provenance;
  for (const auto& part : parts) {
    docs.insert(docs.end(), part.documents().begin(), part.documents().end());
    if (!provenance.empty()) provenance += "; ";
    provenance += part.provenance();
  }
  return Corpus(std::move(docs), std::move(provenance));
}

Corpus balance_subsample(const Corpus& corpus, std::size_t per_class, std::uint64_t seed) {
  if (per_class == 0) throw ConfigError("per_class must be positive");
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < corpus.size(); ++i) members[class_index(corpus[i].label)].push_back(i);

  std::vector<std::size_t> keep;
  for (BiasClass c : kAllClasses) {
    auto& idx = members[class_index(c)];
    if (idx.empty()) continue;
    if (idx.size() < per_class)
      throw DataError("class " + std::string(to_string(c)) + " has " + std::to_string(idx.size()) +
                      " documents, fewer than per_class=" + std::to_string(per_class));
    if (idx.size() > per_class) {
      // One independent stream per class, so a class's draw does not depend
      // on the sizes of the others.
      Rng rng(derive_seed(seed, class_index(c)));
      // Partial Fisher-Yates: the first per_class slots become the sample.
      for (std::size_t i = 0; i < per_class; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
      }
      idx.resize(per_class);
    }
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());

  std::vector<Document> docs;
  docs.reserve(keep.size());
  for (auto i : keep) docs.push_back(corpus[i]);
  return Corpus(std::move(docs), corpus.provenance() + " | balanced per_class=" + std::to_string(per_class) +
                                     " seed=" + std::to_string(seed));
}

std::string SplitIndices::digest() const {
  Fnv1a h;
  for (const auto& id : train) {
    h.update(id);
    h.update(std::string_view("\n", 1));
  }
  return h.hex();
}

SplitIndices stratified_split(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0,1), got " + format_general(train_fraction, 17));

  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < corpus.size(); ++i) members[class_index(corpus[i].label)].push_back(i);

  // Small slack so fractions like 0.7 * 10 land on the intended integer.
  constexpr double kSlack = 1e-9;
  std::array<std::size_t, kNumClasses> n_train{};
  std::size_t floor_sum = 0;
  for (BiasClass c : kAllClasses) {
    const auto n = members[class_index(c)].size();
    if (n == 0) continue;
    if (n < 2)
      throw DataError("class " + std::string(to_string(c)) + " has fewer than 2 documents; cannot split");
    n_train[class_index(c)] = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + kSlack));
    floor_sum += n_train[class_index(c)];
  }
  const auto target = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(corpus.size()) + 0.5 + kSlack));
  std::size_t remainder = target > floor_sum ? target - floor_sum : 0;
  for (BiasClass c : kAllClasses) {
    if (remainder == 0) break;
    if (members[class_index(c)].empty()) continue;
    ++n_train[class_index(c)];
    --remainder;
  }

  SplitIndices split;
  split.seed = seed;
  split.train_fraction = train_fraction;
  for (BiasClass c : kAllClasses) {
    auto idx = members[class_index(c)];
    if (idx.empty()) continue;
    const auto k = n_train[class_index(c)];
    if (k == 0 || k == idx.size())
      throw DataError("class " + std::string(to_string(c)) + " of size " + std::to_string(idx.size()) +
                      " cannot place a document on both sides of the split");
    Rng rng(derive_seed(seed, class_index(c)));
    rng.shuffle(std::span<std::size_t>(idx));
    split.train_positions.insert(split.train_positions.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    split.test_positions.insert(split.test_positions.end(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  }
  std::sort(split.train_positions.begin(), split.train_positions.end());
  std::sort(split.test_positions.begin(), split.test_positions.end());
  for (auto i : split.train_positions) split.train.push_back(corpus[i].id);
  for (auto i : split.test_positions) split.test.push_back(corpus[i].id);
  return split;
}

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.documents()) {
    nlohmann::ordered_json obj;
    obj["id"] = d.id;
    obj["text"] = d.text;
    obj["label"] = to_string(d.label);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

}  // namespace biasbench
