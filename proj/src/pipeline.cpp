#include "biasbench/pipeline.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "biasbench/csv.hpp"
#include "biasbench/digest.hpp"
#include "biasbench/embedding_store.hpp"
#include "biasbench/errors.hpp"
#include "biasbench/io.hpp"
#include "biasbench/knn.hpp"
#include "biasbench/random.hpp"

namespace biasbench::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Reads typed keys from one JSON object and rejects keys never read.
class Section {
public:
  Section(const ordered_json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (!obj_.is_object()) throw ConfigError("config: " + name_ + " must be an object");
  }

  template <typename T>
  std::optional<T> get(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return std::nullopt;
    try {
      if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) throw ConfigError("expected a non-negative integer");
      }
      return it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: " + path(key) + " has the wrong type");
    } catch (const ConfigError& e) {
      throw ConfigError("config: " + path(key) + ": " + e.what());
    }
  }

  const ordered_json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  void finish() const {
    for (const auto& [key, _] : obj_.items())
      if (!seen_.count(key)) throw ConfigError("config: unknown key " + path(key));
  }

  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

private:
  const ordered_json& obj_;
  std::string name_;
  std::set<std::string> seen_;
};

CorpusFormat parse_format(const std::string& s) {
  if (s == "auto") return CorpusFormat::automatic;
  if (s == "csv") return CorpusFormat::csv;
  if (s == "jsonl") return CorpusFormat::jsonl;
  throw ConfigError("config: corpus format must be auto, csv or jsonl");
}

std::string_view format_name(CorpusFormat f) {
  switch (f) {
    case CorpusFormat::automatic: return "auto";
    case CorpusFormat::csv: return "csv";
    case CorpusFormat::jsonl: return "jsonl";
  }
  return "auto";
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

Corpus load_balanced_corpus(const PipelineConfig& config) {
  const auto path = config.corpus_path();
  if (!fs::exists(path)) throw ConfigError("balanced corpus " + path.string() + " not found (run `sample` first)");
  ColumnConfig columns;
  columns.format = CorpusFormat::jsonl;
  return load_corpus(path, columns).corpus;
}

const eval::ModelInput& find_model(const PipelineConfig& config, const std::string& name) {
  for (const auto& m : config.embeddings)
    if (m.name == name) return m;
  std::string names;
  for (const auto& m : config.embeddings) names += (names.empty() ? "" : ", ") + m.name;
  throw ConfigError("unknown model \"" + name + "\"; configured models: " + (names.empty() ? "(none)" : names));
}

void update_manifest(const PipelineConfig& config, const std::string& step, ordered_json details) {
  const auto path = config.output_dir / "manifest.json";
  ordered_json manifest;
  if (fs::exists(path)) {
    try {
      manifest = ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception&) {
      manifest = ordered_json::object();
    }
  }
  manifest["tool"] = "bias-bench";
  manifest["versions"] = {{"bias_bench", kVersion},
                          {"embedding_format", kEmbeddingFormat},
                          {"report_format", "bias-bench-report/1"},
                          {"rng", "mt19937_64 + splitmix64 seed derivation"}};
  manifest["config_digest"] = config_digest(config);
  manifest["seeds"] = {{"corpus_seed", config.corpus_seed},
                       {"master_seed", config.master_seed},
                       {"tsne_seed", config.tsne.seed}};
  details["config_digest"] = config_digest(config);
  manifest["steps"][step] = std::move(details);
  write_file(path, manifest.dump(2) + "\n");
}

void ensure_output_dir(const PipelineConfig& config) {
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw Error("cannot create output directory " + config.output_dir.string());
}

eval::ExperimentConfig experiment_config(const PipelineConfig& config) {
  eval::ExperimentConfig ec;
  ec.embedding_paths = config.embeddings;
  ec.k_values = config.k_values;
  ec.runs = config.runs;
  ec.train_fraction = config.train_fraction;
  ec.master_seed = config.master_seed;
  ec.per_class = config.per_class;
  ec.jobs = config.jobs;
  return ec;
}

eval::ReportContext report_context(const PipelineConfig& config, std::vector<eval::SplitRecord> splits) {
  return {config.master_seed, config.corpus_seed, config.train_fraction, config.runs,
          config.k_values,   std::move(splits),   config_digest(config)};
}

}  // namespace

PipelineConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  PipelineConfig cfg;
  Section top(root, "");

  if (const auto* corpus = top.child("corpus")) {
    Section sec(*corpus, "corpus");
    if (const auto* sources = sec.child("sources")) {
      if (!sources->is_array()) throw ConfigError("config: corpus.sources must be an array");
      for (std::size_t i = 0; i < sources->size(); ++i) {
        Section src((*sources)[i], "corpus.sources[" + std::to_string(i) + "]");
        CorpusSource cs;
        const auto path = src.get<std::string>("path");
        if (!path) throw ConfigError("config: " + src.path("path") + " is required");
        cs.path = resolve(base_dir, *path);
        if (auto v = src.get<std::string>("format")) cs.columns.format = parse_format(*v);
        if (auto v = src.get<std::string>("text_column")) cs.columns.text_column = *v;
        if (auto v = src.get<std::string>("label_column")) cs.columns.label_column = *v;
        if (auto v = src.get<std::string>("label")) cs.columns.fixed_label = parse_bias_class(*v);
        if (src.has("id_column")) cs.columns.id_column = src.get<std::string>("id_column").value_or("");
        src.finish();
        cfg.corpus_sources.push_back(std::move(cs));
      }
    }
    if (auto v = sec.get<std::size_t>("per_class")) cfg.per_class = *v;
    if (auto v = sec.get<std::string>("balanced")) cfg.balanced_corpus = resolve(base_dir, *v);
    sec.finish();
  }

  const auto* seeds = top.child("seeds");
  if (!seeds) throw ConfigError("config: seeds.corpus_seed and seeds.master_seed are required");
  {
    Section sec(*seeds, "seeds");
    const auto corpus_seed = sec.get<std::uint64_t>("corpus_seed");
    const auto master_seed = sec.get<std::uint64_t>("master_seed");
    if (!corpus_seed || !master_seed) throw ConfigError("config: seeds.corpus_seed and seeds.master_seed are required");
    cfg.corpus_seed = *corpus_seed;
    cfg.master_seed = *master_seed;
    cfg.tsne.seed = cfg.master_seed;
    sec.finish();
  }

  if (const auto* emb = top.child("embeddings")) {
    if (!emb->is_object()) throw ConfigError("config: embeddings must map model names to paths");
    for (const auto& [name, value] : emb->items()) {
      if (!value.is_string()) throw ConfigError("config: embeddings." + name + " must be a path string");
      cfg.embeddings.push_back({name, resolve(base_dir, value.get<std::string>())});
    }
  }

  if (const auto* t = top.child("tsne")) {
    Section sec(*t, "tsne");
    auto& c = cfg.tsne;
    if (auto v = sec.get<std::size_t>("out_dim")) c.out_dim = *v;
    if (auto v = sec.get<double>("perplexity")) c.perplexity = *v;
    if (auto v = sec.get<std::size_t>("n_iter")) c.n_iter = *v;
    if (auto v = sec.get<double>("learning_rate")) c.learning_rate = *v;
    if (auto v = sec.get<double>("early_exaggeration")) c.early_exaggeration = *v;
    if (auto v = sec.get<std::size_t>("exaggeration_iters")) c.exaggeration_iters = *v;
    if (auto v = sec.get<double>("initial_momentum")) c.initial_momentum = *v;
    if (auto v = sec.get<double>("final_momentum")) c.final_momentum = *v;
    if (auto v = sec.get<std::size_t>("momentum_switch_iter")) c.momentum_switch_iter = *v;
    if (auto v = sec.get<double>("init_scale")) c.init_scale = *v;
    if (auto v = sec.get<std::uint64_t>("seed")) c.seed = *v;
    if (auto v = sec.get<double>("perplexity_tol")) c.perplexity_tol = *v;
    if (auto v = sec.get<std::size_t>("perplexity_max_steps")) c.perplexity_max_steps = *v;
    sec.finish();
  }

  if (const auto* e = top.child("eval")) {
    Section sec(*e, "eval");
    if (auto v = sec.get<std::vector<std::size_t>>("k_values")) cfg.k_values = *v;
    if (auto v = sec.get<std::size_t>("runs")) cfg.runs = *v;
    if (auto v = sec.get<double>("train_fraction")) cfg.train_fraction = *v;
    if (auto v = sec.get<std::size_t>("jobs")) cfg.jobs = *v;
    sec.finish();
  }

  if (const auto* p = top.child("plot")) {
    Section sec(*p, "plot");
    auto& s = cfg.plot;
    if (auto v = sec.get<double>("width")) s.width = *v;
    if (auto v = sec.get<double>("height")) s.height = *v;
    if (auto v = sec.get<double>("margin")) s.margin = *v;
    if (auto v = sec.get<double>("point_radius")) s.point_radius = *v;
    if (const auto* colors = sec.child("colors")) {
      Section cs(*colors, "plot.colors");
      for (BiasClass c : kAllClasses)
        if (auto v = cs.get<std::string>(std::string(to_string(c)))) s.colors[class_index(c)] = *v;
      cs.finish();
    }
    sec.finish();
  }

  if (auto v = top.get<std::string>("output_dir")) cfg.output_dir = resolve(base_dir, *v);
  top.finish();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

std::string canonical_config(const PipelineConfig& c) {
  ordered_json j;
  ordered_json sources = ordered_json::array();
  for (const auto& s : c.corpus_sources) {
    ordered_json e{{"path", s.path.generic_string()},
                   {"format", format_name(s.columns.format)},
                   {"text_column", s.columns.text_column},
                   {"id_column", s.columns.id_column}};
    if (s.columns.fixed_label)
      e["label"] = to_string(*s.columns.fixed_label);
    else
      e["label_column"] = s.columns.label_column;
    sources.push_back(std::move(e));
  }
  j["corpus"] = {{"sources", sources}, {"per_class", c.per_class}};
  if (c.balanced_corpus) j["corpus"]["balanced"] = c.balanced_corpus->generic_string();
  j["seeds"] = {{"corpus_seed", c.corpus_seed}, {"master_seed", c.master_seed}};
  ordered_json emb = ordered_json::object();
  for (const auto& m : c.embeddings) emb[m.name] = m.path.generic_string();
  j["embeddings"] = emb;
  const auto& t = c.tsne;
  j["tsne"] = {{"out_dim", t.out_dim},
               {"perplexity", t.perplexity},
               {"n_iter", t.n_iter},
               {"learning_rate", t.learning_rate},
               {"early_exaggeration", t.early_exaggeration},
               {"exaggeration_iters", t.exaggeration_iters},
               {"initial_momentum", t.initial_momentum},
               {"final_momentum", t.final_momentum},
               {"momentum_switch_iter", t.momentum_switch_iter},
               {"init_scale", t.init_scale},
               {"seed", t.seed},
               {"perplexity_tol", t.perplexity_tol},
               {"perplexity_max_steps", t.perplexity_max_steps}};
  // jobs is omitted: it cannot change any output.
  j["eval"] = {{"k_values", c.k_values}, {"runs", c.runs}, {"train_fraction", c.train_fraction}};
  ordered_json colors;
  for (BiasClass cl : kAllClasses) colors[std::string(to_string(cl))] = c.plot.colors[class_index(cl)];
  j["plot"] = {{"width", c.plot.width},
               {"height", c.plot.height},
               {"margin", c.plot.margin},
               {"point_radius", c.plot.point_radius},
               {"colors", colors}};
  return j.dump();
}

std::string config_digest(const PipelineConfig& config) { return digest_hex(canonical_config(config)); }

SampleSummary cmd_sample(const PipelineConfig& config) {
  if (config.corpus_sources.empty()) throw ConfigError("config: corpus.sources is empty");
  std::vector<Corpus> parts;
  ordered_json source_info = ordered_json::array();
  SampleSummary summary;
  for (const auto& src : config.corpus_sources) {
    auto loaded = load_corpus(src.path, src.columns);
    summary.skipped_empty_text += loaded.skipped_empty_text;
    source_info.push_back({{"path", src.path.generic_string()},
                           {"documents", loaded.corpus.size()},
                           {"skipped_empty_text", loaded.skipped_empty_text}});
    parts.push_back(std::move(loaded.corpus));
  }
  const Corpus merged = merge_corpora(parts);
  const Corpus balanced = balance_subsample(merged, config.per_class, config.corpus_seed);
  const std::string jsonl = to_jsonl(balanced);

  summary.documents = balanced.size();
  summary.counts = balanced.class_counts();
  summary.corpus_digest = digest_hex(jsonl);

  ordered_json manifest;
  manifest["per_class"] = config.per_class;
  manifest["corpus_seed"] = config.corpus_seed;
  manifest["documents"] = summary.documents;
  ordered_json counts;
  const auto input_counts = merged.class_counts();
  ordered_json in_counts;
  for (BiasClass c : kAllClasses) {
    counts[std::string(to_string(c))] = summary.counts[class_index(c)];
    in_counts[std::string(to_string(c))] = input_counts[class_index(c)];
  }
  manifest["counts"] = counts;
  manifest["input_counts"] = in_counts;
  manifest["skipped_empty_text"] = summary.skipped_empty_text;
  manifest["sources"] = source_info;
  manifest["corpus_digest"] = summary.corpus_digest;

  ensure_output_dir(config);
  const auto corpus_out = config.output_dir / "corpus.jsonl";
  write_file(corpus_out, jsonl);
  write_file(config.output_dir / "sample_manifest.json", manifest.dump(2) + "\n");
  update_manifest(config, "sample", manifest);
  return summary;
}

std::string projection_csv(const Corpus& corpus, const Matrix& coords) {
  std::string out = "doc_id,label,x,y\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out += csv::escape(corpus[i].id) + ',' + std::string(to_string(corpus[i].label)) + ',' +
           format_general(coords(i, 0), 9) + ',' + format_general(coords.cols() > 1 ? coords(i, 1) : 0.0, 9) + '\n';
  }
  return out;
}

std::string kl_trace_csv(std::span<const double> kl_trace) {
  std::string out = "iter,kl\n";
  for (std::size_t i = 0; i < kl_trace.size(); ++i) out += std::to_string(i) + ',' + format_general(kl_trace[i], 12) + '\n';
  return out;
}

TsneSummary cmd_tsne(const PipelineConfig& config, const std::string& model_name) {
  const auto& model = find_model(config, model_name);
  const Corpus corpus = load_balanced_corpus(config);
  const auto raw = read_embeddings(model.path);
  const auto set = align(raw, corpus);
  const auto projection = tsne::run_tsne(set, config.tsne);
  const auto labels = set.labels();

  TsneSummary summary;
  summary.points = set.size();
  summary.final_kl = projection.kl_trace.back();
  summary.neighbor_purity = knn::neighbor_purity(projection.coords, labels);
  summary.unconverged_rows = projection.unconverged_rows.size();

  auto style = config.plot;
  style.title = "t-SNE embedding of " + model_name;
  const std::string svg = plot::render_scatter_svg(projection.coords, labels, style);
  const std::string csv_text = projection_csv(corpus, projection.coords);
  const std::string kl_text = kl_trace_csv(projection.kl_trace);

  ensure_output_dir(config);
  const std::string stem = "tsne_" + model_name;
  write_file(config.output_dir / (stem + ".csv"), csv_text);
  write_file(config.output_dir / (stem + "_kl.csv"), kl_text);
  write_file(config.output_dir / (stem + ".svg"), svg);
  update_manifest(config, "tsne/" + model_name,
                  {{"model", model_name},
                   {"embedding_model", raw.model_name()},
                   {"dim", raw.dim()},
                   {"points", summary.points},
                   {"final_kl", summary.final_kl},
                   {"neighbor_purity", summary.neighbor_purity},
                   {"unconverged_perplexity_rows", summary.unconverged_rows},
                   {"projection_digest", digest_hex(csv_text)},
                   {"svg_digest", digest_hex(svg)}});
  return summary;
}

eval::ComparisonReport cmd_eval(const PipelineConfig& config) {
  if (config.embeddings.empty()) throw ConfigError("config: no embeddings configured");
  const Corpus corpus = load_balanced_corpus(config);
  const auto experiment = eval::run_experiment(experiment_config(config), corpus);
  const auto report = eval::compare(experiment.results);

  const std::string results_text = eval::results_csv(experiment.results);
  const std::string json_text = eval::report_json(report, report_context(config, experiment.splits));
  const std::string table_text = eval::render_table(report);

  ensure_output_dir(config);
  write_file(config.output_dir / "results.csv", results_text);
  write_file(config.output_dir / "report.json", json_text);
  write_file(config.output_dir / "table.txt", table_text);
  update_manifest(config, "eval",
                  {{"results", experiment.results.size()},
                   {"family_size", report.family_size},
                   {"results_digest", digest_hex(results_text)}});
  return report;
}

eval::ComparisonReport cmd_report(const PipelineConfig& config) {
  const auto results = eval::parse_results_csv(read_file(config.output_dir / "results.csv"));
  const auto report = eval::compare(results);

  std::vector<eval::SplitRecord> splits;
  if (fs::exists(config.corpus_path())) {
    const Corpus corpus = load_balanced_corpus(config);
    std::size_t runs = 0;
    for (const auto& r : results) runs = std::max(runs, r.run_index + 1);
    for (std::size_t r = 0; r < runs; ++r) {
      const auto seed = derive_seed(config.master_seed, r);
      const auto split = stratified_split(corpus, config.train_fraction, seed);
      splits.push_back({r, seed, split.digest(), split.train.size(), split.test.size()});
    }
  }
  const std::string json_text = eval::report_json(report, report_context(config, std::move(splits)));
  const std::string table_text = eval::render_table(report);
  write_file(config.output_dir / "report.json", json_text);
  write_file(config.output_dir / "table.txt", table_text);
  update_manifest(config, "report", {{"results", results.size()}, {"family_size", report.family_size}});
  return report;
}

}  // namespace biasbench::pipeline
