#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "biasbench/corpus.hpp"
#include "biasbench/embedding_store.hpp"
#include "biasbench/errors.hpp"
#include "biasbench/eval.hpp"
#include "biasbench/knn.hpp"
#include "biasbench/pipeline.hpp"
#include "biasbench/random.hpp"
#include "biasbench/stats.hpp"
#include "biasbench/tsne.hpp"

namespace py = pybind11;
using namespace biasbench;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

std::vector<BiasClass> to_labels(const std::vector<std::string>& names) {
  std::vector<BiasClass> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(parse_bias_class(n));
  return out;
}

std::vector<std::string> from_labels(std::span<const BiasClass> labels) {
  std::vector<std::string> out;
  for (auto l : labels) out.emplace_back(to_string(l));
  return out;
}

Corpus corpus_from_labels(const std::vector<BiasClass>& labels) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < labels.size(); ++i)
    docs.push_back({std::to_string(i), "row " + std::to_string(i), labels[i]});
  return Corpus(std::move(docs), "python");
}

py::dict tsne_result(const tsne::Projection2D& p) {
  py::dict d;
  d["coords"] = to_array(p.coords);
  d["kl_trace"] = p.kl_trace;
  d["sigmas"] = p.sigmas;
  d["unconverged_rows"] = p.unconverged_rows;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core routines of the bias-type classification benchmark.";
  m.attr("__version__") = std::string(pipeline::kVersion);

  auto base = py::register_exception<Error>(m, "BiasBenchError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("index"));

  m.def(
      "euclidean", [](std::vector<double> a, std::vector<double> b) { return euclidean(a, b); }, py::arg("a"),
      py::arg("b"));

  m.def(
      "run_tsne",
      [](const Array& points, double perplexity, std::size_t n_iter, double learning_rate, double early_exaggeration,
         std::size_t exaggeration_iters, std::uint64_t seed) {
        tsne::TsneConfig c;
        c.perplexity = perplexity;
        c.n_iter = n_iter;
        c.learning_rate = learning_rate;
        c.early_exaggeration = early_exaggeration;
        c.exaggeration_iters = exaggeration_iters;
        c.momentum_switch_iter = exaggeration_iters;
        c.seed = seed;
        const Matrix x = to_matrix(points);
        tsne::Projection2D p;
        {
          py::gil_scoped_release release;
          p = tsne::run_tsne(x, c);
        }
        return tsne_result(p);
      },
      py::arg("points"), py::kw_only(), py::arg("perplexity") = 30.0, py::arg("n_iter") = 1000,
      py::arg("learning_rate") = 200.0, py::arg("early_exaggeration") = 12.0, py::arg("exaggeration_iters") = 250,
      py::arg("seed") = 0,
      "Exact t-SNE to two dimensions. Returns a dict with coords, kl_trace, sigmas and unconverged_rows.");

  py::class_<knn::KnnModel>(m, "KnnModel")
      .def(py::init([](const Array& points, const std::vector<std::string>& labels, std::size_t k) {
             return knn::fit(to_matrix(points), to_labels(labels), k);
           }),
           py::arg("points"), py::arg("labels"), py::arg("k"))
      .def_property_readonly("k", &knn::KnnModel::k)
      .def("__len__", &knn::KnnModel::size)
      .def(
          "predict",
          [](const knn::KnnModel& model, const Array& queries) {
            return from_labels(knn::predict_batch(model, to_matrix(queries)));
          },
          py::arg("queries"))
      .def(
          "nearest",
          [](const knn::KnnModel& model, std::vector<double> query, std::size_t count) {
            return model.nearest(query, count);
          },
          py::arg("query"), py::arg("count"));

  m.def(
      "accuracy",
      [](const std::vector<std::string>& predicted, const std::vector<std::string>& truth) {
        return knn::accuracy(to_labels(predicted), to_labels(truth));
      },
      py::arg("predicted"), py::arg("truth"));
  m.def(
      "neighbor_purity",
      [](const Array& points, const std::vector<std::string>& labels) {
        return knn::neighbor_purity(to_matrix(points), to_labels(labels));
      },
      py::arg("points"), py::arg("labels"));

  m.def(
      "welch_t_test",
      [](std::vector<double> a, std::vector<double> b) {
        const auto r = stats::welch_t_test(a, b);
        return py::make_tuple(r.t_stat, r.df, r.p_two_sided);
      },
      py::arg("a"), py::arg("b"), "Returns (t, df, two-sided p).");
  m.def(
      "bonferroni",
      [](std::vector<double> p, std::optional<std::size_t> family_size) { return stats::bonferroni(p, family_size); },
      py::arg("p_values"), py::arg("family_size") = py::none());
  m.def("regularized_incomplete_beta", &stats::regularized_incomplete_beta, py::arg("x"), py::arg("a"), py::arg("b"));

  m.def(
      "stratified_split",
      [](const std::vector<std::string>& labels, double train_fraction, std::uint64_t seed) {
        const auto split = stratified_split(corpus_from_labels(to_labels(labels)), train_fraction, seed);
        return py::make_tuple(split.train_positions, split.test_positions);
      },
      py::arg("labels"), py::arg("train_fraction"), py::arg("seed"),
      "Returns (train_positions, test_positions), each ascending.");

  m.def(
      "read_embeddings",
      [](const std::string& path) {
        const auto set = read_embeddings(path);
        py::dict d;
        d["model"] = set.model_name();
        d["dim"] = set.dim();
        std::vector<std::string> ids;
        for (const auto& r : set.records()) ids.push_back(r.doc_id);
        d["doc_ids"] = ids;
        d["labels"] = from_labels(set.labels());
        d["vectors"] = to_array(set.matrix());
        return d;
      },
      py::arg("path"));
  m.def(
      "write_embeddings",
      [](const std::string& path, const std::string& model, const std::vector<std::string>& doc_ids,
         const std::vector<std::string>& labels, const Array& vectors) {
        const Matrix v = to_matrix(vectors);
        if (doc_ids.size() != v.rows() || labels.size() != v.rows())
          throw py::value_error("doc_ids, labels and vectors must have the same length");
        const auto parsed = to_labels(labels);
        std::vector<EmbeddingRecord> recs;
        for (std::size_t i = 0; i < v.rows(); ++i) {
          auto row = v.row(i);
          recs.push_back({doc_ids[i], parsed[i], std::vector<double>(row.begin(), row.end())});
        }
        write_embeddings(EmbeddingSet(model, v.cols(), std::move(recs)), path);
      },
      py::arg("path"), py::arg("model"), py::arg("doc_ids"), py::arg("labels"), py::arg("vectors"));

  m.def(
      "evaluate",
      [](const std::vector<std::pair<std::string, Array>>& models, const std::vector<std::string>& labels,
         std::vector<std::size_t> k_values, std::size_t runs, double train_fraction, std::uint64_t master_seed,
         std::size_t jobs) {
        const auto parsed = to_labels(labels);
        const Corpus corpus = corpus_from_labels(parsed);
        std::vector<EmbeddingSet> sets;
        for (const auto& [name, arr] : models) {
          const Matrix v = to_matrix(arr);
          if (v.rows() != parsed.size()) throw py::value_error("model " + name + ": row count differs from labels");
          std::vector<EmbeddingRecord> recs;
          for (std::size_t i = 0; i < v.rows(); ++i) {
            auto row = v.row(i);
            recs.push_back({corpus[i].id, parsed[i], std::vector<double>(row.begin(), row.end())});
          }
          sets.emplace_back(name, v.cols(), std::move(recs));
        }
        eval::ExperimentConfig c;
        c.k_values = std::move(k_values);
        c.runs = runs;
        c.train_fraction = train_fraction;
        c.master_seed = master_seed;
        c.jobs = jobs;
        eval::Experiment exp;
        {
          py::gil_scoped_release release;
          exp = eval::run_grid(sets, corpus, c);
        }
        py::list out;
        for (const auto& r : exp.results) out.append(py::make_tuple(r.model_name, r.k, r.run_index, r.accuracy));
        return out;
      },
      py::arg("models"), py::arg("labels"), py::kw_only(), py::arg("k_values") = std::vector<std::size_t>{3, 10, 25},
      py::arg("runs") = 50, py::arg("train_fraction") = 0.7, py::arg("master_seed") = 0, py::arg("jobs") = 1,
      "Repeated-split KNN grid. `models` is a list of (name, vectors) pairs whose rows follow `labels`. "
      "Returns (model, k, run, accuracy) tuples.");

  m.def(
      "render_report",
      [](const std::vector<std::tuple<std::string, std::size_t, std::size_t, double>>& results, double alpha) {
        std::vector<eval::RunResult> rs;
        for (const auto& [model, k, run, acc] : results) rs.push_back({model, k, run, acc, ""});
        return eval::render_table(eval::compare(rs, alpha));
      },
      py::arg("results"), py::arg("alpha") = 0.01, "Accuracy table, pairwise Welch tests and claim outcomes.");
}
