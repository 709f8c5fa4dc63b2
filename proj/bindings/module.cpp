#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "commshift/corpus.hpp"
#include "commshift/error.hpp"
#include "commshift/lexfeatures.hpp"
#include "commshift/lmeval.hpp"
#include "commshift/shiftindex.hpp"
#include "commshift/stats.hpp"
#include "commshift/synthgen.hpp"
#include "commshift/vectorspace.hpp"

namespace py = pybind11;
using namespace commshift;

namespace {

vectorspace::TrainingConfig training_config(const py::kwargs& kw) {
  vectorspace::TrainingConfig c;
  for (auto item : kw) {
    std::string key = py::cast<std::string>(item.first);
    if (key == "dim") c.dim = py::cast<std::uint32_t>(item.second);
    else if (key == "window") c.window = py::cast<std::uint32_t>(item.second);
    else if (key == "negatives") c.negatives = py::cast<std::uint32_t>(item.second);
    else if (key == "epochs") c.epochs = py::cast<std::uint32_t>(item.second);
    else if (key == "learning_rate") c.learning_rate = py::cast<float>(item.second);
    else if (key == "min_lr") c.min_lr = py::cast<float>(item.second);
    else if (key == "l2_lambda") c.l2_lambda = py::cast<float>(item.second);
    else if (key == "unigram_power") c.unigram_power = py::cast<float>(item.second);
    else if (key == "subsample_frequent") c.subsample_frequent = py::cast<bool>(item.second);
    else if (key == "subsample_threshold") c.subsample_threshold = py::cast<float>(item.second);
    else if (key == "threads") c.threads = py::cast<std::uint32_t>(item.second);
    else if (key == "seed") c.seed = py::cast<std::uint64_t>(item.second);
    else throw UsageError("unknown training option: " + key);
  }
  return c;
}

lmeval::LMConfig lm_config(const py::kwargs& kw) {
  lmeval::LMConfig c;
  for (auto item : kw) {
    std::string key = py::cast<std::string>(item.first);
    if (key == "layers") c.layers = py::cast<std::uint32_t>(item.second);
    else if (key == "hidden_size") c.hidden_size = py::cast<std::uint32_t>(item.second);
    else if (key == "epochs") c.epochs = py::cast<std::uint32_t>(item.second);
    else if (key == "adam_lr") c.adam_lr = py::cast<float>(item.second);
    else if (key == "dropout") c.dropout = py::cast<float>(item.second);
    else if (key == "batch_size") c.batch_size = py::cast<std::uint32_t>(item.second);
    else if (key == "bptt") c.bptt = py::cast<std::uint32_t>(item.second);
    else if (key == "clip_norm") c.clip_norm = py::cast<float>(item.second);
    else if (key == "eval_batch_size") c.eval_batch_size = py::cast<std::uint32_t>(item.second);
    else if (key == "split_ratios") {
      auto r = py::cast<std::vector<double>>(item.second);
      if (r.size() != 3) throw UsageError("split_ratios needs three numbers");
      c.split_ratios = {r[0], r[1], r[2]};
    } else if (key == "seed") c.seed = py::cast<std::uint64_t>(item.second);
    else throw UsageError("unknown lm option: " + key);
  }
  return c;
}

py::dict test_result_dict(const stats::TestResult& r) {
  py::dict d;
  d["statistic"] = r.statistic;
  d["p_value"] = r.p_value;
  d["stars"] = r.stars;
  d["n1"] = r.n1;
  d["n2"] = r.n2;
  if (r.effect_size) d["effect_size"] = *r.effect_size;
  return d;
}

py::dict feature_row_dict(const lexfeatures::FeatureRow& r) {
  py::dict d;
  d["word"] = r.word;
  d["freq"] = r.freq;
  d["pro"] = r.pro;
  d["spe_raw"] = r.spe_raw;
  d["spe"] = r.spe;
  d["dis"] = r.dis;
  return d;
}

shiftindex::SelectionMode parse_mode(const std::string& mode) {
  if (mode == "topk_shift") return shiftindex::SelectionMode::topk_shift;
  if (mode == "bottomk_positive_noshift")
    return shiftindex::SelectionMode::bottomk_positive_noshift;
  if (mode == "sigma2_shift") return shiftindex::SelectionMode::sigma2_shift;
  if (mode == "below_sigma1_noshift")
    return shiftindex::SelectionMode::below_sigma1_noshift;
  throw UsageError("unknown selection mode: " + mode);
}

}  // namespace

PYBIND11_MODULE(_commshift, m) {
  m.doc() = "community-conditioned embeddings and shift indices";

  py::register_exception<UsageError>(m, "CommshiftUsageError", PyExc_ValueError);
  py::register_exception<DataError>(m, "CommshiftDataError", PyExc_ValueError);
  py::register_exception<InternalError>(m, "CommshiftInternalError", PyExc_RuntimeError);

  m.def(
      "tokenize",
      [](const std::string& text, bool lowercase) {
        corpus::TokenizerOptions opts;
        opts.lowercase = lowercase;
        return corpus::tokenize(text, opts);
      },
      py::arg("text"), py::arg("lowercase") = true);

  py::class_<corpus::CorpusStore>(m, "CorpusStore")
      .def_static("load",
                  [](const std::string& path) { return corpus::CorpusStore::load(path); })
      .def("save", [](const corpus::CorpusStore& s, const std::string& path) { s.save(path); })
      .def("communities",
           [](const corpus::CorpusStore& s) {
             std::vector<std::pair<std::string, bool>> out;
             for (const auto& c : s.communities())
               out.emplace_back(c.name, c.kind == corpus::CommunityKind::global);
             return out;
           })
      .def("total_tokens",
           [](const corpus::CorpusStore& s, const std::string& community) {
             auto ci = s.find_community(community);
             if (!ci) throw DataError("unknown community: " + community);
             return s.total_tokens(*ci);
           })
      .def("document_count",
           [](const corpus::CorpusStore& s, const std::string& community) {
             auto ci = s.find_community(community);
             if (!ci) throw DataError("unknown community: " + community);
             return s.documents(*ci).size();
           })
      .def("occurrences",
           [](const corpus::CorpusStore& s, const std::string& word,
              const std::string& community) { return s.occurrences(word, community); });

  m.def(
      "ingest_jsonl",
      [](const std::vector<std::string>& paths, const std::vector<std::string>& members,
         const std::string& global_name, bool lowercase) {
        corpus::IngestConfig cfg;
        for (const auto& c : members)
          cfg.communities.push_back({c, corpus::CommunityKind::member});
        cfg.communities.push_back({global_name, corpus::CommunityKind::global});
        cfg.tokenizer.lowercase = lowercase;
        return corpus::ingest(cfg, paths);
      },
      py::arg("paths"), py::arg("members"), py::arg("global_name") = "global",
      py::arg("lowercase") = true);

  m.def(
      "synth_store",
      [](const std::string& scenario_json) {
        synthgen::ShiftScenario sc = synthgen::parse_scenario(scenario_json);
        synthgen::GeneratedMeta meta;
        corpus::CorpusStore store = synthgen::generate_store(sc, &meta);
        return py::make_tuple(std::move(store), synthgen::meta_to_json(meta));
      },
      py::arg("scenario_json"));

  m.def(
      "train",
      [](const corpus::CorpusStore& store, std::uint64_t min_count, const py::kwargs& kw) {
        corpus::Vocabulary vocab = corpus::Vocabulary::build(store, min_count);
        return vectorspace::train(store, vocab, training_config(kw));
      },
      py::arg("store"), py::arg("min_count") = 1);

  py::class_<vectorspace::EmbeddingSpace>(m, "EmbeddingSpace")
      .def_static("load", [](const std::string& path) {
        return vectorspace::EmbeddingSpace::load(path);
      })
      .def("save", [](const vectorspace::EmbeddingSpace& s, const std::string& path) {
        s.save(path);
      })
      .def("dim", &vectorspace::EmbeddingSpace::dim)
      .def("vocabulary",
           [](const vectorspace::EmbeddingSpace& s) { return s.vocab().words(); })
      .def("communities",
           [](const vectorspace::EmbeddingSpace& s) {
             std::vector<std::pair<std::string, bool>> out;
             for (const auto& c : s.communities())
               out.emplace_back(c.name, c.kind == corpus::CommunityKind::global);
             return out;
           })
      .def("vector",
           [](const vectorspace::EmbeddingSpace& s, const std::string& word,
              const std::string& community) { return s.vector(word, community); })
      .def("export_text", [](const vectorspace::EmbeddingSpace& s, const std::string& dir) {
        s.export_text(dir);
      })
      .def(
          "nearest_neighbors",
          [](const vectorspace::EmbeddingSpace& s, const std::string& word,
             const std::string& community, std::size_t k,
             const std::vector<std::string>& scope) {
            auto hits = vectorspace::nearest_neighbors(s, word, community, k, scope);
            std::vector<py::tuple> out;
            for (const auto& h : hits)
              out.push_back(py::make_tuple(h.word, h.community, h.cosine));
            return out;
          },
          py::arg("word"), py::arg("community"), py::arg("k") = 10,
          py::arg("scope") = std::vector<std::string>{});

  m.def("cosine",
        [](const vectorspace::EmbeddingSpace& s, const std::string& w1,
           const std::string& c1, const std::string& w2, const std::string& c2) {
          return vectorspace::cosine(s.vector(w1, c1), s.vector(w2, c2));
        });
  m.def("dsi", [](const vectorspace::EmbeddingSpace& s, const std::string& word,
                  const std::vector<std::string>& domain) {
    return shiftindex::dsi(s, word, domain);
  });
  m.def("csi", [](const vectorspace::EmbeddingSpace& s, const std::string& word,
                  const std::string& community, const std::vector<std::string>& domain) {
    return shiftindex::csi(s, word, community, domain);
  });

  py::class_<shiftindex::ShiftTable>(m, "ShiftTable")
      .def("words", [](const shiftindex::ShiftTable& t) { return t.words; })
      .def("columns", &shiftindex::ShiftTable::column_names)
      .def("column",
           [](const shiftindex::ShiftTable& t, const std::string& name) {
             return t.column(name);
           })
      .def("stats",
           [](const shiftindex::ShiftTable& t, const std::string& name) {
             const auto& s = t.stats(name);
             return py::make_tuple(s.mean, s.stddev);
           })
      .def("write_tsv",
           [](const shiftindex::ShiftTable& t, const std::string& path) {
             shiftindex::write_tsv(t, path);
           })
      .def_static("read_tsv",
                  [](const std::string& path) { return shiftindex::read_tsv(path); });

  m.def("shift_table",
        [](const vectorspace::EmbeddingSpace& s, const std::string& domain) {
          return shiftindex::shift_table(s, domain);
        });
  m.def(
      "select_words",
      [](const shiftindex::ShiftTable& t, const std::string& column,
         const std::string& mode, std::size_t k) {
        return shiftindex::select_words(t, column, parse_mode(mode), k).words;
      },
      py::arg("table"), py::arg("column"), py::arg("mode"), py::arg("k") = 0);

  py::class_<lexfeatures::FeatureTable>(m, "FeatureTable")
      .def("rows",
           [](const lexfeatures::FeatureTable& t) {
             std::vector<py::dict> out;
             for (const auto& r : t.rows()) out.push_back(feature_row_dict(r));
             return out;
           })
      .def("find",
           [](const lexfeatures::FeatureTable& t, const std::string& word) -> py::object {
             const auto* r = t.find(word);
             if (!r) return py::none();
             return feature_row_dict(*r);
           })
      .def("write_tsv",
           [](const lexfeatures::FeatureTable& t, const std::string& path) {
             t.write_tsv(path);
           })
      .def_static("read_tsv", [](const std::string& path) {
        return lexfeatures::FeatureTable::read_tsv(path);
      });

  m.def(
      "feature_table",
      [](const corpus::CorpusStore& store, const std::string& scope_name,
         const std::vector<std::string>& members, bool is_domain,
         const std::string& variant, std::uint64_t min_count) {
        lexfeatures::FeatureOptions opts;
        if (variant == "camera_ready")
          opts.variant = lexfeatures::DisseminationVariant::camera_ready;
        else if (variant == "draft")
          opts.variant = lexfeatures::DisseminationVariant::draft;
        else
          throw UsageError("unknown dissemination variant: " + variant);
        opts.min_count = min_count;
        lexfeatures::Scope scope = is_domain
                                       ? lexfeatures::Scope::domain(scope_name, members)
                                       : lexfeatures::Scope::community(scope_name, members);
        return lexfeatures::feature_table(store, scope, opts);
      },
      py::arg("store"), py::arg("scope"), py::arg("members"), py::arg("is_domain") = false,
      py::arg("variant") = "camera_ready", py::arg("min_count") = 1);

  m.def(
      "ttest_ind",
      [](const std::vector<double>& x, const std::vector<double>& y, bool welch) {
        return test_result_dict(stats::ttest_ind(x, y, welch));
      },
      py::arg("x"), py::arg("y"), py::arg("welch") = false);
  m.def("cohens_d", [](const std::vector<double>& x, const std::vector<double>& y) {
    return stats::cohens_d(x, y);
  });
  m.def("wilcoxon_signed_rank",
        [](const std::vector<std::pair<double, double>>& pairs) {
          return test_result_dict(stats::wilcoxon_signed_rank(pairs));
        });
  m.def("feature_contrast",
        [](const std::vector<std::string>& shift_words,
           const std::vector<std::string>& noshift_words,
           const lexfeatures::FeatureTable& features) {
          auto report = stats::feature_contrast(shift_words, noshift_words, features);
          std::vector<py::dict> out;
          for (const auto& row : report.rows) {
            py::dict d;
            d["feature"] = row.feature;
            if (row.result) d["result"] = test_result_dict(*row.result);
            if (!row.error.empty()) d["error"] = row.error;
            out.push_back(std::move(d));
          }
          return out;
        });

  py::class_<lmeval::LanguageModel>(m, "LanguageModel")
      .def_static("load", [](const std::string& path) {
        return lmeval::LanguageModel::load(path);
      })
      .def("save", [](const lmeval::LanguageModel& lm, const std::string& path) {
        lm.save(path);
      })
      .def("community", &lmeval::LanguageModel::community)
      .def("vocab_size", &lmeval::LanguageModel::vocab_size)
      .def("dim", &lmeval::LanguageModel::dim);

  m.def(
      "train_lm",
      [](const corpus::CorpusStore& store, const vectorspace::EmbeddingSpace& space,
         const std::string& community, const py::kwargs& kw) {
        return lmeval::train_lm(store, space, community, lm_config(kw));
      },
      py::arg("store"), py::arg("space"), py::arg("community"));
  m.def(
      "target_perplexity",
      [](const lmeval::LanguageModel& lm, const corpus::CorpusStore& store,
         const std::string& community, const std::string& word,
         const std::optional<std::vector<float>>& override_embedding, bool carry_context) {
        if (override_embedding) {
          if (override_embedding->size() != lm.dim())
            throw UsageError("override embedding has the wrong dimension");
          return lmeval::target_perplexity(lm, store, community, word,
                                           override_embedding->data(), carry_context);
        }
        return lmeval::target_perplexity(lm, store, community, word, nullptr,
                                         carry_context);
      },
      py::arg("lm"), py::arg("store"), py::arg("community"), py::arg("word"),
      py::arg("override_embedding") = std::nullopt, py::arg("carry_context") = false);
  m.def("ppl_change", &lmeval::ppl_change, py::arg("ppl_train"), py::arg("ppl_alt"));
}
