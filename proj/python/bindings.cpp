#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rmn/analysis.hpp"
#include "rmn/checkpoint.hpp"
#include "rmn/completion.hpp"
#include "rmn/config.hpp"
#include "rmn/training.hpp"

namespace py = pybind11;
using namespace rmn;

namespace {

std::vector<EncodedSentence> encode_lines(const Vocabulary& vocab, const std::vector<std::string>& lines) {
  std::vector<EncodedSentence> out;
  for (const auto& line : lines) {
    if (auto ids = vocab.encode(line)) out.push_back(std::move(*ids));
  }
  return out;
}

py::dict slice_dict(const MemorySlice& s) {
  py::dict d;
  d["word_ids"] = s.word_ids;
  d["positions"] = s.positions;
  d["temporal_rows"] = s.temporal_rows;
  return d;
}

py::dict row_dict(const AttentionRow& r) {
  py::dict d;
  d["sentence"] = r.sentence;
  d["t"] = r.t;
  d["word_ids"] = r.word_ids;
  d["positions"] = r.positions;
  d["probs"] = r.probs;
  return d;
}

ModelConfig make_config(const std::string& arch, int vocab_size, int dim, int memory_size, bool temporal,
                        const std::string& compose, const std::string& direction, const std::string& output_gate) {
  RunConfig run;
  apply_key_values(run, {{"arch", arch},
                         {"dim", std::to_string(dim)},
                         {"memory_size", std::to_string(memory_size)},
                         {"temporal", temporal ? "on" : "off"},
                         {"compose", compose},
                         {"direction", direction},
                         {"output_gate", output_gate}});
  run.model.vocab_size = vocab_size;
  run.model.validate();
  return run.model;
}

}  // namespace

PYBIND11_MODULE(rmn, m) {
  m.doc() = "Recurrent memory network language models";

  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("softmax", &softmax_stable, py::arg("logits"));
  m.def("gather_memory",
        [](const std::vector<int>& ids, int t, int n) { return slice_dict(gather_memory(ids, t, n)); },
        py::arg("ids"), py::arg("t"), py::arg("n"));
  m.def("build_bidirectional_memory",
        [](const std::vector<int>& ids, int t, int n) { return slice_dict(build_bidirectional_memory(ids, t, n)); },
        py::arg("ids"), py::arg("t"), py::arg("n"));

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static(
          "build",
          [](const std::vector<std::string>& lines, std::size_t max_size, std::size_t min_count) {
            std::ostringstream text;
            for (const auto& l : lines) text << l << '\n';
            std::istringstream in(text.str());
            return Vocabulary::build(in, {max_size, min_count});
          },
          py::arg("lines"), py::arg("max_size") = 0, py::arg("min_count") = 1)
      .def_static("loads",
                  [](const std::string& text) {
                    std::istringstream in(text);
                    return Vocabulary::load(in);
                  })
      .def("dumps", &Vocabulary::serialize)
      .def("__len__", &Vocabulary::size)
      .def("id", [](const Vocabulary& v, const std::string& t) { return v.id(t); })
      .def("token", &Vocabulary::token)
      .def("encode", [](const Vocabulary& v, const std::string& line) { return v.encode(line); })
      .def("decode", &Vocabulary::decode)
      .def_property_readonly("hash", &Vocabulary::hash);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init(&make_config), py::arg("arch") = "rm", py::arg("vocab_size") = 10, py::arg("dim") = 128,
           py::arg("memory_size") = 15, py::arg("temporal") = true, py::arg("compose") = "gated",
           py::arg("direction") = "uni", py::arg("output_gate") = "tanh")
      .def_property_readonly("arch", [](const ModelConfig& c) { return arch_to_string(c.layers); })
      .def_readonly("vocab_size", &ModelConfig::vocab_size)
      .def_readonly("dim", &ModelConfig::dim)
      .def_readonly("memory_size", &ModelConfig::memory_size)
      .def_readonly("temporal", &ModelConfig::temporal);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](int epochs, std::size_t batch_size, double initial_lr, int lr_halving_start_epoch,
                       double clip_threshold, std::uint64_t seed, double dropout) {
             TrainConfig c;
             c.epochs = epochs;
             c.batch_size = batch_size;
             c.initial_lr = initial_lr;
             c.lr_halving_start_epoch = lr_halving_start_epoch;
             c.clip_threshold = clip_threshold;
             c.seed = seed;
             c.dropout = dropout;
             c.record_time = false;
             c.validate();
             return c;
           }),
           py::arg("epochs") = 15, py::arg("batch_size") = 20, py::arg("initial_lr") = 1.0,
           py::arg("lr_halving_start_epoch") = 5, py::arg("clip_threshold") = 5.0, py::arg("seed") = 1,
           py::arg("dropout") = 0.0)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("initial_lr", &TrainConfig::initial_lr)
      .def_readwrite("seed", &TrainConfig::seed);
  m.def("lr_at_epoch", &lr_at_epoch, py::arg("config"), py::arg("epoch"));

  py::class_<ModelStack>(m, "Model")
      .def(py::init<const ModelConfig&>(), py::arg("config"), "All-zero parameters: a uniform model.")
      .def_static("init", py::overload_cast<const ModelConfig&, std::uint64_t>(&ModelStack::init), py::arg("config"),
                  py::arg("seed"))
      .def_property_readonly("config", &ModelStack::config)
      .def("parameter_names",
           [](const ModelStack& mdl) {
             std::vector<std::string> names;
             for (const auto& e : mdl.params()) names.push_back(e.name);
             return names;
           })
      .def("get_parameter", [](const ModelStack& mdl, const std::string& name) { return Mat(mdl.params().at(name).value); })
      .def("set_parameter",
           [](ModelStack& mdl, const std::string& name, const Mat& value) {
             Tensor& t = mdl.params().at(name);
             if (value.rows() != t.rows() || value.cols() != t.cols()) throw std::invalid_argument(name + ": shape mismatch");
             t.value = value;
           })
      .def_property_readonly("num_parameters", [](const ModelStack& mdl) { return mdl.params().num_values(); })
      .def(
          "sentence_nll",
          [](const ModelStack& mdl, const std::vector<int>& ids) {
            const SentenceScore s = mdl.sentence_nll(ids, false);
            return py::make_tuple(s.nll, s.tokens);
          },
          py::arg("ids"))
      .def(
          "next_word_distribution",
          [](const ModelStack& mdl, const std::vector<int>& prefix) { return mdl.next_word_distribution(prefix); },
          py::arg("prefix"))
      .def(
          "attention",
          [](const ModelStack& mdl, const std::vector<std::vector<int>>& corpus) {
            py::list rows;
            for (const auto& r : collect_traces(mdl, corpus)) rows.append(row_dict(r));
            return rows;
          },
          py::arg("corpus"))
      .def(
          "save",
          [](const ModelStack& mdl, std::uint64_t vocab_hash) {
            RunConfig run;
            run.model = mdl.config();
            return py::bytes(checkpoint_bytes(mdl, {run, 0, vocab_hash}));
          },
          py::arg("vocab_hash") = 0)
      .def_static(
          "load",
          [](const py::bytes& data) {
            std::istringstream in{std::string(data)};
            return load_checkpoint(in).model;
          },
          py::arg("data"));

  m.def("perplexity", &perplexity, py::arg("model"), py::arg("corpus"));
  m.def(
      "train",
      [](ModelStack& model, const std::vector<EncodedSentence>& corpus, const TrainConfig& config,
         std::optional<std::vector<EncodedSentence>> valid) {
        py::gil_scoped_release release;
        const TrainResult r = train(model, corpus, valid ? &*valid : nullptr, config);
        std::vector<double> train_ppl;
        for (const auto& row : r.log) train_ppl.push_back(row.train_ppl);
        return train_ppl;
      },
      py::arg("model"), py::arg("corpus"), py::arg("config"), py::arg("valid") = std::nullopt,
      "Trains in place and returns the per-epoch training perplexity.");
  m.def("encode_lines", &encode_lines, py::arg("vocab"), py::arg("lines"));

  m.def(
      "score_candidates",
      [](const ModelStack& model, const Vocabulary& vocab, const std::string& sentence,
         const std::array<std::string, kCandidates>& candidates, bool length_normalize) {
        const CompletionItem item = make_item("item", sentence, candidates, 0);
        const CompletionScore s = score_candidates(model, vocab, item, length_normalize);
        return py::make_tuple(s.log_prob, s.chosen);
      },
      py::arg("model"), py::arg("vocab"), py::arg("sentence"), py::arg("candidates"),
      py::arg("length_normalize") = false);
}
