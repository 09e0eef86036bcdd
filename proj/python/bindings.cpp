#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "negmt/attnflow.hpp"
#include "negmt/cli.hpp"
#include "negmt/contrastive.hpp"
#include "negmt/cuescan.hpp"
#include "negmt/errors.hpp"
#include "negmt/maxflow.hpp"
#include "negmt/negdata.hpp"
#include "negmt/probe.hpp"
#include "negmt/report.hpp"
#include "negmt/reprsim.hpp"
#include "negmt/tracestore.hpp"

namespace py = pybind11;
using namespace negmt;

namespace {

template <std::size_t Rank>
py::array_t<float> to_numpy(const Tensor<Rank>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Vocabulary to_vocab(const std::vector<std::string>& words) { return {words.begin(), words.end()}; }

}  // namespace

PYBIND11_MODULE(_negmt, m) {
  m.doc() = "Negation analysis toolkit for neural machine translation";
  m.attr("__version__") = toolkit_version();

  auto& base = py::register_exception<Error>(m, "NegmtError");
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  // Annotated corpora.
  py::class_<Span>(m, "Span")
      .def(py::init<int, int>(), py::arg("first"), py::arg("last"))
      .def_readwrite("first", &Span::first)
      .def_readwrite("last", &Span::last)
      .def("__eq__", [](const Span& a, const Span& b) { return a == b; })
      .def("__repr__", [](const Span& s) {
        return "Span(" + std::to_string(s.first) + ", " + std::to_string(s.last) + ")";
      });
  py::class_<NegInstance>(m, "NegInstance")
      .def(py::init<>())
      .def_readwrite("instance_id", &NegInstance::instance_id)
      .def_readwrite("cue_spans", &NegInstance::cue_spans)
      .def_readwrite("event_spans", &NegInstance::event_spans)
      .def_readwrite("scope_spans", &NegInstance::scope_spans);
  py::class_<AnnotatedSentence>(m, "AnnotatedSentence")
      .def(py::init<>())
      .def_readwrite("sentence_id", &AnnotatedSentence::sentence_id)
      .def_readwrite("tokens", &AnnotatedSentence::tokens)
      .def_readwrite("instances", &AnnotatedSentence::instances);
  py::class_<ComponentCounts>(m, "ComponentCounts")
      .def_readonly("sentences", &ComponentCounts::sentences)
      .def_readonly("instances", &ComponentCounts::instances)
      .def_readonly("cue", &ComponentCounts::cue)
      .def_readonly("event", &ComponentCounts::event)
      .def_readonly("scope", &ComponentCounts::scope);
  m.def("parse_negpar_file", &parse_negpar_file, py::arg("path"));
  m.def(
      "parse_negpar",
      [](const std::string& body) {
        std::istringstream in(body);
        return parse_negpar(in);
      },
      py::arg("text"));
  m.def(
      "write_negpar",
      [](const std::vector<AnnotatedSentence>& corpus) {
        std::ostringstream out;
        write_negpar(out, corpus);
        return out.str();
      },
      py::arg("corpus"));
  m.def("corpus_stats", &corpus_stats, py::arg("corpus"));
  m.def(
      "aggregate_manual",
      [](const std::vector<std::pair<std::string, std::string>>& labels) {
        std::vector<ManualEvalLabel> parsed;
        for (const auto& [id, cat] : labels) parsed.push_back({id, parse_category(cat)});
        const auto s = aggregate_manual(parsed);
        py::dict counts, percentages;
        for (std::size_t c = 0; c < kCategoryCount; ++c) {
          const auto name = std::string(to_string(static_cast<Category>(c)));
          counts[py::str(name)] = s.counts[c];
          percentages[py::str(name)] = s.percentages[c];
        }
        py::dict out;
        out["total"] = s.total;
        out["accuracy"] = s.accuracy;
        out["counts"] = counts;
        out["percentages"] = percentages;
        return out;
      },
      py::arg("labels"), "labels: (pair_id, category) tuples");

  // Contrastive sets.
  py::class_<Variant>(m, "Variant")
      .def_readonly("tokens", &Variant::tokens)
      .def_property_readonly("rule", [](const Variant& v) { return std::string(to_string(v.rule)); })
      .def_property_readonly("direction",
                             [](const Variant& v) { return std::string(to_string(v.direction)); })
      .def_readonly("position", &Variant::position)
      .def_readonly("edited_token", &Variant::edited_token)
      .def_readonly("needs_review", &Variant::needs_review)
      .def("revert", &revert_variant);
  m.def(
      "gen_german_variants",
      [](const std::vector<std::string>& reference, const std::vector<std::string>& vocabulary) {
        return gen_german_variants(reference, to_vocab(vocabulary));
      },
      py::arg("reference"), py::arg("vocabulary") = std::vector<std::string>{});
  m.def(
      "gen_chinese_variants",
      [](const std::vector<std::string>& reference, const std::vector<std::string>& insert_cues,
         const std::vector<std::string>& pos_tags) {
        ChineseOptions opts;
        opts.insert_cues = insert_cues;
        opts.pos_tags = pos_tags;
        return gen_chinese_variants(reference, opts);
      },
      py::arg("reference"), py::arg("insert_cues") = std::vector<std::string>{},
      py::arg("pos_tags") = std::vector<std::string>{});
  m.def(
      "score_instance",
      [](double reference, const std::vector<double>& variants) {
        return score_instance({"", reference, variants});
      },
      py::arg("reference_logprob"), py::arg("variant_logprobs"));

  // Traces and attention flow.
  py::class_<TraceDims>(m, "TraceDims")
      .def(py::init([](std::size_t le, std::size_t ld, std::size_t h, std::size_t s, std::size_t t,
                       std::size_t d) { return TraceDims{le, ld, h, s, t, d}; }),
           py::arg("enc_layers"), py::arg("dec_layers"), py::arg("heads"), py::arg("src_len"),
           py::arg("tgt_len"), py::arg("hidden_dim"))
      .def_readonly("enc_layers", &TraceDims::enc_layers)
      .def_readonly("dec_layers", &TraceDims::dec_layers)
      .def_readonly("heads", &TraceDims::heads)
      .def_readonly("src_len", &TraceDims::src_len)
      .def_readonly("tgt_len", &TraceDims::tgt_len)
      .def_readonly("hidden_dim", &TraceDims::hidden_dim);
  m.def("parse_dims", &parse_dims, py::arg("spec"));
  py::class_<ModelTrace>(m, "ModelTrace")
      .def_readonly("pair_id", &ModelTrace::pair_id)
      .def_readonly("dims", &ModelTrace::dims)
      .def_readwrite("src_tokens", &ModelTrace::src_tokens)
      .def_readwrite("tgt_tokens", &ModelTrace::tgt_tokens)
      .def_property_readonly("enc_self_attn", [](const ModelTrace& t) { return to_numpy(t.enc_self_attn); })
      .def_property_readonly("dec_self_attn", [](const ModelTrace& t) { return to_numpy(t.dec_self_attn); })
      .def_property_readonly("cross_attn", [](const ModelTrace& t) { return to_numpy(t.cross_attn); })
      .def_property_readonly("enc_hidden", [](const ModelTrace& t) { return to_numpy(t.enc_hidden); })
      .def_property_readonly("dec_hidden", [](const ModelTrace& t) { return to_numpy(t.dec_hidden); })
      .def_property_readonly("tgt_token_logprobs",
                             [](const ModelTrace& t) { return to_numpy(t.tgt_token_logprobs); });
  m.def("synth_trace", &synth_trace, py::arg("seed"), py::arg("dims"), py::arg("pair_id") = "synth");
  m.def("check_trace", &check_trace, py::arg("trace"));
  m.def(
      "write_trace",
      [](const std::vector<ModelTrace>& traces, const std::string& path) {
        TraceSet set;
        set.traces = traces;
        write_trace(set, path);
      },
      py::arg("traces"), py::arg("path"));
  m.def(
      "read_trace", [](const std::string& path) { return read_trace(path).traces; }, py::arg("path"));
  m.def(
      "max_flow",
      [](std::size_t nodes, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges,
         std::size_t source, std::size_t sink) {
        FlowNetwork net;
        net.node_count = nodes;
        for (const auto& [a, b, c] : edges) net.add_edge(a, b, c);
        const auto r = max_flow(net, source, sink);
        return py::make_tuple(r.value, r.edge_flow);
      },
      py::arg("node_count"), py::arg("edges"), py::arg("source"), py::arg("sink"));
  m.def(
      "cue_flow",
      [](const ModelTrace& trace, std::size_t cue_position, std::size_t dec_layer,
         const std::string& heads, const std::string& mixing) {
        FlowOptions opts;
        opts.heads = parse_head_mode(heads);
        if (mixing == "unscaled") {
          opts.decoder_mixing = DecoderMixing::kUnscaled;
        } else if (mixing != "split") {
          throw UsageError("decoder mixing must be 'split' or 'unscaled'");
        }
        return cue_flow(trace, cue_position, dec_layer, opts);
      },
      py::arg("trace"), py::arg("cue_position"), py::arg("dec_layer"), py::arg("heads") = "avg",
      py::arg("decoder_mixing") = "split");
  m.def(
      "spearman",
      [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); },
      py::arg("x"), py::arg("y"));
  m.def(
      "average_ranks", [](const std::vector<double>& v) { return average_ranks(v); }, py::arg("values"));

  // Probing and similarity.
  m.def("f1_score", &f1_score, py::arg("precision"), py::arg("recall"));
  m.def(
      "evaluate",
      [](const std::vector<int>& predictions, const std::vector<int>& gold, int positive_class) {
        const auto r = evaluate(predictions, gold, positive_class);
        return py::make_tuple(r.precision, r.recall, r.f1);
      },
      py::arg("predictions"), py::arg("gold"), py::arg("positive_class"));
  m.def(
      "cosine", [](const Eigen::VectorXd& u, const Eigen::VectorXd& v) { return cosine(u, v); },
      py::arg("u"), py::arg("v"));

  // Cue scanning.
  m.def(
      "tokenize_line",
      [](const std::string& line, bool raw) {
        return tokenize_line(line, raw ? TextMode::kRaw : TextMode::kTokenized);
      },
      py::arg("line"), py::arg("raw") = false);
  m.def(
      "classify_pair",
      [](const std::vector<std::string>& source, const std::vector<std::string>& target) {
        return std::string(to_string(
            classify_pair(source, target, default_english_lexicon(), default_chinese_lexicon())));
      },
      py::arg("source_tokens"), py::arg("target_tokens"));
  m.def(
      "mismatch_rate",
      [](std::size_t both, std::size_t source_only, std::size_t target_only, std::size_t neither) {
        return MismatchTable::from_counts(both, source_only, target_only, neither).mismatch_rate();
      },
      py::arg("both"), py::arg("source_only"), py::arg("target_only"), py::arg("neither"));

  // Command line.
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI invocation; returns (exit_code, stdout, stderr).");
}
