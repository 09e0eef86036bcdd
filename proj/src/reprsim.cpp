#include "negmt/reprsim.hpp"

#include <algorithm>
#include <cmath>

#include "negmt/errors.hpp"
#include "negmt/text.hpp"

namespace negmt {

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw ValidationError("cosine: dimension mismatch");
  // One pass with a shared summation order, so cosine(u, u) is exactly 1.
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw ValidationError("cosine: zero vector");
  return std::clamp(dot / std::sqrt(uu * vv), -1.0, 1.0);
}

std::string LayerRef::label() const {
  return std::string(to_string(side)) + std::to_string(index);
}

namespace {

std::size_t parse_index(std::string_view s) {
  s = text::trim(s);
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw UsageError("bad layer index '" + std::string(s) + "'");
  }
  return static_cast<std::size_t>(std::stoul(std::string(s)));
}

}  // namespace

std::vector<LayerRef> parse_layer_list(std::string_view spec, TraceSide default_side) {
  std::vector<LayerRef> out;
  for (const auto& raw : text::split(spec, ',')) {
    std::string_view item = text::trim(raw);
    if (item.empty()) throw UsageError("empty entry in layer list '" + std::string(spec) + "'");
    TraceSide side = default_side;
    if (item.rfind("enc", 0) == 0) {
      side = TraceSide::kEncoder;
      item.remove_prefix(3);
    } else if (item.rfind("dec", 0) == 0) {
      side = TraceSide::kDecoder;
      item.remove_prefix(3);
    }
    const auto dots = item.find("..");
    if (dots != std::string_view::npos) {
      const auto lo = parse_index(item.substr(0, dots));
      const auto hi = parse_index(item.substr(dots + 2));
      if (hi < lo) throw UsageError("empty layer range '" + std::string(raw) + "'");
      for (auto i = lo; i <= hi; ++i) out.push_back({side, i});
    } else {
      out.push_back({side, parse_index(item)});
    }
  }
  return out;
}

SimBuckets sentence_similarities(const AnnotatedSentence& sentence,
                                 const std::vector<Eigen::VectorXd>& word_vectors) {
  if (word_vectors.size() != sentence.tokens.size()) {
    throw ValidationError("sentence '" + sentence.sentence_id + "': " +
                          std::to_string(word_vectors.size()) + " vectors for " +
                          std::to_string(sentence.tokens.size()) + " words");
  }
  const std::size_t n = sentence.tokens.size();
  std::vector<bool> annotated(n, false);
  for (const auto& inst : sentence.instances) {
    for (const auto* spans : {&inst.cue_spans, &inst.event_spans, &inst.scope_spans}) {
      for (int i : indices_from_spans(*spans)) annotated[static_cast<std::size_t>(i)] = true;
    }
  }

  SimBuckets b;
  for (const auto& inst : sentence.instances) {
    const auto cues = indices_from_spans(inst.cue_spans);
    const auto events = indices_from_spans(inst.event_spans);
    std::vector<int> scope_only;
    for (int i : indices_from_spans(inst.scope_spans)) {
      if (!std::binary_search(cues.begin(), cues.end(), i) &&
          !std::binary_search(events.begin(), events.end(), i)) {
        scope_only.push_back(i);
      }
    }
    for (int c : cues) {
      const auto& cv = word_vectors[static_cast<std::size_t>(c)];
      for (int e : events) {
        if (e != c) b.ce.add(cosine(cv, word_vectors[static_cast<std::size_t>(e)]));
      }
      for (int s : scope_only) b.cs.add(cosine(cv, word_vectors[static_cast<std::size_t>(s)]));
      for (std::size_t o = 0; o < n; ++o) {
        if (!annotated[o]) b.co.add(cosine(cv, word_vectors[o]));
      }
    }
  }
  return b;
}

SimTriple sim_groups(const std::vector<AnnotatedSentence>& corpus, const TraceSet& traces,
                     LayerRef layer, std::vector<std::string>* warnings) {
  if (!traces.traces.empty()) {
    const auto d = traces.shared_dims();
    const bool ok = layer.side == TraceSide::kEncoder
                        ? layer.index <= d.enc_layers
                        : layer.index >= 1 && layer.index <= d.dec_layers;
    if (!ok) throw UsageError("layer " + layer.label() + " is not present in the traces");
  }
  SimBuckets total;
  for (const auto& sentence : corpus) {
    if (sentence.instances.empty()) continue;
    const ModelTrace* trace = traces.find(sentence.sentence_id);
    if (!trace) {
      if (warnings) warnings->push_back("no trace for sentence '" + sentence.sentence_id + "'");
      continue;
    }
    const auto pooled = pooled_vectors(sentence, *trace, layer.side, layer.index);
    total.merge(sentence_similarities(sentence, pooled.vectors));
  }
  SimTriple t;
  t.layer = layer;
  t.sim_ce = total.ce.mean();
  t.sim_cs = total.cs.mean();
  t.sim_co = total.co.mean();
  t.n_ce = total.ce.count;
  t.n_cs = total.cs.count;
  t.n_co = total.co.count;
  return t;
}

std::vector<SimTriple> sim_sweep(const std::vector<AnnotatedSentence>& corpus,
                                 const TraceSet& traces, const std::vector<LayerRef>& layers,
                                 std::vector<std::string>* warnings) {
  std::vector<SimTriple> out;
  for (const auto& layer : layers) out.push_back(sim_groups(corpus, traces, layer, warnings));
  return out;
}

}  // namespace negmt
