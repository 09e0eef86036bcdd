#include "negmt/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "negmt/attnflow.hpp"
#include "negmt/chart.hpp"
#include "negmt/contrastive.hpp"
#include "negmt/cuescan.hpp"
#include "negmt/errors.hpp"
#include "negmt/negdata.hpp"
#include "negmt/probe.hpp"
#include "negmt/report.hpp"
#include "negmt/reprsim.hpp"
#include "negmt/text.hpp"
#include "negmt/tracestore.hpp"

namespace negmt {

namespace {

namespace fs = std::filesystem;

std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

Cell optional_cell(const std::optional<double>& v) {
  if (v) return *v;
  return std::monostate{};
}

std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

std::vector<std::string> read_lines(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    text::chomp(line);
    lines.push_back(line);
  }
  if (in.bad()) throw IoError("read error on '" + path + "'");
  return lines;
}

/// Runs fn(0..n-1) on up to `jobs` threads. fn must only touch per-index state.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min(std::max<std::size_t>(jobs, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Per-invocation state: common options, the report under construction and
/// the staged outputs.
struct Context {
  RunConfig config;
  Report report;
  OutputWriter writer;
  /// Table name -> (kind, series) for --chart.
  std::map<std::string, std::pair<ChartKind, std::vector<std::string>>> charts;
  bool emit_report = true;

  void digest(const std::string& path) {
    report.provenance.input_digests[path] = sha256_file(path);
  }
  std::string output_path(const std::string& suffix) const {
    return (fs::path(config.out_dir) / (config.name + suffix)).string();
  }
};

// ---------------------------------------------------------------- ingest

struct IngestOptions {
  std::string train, dev, test;
};

void cmd_ingest(Context& ctx, const IngestOptions& o) {
  std::vector<std::pair<std::string, std::string>> splits;
  if (!o.train.empty()) splits.emplace_back("train", o.train);
  if (!o.dev.empty()) splits.emplace_back("dev", o.dev);
  if (!o.test.empty()) splits.emplace_back("test", o.test);
  if (splits.empty()) throw UsageError("ingest needs at least one of --train, --dev, --test");

  std::vector<ComponentCounts> counts;
  for (const auto& [split, path] : splits) {
    ctx.digest(path);
    counts.push_back(corpus_stats(parse_negpar_file(path)));
  }
  Table t{"components", {"component"}, {}};
  for (const auto& s : splits) t.columns.push_back(s.first);
  t.columns.push_back("total");
  const std::vector<std::pair<std::string, std::size_t ComponentCounts::*>> rows = {
      {"sentences", &ComponentCounts::sentences}, {"instances", &ComponentCounts::instances},
      {"cue", &ComponentCounts::cue},             {"event", &ComponentCounts::event},
      {"scope", &ComponentCounts::scope}};
  for (const auto& [label, field] : rows) {
    std::vector<Cell> row{label};
    std::size_t total = 0;
    for (const auto& c : counts) {
      row.push_back(as_int(c.*field));
      total += c.*field;
    }
    row.push_back(as_int(total));
    t.add_row(std::move(row));
  }
  ctx.report.tables.push_back(std::move(t));
}

// ----------------------------------------------------------- contrastive

struct GenOptions {
  std::string lang;
  std::string input;
  std::string vocab;
  std::string insert_cues;
  std::string output;
};

void cmd_contrastive_gen(Context& ctx, const GenOptions& o) {
  if (o.lang != "de" && o.lang != "zh") {
    throw UsageError("--lang must be 'de' or 'zh', got '" + o.lang + "'");
  }
  ctx.digest(o.input);
  Vocabulary vocab;
  if (!o.vocab.empty()) {
    ctx.digest(o.vocab);
    for (const auto& line : read_lines(o.vocab)) {
      const auto w = text::trim(line);
      if (!w.empty()) vocab.emplace(w);
    }
  }
  ChineseOptions zh;
  if (!o.insert_cues.empty()) {
    for (const auto& c : text::split(o.insert_cues, ',')) {
      if (!text::trim(c).empty()) zh.insert_cues.emplace_back(text::trim(c));
    }
  }

  std::string jsonl;
  std::map<Rule, std::pair<std::size_t, std::size_t>> per_rule;  // variants, needing review
  std::size_t instances = 0, without = 0, line_no = 0;
  std::set<std::string> seen;
  for (const auto& line : read_lines(o.input)) {
    ++line_no;
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto cols = text::split(line, '\t');
    if (cols.size() < 3 || cols.size() > 4) {
      throw ParseError(line_no, "expected id<TAB>source<TAB>reference[<TAB>pos tags], got " +
                                    std::to_string(cols.size()) + " columns");
    }
    ContrastiveInstance inst;
    inst.instance_id = cols[0];
    if (!seen.insert(inst.instance_id).second) {
      throw ValidationError("duplicate instance id '" + inst.instance_id + "'");
    }
    inst.source_tokens = text::split_whitespace(cols[1]);
    inst.reference_tokens = text::split_whitespace(cols[2]);
    if (inst.reference_tokens.empty()) throw ParseError(line_no, "empty reference");
    if (o.lang == "de") {
      inst.variants = gen_german_variants(inst.reference_tokens, vocab);
    } else {
      ChineseOptions opts = zh;
      if (cols.size() == 4) {
        opts.pos_tags = text::split_whitespace(cols[3]);
        if (opts.pos_tags.size() != inst.reference_tokens.size()) {
          throw ParseError(line_no, "POS tag count differs from reference token count");
        }
      }
      inst.variants = gen_chinese_variants(inst.reference_tokens, opts);
    }
    ++instances;
    if (inst.variants.empty()) {
      ++without;
      ctx.report.warnings.push_back("instance '" + inst.instance_id + "': no rule applies");
    }
    for (const auto& v : inst.variants) {
      auto& [n, review] = per_rule[v.rule];
      ++n;
      if (v.needs_review) ++review;
    }
    jsonl += to_jsonl(inst);
    jsonl += '\n';
  }

  ctx.writer.add(o.output.empty() ? ctx.output_path(".jsonl") : o.output, jsonl);
  Table t{"variants", {"rule", "direction", "variants", "needs_review"}, {}};
  for (const auto& [rule, c] : per_rule) {
    t.add_row({std::string(to_string(rule)), std::string(to_string(direction_of(rule))),
               as_int(c.first), as_int(c.second)});
  }
  ctx.report.tables.push_back(std::move(t));
  ctx.report.summary["instances"] = as_int(instances);
  ctx.report.summary["instances_without_variants"] = as_int(without);
  ctx.charts["variants"] = {ChartKind::kBars, {"variants"}};
}

struct ScoreOptions {
  std::string set;
  std::string scores;
  std::string expect_groups;
};

void cmd_contrastive_score(Context& ctx, const ScoreOptions& o) {
  ctx.digest(o.set);
  ctx.digest(o.scores);
  auto set_in = open_input(o.set);
  const auto set = read_contrastive_set(set_in);
  auto score_in = open_input(o.scores);
  const auto scores = read_score_file(score_in);
  const auto outcomes = score_contrastive_set(set, scores, &ctx.report.warnings);
  std::vector<std::string> expected;
  for (const auto& g : text::split(o.expect_groups, ',')) {
    if (!text::trim(g).empty()) expected.emplace_back(text::trim(g));
  }
  auto acc = contrastive_accuracy(outcomes, expected);
  for (auto& w : acc.warnings) ctx.report.warnings.push_back(std::move(w));
  Table t{"accuracy", {"group", "direction", "n", "correct", "accuracy"}, {}};
  for (const auto& r : acc.rows) {
    t.add_row({r.group, r.direction, as_int(r.n), as_int(r.correct), r.accuracy});
  }
  ctx.report.tables.push_back(std::move(t));
  ctx.charts["accuracy"] = {ChartKind::kBars, {"accuracy"}};
}

// ------------------------------------------------------------------ flow

struct FlowCliOptions {
  std::string trace;
  std::string cues;
  std::string layers;
  std::string heads = "avg";
  std::string measure = "both";
  std::string decoder_mixing = "split";
  std::string marker = std::string(kDefaultContinuationMarker);
};

/// Cue table: `pair_id,src_pos,category` with src_pos a 0-based source word
/// index and category `correct` or `under`.
std::vector<CueLabel> read_cue_labels(const std::string& path, const TraceSet& traces,
                                      const std::string& marker) {
  const auto lines = read_lines(path);
  if (lines.empty() || text::trim(lines[0]) != "pair_id,src_pos,category") {
    throw ParseError(1, "expected header 'pair_id,src_pos,category'");
  }
  std::vector<CueLabel> cues;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto cols = text::split(lines[i], ',');
    if (cols.size() != 3) throw ParseError(i + 1, "expected 3 columns");
    CueLabel cue;
    cue.pair_id = std::string(text::trim(cols[0]));
    const auto pos_text = std::string(text::trim(cols[1]));
    if (pos_text.empty() ||
        !std::all_of(pos_text.begin(), pos_text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw ParseError(i + 1, "src_pos '" + pos_text + "' is not a non-negative integer");
    }
    const std::size_t word = std::stoul(pos_text);
    const auto category = text::ascii_lower(text::trim(cols[2]));
    if (category == "correct") {
      cue.correct = true;
    } else if (category == "under" || category == "dropped") {
      cue.correct = false;
    } else {
      throw ParseError(i + 1, "category must be 'correct' or 'under', got '" + category + "'");
    }
    const ModelTrace* trace = traces.find(cue.pair_id);
    if (!trace) {
      throw ValidationError("cue table line " + std::to_string(i + 1) + ": pair '" + cue.pair_id +
                            "' is not in the trace set");
    }
    if (trace->src_tokens.empty()) {
      if (word >= trace->dims.src_len) {
        throw ValidationError("cue table line " + std::to_string(i + 1) + ": src_pos " + pos_text +
                              " is outside the source (length " +
                              std::to_string(trace->dims.src_len) + ")");
      }
      cue.positions = {word};
    } else {
      const auto words = merge_subwords(trace->src_tokens, marker);
      const auto align = align_subwords(words, trace->src_tokens, marker);
      if (word >= align.word_count()) {
        throw ValidationError("cue table line " + std::to_string(i + 1) + ": src_pos " + pos_text +
                              " is outside the source (" + std::to_string(align.word_count()) +
                              " words)");
      }
      const auto span = align.word_to_subwords[word];
      for (int p = span.first; p <= span.last; ++p) cue.positions.push_back(static_cast<std::size_t>(p));
    }
    cues.push_back(std::move(cue));
  }
  if (cues.empty()) throw ValidationError("cue table '" + path + "' has no rows");
  return cues;
}

void add_flow_table(Context& ctx, const std::string& name, const FlowReport& fr) {
  Table t{name, {"layer", "group", "n", "mean", "abs_rho"}, {}};
  for (const auto& r : fr.rows) {
    t.add_row({as_int(r.layer), std::string(r.correct_group ? "correct" : "under"), as_int(r.n), r.mean,
               optional_cell(r.abs_rho)});
  }
  for (const auto& w : fr.warnings) ctx.report.warnings.push_back(name + ": " + w);
  ctx.report.tables.push_back(std::move(t));
}

std::vector<std::size_t> decoder_layers(const std::string& spec, std::size_t dec_layers) {
  std::vector<std::size_t> out;
  if (spec.empty()) {
    for (std::size_t l = 1; l <= dec_layers; ++l) out.push_back(l);
    return out;
  }
  for (const auto& ref : parse_layer_list(spec, TraceSide::kDecoder)) {
    if (ref.side != TraceSide::kDecoder) {
      throw UsageError("flow layers are decoder layers; got '" + ref.label() + "'");
    }
    if (ref.index < 1 || ref.index > dec_layers) {
      throw UsageError("decoder layer " + std::to_string(ref.index) + " is out of range 1.." +
                       std::to_string(dec_layers));
    }
    out.push_back(ref.index);
  }
  return out;
}

void cmd_flow(Context& ctx, const FlowCliOptions& o) {
  FlowOptions opts;
  opts.heads = parse_head_mode(o.heads);
  if (o.decoder_mixing == "split") {
    opts.decoder_mixing = DecoderMixing::kSplit;
  } else if (o.decoder_mixing == "unscaled") {
    opts.decoder_mixing = DecoderMixing::kUnscaled;
  } else {
    throw UsageError("--decoder-mixing must be 'split' or 'unscaled'");
  }
  if (o.measure != "flow" && o.measure != "raw" && o.measure != "both") {
    throw UsageError("--measure must be 'flow', 'raw' or 'both'");
  }
  opts.jobs = ctx.config.jobs;
  ctx.digest(o.trace);
  ctx.digest(o.cues);
  const auto traces = read_trace(o.trace);
  if (traces.traces.empty()) throw ValidationError("trace file '" + o.trace + "' holds no traces");
  const auto layers = decoder_layers(o.layers, traces.shared_dims().dec_layers);
  const auto cues = read_cue_labels(o.cues, traces, o.marker);

  if (o.measure != "raw") {
    add_flow_table(ctx, "flow", flow_report(traces, cues, layers, opts, CueMeasure::kFlow));
    ctx.charts["flow"] = {ChartKind::kBars, {"mean"}};
  }
  if (o.measure != "flow") {
    add_flow_table(ctx, "raw_attention",
                   flow_report(traces, cues, layers, opts, CueMeasure::kRawAttention));
    ctx.charts["raw_attention"] = {ChartKind::kBars, {"mean"}};
  }
  ctx.report.summary["cues"] = as_int(cues.size());
  ctx.report.summary["heads"] = std::string(to_string(opts.heads));
  ctx.report.summary["decoder_mixing"] = o.decoder_mixing;
}

// ----------------------------------------------------------------- probe

struct ProbeCliOptions {
  std::string task = "cue";
  std::string side = "enc";
  std::string layers;
  std::string trace;
  std::string train, dev, test;
  std::string pooling = "word";
  std::size_t epochs = 100;
  std::size_t seeds = 5;
  std::size_t hidden = 512;
  double lr = 1e-3;
};

void cmd_probe(Context& ctx, const ProbeCliOptions& o) {
  const auto task = parse_probe_task(o.task);
  const auto side = parse_trace_side(o.side);
  Pooling pooling;
  if (o.pooling == "word") {
    pooling = Pooling::kWordMean;
  } else if (o.pooling == "subword") {
    pooling = Pooling::kSubword;
  } else {
    throw UsageError("--pooling must be 'word' or 'subword'");
  }
  for (const auto* p : {&o.trace, &o.train, &o.dev, &o.test}) {
    if (!p->empty()) ctx.digest(*p);
  }
  const auto traces = read_trace(o.trace);
  if (traces.traces.empty()) throw ValidationError("trace file '" + o.trace + "' holds no traces");
  const auto dims = traces.shared_dims();

  std::vector<std::size_t> layers;
  if (o.layers.empty()) {
    layers.push_back(side == TraceSide::kEncoder ? dims.enc_layers : dims.dec_layers);
  } else {
    for (const auto& ref : parse_layer_list(o.layers, side)) {
      if (ref.side != side) throw UsageError("layer '" + ref.label() + "' is not on side " + o.side);
      const bool ok = side == TraceSide::kEncoder ? ref.index <= dims.enc_layers
                                                  : ref.index >= 1 && ref.index <= dims.dec_layers;
      if (!ok) throw UsageError("layer " + ref.label() + " is not present in the traces");
      layers.push_back(ref.index);
    }
  }

  const auto train = parse_negpar_file(o.train);
  const auto dev = parse_negpar_file(o.dev);
  std::vector<AnnotatedSentence> test;
  if (!o.test.empty()) test = parse_negpar_file(o.test);

  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.seeds = o.seeds;
  cfg.hidden = o.hidden;
  cfg.learning_rate = o.lr;
  cfg.base_seed = ctx.config.seed;
  ctx.report.provenance.seeds["base_seed"] = cfg.base_seed;
  ctx.report.provenance.seeds["seed_count"] = cfg.seeds;

  std::vector<int> classes = {selection_class(task)};
  if (class_count(task) == 3) classes = {kCueClass, kSpanClass};
  const auto class_name = [&](int c) -> std::string {
    if (c == kCueClass) return "cue";
    return std::string(to_string(task));
  };

  struct LayerResult {
    std::vector<ProbeModel> models;
    std::vector<std::vector<PRF>> dev_prf, test_prf;  // [seed][class]
    std::vector<std::string> warnings;
  };
  std::vector<LayerResult> results(layers.size());
  parallel_for(layers.size(), ctx.config.jobs, [&](std::size_t i) {
    auto& r = results[i];
    const auto train_set = token_dataset(train, traces, side, layers[i], task, pooling);
    const auto dev_set = token_dataset(dev, traces, side, layers[i], task, pooling);
    for (const auto* ds : {&train_set, &dev_set}) {
      r.warnings.insert(r.warnings.end(), ds->warnings.begin(), ds->warnings.end());
    }
    r.models = train_probe(train_set, dev_set, task, cfg);
    std::optional<ProbeDataset> test_set;
    if (!test.empty()) {
      test_set = token_dataset(test, traces, side, layers[i], task, pooling);
      r.warnings.insert(r.warnings.end(), test_set->warnings.begin(), test_set->warnings.end());
    }
    for (auto& m : r.models) {
      m.metadata.layer = layers[i];
      m.metadata.side = side;
      r.dev_prf.push_back(evaluate(predict(m, dev_set.features()), dev_set.labels(), classes));
      if (test_set) {
        r.test_prf.push_back(evaluate(predict(m, test_set->features()), test_set->labels(), classes));
      }
    }
  });

  Table metrics{"metrics", {"layer", "split", "class", "precision", "recall", "f1"}, {}};
  Table runs{"runs", {"layer", "seed", "epoch_selected", "dev_f1"}, {}};
  Table sweep{"sweep", {"layer", "dev_f1"}, {}};
  if (!test.empty()) sweep.columns.push_back("test_f1");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& r = results[i];
    for (auto& w : r.warnings) ctx.report.warnings.push_back(std::move(w));
    std::vector<Cell> sweep_row{as_int(layers[i])};
    for (const auto* split : {&r.dev_prf, &r.test_prf}) {
      if (split->empty()) continue;
      const std::string split_name = split == &r.dev_prf ? "dev" : "test";
      for (std::size_t k = 0; k < classes.size(); ++k) {
        std::vector<PRF> per_seed;
        for (const auto& s : *split) per_seed.push_back(s[k]);
        const auto avg = average_prf(per_seed);
        metrics.add_row({as_int(layers[i]), split_name, class_name(classes[k]), avg.precision,
                         avg.recall, avg.f1});
        if (classes[k] == selection_class(task)) sweep_row.push_back(avg.f1);
      }
    }
    sweep.add_row(std::move(sweep_row));
    for (const auto& m : r.models) {
      runs.add_row({as_int(layers[i]), static_cast<std::int64_t>(m.metadata.seed),
                    as_int(m.metadata.epoch_selected), m.metadata.best_dev_f1});
    }
  }
  ctx.report.tables.push_back(std::move(metrics));
  ctx.report.tables.push_back(std::move(runs));
  ctx.report.tables.push_back(std::move(sweep));
  ctx.charts["sweep"] = {ChartKind::kLines, {}};
  ctx.report.summary["task"] = std::string(to_string(task));
  ctx.report.summary["side"] = std::string(to_string(side));
}

// ------------------------------------------------------------------- sim

struct SimOptions {
  std::string trace;
  std::string corpus;
  std::string layers;
  std::string side = "enc";
};

void cmd_sim(Context& ctx, const SimOptions& o) {
  const auto side = parse_trace_side(o.side);
  ctx.digest(o.trace);
  ctx.digest(o.corpus);
  const auto traces = read_trace(o.trace);
  if (traces.traces.empty()) throw ValidationError("trace file '" + o.trace + "' holds no traces");
  const auto dims = traces.shared_dims();
  std::vector<LayerRef> layers;
  if (o.layers.empty()) {
    if (side == TraceSide::kEncoder) {
      for (std::size_t l = 0; l <= dims.enc_layers; ++l) layers.push_back({side, l});
    } else {
      for (std::size_t l = 1; l <= dims.dec_layers; ++l) layers.push_back({side, l});
    }
  } else {
    layers = parse_layer_list(o.layers, side);
  }
  for (const auto& l : layers) {
    const bool ok = l.side == TraceSide::kEncoder ? l.index <= dims.enc_layers
                                                  : l.index >= 1 && l.index <= dims.dec_layers;
    if (!ok) throw UsageError("layer " + l.label() + " is not present in the traces");
  }
  const auto corpus = parse_negpar_file(o.corpus);

  std::vector<SimTriple> triples(layers.size());
  std::vector<std::vector<std::string>> warnings(layers.size());
  parallel_for(layers.size(), ctx.config.jobs, [&](std::size_t i) {
    triples[i] = sim_groups(corpus, traces, layers[i], &warnings[i]);
  });
  // Missing-trace warnings repeat for every layer; keep the first layer's.
  if (!warnings.empty()) {
    for (auto& w : warnings.front()) ctx.report.warnings.push_back(std::move(w));
  }

  Table t{"similarity", {"layer", "sim_ce", "sim_cs", "sim_co", "n_ce", "n_cs", "n_co"}, {}};
  for (const auto& s : triples) {
    t.add_row({s.layer.label(), optional_cell(s.sim_ce), optional_cell(s.sim_cs),
               optional_cell(s.sim_co), as_int(s.n_ce), as_int(s.n_cs), as_int(s.n_co)});
  }
  ctx.report.tables.push_back(std::move(t));
  ctx.charts["similarity"] = {ChartKind::kLines, {"sim_ce", "sim_cs", "sim_co"}};
}

// ------------------------------------------------------------------ scan

struct ScanOptions {
  std::string src, tgt;
  std::string src_lexicon, tgt_lexicon;
  bool raw = false;
  std::string filter;
  std::string filtered_prefix;
};

void cmd_scan(Context& ctx, const ScanOptions& o) {
  ScanConfig cfg;
  if (!o.src_lexicon.empty()) {
    ctx.digest(o.src_lexicon);
    cfg.source_lexicon = load_lexicon(o.src_lexicon);
  }
  if (!o.tgt_lexicon.empty()) {
    ctx.digest(o.tgt_lexicon);
    cfg.target_lexicon = load_lexicon(o.tgt_lexicon);
  }
  cfg.text_mode = o.raw ? TextMode::kRaw : TextMode::kTokenized;
  std::optional<FilterPolicy> policy;
  if (!o.filter.empty()) policy = parse_filter_policy(o.filter);
  ctx.digest(o.src);
  ctx.digest(o.tgt);
  auto src = open_input(o.src, true);
  auto tgt = open_input(o.tgt, true);

  MismatchTable table;
  if (policy) {
    const std::string prefix =
        o.filtered_prefix.empty() ? ctx.output_path(".filtered") : o.filtered_prefix;
    const auto src_tmp = ctx.writer.stage(prefix + ".src");
    const auto tgt_tmp = ctx.writer.stage(prefix + ".tgt");
    std::ofstream src_out(src_tmp, std::ios::binary), tgt_out(tgt_tmp, std::ios::binary);
    std::ofstream tag_out;
    FilterSinks sinks{&src_out, &tgt_out, nullptr};
    if (*policy == FilterPolicy::kKeepAllTagged) {
      tag_out.open(ctx.writer.stage(prefix + ".tags"), std::ios::binary);
      sinks.tags = &tag_out;
    }
    if (!src_out || !tgt_out || (sinks.tags && !tag_out)) {
      throw IoError("cannot open filtered output under '" + prefix + "'");
    }
    const auto summary = filter_matched(src, tgt, cfg, *policy, sinks);
    for (auto* s : {&src_out, &tgt_out, &tag_out}) {
      if (s->is_open()) s->close();
      if (s->fail()) throw IoError("write error on filtered output under '" + prefix + "'");
    }
    table = summary.input;
    ctx.report.summary["emitted"] = as_int(summary.emitted);
    ctx.report.summary["filter_policy"] = o.filter;
  } else {
    table = scan_parallel(src, tgt, cfg);
  }

  Table t{"quadrants", {"quadrant", "count", "ratio"}, {}};
  for (auto q : {Quadrant::kBoth, Quadrant::kSourceOnly, Quadrant::kTargetOnly, Quadrant::kNeither}) {
    t.add_row({std::string(to_string(q)), as_int(table.count(q)), table.ratio(q)});
  }
  ctx.report.tables.push_back(std::move(t));
  ctx.report.summary["pairs"] = as_int(table.total());
  ctx.report.summary["unreadable"] = as_int(table.unreadable);
  ctx.report.summary["mismatch_rate"] = table.mismatch_rate();
  ctx.report.summary["text_mode"] = std::string(to_string(cfg.text_mode));
  if (table.unreadable) {
    ctx.report.warnings.push_back(std::to_string(table.unreadable) +
                                  " line pairs were unreadable and skipped");
  }
  for (const auto* lex : {&cfg.source_lexicon, &cfg.target_lexicon}) {
    if (lex->mode == MatchMode::kWord) {
      ctx.report.notes.push_back("'" + lex->language +
                                 "' cues are matched as whole words; affixal negation "
                                 "(un-, in-, -less) is not detected.");
    }
  }
  ctx.charts["quadrants"] = {ChartKind::kBars, {"count"}};
}

// ----------------------------------------------------------------- trace

void add_trace_table(Context& ctx, const TraceSet& set) {
  Table t{"traces",
          {"pair_id", "enc_layers", "dec_layers", "heads", "src_len", "tgt_len", "hidden_dim"},
          {}};
  for (const auto& tr : set.traces) {
    const auto& d = tr.dims;
    t.add_row({tr.pair_id, as_int(d.enc_layers), as_int(d.dec_layers), as_int(d.heads),
               as_int(d.src_len), as_int(d.tgt_len), as_int(d.hidden_dim)});
  }
  ctx.report.tables.push_back(std::move(t));
}

void cmd_trace_validate(Context& ctx, const std::vector<std::string>& files) {
  for (const auto& f : files) {
    ctx.digest(f);
    add_trace_table(ctx, read_trace(f));
  }
  if (files.size() > 1) {
    // One table per file; suffix by position so names stay unique.
    for (std::size_t i = 0; i < ctx.report.tables.size(); ++i) {
      ctx.report.tables[i].name += std::to_string(i);
    }
  }
}

struct SynthOptions {
  std::string dims;
  std::size_t count = 1;
  std::string output;
};

void cmd_trace_synth(Context& ctx, const SynthOptions& o) {
  const auto dims = parse_dims(o.dims);
  TraceSet set;
  for (std::size_t i = 0; i < o.count; ++i) {
    set.traces.push_back(synth_trace(ctx.config.seed + i, dims, "synth" + std::to_string(i)));
  }
  validate_trace_set(set);
  ctx.writer.add(o.output.empty() ? ctx.output_path(".negtrace") : o.output, encode_traces(set));
  ctx.report.provenance.seeds["seed"] = ctx.config.seed;
  add_trace_table(ctx, set);
}

// ---------------------------------------------------------------- report

void cmd_report_manual(Context& ctx, const std::string& labels_path) {
  ctx.digest(labels_path);
  auto in = open_input(labels_path);
  const auto summary = aggregate_manual(read_manual_labels(in));
  Table t{"manual", {"category", "count", "percent"}, {}};
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    t.add_row({std::string(to_string(static_cast<Category>(c))), as_int(summary.counts[c]),
               summary.percentages[c]});
  }
  ctx.report.tables.push_back(std::move(t));
  ctx.report.summary["total"] = as_int(summary.total);
  ctx.report.summary["accuracy_percent"] = summary.accuracy * 100.0;
  ctx.charts["manual"] = {ChartKind::kBars, {"percent"}};
}

struct ChartOptions {
  std::string table;
  std::string kind = "bars";
  std::string series;
  std::string output;
};

void cmd_report_chart(Context& ctx, const ChartOptions& o) {
  const auto kind = parse_chart_kind(o.kind);
  auto in = open_input(o.table, true);
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto table = table_from_csv(fs::path(o.table).stem().string(), buf.str());
  std::vector<std::string> series;
  for (const auto& s : text::split(o.series, ',')) {
    if (!text::trim(s).empty()) series.emplace_back(text::trim(s));
  }
  const auto svg = emit_chart(table, kind, series);
  ctx.writer.add(o.output.empty() ? ctx.output_path(".svg") : o.output, svg);
  ctx.emit_report = false;
}

// ---------------------------------------------------------------- driver

void finish(Context& ctx, std::ostream& out) {
  ctx.report.command = ctx.config.command;
  ctx.report.arguments = ctx.config.arguments;
  ctx.report.provenance.toolkit_version = toolkit_version();
  if (ctx.emit_report) {
    for (const auto& t : ctx.report.tables) {
      if (ctx.config.write_csv) ctx.writer.add(ctx.output_path("." + t.name + ".csv"), to_csv(t));
      if (ctx.config.charts) {
        auto it = ctx.charts.find(t.name);
        if (it != ctx.charts.end() && !t.rows.empty()) {
          ctx.writer.add(ctx.output_path("." + t.name + ".svg"),
                         emit_chart(t, it->second.first, it->second.second));
        }
      }
    }
    if (ctx.config.write_json) ctx.writer.add(ctx.output_path(".json"), to_json(ctx.report));
  }
  const auto written = ctx.writer.destinations();
  ctx.writer.commit();
  if (!ctx.config.quiet) {
    for (const auto& p : written) out << p << '\n';
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx;
  ctx.config.arguments = args;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) ctx.config.out_dir = env;

  CLI::App app{"Negation analysis toolkit for neural machine translation", "negmt"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML or INI file with option defaults; flags override it");
  app.set_version_flag("--version", toolkit_version());
  app.add_option("--out-dir", ctx.config.out_dir,
                 std::string("Output directory (default: $") + kOutDirEnv + " or .)");
  app.add_option("--name", ctx.config.name, "Output basename (default: the command name)");
  std::vector<std::string> formats = {"csv", "json"};
  app.add_option("--format", formats, "Report formats")
      ->delimiter(',')
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--chart", ctx.config.charts, "Also write SVG charts for the result tables");
  app.add_option("--jobs", ctx.config.jobs, "Worker threads")->check(CLI::Range(1, 1024));
  app.add_option("--seed", ctx.config.seed, "Seed for every random choice");
  app.add_flag("--quiet", ctx.config.quiet, "Do not list written files");

  std::function<void()> action;
  auto bind = [&](CLI::App* sub, std::string command, std::function<void()> fn) {
    sub->callback([&, command, fn] {
      ctx.config.command = command;
      action = fn;
    });
  };

  IngestOptions ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse annotated corpora and count negation components");
  ingest_cmd->add_option("--train", ingest.train, "Training split");
  ingest_cmd->add_option("--dev", ingest.dev, "Development split");
  ingest_cmd->add_option("--test", ingest.test, "Test split");
  bind(ingest_cmd, "ingest", [&] { cmd_ingest(ctx, ingest); });

  auto* contrastive = app.add_subcommand("contrastive", "Contrastive polarity test sets");
  contrastive->require_subcommand(1);
  GenOptions gen;
  auto* gen_cmd = contrastive->add_subcommand("gen", "Generate polarity-flipped variants");
  gen_cmd->add_option("--lang", gen.lang, "Reference language: de or zh")->required();
  gen_cmd->add_option("--input", gen.input, "TSV: id, source, reference[, POS tags]")->required();
  gen_cmd->add_option("--vocab", gen.vocab, "Word list gating affixal rules (de)");
  gen_cmd->add_option("--insert-cues", gen.insert_cues, "Comma-separated cues to insert (zh)");
  gen_cmd->add_option("--output", gen.output, "Contrastive set path (default: <out>/<name>.jsonl)");
  bind(gen_cmd, "contrastive gen", [&] { cmd_contrastive_gen(ctx, gen); });

  ScoreOptions score;
  auto* score_cmd = contrastive->add_subcommand("score", "Score a contrastive set");
  score_cmd->add_option("--set", score.set, "Contrastive set (JSON lines)")->required();
  score_cmd->add_option("--scores", score.scores, "Token log-probabilities (JSON lines)")->required();
  score_cmd->add_option("--expect-groups", score.expect_groups,
                        "Comma-separated groups that must be populated");
  bind(score_cmd, "contrastive score", [&] { cmd_contrastive_score(ctx, score); });

  FlowCliOptions flow;
  auto* flow_cmd = app.add_subcommand("flow", "Attention flow into negation cues");
  flow_cmd->add_option("--trace", flow.trace, "Trace container")->required();
  flow_cmd->add_option("--cues", flow.cues, "CSV: pair_id,src_pos,category")->required();
  flow_cmd->add_option("--layers", flow.layers, "Decoder layers, e.g. 1..6 (default: all)");
  flow_cmd->add_option("--heads", flow.heads, "Head aggregation")
      ->check(CLI::IsMember({"avg", "max"}));
  flow_cmd->add_option("--measure", flow.measure, "flow, raw or both");
  flow_cmd->add_option("--decoder-mixing", flow.decoder_mixing, "split or unscaled");
  flow_cmd->add_option("--marker", flow.marker, "Subword continuation marker");
  bind(flow_cmd, "flow", [&] { cmd_flow(ctx, flow); });

  ProbeCliOptions probe;
  auto* probe_cmd = app.add_subcommand("probe", "Train and evaluate probing classifiers");
  probe_cmd->add_option("--task", probe.task, "cue, scope or event")
      ->check(CLI::IsMember({"cue", "scope", "event"}));
  probe_cmd->add_option("--side", probe.side, "enc or dec")->check(CLI::IsMember({"enc", "dec"}));
  probe_cmd->add_option("--layers", probe.layers, "Layers, e.g. 0..6 (default: top layer)");
  probe_cmd->add_option("--trace", probe.trace, "Trace container")->required();
  probe_cmd->add_option("--train", probe.train, "Training corpus")->required();
  probe_cmd->add_option("--dev", probe.dev, "Development corpus")->required();
  probe_cmd->add_option("--test", probe.test, "Test corpus");
  probe_cmd->add_option("--pooling", probe.pooling, "word or subword");
  probe_cmd->add_option("--epochs", probe.epochs, "Training epochs")->check(CLI::Range(1, 100000));
  probe_cmd->add_option("--seeds", probe.seeds, "Number of seeds")->check(CLI::Range(1, 1000));
  probe_cmd->add_option("--hidden", probe.hidden, "Hidden units")->check(CLI::Range(1, 65536));
  probe_cmd->add_option("--lr", probe.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  bind(probe_cmd, "probe", [&] { cmd_probe(ctx, probe); });

  SimOptions sim;
  auto* sim_cmd = app.add_subcommand("sim", "Cue similarity to events, scope and other tokens");
  sim_cmd->add_option("--trace", sim.trace, "Trace container")->required();
  sim_cmd->add_option("--corpus", sim.corpus, "Annotated corpus")->required();
  sim_cmd->add_option("--layers", sim.layers, "Layers, e.g. 0..6,dec6 (default: all on --side)");
  sim_cmd->add_option("--side", sim.side, "Default side")->check(CLI::IsMember({"enc", "dec"}));
  bind(sim_cmd, "sim", [&] { cmd_sim(ctx, sim); });

  ScanOptions scan;
  auto* scan_cmd = app.add_subcommand("scan", "Cue-match statistics over a parallel corpus");
  scan_cmd->add_option("--src", scan.src, "Source side, one sentence per line")->required();
  scan_cmd->add_option("--tgt", scan.tgt, "Target side, one sentence per line")->required();
  scan_cmd->add_option("--src-lexicon", scan.src_lexicon, "Source cue lexicon (JSON)");
  scan_cmd->add_option("--tgt-lexicon", scan.tgt_lexicon, "Target cue lexicon (JSON)");
  scan_cmd->add_flag("--raw", scan.raw, "Input is untokenized");
  scan_cmd->add_option("--filter", scan.filter, "drop_mismatch or keep_all_tagged")
      ->check(CLI::IsMember({"drop_mismatch", "keep_all_tagged"}));
  scan_cmd->add_option("--filtered-prefix", scan.filtered_prefix,
                       "Path prefix for filtered output (default: <out>/<name>.filtered)");
  bind(scan_cmd, "scan", [&] { cmd_scan(ctx, scan); });

  auto* trace_cmd = app.add_subcommand("trace", "Trace container utilities");
  trace_cmd->require_subcommand(1);
  std::vector<std::string> validate_files;
  auto* validate_cmd = trace_cmd->add_subcommand("validate", "Check trace containers");
  validate_cmd->add_option("files", validate_files, "Trace containers")->required();
  bind(validate_cmd, "trace validate", [&] { cmd_trace_validate(ctx, validate_files); });
  SynthOptions synth;
  auto* synth_cmd = trace_cmd->add_subcommand("synth", "Write synthetic traces");
  synth_cmd->add_option("--dims", synth.dims, "Le,Ld,H,S,T,D")->required();
  synth_cmd->add_option("--count", synth.count, "Number of traces")->check(CLI::Range(1, 1000000));
  synth_cmd->add_option("--output", synth.output, "Path (default: <out>/<name>.negtrace)");
  bind(synth_cmd, "trace synth", [&] { cmd_trace_synth(ctx, synth); });

  auto* report_cmd = app.add_subcommand("report", "Summaries and charts");
  report_cmd->require_subcommand(1);
  std::string labels_path;
  auto* manual_cmd = report_cmd->add_subcommand("manual", "Aggregate manual evaluation labels");
  manual_cmd->add_option("--labels", labels_path, "CSV: pair_id,category")->required();
  bind(manual_cmd, "report manual", [&] { cmd_report_manual(ctx, labels_path); });
  ChartOptions chart;
  auto* chart_cmd = report_cmd->add_subcommand("chart", "Render a result CSV as SVG");
  chart_cmd->add_option("--table", chart.table, "Result table (CSV)")->required();
  chart_cmd->add_option("--kind", chart.kind, "bars or lines")->check(CLI::IsMember({"bars", "lines"}));
  chart_cmd->add_option("--series", chart.series, "Comma-separated numeric columns");
  chart_cmd->add_option("--output", chart.output, "SVG path (default: <out>/<name>.svg)");
  bind(chart_cmd, "report chart", [&] { cmd_report_chart(ctx, chart); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!action) throw UsageError("no command given");
    ctx.config.write_csv = std::find(formats.begin(), formats.end(), "csv") != formats.end();
    ctx.config.write_json = std::find(formats.begin(), formats.end(), "json") != formats.end();
    if (ctx.config.name.empty()) {
      ctx.config.name = ctx.config.command;
      std::replace(ctx.config.name.begin(), ctx.config.name.end(), ' ', '_');
    }
    action();
    finish(ctx, out);
    for (const auto& w : ctx.report.warnings) err << "warning: " << w << '\n';
    return kExitOk;
  } catch (const Error& e) {
    ctx.writer.discard();
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    ctx.writer.discard();
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    ctx.writer.discard();
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace negmt
