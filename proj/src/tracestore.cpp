#include "negmt/tracestore.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <unordered_set>

#include "negmt/errors.hpp"
#include "negmt/text.hpp"

namespace negmt {

using json = nlohmann::json;

namespace {

constexpr std::size_t kMaxDim = std::size_t{1} << 20;
constexpr std::size_t kMaxMessagesPerTrace = 20;

const std::vector<std::string>& tensor_order() {
  static const std::vector<std::string> order{"enc_self_attn", "dec_self_attn", "cross_attn",
                                              "enc_hidden",    "dec_hidden",    "tgt_token_logprobs"};
  return order;
}

json dims_to_json(const TraceDims& d) {
  return {{"enc_layers", d.enc_layers}, {"dec_layers", d.dec_layers}, {"heads", d.heads},
          {"src_len", d.src_len},       {"tgt_len", d.tgt_len},       {"hidden_dim", d.hidden_dim}};
}

TraceDims dims_from_json(const json& j) {
  TraceDims d;
  d.enc_layers = j.at("enc_layers").get<std::size_t>();
  d.dec_layers = j.at("dec_layers").get<std::size_t>();
  d.heads = j.at("heads").get<std::size_t>();
  d.src_len = j.at("src_len").get<std::size_t>();
  d.tgt_len = j.at("tgt_len").get<std::size_t>();
  d.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  return d;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return v;
}

void put_floats(std::string& out, std::span<const float> values) {
  for (float f : values) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    put_u32(out, bits);
  }
}

class Cursor {
 public:
  explicit Cursor(std::string_view bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const std::string& what) const {
    if (n > remaining()) {
      throw FormatError("truncated container: " + what + " needs " + std::to_string(n) +
                        " bytes, " + std::to_string(remaining()) + " left");
    }
  }

  std::string_view take(std::size_t n, const std::string& what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void read_floats(std::span<float> out, const std::string& what) {
    if (out.size() > remaining() / 4) need(out.size() * 4, what);
    const auto chunk = take(out.size() * 4, what);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::bit_cast<float>(get_le<std::uint32_t>(chunk, 4 * i));
    }
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::size_t checked_product(std::initializer_list<std::size_t> dims) {
  std::size_t p = 1;
  for (auto d : dims) {
    if (d != 0 && p > std::numeric_limits<std::size_t>::max() / d) {
      throw FormatError("tensor extent overflows");
    }
    p *= d;
  }
  return p;
}

struct RowCheck {
  std::vector<std::string>& messages;
  const std::string& pair;
  std::size_t dropped = 0;

  void report(std::string msg) {
    if (messages.size() < kMaxMessagesPerTrace) {
      messages.push_back("pair '" + pair + "': " + std::move(msg));
    } else {
      ++dropped;
    }
  }

  void attention(const Tensor<4>& t, std::string_view name, bool causal) {
    for (std::size_t l = 0; l < t.dim(0); ++l) {
      for (std::size_t h = 0; h < t.dim(1); ++h) {
        for (std::size_t q = 0; q < t.dim(2); ++q) {
          const auto row = t.row(l, h, q);
          double sum = 0.0;
          bool bad_entry = false;
          for (std::size_t k = 0; k < row.size(); ++k) {
            const float v = row[k];
            if (!std::isfinite(v) || v < 0.0f) bad_entry = true;
            if (causal && k > q && v != 0.0f) {
              report(std::string(name) + " layer " + std::to_string(l) + " head " +
                     std::to_string(h) + " row " + std::to_string(q) +
                     " attends to future position " + std::to_string(k));
            }
            sum += v;
          }
          const std::string where = std::string(name) + " layer " + std::to_string(l) +
                                    " head " + std::to_string(h) + " row " + std::to_string(q);
          if (bad_entry) {
            report(where + " has a negative or non-finite entry");
          } else if (std::abs(sum - 1.0) > kAttentionRowTolerance) {
            std::ostringstream os;
            os << where << " sums to " << sum;
            report(os.str());
          }
        }
      }
    }
  }
};

}  // namespace

TraceDims parse_dims(std::string_view spec) {
  const auto parts = text::split(spec, ',');
  if (parts.size() != 6) {
    throw UsageError("dims must be 'enc_layers,dec_layers,heads,src_len,tgt_len,hidden_dim'");
  }
  std::array<std::size_t, 6> v{};
  for (std::size_t i = 0; i < 6; ++i) {
    try {
      std::size_t used = 0;
      const long long x = std::stoll(parts[i], &used);
      if (used != parts[i].size() || x <= 0 || static_cast<std::size_t>(x) > kMaxDim) {
        throw std::invalid_argument("range");
      }
      v[i] = static_cast<std::size_t>(x);
    } catch (const std::exception&) {
      throw UsageError("dims entry '" + parts[i] + "' is not a positive integer");
    }
  }
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

ModelTrace ModelTrace::zeros(std::string pair_id, const TraceDims& d) {
  ModelTrace t;
  t.pair_id = std::move(pair_id);
  t.dims = d;
  t.enc_self_attn = Tensor<4>({d.enc_layers, d.heads, d.src_len, d.src_len});
  t.dec_self_attn = Tensor<4>({d.dec_layers, d.heads, d.tgt_len, d.tgt_len});
  t.cross_attn = Tensor<4>({d.dec_layers, d.heads, d.tgt_len, d.src_len});
  t.enc_hidden = Tensor<3>({d.enc_layers + 1, d.src_len, d.hidden_dim});
  t.dec_hidden = Tensor<3>({d.dec_layers, d.tgt_len, d.hidden_dim});
  t.tgt_token_logprobs = Tensor<1>({d.tgt_len});
  return t;
}

const ModelTrace* TraceSet::find(std::string_view pair_id) const {
  for (const auto& t : traces) {
    if (t.pair_id == pair_id) return &t;
  }
  return nullptr;
}

TraceDims TraceSet::shared_dims() const {
  if (traces.empty()) return {};
  TraceDims d = traces.front().dims;
  d.src_len = 0;
  d.tgt_len = 0;
  return d;
}

std::vector<std::string> check_trace(const ModelTrace& t) {
  std::vector<std::string> messages;
  const auto& d = t.dims;
  auto shape_is = [&](const auto& tensor, auto expected, std::string_view name) {
    if (tensor.shape() != expected) {
      messages.push_back("pair '" + t.pair_id + "': " + std::string(name) +
                         " shape disagrees with dims");
      return false;
    }
    return true;
  };
  using S4 = Tensor<4>::Shape;
  using S3 = Tensor<3>::Shape;
  bool shapes = true;
  shapes &= shape_is(t.enc_self_attn, S4{d.enc_layers, d.heads, d.src_len, d.src_len}, "enc_self_attn");
  shapes &= shape_is(t.dec_self_attn, S4{d.dec_layers, d.heads, d.tgt_len, d.tgt_len}, "dec_self_attn");
  shapes &= shape_is(t.cross_attn, S4{d.dec_layers, d.heads, d.tgt_len, d.src_len}, "cross_attn");
  shapes &= shape_is(t.enc_hidden, S3{d.enc_layers + 1, d.src_len, d.hidden_dim}, "enc_hidden");
  shapes &= shape_is(t.dec_hidden, S3{d.dec_layers, d.tgt_len, d.hidden_dim}, "dec_hidden");
  shapes &= shape_is(t.tgt_token_logprobs, Tensor<1>::Shape{d.tgt_len}, "tgt_token_logprobs");
  if (!shapes) return messages;
  if (!t.src_tokens.empty() && t.src_tokens.size() != d.src_len) {
    messages.push_back("pair '" + t.pair_id + "': src_tokens length disagrees with src_len");
  }
  if (!t.tgt_tokens.empty() && t.tgt_tokens.size() != d.tgt_len) {
    messages.push_back("pair '" + t.pair_id + "': tgt_tokens length disagrees with tgt_len");
  }

  RowCheck check{messages, t.pair_id};
  check.attention(t.enc_self_attn, "enc_self_attn", false);
  check.attention(t.dec_self_attn, "dec_self_attn", true);
  check.attention(t.cross_attn, "cross_attn", false);
  for (std::size_t i = 0; i < d.tgt_len; ++i) {
    const float lp = t.tgt_token_logprobs(i);
    if (!std::isfinite(lp) || lp > 0.0f) {
      check.report("tgt_token_logprobs[" + std::to_string(i) + "] = " + std::to_string(lp) +
                   " is not a log-probability");
    }
  }
  auto finite = [&](std::span<const float> data, std::string_view name) {
    for (float v : data) {
      if (!std::isfinite(v)) {
        check.report(std::string(name) + " has non-finite values");
        return;
      }
    }
  };
  finite(t.enc_hidden.data(), "enc_hidden");
  finite(t.dec_hidden.data(), "dec_hidden");
  if (check.dropped) {
    messages.push_back("pair '" + t.pair_id + "': ... and " + std::to_string(check.dropped) +
                       " more");
  }
  return messages;
}

void validate_trace_set(const TraceSet& set) {
  std::vector<std::string> messages;
  if (!set.traces.empty()) {
    const TraceDims ref = set.shared_dims();
    for (const auto& t : set.traces) {
      if (t.dims.enc_layers != ref.enc_layers || t.dims.dec_layers != ref.dec_layers ||
          t.dims.heads != ref.heads || t.dims.hidden_dim != ref.hidden_dim) {
        throw ValidationError("trace set dims are not uniform: pair '" + t.pair_id +
                              "' differs from pair '" + set.traces.front().pair_id +
                              "' in layers, heads or hidden_dim");
      }
    }
  }
  std::unordered_set<std::string_view> ids;
  for (const auto& t : set.traces) {
    if (!ids.insert(t.pair_id).second) {
      throw ValidationError("trace set holds pair '" + t.pair_id + "' more than once");
    }
  }
  for (const auto& t : set.traces) {
    auto m = check_trace(t);
    messages.insert(messages.end(), m.begin(), m.end());
  }
  if (!messages.empty()) {
    throw ValidationError("trace validation failed:\n  " + text::join(messages, "\n  "));
  }
}

std::string encode_traces(const TraceSet& set) {
  json meta;
  meta["schema_version"] = kTraceSchemaVersion;
  meta["dtype"] = "float32";
  meta["byte_order"] = "little";
  meta["log_base"] = "e";
  meta["decoder_final_norm"] = set.metadata.decoder_final_norm;
  meta["embeddings_include_position"] = set.metadata.embeddings_include_position;
  meta["decoder_node"] = set.metadata.decoder_node;
  meta["tensor_order"] = tensor_order();
  meta["traces"] = json::array();
  for (const auto& t : set.traces) {
    meta["traces"].push_back({{"pair_id", t.pair_id},
                              {"dims", dims_to_json(t.dims)},
                              {"src_tokens", t.src_tokens},
                              {"tgt_tokens", t.tgt_tokens}});
  }
  const std::string meta_text = meta.dump();

  std::string out(kTraceMagic);
  put_u32(out, kTraceSchemaVersion);
  put_u64(out, meta_text.size());
  out += meta_text;
  for (const auto& t : set.traces) {
    put_floats(out, t.enc_self_attn.data());
    put_floats(out, t.dec_self_attn.data());
    put_floats(out, t.cross_attn.data());
    put_floats(out, t.enc_hidden.data());
    put_floats(out, t.dec_hidden.data());
    put_floats(out, t.tgt_token_logprobs.data());
  }
  return out;
}

TraceSet decode_traces(std::string_view bytes) {
  Cursor cur(bytes);
  if (cur.take(kTraceMagic.size(), "magic") != kTraceMagic) {
    throw FormatError("bad magic: not a trace container");
  }
  const auto version = get_le<std::uint32_t>(cur.take(4, "schema version"), 0);
  if (version != kTraceSchemaVersion) {
    throw FormatError("unsupported schema version " + std::to_string(version));
  }
  const auto meta_len = get_le<std::uint64_t>(cur.take(8, "metadata length"), 0);
  if (meta_len > cur.remaining()) {
    cur.need(std::numeric_limits<std::size_t>::max(), "metadata block");
  }
  const auto meta_text = cur.take(static_cast<std::size_t>(meta_len), "metadata block");

  TraceSet set;
  std::vector<std::pair<std::string, TraceDims>> headers;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> tokens;
  try {
    const auto meta = json::parse(meta_text);
    if (meta.at("dtype").get<std::string>() != "float32") throw FormatError("dtype must be float32");
    if (meta.at("byte_order").get<std::string>() != "little") {
      throw FormatError("byte_order must be little");
    }
    if (meta.at("log_base").get<std::string>() != "e") throw FormatError("log_base must be e");
    if (meta.at("tensor_order").get<std::vector<std::string>>() != tensor_order()) {
      throw FormatError("unexpected tensor_order");
    }
    set.metadata.decoder_final_norm = meta.at("decoder_final_norm").get<bool>();
    set.metadata.embeddings_include_position = meta.at("embeddings_include_position").get<bool>();
    set.metadata.decoder_node = meta.at("decoder_node").get<std::string>();
    for (const auto& jt : meta.at("traces")) {
      TraceDims d = dims_from_json(jt.at("dims"));
      for (auto v : {d.enc_layers, d.dec_layers, d.heads, d.src_len, d.tgt_len, d.hidden_dim}) {
        if (v == 0 || v > kMaxDim) throw FormatError("trace dims must be in [1, 2^20]");
      }
      headers.emplace_back(jt.at("pair_id").get<std::string>(), d);
      tokens.emplace_back(jt.at("src_tokens").get<std::vector<std::string>>(),
                          jt.at("tgt_tokens").get<std::vector<std::string>>());
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("metadata block: ") + e.what());
  }

  for (std::size_t i = 0; i < headers.size(); ++i) {
    const auto& [pair_id, d] = headers[i];
    // Check the whole record fits before allocating anything.
    std::size_t floats = 0;
    for (auto n : {checked_product({d.enc_layers, d.heads, d.src_len, d.src_len}),
                   checked_product({d.dec_layers, d.heads, d.tgt_len, d.tgt_len}),
                   checked_product({d.dec_layers, d.heads, d.tgt_len, d.src_len}),
                   checked_product({d.enc_layers + 1, d.src_len, d.hidden_dim}),
                   checked_product({d.dec_layers, d.tgt_len, d.hidden_dim}), d.tgt_len}) {
      if (floats > std::numeric_limits<std::size_t>::max() - n) throw FormatError("extent overflow");
      floats += n;
    }
    if (floats > cur.remaining() / 4) {
      throw FormatError("truncated container: trace '" + pair_id + "' needs " +
                        std::to_string(floats) + " floats, " +
                        std::to_string(cur.remaining() / 4) + " available");
    }
    ModelTrace t = ModelTrace::zeros(pair_id, d);
    t.src_tokens = std::move(tokens[i].first);
    t.tgt_tokens = std::move(tokens[i].second);
    cur.read_floats(t.enc_self_attn.data(), "enc_self_attn");
    cur.read_floats(t.dec_self_attn.data(), "dec_self_attn");
    cur.read_floats(t.cross_attn.data(), "cross_attn");
    cur.read_floats(t.enc_hidden.data(), "enc_hidden");
    cur.read_floats(t.dec_hidden.data(), "dec_hidden");
    cur.read_floats(t.tgt_token_logprobs.data(), "tgt_token_logprobs");
    set.traces.push_back(std::move(t));
  }
  if (cur.remaining() != 0) {
    throw FormatError(std::to_string(cur.remaining()) + " trailing bytes after the last tensor");
  }
  validate_trace_set(set);
  return set;
}

TraceSet read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return decode_traces(buf.str());
}

void write_trace(const TraceSet& set, const std::string& path) {
  validate_trace_set(set);
  const std::string bytes = encode_traces(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

namespace {

void fill_stochastic(Tensor<4>& t, std::mt19937_64& rng, bool causal) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> row;
  for (std::size_t l = 0; l < t.dim(0); ++l) {
    for (std::size_t h = 0; h < t.dim(1); ++h) {
      for (std::size_t q = 0; q < t.dim(2); ++q) {
        const std::size_t width = t.dim(3);
        const std::size_t live = causal ? q + 1 : width;
        row.assign(width, 0.0);
        double sum = 0.0;
        for (std::size_t k = 0; k < live; ++k) sum += row[k] = u(rng);
        auto out = t.row(l, h, q);
        for (std::size_t k = 0; k < width; ++k) out[k] = static_cast<float>(row[k] / sum);
      }
    }
  }
}

}  // namespace

ModelTrace synth_trace(std::uint64_t seed, const TraceDims& dims, std::string pair_id) {
  for (auto v : {dims.enc_layers, dims.dec_layers, dims.heads, dims.src_len, dims.tgt_len,
                 dims.hidden_dim}) {
    if (v == 0) throw UsageError("synth_trace: all dims must be positive");
  }
  std::mt19937_64 rng(seed);
  ModelTrace t = ModelTrace::zeros(std::move(pair_id), dims);
  for (std::size_t i = 0; i < dims.src_len; ++i) t.src_tokens.push_back("s" + std::to_string(i));
  for (std::size_t i = 0; i < dims.tgt_len; ++i) t.tgt_tokens.push_back("t" + std::to_string(i));
  fill_stochastic(t.enc_self_attn, rng, false);
  fill_stochastic(t.dec_self_attn, rng, true);
  fill_stochastic(t.cross_attn, rng, false);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : t.enc_hidden.data()) v = static_cast<float>(normal(rng));
  for (auto& v : t.dec_hidden.data()) v = static_cast<float>(normal(rng));
  std::uniform_real_distribution<double> lp(0.01, 4.0);
  for (auto& v : t.tgt_token_logprobs.data()) v = static_cast<float>(-lp(rng));
  return t;
}

}  // namespace negmt
