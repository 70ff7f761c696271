#include "modewise/model.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "binary_io.hpp"
#include "modewise/error.hpp"
#include "modewise/rng.hpp"

namespace modewise {
namespace {

constexpr std::string_view kModelMagic = "TMMD";
constexpr std::uint32_t kModelVersion = 1;
constexpr std::size_t kConvWidth = 3;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

bool same_architecture(const NetworkSpec& a, const NetworkSpec& b) {
  if (a.channels != b.channels || a.length != b.length || a.classes != b.classes ||
      a.pool_width != b.pool_width || a.pool_stride != b.pool_stride ||
      a.layers.size() != b.layers.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].kind != b.layers[i].kind || a.layers[i].units != b.layers[i].units) {
      return false;
    }
  }
  return true;
}

// Fills in hidden dense widths (units == 0) as a quarter of the incoming features.
void resolve_dense_widths(NetworkSpec& spec) {
  std::size_t channels = spec.channels, length = spec.length, features = 0;
  bool flat = false;
  for (auto& layer : spec.layers) {
    switch (layer.kind) {
      case LayerKind::Conv:
        channels = layer.units;
        break;
      case LayerKind::MaxPool:
        length = length < spec.pool_width ? 0 : (length - spec.pool_width) / spec.pool_stride + 1;
        break;
      case LayerKind::Flatten:
        features = channels * length;
        flat = true;
        break;
      case LayerKind::Dense:
        if (!flat) throw UsageError("dense layer before flatten");
        if (layer.units == 0) layer.units = features / 4;
        features = layer.units;
        break;
      default:
        break;
    }
  }
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Input: return "input";
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
  }
  return "unknown";
}

std::vector<double> NetworkSpec::dropout_ps() const {
  std::vector<double> ps;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::Dropout) ps.push_back(l.p);
  }
  return ps;
}

void NetworkSpec::set_dropout_ps(const std::vector<double>& ps) {
  std::size_t k = 0;
  for (auto& l : layers) {
    if (l.kind != LayerKind::Dropout) continue;
    if (k >= ps.size()) throw UsageError("too few dropout probabilities for " + name);
    l.p = ps[k++];
  }
  if (k != ps.size()) throw UsageError("too many dropout probabilities for " + name);
}

NetworkSpec build_config(std::string_view name, const ConfigOptions& options) {
  if (name.size() != 1 || kConfigNames.find(name[0]) == std::string_view::npos) {
    throw UsageError("unknown configuration '" + std::string(name) +
                     "'; valid names: A, B, C, D, E, F, G, H, I");
  }
  const char col = name[0];
  const std::size_t groups = col == 'A' ? 1 : col == 'B' ? 2 : 3;
  if (options.filter_ladder.size() < (col == 'H' ? 4u : groups)) {
    throw UsageError("filter ladder too short for configuration " + std::string(name));
  }
  const bool pools = col >= 'E';
  const auto dropout_after_group = [&](std::size_t g) {
    return col == 'F' || ((col == 'G' || col == 'H' || col == 'I') && g == 2);
  };

  NetworkSpec spec;
  spec.name = std::string(name);
  spec.length = options.length;
  spec.pool_stride = options.pool_stride;
  auto add = [&](LayerKind kind, std::size_t units = 0, double p = 0.0) {
    spec.layers.push_back({kind, units, p});
  };
  for (std::size_t g = 0; g < groups; ++g) {
    add(LayerKind::Conv, options.filter_ladder[g]);
    add(LayerKind::Conv, options.filter_ladder[g]);
    if (pools) add(LayerKind::MaxPool);
    if (dropout_after_group(g)) add(LayerKind::Dropout, 0, options.dropout);
  }
  if (col == 'H') {
    add(LayerKind::Conv, options.filter_ladder[3]);
    add(LayerKind::Conv, options.filter_ladder[3]);
  }
  add(LayerKind::Flatten);
  if (col == 'I') {
    add(LayerKind::Dense);
    add(LayerKind::Dropout, 0, options.dropout);
  }
  if (col >= 'D') {
    add(LayerKind::Dense);
    if (col >= 'F') add(LayerKind::Dropout, 0, options.dropout);
  }
  add(LayerKind::Dense, spec.classes);
  resolve_dense_widths(spec);
  return spec;
}

std::vector<ShapeStep> infer_shapes(const NetworkSpec& spec) {
  std::vector<ShapeStep> steps;
  std::vector<std::size_t> shape = {spec.channels, spec.length};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    ShapeStep step{layer, shape, {}, 0};
    const std::string where = "layer " + std::to_string(i) + " (" +
                              std::string(layer_kind_name(layer.kind)) + ")";
    switch (layer.kind) {
      case LayerKind::Conv:
        if (shape.size() != 2) throw UsageError(where + " needs a (C, L) input");
        if (layer.units == 0) throw UsageError(where + " has no filters");
        step.params = layer.units * shape[0] * kConvWidth + layer.units;
        shape = {layer.units, shape[1]};
        break;
      case LayerKind::MaxPool: {
        if (shape.size() != 2) throw UsageError(where + " needs a (C, L) input");
        if (shape[1] < spec.pool_width) throw UsageError(where + " input shorter than the pool");
        shape = {shape[0], (shape[1] - spec.pool_width) / spec.pool_stride + 1};
        break;
      }
      case LayerKind::Dropout:
        if (!(layer.p >= 0.0 && layer.p < 1.0)) throw UsageError(where + " p outside [0, 1)");
        break;
      case LayerKind::Flatten:
        if (shape.size() != 2) throw UsageError(where + " needs a (C, L) input");
        shape = {shape[0] * shape[1]};
        break;
      case LayerKind::Dense:
        if (shape.size() != 1) throw UsageError(where + " needs a flat input");
        if (layer.units == 0) throw UsageError(where + " has zero width");
        step.params = shape[0] * layer.units + layer.units;
        shape = {layer.units};
        break;
      default:
        throw UsageError(where + " is not a configuration entry");
    }
    step.out = shape;
    steps.push_back(std::move(step));
  }
  if (spec.layers.empty() || spec.layers.back().kind != LayerKind::Dense ||
      shape != std::vector<std::size_t>{spec.classes}) {
    throw UsageError("configuration must end in a dense layer with one output per class");
  }
  return steps;
}

std::size_t parameter_count(const NetworkSpec& spec) {
  std::size_t total = 0;
  for (const auto& s : infer_shapes(spec)) total += s.params;
  return total;
}

nlohmann::json spec_to_json(const NetworkSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  const auto steps = infer_shapes(spec);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    nlohmann::json j;
    j["kind"] = layer_kind_name(s.desc.kind);
    switch (s.desc.kind) {
      case LayerKind::Conv:
        j["filters"] = s.desc.units;
        j["width"] = kConvWidth;
        j["activation"] = "relu";
        break;
      case LayerKind::MaxPool:
        j["width"] = spec.pool_width;
        j["stride"] = spec.pool_stride;
        break;
      case LayerKind::Dropout:
        j["p"] = s.desc.p;
        break;
      case LayerKind::Dense:
        j["units"] = s.desc.units;
        j["activation"] = i + 1 == steps.size() ? "softmax" : "relu";
        break;
      default:
        break;
    }
    j["output_shape"] = s.out;
    j["params"] = s.params;
    layers.push_back(std::move(j));
  }
  return {{"name", spec.name},
          {"input_shape", {spec.channels, spec.length}},
          {"classes", spec.classes},
          {"layers", std::move(layers)},
          {"parameter_count", parameter_count(spec)}};
}

// ---------------------------------------------------------------------------

Network Network::zeros(const NetworkSpec& spec) {
  const auto steps = infer_shapes(spec);
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    switch (s.desc.kind) {
      case LayerKind::Conv:
        layers.emplace_back(nn::Conv1d(s.in[0], s.desc.units, kConvWidth));
        layers.emplace_back(nn::Relu{});
        break;
      case LayerKind::MaxPool:
        layers.emplace_back(nn::MaxPool(spec.pool_width, spec.pool_stride));
        break;
      case LayerKind::Dropout:
        layers.emplace_back(nn::Dropout(s.desc.p));
        break;
      case LayerKind::Flatten:
        layers.emplace_back(nn::Flatten{});
        break;
      case LayerKind::Dense:
        layers.emplace_back(nn::Dense(s.in[0], s.desc.units));
        if (i + 1 < steps.size()) layers.emplace_back(nn::Relu{});
        break;
      default:
        break;
    }
  }
  return Network(spec, std::move(layers));
}

Network Network::build(const NetworkSpec& spec, std::uint64_t seed) {
  Network net = zeros(spec);
  Rng rng(seed);
  for (auto& layer : net.layers_) {
    if (auto* conv = std::get_if<nn::Conv1d>(&layer)) {
      nn::glorot_uniform(conv->weight, conv->fan_in(), conv->fan_out(), rng);
    } else if (auto* dense = std::get_if<nn::Dense>(&layer)) {
      nn::glorot_uniform(dense->weight, dense->in_features(), dense->out_features(), rng);
    }
  }
  return net;
}

nn::Tensor Network::logits(const nn::Tensor& batch, const nn::ForwardContext& ctx) {
  if (batch.rank() != 3 || batch.dim(1) != spec_.channels || batch.dim(2) != spec_.length) {
    throw DataError("input batch must be (B, " + std::to_string(spec_.channels) + ", " +
                    std::to_string(spec_.length) + ") for configuration " + spec_.name);
  }
  nn::Tensor x = batch;
  for (auto& layer : layers_) {
    x = std::visit([&](auto& l) { return l.forward(x, ctx); }, layer);
  }
  return x;
}

nn::Tensor Network::forward_full(const nn::Tensor& batch, const nn::ForwardContext& ctx) {
  return nn::softmax(logits(batch, ctx));
}

void Network::backward(const nn::Tensor& grad_logits) {
  nn::Tensor g = grad_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = std::visit([&](auto& l) { return l.backward(g); }, *it);
  }
}

void Network::zero_grad() {
  for (auto& layer : layers_) {
    std::visit(Overloaded{
                   [](nn::Conv1d& l) {
                     std::fill(l.weight_grad.begin(), l.weight_grad.end(), 0.0);
                     std::fill(l.bias_grad.begin(), l.bias_grad.end(), 0.0);
                   },
                   [](nn::Dense& l) {
                     std::fill(l.weight_grad.begin(), l.weight_grad.end(), 0.0);
                     std::fill(l.bias_grad.begin(), l.bias_grad.end(), 0.0);
                   },
                   [](auto&) {},
               },
               layer);
  }
}

std::vector<nn::ParamRef> Network::params() {
  std::vector<nn::ParamRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i);
    std::visit(Overloaded{
                   [&](nn::Conv1d& l) { l.params(out, prefix + ".conv"); },
                   [&](nn::Dense& l) { l.params(out, prefix + ".dense"); },
                   [](auto&) {},
               },
               layers_[i]);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers_) {
    if (const auto* c = std::get_if<nn::Conv1d>(&layer)) total += c->weight.size() + c->bias.size();
    if (const auto* d = std::get_if<nn::Dense>(&layer)) total += d->weight.size() + d->bias.size();
  }
  return total;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> bootstrap_resample(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw UsageError("cannot resample an empty training set");
  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.below(n);
  return idx;
}

Ensemble::Ensemble(std::vector<Network> members) : members_(std::move(members)) {
  if (members_.empty()) throw UsageError("an ensemble needs at least one member");
  for (const auto& m : members_) {
    if (!same_architecture(m.spec(), members_.front().spec())) {
      throw UsageError("ensemble members have different architectures");
    }
  }
}

nn::Tensor average_probabilities(const std::vector<nn::Tensor>& tables) {
  if (tables.empty()) throw UsageError("nothing to average");
  nn::Tensor mean(tables.front().shape());
  for (const auto& t : tables) {
    if (t.shape() != mean.shape()) throw DataError("probability tables differ in shape");
    for (std::size_t i = 0; i < t.size(); ++i) mean[i] += t[i];
  }
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] /= static_cast<double>(tables.size());
  return mean;
}

nn::Tensor Ensemble::predict(const nn::Tensor& batch) {
  if (members_.empty()) throw UsageError("empty ensemble");
  std::vector<nn::Tensor> tables;
  tables.reserve(members_.size());
  for (auto& m : members_) tables.push_back(m.predict(batch));
  return average_probabilities(tables);
}

// ---------------------------------------------------------------------------

void write_model(std::ostream& out, const Network& net) {
  std::string payload;
  std::uint32_t n_layers = 1;
  detail::put_u8(payload, static_cast<std::uint8_t>(LayerKind::Input));
  detail::put_u32(payload, static_cast<std::uint32_t>(net.spec().channels));
  detail::put_u32(payload, static_cast<std::uint32_t>(net.spec().length));
  auto put_floats = [&](const std::vector<double>& v) {
    for (double x : v) detail::put_f32(payload, static_cast<float>(x));
  };
  for (const auto& layer : net.layers()) {
    ++n_layers;
    std::visit(Overloaded{
                   [&](const nn::Conv1d& l) {
                     detail::put_u8(payload, static_cast<std::uint8_t>(LayerKind::Conv));
                     detail::put_u32(payload, static_cast<std::uint32_t>(l.in_channels()));
                     detail::put_u32(payload, static_cast<std::uint32_t>(l.out_channels()));
                     detail::put_u32(payload, static_cast<std::uint32_t>(l.width()));
                     put_floats(l.weight);
                     put_floats(l.bias);
                   },
                   [&](const nn::Relu&) {
                     detail::put_u8(payload, static_cast<std::uint8_t>(LayerKind::Relu));
                   },
                   [&](const nn::MaxPool& l) {
                     detail::put_u8(payload, static_cast<std::uint8_t>(LayerKind::MaxPool));
                     detail::put_u32(payload, static_cast<std::uint32_t>(l.width()));
                     detail::put_u32(payload, static_cast<std::uint32_t>(l.stride()));
                   },
                   [&](const nn::Dropout& l) {
                     detail::put_u8(payload, static_cast<std::uint8_t>(LayerKind::Dropout));
                     detail::put_f32(payload, static_cast<float>(l.p()));
                   },
                   [&](const nn::Flatten&) {
                     detail::put_u8(payload, static_cast<std::uint8_t>(LayerKind::Flatten));
                   },
                   [&](const nn::Dense& l) {
                     detail::put_u8(payload, static_cast<std::uint8_t>(LayerKind::Dense));
                     detail::put_u32(payload, static_cast<std::uint32_t>(l.in_features()));
                     detail::put_u32(payload, static_cast<std::uint32_t>(l.out_features()));
                     put_floats(l.weight);
                     put_floats(l.bias);
                   },
               },
               layer);
  }
  std::string buf;
  buf.append(kModelMagic);
  detail::put_u32(buf, kModelVersion);
  detail::put_u32(buf, n_layers);
  buf += payload;
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
  detail::put_u32(buf, crc);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("failed writing model");
}

Network read_model(std::istream& in) {
  const std::string bytes = detail::slurp(in);
  detail::ByteReader r(bytes);
  if (r.take(4) != kModelMagic) throw DataError("not a TMMD model (bad magic)");
  if (const auto v = r.u32(); v != kModelVersion) {
    throw DataError("unsupported TMMD version " + std::to_string(v));
  }
  const std::uint32_t n_layers = r.u32();
  const std::size_t payload_start = r.position();

  NetworkSpec spec;
  spec.name = "loaded";
  std::vector<Layer> layers;
  auto read_floats = [&](std::vector<double>& dst) {
    for (auto& x : dst) x = r.f32();
  };
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto kind = static_cast<LayerKind>(r.u8());
    switch (kind) {
      case LayerKind::Input:
        if (i != 0) throw DataError("TMMD input record must come first");
        spec.channels = r.u32();
        spec.length = r.u32();
        break;
      case LayerKind::Conv: {
        const std::uint32_t cin = r.u32(), cout = r.u32(), width = r.u32();
        nn::Conv1d conv(cin, cout, width);
        read_floats(conv.weight);
        read_floats(conv.bias);
        spec.layers.push_back({LayerKind::Conv, cout, 0.0});
        layers.emplace_back(std::move(conv));
        break;
      }
      case LayerKind::Relu:
        layers.emplace_back(nn::Relu{});
        break;
      case LayerKind::MaxPool: {
        spec.pool_width = r.u32();
        spec.pool_stride = r.u32();
        spec.layers.push_back({LayerKind::MaxPool, 0, 0.0});
        layers.emplace_back(nn::MaxPool(spec.pool_width, spec.pool_stride));
        break;
      }
      case LayerKind::Dropout: {
        const double p = r.f32();
        spec.layers.push_back({LayerKind::Dropout, 0, p});
        layers.emplace_back(nn::Dropout(p));
        break;
      }
      case LayerKind::Flatten:
        spec.layers.push_back({LayerKind::Flatten, 0, 0.0});
        layers.emplace_back(nn::Flatten{});
        break;
      case LayerKind::Dense: {
        const std::uint32_t fin = r.u32(), fout = r.u32();
        nn::Dense dense(fin, fout);
        read_floats(dense.weight);
        read_floats(dense.bias);
        spec.layers.push_back({LayerKind::Dense, fout, 0.0});
        spec.classes = fout;
        layers.emplace_back(std::move(dense));
        break;
      }
      default:
        throw DataError("unknown TMMD layer kind " + std::to_string(static_cast<int>(kind)));
    }
  }
  const std::size_t payload_end = r.position();
  const std::uint32_t stored = r.u32();
  if (r.remaining() != 0) throw DataError("trailing bytes after TMMD checksum");
  const auto computed = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data() + payload_start),
            static_cast<uInt>(payload_end - payload_start)));
  if (stored != computed) throw DataError("TMMD checksum mismatch");

  // The records must form exactly the layer list the derived spec would build.
  std::vector<Layer> expected;
  try {
    expected = Network::zeros(spec).layers_;
  } catch (const UsageError& e) {
    throw DataError(std::string("TMMD layer stack is inconsistent: ") + e.what());
  }
  bool match = expected.size() == layers.size();
  for (std::size_t i = 0; match && i < layers.size(); ++i) {
    match = expected[i].index() == layers[i].index();
    if (!match) break;
    if (const auto* c = std::get_if<nn::Conv1d>(&layers[i])) {
      const auto& e = std::get<nn::Conv1d>(expected[i]);
      match = c->in_channels() == e.in_channels() && c->out_channels() == e.out_channels() &&
              c->width() == e.width();
    } else if (const auto* d = std::get_if<nn::Dense>(&layers[i])) {
      const auto& e = std::get<nn::Dense>(expected[i]);
      match = d->in_features() == e.in_features() && d->out_features() == e.out_features();
    }
  }
  if (!match) throw DataError("TMMD layer records do not form a valid network");
  return Network(std::move(spec), std::move(layers));
}

void write_model_file(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_model(out, net);
}

Network read_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_model(in);
}

Ensemble load_predictor(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<Network> members;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.path().extension() == ".tmmd") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .tmmd members in " + path.string());
    for (const auto& f : files) members.push_back(read_model_file(f));
  } else {
    members.push_back(read_model_file(path));
  }
  return Ensemble(std::move(members));
}

}  // namespace modewise
