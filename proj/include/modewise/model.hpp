#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "modewise/nn/layers.hpp"
#include "modewise/nn/tensor.hpp"

namespace modewise {

// ---------------------------------------------------------------------------
// Architecture descriptions
// ---------------------------------------------------------------------------

/// Integer codes are the layer kinds of the model file.
enum class LayerKind : std::uint8_t {
  Input = 0,
  Conv = 1,
  Relu = 2,
  MaxPool = 3,
  Dropout = 4,
  Flatten = 5,
  Dense = 6,
};

std::string_view layer_kind_name(LayerKind kind);

/// One entry of a configuration. Conv and hidden Dense entries are followed by
/// a ReLU when instantiated; the last Dense is the softmax classifier.
struct LayerDesc {
  LayerKind kind = LayerKind::Conv;
  std::size_t units = 0;  // conv filters or dense width
  double p = 0.0;         // dropout probability

  friend bool operator==(const LayerDesc&, const LayerDesc&) = default;
};

struct NetworkSpec {
  std::string name;
  std::size_t channels = 4;
  std::size_t length = 200;  // M
  std::size_t classes = 5;
  std::size_t pool_width = 2;
  std::size_t pool_stride = 2;
  std::vector<LayerDesc> layers;

  std::vector<double> dropout_ps() const;
  /// Replaces dropout probabilities in layer order; sizes must match.
  void set_dropout_ps(const std::vector<double>& ps);

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct ConfigOptions {
  std::size_t length = 200;
  /// Filters of the four conv groups; the full-size ladder is 32/64/128/256.
  std::vector<std::size_t> filter_ladder = {32, 64, 128, 256};
  std::size_t pool_stride = 2;
  double dropout = 0.5;
};

inline constexpr std::string_view kConfigNames = "ABCDEFGHI";

/// Configurations A..I. Hidden dense layers get a quarter (floor) of the
/// neurons of the layer before them. Throws UsageError for unknown names.
NetworkSpec build_config(std::string_view name, const ConfigOptions& options = {});

/// Output shape of each layer entry for one sample, (C, L) or (F). Throws
/// UsageError when an entry cannot accept its input.
struct ShapeStep {
  LayerDesc desc;
  std::vector<std::size_t> in;
  std::vector<std::size_t> out;
  std::size_t params = 0;
};
std::vector<ShapeStep> infer_shapes(const NetworkSpec& spec);
std::size_t parameter_count(const NetworkSpec& spec);

nlohmann::json spec_to_json(const NetworkSpec& spec);

// ---------------------------------------------------------------------------
// Instantiated networks
// ---------------------------------------------------------------------------

using Layer = std::variant<nn::Conv1d, nn::Relu, nn::MaxPool, nn::Dropout, nn::Flatten, nn::Dense>;

class Network {
 public:
  /// Glorot-initialized weights, zero biases.
  static Network build(const NetworkSpec& spec, std::uint64_t seed);
  /// All weights and biases zero.
  static Network zeros(const NetworkSpec& spec);

  const NetworkSpec& spec() const { return spec_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Batch is (B, channels, length); throws DataError on a shape mismatch.
  nn::Tensor logits(const nn::Tensor& batch, const nn::ForwardContext& ctx);
  /// Class probabilities (B, classes); rows sum to 1.
  nn::Tensor forward_full(const nn::Tensor& batch, const nn::ForwardContext& ctx);
  nn::Tensor predict(const nn::Tensor& batch) { return forward_full(batch, {}); }

  /// Back-propagates d(loss)/d(logits) through the most recent forward pass.
  void backward(const nn::Tensor& grad_logits);
  void zero_grad();
  std::vector<nn::ParamRef> params();
  std::size_t parameter_count() const;

 private:
  Network(NetworkSpec spec, std::vector<Layer> layers)
      : spec_(std::move(spec)), layers_(std::move(layers)) {}
  friend Network read_model(std::istream& in);

  NetworkSpec spec_;
  std::vector<Layer> layers_;
};

/// Index list of n draws with replacement from [0, n).
std::vector<std::size_t> bootstrap_resample(std::size_t n, std::uint64_t seed);

class Ensemble {
 public:
  Ensemble() = default;
  /// Throws UsageError if member architectures differ or the list is empty.
  explicit Ensemble(std::vector<Network> members);

  /// Mean of the member probability rows.
  nn::Tensor predict(const nn::Tensor& batch);
  std::vector<Network>& members() { return members_; }
  std::size_t size() const { return members_.size(); }

 private:
  std::vector<Network> members_;
};

/// Averages (B, K) probability tables; all must share a shape.
nn::Tensor average_probabilities(const std::vector<nn::Tensor>& tables);

// Model file: "TMMD", u32 version = 1, u32 n_layers, then per layer u8 kind, the
// kind's u32 shape fields and its f32 parameters, then a u32 CRC-32 of the layer
// records. Little-endian throughout. Shape fields per kind:
//   Input: channels, length      Conv: in, out, width (+ weights, biases)
//   MaxPool: width, stride       Dense: in, out (+ weights, biases)
//   Dropout: none (+ one f32 p)  Relu, Flatten: none
void write_model(std::ostream& out, const Network& net);
Network read_model(std::istream& in);
void write_model_file(const std::filesystem::path& path, const Network& net);
Network read_model_file(const std::filesystem::path& path);

/// Reads a model file or an ensemble directory of *.tmmd members (sorted by name).
Ensemble load_predictor(const std::filesystem::path& path);

}  // namespace modewise
