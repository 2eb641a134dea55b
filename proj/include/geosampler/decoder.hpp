#ifndef GEOSAMPLER_DECODER_HPP
#define GEOSAMPLER_DECODER_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geosampler/errors.hpp"
#include "geosampler/spd.hpp"

namespace geosampler {

enum class Activation { kLinear, kRelu, kSigmoid };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "linear";
}

inline std::optional<Activation> parse_activation(std::string_view name) {
  if (name == "linear") return Activation::kLinear;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  return std::nullopt;
}

struct DenseLayer {
  Matrix weight;  // out × in
  Vector bias;    // out
  Activation activation = Activation::kLinear;

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.activation == b.activation && same_entries(a.weight, b.weight) &&
           same_entries(a.bias, b.bias);
  }
};

/// Feed-forward decoder mean π_θ(z). Sigmoid is only allowed on the output
/// layer so image outputs stay in (0, 1).
class DecoderModel {
public:
  DecoderModel(std::vector<DenseLayer> layers,
               std::optional<std::pair<std::size_t, std::size_t>> output_shape = std::nullopt)
      : layers_(std::move(layers)), output_shape_(output_shape) {
    validate();
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().weight.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers_.back().weight.rows()); }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  const std::optional<std::pair<std::size_t, std::size_t>>& output_shape() const noexcept {
    return output_shape_;
  }

  friend bool operator==(const DecoderModel&, const DecoderModel&) = default;

private:
  void validate() const {
    if (layers_.empty()) throw ValidationError("decoder.layers", "at least one layer required");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string field = "decoder.layers[" + std::to_string(i) + "]";
      const DenseLayer& layer = layers_[i];
      if (layer.weight.rows() == 0 || layer.weight.cols() == 0) {
        throw ValidationError(field + ".weight", "empty weight matrix");
      }
      if (layer.bias.size() != layer.weight.rows()) {
        throw ValidationError(field + ".bias", "length must equal the weight's row count " +
                                                   std::to_string(layer.weight.rows()));
      }
      if (!layer.weight.allFinite()) throw ValidationError(field + ".weight", "non-finite entry");
      if (!layer.bias.allFinite()) throw ValidationError(field + ".bias", "non-finite entry");
      if (i > 0 && layer.weight.cols() != layers_[i - 1].weight.rows()) {
        throw ValidationError(field + ".weight",
                              "input width " + std::to_string(layer.weight.cols()) +
                                  " does not match previous layer output " +
                                  std::to_string(layers_[i - 1].weight.rows()));
      }
      if (layer.activation == Activation::kSigmoid && i + 1 != layers_.size()) {
        throw ValidationError(field + ".activation", "sigmoid is only valid on the final layer");
      }
    }
    if (output_shape_ && output_shape_->first * output_shape_->second != output_dim()) {
      throw ValidationError("decoder.output_shape", "height*width must equal output_dim " +
                                                        std::to_string(output_dim()));
    }
  }

  std::vector<DenseLayer> layers_;
  std::optional<std::pair<std::size_t, std::size_t>> output_shape_;
};

inline Vector decode(const DecoderModel& model, const Vector& z) {
  if (static_cast<std::size_t>(z.size()) != model.input_dim()) {
    throw DimensionError("decoder input", model.input_dim(), static_cast<std::size_t>(z.size()));
  }
  Vector x = z;
  for (const DenseLayer& layer : model.layers()) {
    Vector y = layer.bias;
    y.noalias() += layer.weight * x;
    switch (layer.activation) {
      case Activation::kLinear: break;
      case Activation::kRelu: y = y.cwiseMax(0.0); break;
      case Activation::kSigmoid: y = (1.0 + (-y.array()).exp()).inverse().matrix(); break;
    }
    x = std::move(y);
  }
  if (!x.allFinite()) throw NumericalError("decoder produced a non-finite output");
  return x;
}

inline std::vector<Vector> decode_batch(const DecoderModel& model, std::span<const Vector> zs) {
  std::vector<Vector> out;
  out.reserve(zs.size());
  for (const Vector& z : zs) out.push_back(decode(model, z));
  return out;
}

}  // namespace geosampler

#endif  // GEOSAMPLER_DECODER_HPP
