#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pgdrecon/image.hpp"
#include "pgdrecon/projectors.hpp"

namespace pgdrecon {

/// Fixed architecture: conv(1->8, 3x3) -> ReLU -> conv(8->8, 3x3) -> ReLU -> conv(8->1, 3x3),
/// zero "same" padding, applied as a residual: CNN(x) = x + s * net(x / s).
/// The data scale s keeps activations O(1) for images in physical units; s = 1 gives
/// the plain x + net(x).
struct ConvNetParams {
  static constexpr std::size_t kHidden = 8;
  static constexpr std::size_t kKernel = 3;
  static constexpr std::size_t kTaps = kKernel * kKernel;

  // Offsets of each block inside `theta`.
  static constexpr std::size_t kW1 = 0;
  static constexpr std::size_t kB1 = kW1 + kHidden * 1 * kTaps;
  static constexpr std::size_t kW2 = kB1 + kHidden;
  static constexpr std::size_t kB2 = kW2 + kHidden * kHidden * kTaps;
  static constexpr std::size_t kW3 = kB2 + kHidden;
  static constexpr std::size_t kB3 = kW3 + 1 * kHidden * kTaps;
  static constexpr std::size_t kCount = kB3 + 1;

  std::size_t width = 0;
  std::size_t height = 0;
  double data_scale = 1.0;
  Vector theta;  // kCount values

  ConvNetParams() = default;
  /// All-zero weights: the network is exactly the identity.
  ConvNetParams(std::size_t w, std::size_t h, double scale = 1.0);

  /// He-normal init for the first two layers; the output layer starts at zero so the
  /// untrained network is the identity.
  static ConvNetParams initialize(std::size_t w, std::size_t h, double scale, std::uint64_t seed);

  void validate() const;
  static nlohmann::json architecture();
};

Image forward(const ConvNetParams& params, const Image& x);

struct TrainingPair {
  Image input;
  Image target;
};

struct LossAndGrad {
  double loss = 0.0;
  Vector grad;  // same layout as ConvNetParams::theta
};

/// Sum over the batch of ||target - CNN(input)||^2 / s^2 and its exact gradient.
LossAndGrad loss_and_grad(const ConvNetParams& params, std::span<const TrainingPair> batch);
double loss_only(const ConvNetParams& params, std::span<const TrainingPair> batch);

/// Binary model file: magic, JSON header (architecture, shape, data scale, plus `extra`),
/// then the parameters as little-endian doubles. Byte-identical for identical inputs.
void save_model(const std::filesystem::path& path, const ConvNetParams& params,
                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedModel {
  ConvNetParams params;
  nlohmann::json header;
};
LoadedModel load_model(const std::filesystem::path& path);

class NeuralProjector final : public Projector {
 public:
  explicit NeuralProjector(std::shared_ptr<const ConvNetParams> params);
  Image apply(const Image& x) const override;
  std::string describe() const override;
  const ConvNetParams& params() const { return *params_; }

 private:
  std::shared_ptr<const ConvNetParams> params_;
};

}  // namespace pgdrecon
