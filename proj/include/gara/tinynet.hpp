#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gara/rng.hpp"

namespace gara::tinynet {

enum class Activation { relu, linear };

struct Layer {
  std::size_t in = 0, out = 0;
  std::vector<double> w;  // row-major, out x in
  std::vector<double> b;  // out
  Activation act = Activation::linear;
};

// Dense ReLU network. Backs both the low-level Q-network and the k-step
// forward model; small enough that plain double vectors are all it needs.
struct Mlp {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }
};

// dims = {in, hidden..., out}; acts has one entry per layer. Weights are
// uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
Mlp make_mlp(const std::vector<std::size_t>& dims,
             const std::vector<Activation>& acts, Rng& rng);

std::vector<double> forward(const Mlp& net, std::span<const double> x);

using Sample = std::pair<std::vector<double>, std::vector<double>>;

// Mean over the batch of the squared L2 residual.
double mse_loss(const Mlp& net, std::span<const Sample> batch);

// Flat parameter vector, layer by layer (weights then biases).
std::vector<double> get_params(const Mlp& net);
void set_params(Mlp& net, std::span<const double> params);

// Reverse-mode gradient of mse_loss in get_params layout.
std::vector<double> mse_gradient(const Mlp& net, std::span<const Sample> batch);

// One SGD step on the batch MSE; returns the pre-update loss.
double train_batch(Mlp& net, std::span<const Sample> batch, double lr);

// Element-wise bounds; lo <= hi.
struct IntervalVector {
  std::vector<double> lo, hi;
};

// Sound enclosure of the network image of the input box: affine layers via
// sign-split interval arithmetic, ReLU clamps both bounds at 0.
IntervalVector interval_forward(const Mlp& net, const IntervalVector& box);

// Weight snapshot: {layers: [{w: [[...]], b: [...], act: "relu"|"linear"}]}.
nlohmann::json to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

}  // namespace gara::tinynet
