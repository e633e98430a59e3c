#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pinn/autodiff.hpp"

namespace pinn::net {

enum class Activation : std::uint8_t { Tanh };

/// Fully connected feed-forward network. Parameters live in one flat
/// vector, layer-major: for each layer, weights row-major [out][in]
/// followed by the bias vector. The output layer is affine.
struct Mlp {
  std::vector<int> widths;
  Activation activation = Activation::Tanh;
  std::vector<double> params;

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
};

std::size_t param_count(std::span<const int> widths);

/// Glorot-uniform weights, zero biases. Deterministic per seed.
Mlp init(std::vector<int> widths, Activation act, std::uint64_t seed);

const std::vector<double>& params_get(const Mlp& m);
void params_set(Mlp& m, std::span<const double> v);

/// One Var leaf per parameter, in flat layout order.
std::vector<ad::Scalar> emit_param_leaves(ad::Context& ctx, const Mlp& m);

/// Emit the forward pass into a context. `params` are scalars in flat
/// layout order (leaves for training, constants for plain evaluation).
std::vector<ad::Scalar> forward(ad::Context& ctx, const Mlp& m,
                                std::span<const ad::Scalar> inputs,
                                std::span<const ad::Scalar> params);

/// Plain double evaluation, no graph (reporting/export path).
std::vector<double> forward_values(const Mlp& m, std::span<const double> x);

/// Flat little-endian float64 dump with a small header.
void save(const Mlp& m, const std::filesystem::path& path);
Mlp load(const std::filesystem::path& path);

}  // namespace pinn::net
