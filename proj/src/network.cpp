#include "pinn/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace pinn::net {

std::size_t param_count(std::span<const int> widths) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    n += std::size_t(widths[i]) * widths[i + 1] + widths[i + 1];
  return n;
}

Mlp init(std::vector<int> widths, Activation act, std::uint64_t seed) {
  if (widths.size() < 2) throw std::invalid_argument("mlp: need >= 2 widths");
  for (int w : widths)
    if (w <= 0) throw std::invalid_argument("mlp: widths must be positive");

  Mlp m;
  m.widths = std::move(widths);
  m.activation = act;
  m.params.resize(param_count(m.widths));

  std::mt19937_64 rng(seed);
  std::size_t k = 0;
  for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
    const int fan_in = m.widths[l], fan_out = m.widths[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (int i = 0; i < fan_out * fan_in; ++i) m.params[k++] = dist(rng);
    for (int i = 0; i < fan_out; ++i) m.params[k++] = 0.0;  // biases
  }
  return m;
}

const std::vector<double>& params_get(const Mlp& m) { return m.params; }

void params_set(Mlp& m, std::span<const double> v) {
  if (v.size() != m.params.size())
    throw std::invalid_argument("params_set: length mismatch");
  m.params.assign(v.begin(), v.end());
}

std::vector<ad::Scalar> emit_param_leaves(ad::Context& ctx, const Mlp& m) {
  std::vector<ad::Scalar> leaves;
  leaves.reserve(m.params.size());
  for (double p : m.params) leaves.push_back(ctx.variable(p));
  return leaves;
}

std::vector<ad::Scalar> forward(ad::Context& , const Mlp& m,
                                std::span<const ad::Scalar> inputs,
                                std::span<const ad::Scalar> params) {
  if (static_cast<int>(inputs.size()) != m.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  if (params.size() != m.params.size())
    throw std::invalid_argument("forward: parameter count mismatch");

  std::vector<ad::Scalar> h(inputs.begin(), inputs.end());
  std::size_t k = 0;
  for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
    const int fan_in = m.widths[l], fan_out = m.widths[l + 1];
    const bool last = l + 2 == m.widths.size();
    std::vector<ad::Scalar> out(fan_out);
    const std::size_t bias0 = k + std::size_t(fan_out) * fan_in;
    for (int j = 0; j < fan_out; ++j) {
      ad::Scalar acc = params[bias0 + j];
      for (int i = 0; i < fan_in; ++i)
        acc = ad::fma(params[k + std::size_t(j) * fan_in + i], h[i], acc);
      out[j] = last ? acc : ad::tanh(acc);
    }
    k = bias0 + fan_out;
    h = std::move(out);
  }
  return h;
}

std::vector<double> forward_values(const Mlp& m, std::span<const double> x) {
  if (static_cast<int>(x.size()) != m.input_dim())
    throw std::invalid_argument("forward_values: input dimension mismatch");
  std::vector<double> h(x.begin(), x.end());
  std::size_t k = 0;
  for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
    const int fan_in = m.widths[l], fan_out = m.widths[l + 1];
    const bool last = l + 2 == m.widths.size();
    std::vector<double> out(fan_out);
    const std::size_t bias0 = k + std::size_t(fan_out) * fan_in;
    for (int j = 0; j < fan_out; ++j) {
      double acc = m.params[bias0 + j];
      for (int i = 0; i < fan_in; ++i)
        acc += m.params[k + std::size_t(j) * fan_in + i] * h[i];
      out[j] = last ? acc : std::tanh(acc);
    }
    k = bias0 + fan_out;
    h = std::move(out);
  }
  return h;
}

namespace {
constexpr char kMagic[4] = {'M', 'L', 'P', '1'};
}

void save(const Mlp& m, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save: cannot open " + path.string());
  f.write(kMagic, 4);
  std::uint32_t nl = static_cast<std::uint32_t>(m.widths.size());
  f.write(reinterpret_cast<const char*>(&nl), 4);
  for (int w : m.widths) {
    std::uint32_t u = static_cast<std::uint32_t>(w);
    f.write(reinterpret_cast<const char*>(&u), 4);
  }
  std::uint8_t act = static_cast<std::uint8_t>(m.activation);
  f.write(reinterpret_cast<const char*>(&act), 1);
  f.write(reinterpret_cast<const char*>(m.params.data()),
          static_cast<std::streamsize>(m.params.size() * sizeof(double)));
  if (!f) throw std::runtime_error("save: write failed for " + path.string());
}

Mlp load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load: cannot open " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load: bad header in " + path.string());
  std::uint32_t nl = 0;
  f.read(reinterpret_cast<char*>(&nl), 4);
  if (!f || nl < 2 || nl > 1024) throw std::runtime_error("load: bad layer count");
  Mlp m;
  m.widths.resize(nl);
  for (auto& w : m.widths) {
    std::uint32_t u = 0;
    f.read(reinterpret_cast<char*>(&u), 4);
    w = static_cast<int>(u);
  }
  std::uint8_t act = 0;
  f.read(reinterpret_cast<char*>(&act), 1);
  m.activation = static_cast<Activation>(act);
  m.params.resize(param_count(m.widths));
  f.read(reinterpret_cast<char*>(m.params.data()),
         static_cast<std::streamsize>(m.params.size() * sizeof(double)));
  if (!f) throw std::runtime_error("load: truncated file " + path.string());
  return m;
}

}  // namespace pinn::net
