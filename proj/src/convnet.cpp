#include "pgdrecon/convnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace pgdrecon {

namespace {

using P = ConvNetParams;
constexpr char kMagic[8] = {'P', 'G', 'D', 'R', 'N', 'E', 'T', '1'};
constexpr int kFormatVersion = 1;

// Zero-padded 3x3 cross-correlation, channel-major planes of h*w values.
void conv_forward(const double* in, std::size_t cin, double* out, std::size_t cout,
                  const double* w, const double* b, std::size_t h, std::size_t wd) {
  const std::size_t hw = h * wd;
  for (std::size_t co = 0; co < cout; ++co) {
    double* dst_plane = out + co * hw;
    std::fill(dst_plane, dst_plane + hw, b[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* src_plane = in + ci * hw;
      for (std::size_t t = 0; t < P::kTaps; ++t) {
        const double wv = w[(co * cin + ci) * P::kTaps + t];
        const long oy = long(t / P::kKernel) - 1;
        const long ox = long(t % P::kKernel) - 1;
        const long r0 = std::max(0L, -oy), r1 = std::min(long(h), long(h) - oy);
        const long c0 = std::max(0L, -ox), c1 = std::min(long(wd), long(wd) - ox);
        for (long r = r0; r < r1; ++r) {
          const double* src = src_plane + (r + oy) * long(wd) + ox;
          double* dst = dst_plane + r * long(wd);
          for (long c = c0; c < c1; ++c) dst[c] += wv * src[c];
        }
      }
    }
  }
}

// Accumulates weight/bias gradients and, if gin is non-null, the input gradient.
void conv_backward(const double* in, std::size_t cin, const double* gout, std::size_t cout,
                   const double* w, double* gw, double* gb, double* gin, std::size_t h,
                   std::size_t wd) {
  const std::size_t hw = h * wd;
  for (std::size_t co = 0; co < cout; ++co) {
    const double* g_plane = gout + co * hw;
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += g_plane[i];
    gb[co] += s;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* src_plane = in + ci * hw;
      double* gin_plane = gin ? gin + ci * hw : nullptr;
      for (std::size_t t = 0; t < P::kTaps; ++t) {
        const std::size_t wi = (co * cin + ci) * P::kTaps + t;
        const double wv = w[wi];
        const long oy = long(t / P::kKernel) - 1;
        const long ox = long(t % P::kKernel) - 1;
        const long r0 = std::max(0L, -oy), r1 = std::min(long(h), long(h) - oy);
        const long c0 = std::max(0L, -ox), c1 = std::min(long(wd), long(wd) - ox);
        double acc = 0.0;
        for (long r = r0; r < r1; ++r) {
          const long off = (r + oy) * long(wd) + ox;
          const double* src = src_plane + off;
          const double* g = g_plane + r * long(wd);
          for (long c = c0; c < c1; ++c) acc += g[c] * src[c];
          if (gin_plane) {
            double* gi = gin_plane + off;
            for (long c = c0; c < c1; ++c) gi[c] += wv * g[c];
          }
        }
        gw[wi] += acc;
      }
    }
  }
}

struct Activations {
  Vector u;     // normalized input, 1 plane
  Vector pre1;  // kHidden planes
  Vector h1;
  Vector pre2;
  Vector h2;
  Vector out;  // 1 plane, net(u)
};

void check_input(const ConvNetParams& p, const Image& x) {
  if (x.width != p.width || x.height != p.height) {
    throw ConfigError("convnet: image is " + std::to_string(x.width) + "x" +
                      std::to_string(x.height) + " but the network was built for " +
                      std::to_string(p.width) + "x" + std::to_string(p.height));
  }
}

Activations run(const ConvNetParams& p, const Image& x) {
  check_input(p, x);
  const std::size_t h = p.height, w = p.width, hw = h * w;
  const double* th = p.theta.data();
  Activations a;
  a.u.resize(hw);
  for (std::size_t i = 0; i < hw; ++i) a.u[i] = x.pixels[i] / p.data_scale;
  a.pre1.resize(P::kHidden * hw);
  conv_forward(a.u.data(), 1, a.pre1.data(), P::kHidden, th + P::kW1, th + P::kB1, h, w);
  a.h1 = a.pre1;
  for (auto& v : a.h1) v = std::max(v, 0.0);
  a.pre2.resize(P::kHidden * hw);
  conv_forward(a.h1.data(), P::kHidden, a.pre2.data(), P::kHidden, th + P::kW2, th + P::kB2, h,
               w);
  a.h2 = a.pre2;
  for (auto& v : a.h2) v = std::max(v, 0.0);
  a.out.resize(hw);
  conv_forward(a.h2.data(), P::kHidden, a.out.data(), 1, th + P::kW3, th + P::kB3, h, w);
  return a;
}

Image residual_output(const ConvNetParams& p, const Image& x, const Activations& a) {
  Image y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.pixels[i] += p.data_scale * a.out[i];
  return y;
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("model: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

}  // namespace

ConvNetParams::ConvNetParams(std::size_t w, std::size_t h, double scale)
    : width(w), height(h), data_scale(scale), theta(kCount, 0.0) {
  validate();
}

ConvNetParams ConvNetParams::initialize(std::size_t w, std::size_t h, double scale,
                                        std::uint64_t seed) {
  ConvNetParams p(w, h, scale);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n1(0.0, std::sqrt(2.0 / double(1 * kTaps)));
  std::normal_distribution<double> n2(0.0, std::sqrt(2.0 / double(kHidden * kTaps)));
  for (std::size_t i = kW1; i < kB1; ++i) p.theta[i] = n1(rng);
  for (std::size_t i = kW2; i < kB2; ++i) p.theta[i] = n2(rng);
  return p;
}

void ConvNetParams::validate() const {
  if (width == 0 || height == 0) throw ConfigError("convnet: empty image shape");
  if (!(data_scale > 0.0) || !std::isfinite(data_scale)) {
    throw ConfigError("convnet: data scale must be positive");
  }
  if (theta.size() != kCount) {
    throw ConfigError("convnet: expected " + std::to_string(kCount) + " parameters, got " +
                      std::to_string(theta.size()));
  }
  if (!all_finite(theta)) throw ConfigError("convnet: non-finite parameter");
}

nlohmann::json ConvNetParams::architecture() {
  return {{"layers",
           {{{"type", "conv"}, {"in", 1}, {"out", kHidden}, {"kernel", kKernel}},
            {{"type", "relu"}},
            {{"type", "conv"}, {"in", kHidden}, {"out", kHidden}, {"kernel", kKernel}},
            {{"type", "relu"}},
            {{"type", "conv"}, {"in", kHidden}, {"out", 1}, {"kernel", kKernel}}}},
          {"padding", "zero-same"},
          {"residual", true},
          {"n_params", kCount}};
}

Image forward(const ConvNetParams& params, const Image& x) {
  return residual_output(params, x, run(params, x));
}

LossAndGrad loss_and_grad(const ConvNetParams& p, std::span<const TrainingPair> batch) {
  if (batch.empty()) throw ConfigError("loss: empty batch");
  LossAndGrad res;
  res.grad.assign(P::kCount, 0.0);
  const std::size_t h = p.height, w = p.width, hw = h * w;
  const double* th = p.theta.data();
  double* g = res.grad.data();
  const double s = p.data_scale;
  Vector g_out(hw), g_h2(P::kHidden * hw), g_h1(P::kHidden * hw);
  for (const auto& pair : batch) {
    check_input(p, pair.target);
    const Activations a = run(p, pair.input);
    // Loss in normalized units: ||(x + s*o - t) / s||^2 = ||x/s + o - t/s||^2.
    for (std::size_t i = 0; i < hw; ++i) {
      const double e = (pair.input.pixels[i] - pair.target.pixels[i]) / s + a.out[i];
      res.loss += e * e;
      g_out[i] = 2.0 * e;
    }
    std::fill(g_h2.begin(), g_h2.end(), 0.0);
    conv_backward(a.h2.data(), P::kHidden, g_out.data(), 1, th + P::kW3, g + P::kW3, g + P::kB3,
                  g_h2.data(), h, w);
    for (std::size_t i = 0; i < g_h2.size(); ++i) {
      if (!(a.pre2[i] > 0.0)) g_h2[i] = 0.0;
    }
    std::fill(g_h1.begin(), g_h1.end(), 0.0);
    conv_backward(a.h1.data(), P::kHidden, g_h2.data(), P::kHidden, th + P::kW2, g + P::kW2,
                  g + P::kB2, g_h1.data(), h, w);
    for (std::size_t i = 0; i < g_h1.size(); ++i) {
      if (!(a.pre1[i] > 0.0)) g_h1[i] = 0.0;
    }
    conv_backward(a.u.data(), 1, g_h1.data(), P::kHidden, th + P::kW1, g + P::kW1, g + P::kB1,
                  nullptr, h, w);
  }
  return res;
}

double loss_only(const ConvNetParams& p, std::span<const TrainingPair> batch) {
  double loss = 0.0;
  for (const auto& pair : batch) {
    check_input(p, pair.target);
    const Image y = forward(p, pair.input);
    const double d = distance(y.pixels, pair.target.pixels) / p.data_scale;
    loss += d * d;
  }
  return loss;
}

void save_model(const std::filesystem::path& path, const ConvNetParams& params,
                const nlohmann::json& extra) {
  params.validate();
  nlohmann::json header = {{"format_version", kFormatVersion},
                           {"architecture", ConvNetParams::architecture()},
                           {"width", params.width},
                           {"height", params.height},
                           {"data_scale", params.data_scale},
                           {"meta", extra}};
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("model: cannot write " + path.string());
  os.write(kMagic, sizeof kMagic);
  put_u64(os, text.size());
  os.write(text.data(), std::streamsize(text.size()));
  put_u64(os, params.theta.size());
  for (double v : params.theta) put_u64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw ConfigError("model: write failed for " + path.string());
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("model: cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw ConfigError("model: " + path.string() + " is not a model file");
  }
  const std::uint64_t len = get_u64(is);
  if (len > (1u << 24)) throw ConfigError("model: header too large");
  std::string text(len, '\0');
  if (!is.read(text.data(), std::streamsize(len))) throw ConfigError("model: truncated header");
  LoadedModel m;
  try {
    m.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: bad header: ") + e.what());
  }
  if (m.header.value("format_version", 0) != kFormatVersion) {
    throw ConfigError("model: unsupported format version");
  }
  if (m.header.at("architecture") != ConvNetParams::architecture()) {
    throw ConfigError("model: architecture does not match this build");
  }
  m.params.width = m.header.at("width").get<std::size_t>();
  m.params.height = m.header.at("height").get<std::size_t>();
  m.params.data_scale = m.header.at("data_scale").get<double>();
  const std::uint64_t n = get_u64(is);
  if (n != ConvNetParams::kCount) throw ConfigError("model: wrong parameter count");
  m.params.theta.resize(n);
  for (auto& v : m.params.theta) v = std::bit_cast<double>(get_u64(is));
  m.params.validate();
  return m;
}

NeuralProjector::NeuralProjector(std::shared_ptr<const ConvNetParams> params)
    : params_(std::move(params)) {
  if (!params_) throw ConfigError("neural projector: null parameters");
  params_->validate();
}

Image NeuralProjector::apply(const Image& x) const { return forward(*params_, x); }

std::string NeuralProjector::describe() const {
  return "neural(" + std::to_string(params_->width) + "x" + std::to_string(params_->height) +
         ", scale " + std::to_string(params_->data_scale) + ")";
}

}  // namespace pgdrecon
