#include "vseg/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "vseg/parallel.hpp"
#include "vseg/resample.hpp"
#include "vseg/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "params I/O assumes a little-endian host");

namespace vseg {

namespace {

std::string dims_str(int c, const std::array<int, 3>& d) {
  return std::to_string(c) + "x[" + std::to_string(d[0]) + "," + std::to_string(d[1]) + "," +
         std::to_string(d[2]) + "]";
}

void check_layer(const Tensor4& input, const ConvParams& layer) {
  if (layer.shape.kernel != 1 && layer.shape.kernel != 3)
    throw std::invalid_argument("conv3d: kernel must be 1 or 3");
  if (input.channels != layer.shape.in_channels)
    throw std::invalid_argument("conv3d: input " + dims_str(input.channels, input.dims) +
                                " does not match layer " + layer.name + " expecting " +
                                std::to_string(layer.shape.in_channels) + " channels");
  if (layer.w.size() != layer.shape.weight_count() ||
      layer.b.size() != static_cast<std::size_t>(layer.shape.out_channels))
    throw std::invalid_argument("conv3d: layer " + layer.name +
                                " weight/bias sizes do not match its shape");
}

void relu_inplace(Tensor4& t) {
  for (double& v : t.values)
    if (v < 0.0) v = 0.0;
}

void relu_backward_inplace(Tensor4& grad, const Tensor4& activation) {
  for (std::size_t i = 0; i < grad.values.size(); ++i)
    if (!(activation.values[i] > 0.0)) grad.values[i] = 0.0;
}

void add_inplace(Tensor4& a, const Tensor4& b) {
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += b.values[i];
}

std::array<int, 3> dims_at_level(const std::array<int, 3>& input_dims, int level) {
  return {input_dims[0] >> level, input_dims[1] >> level, input_dims[2] >> level};
}

}  // namespace

std::string to_string(Head head) { return head == Head::pwc ? "pwc" : "pwr"; }

Head head_from_string(const std::string& s) {
  if (s == "pwc") return Head::pwc;
  if (s == "pwr") return Head::pwr;
  throw std::invalid_argument("unknown head \"" + s + "\"");
}

int NetSpec::channels_at(int level) const { return base_channels << level; }

void NetSpec::validate() const {
  if (levels < 1) throw std::invalid_argument("net: levels must be >= 1");
  if (base_channels < 1) throw std::invalid_argument("net: base_channels must be >= 1");
  const int div = 1 << (levels - 1);
  for (int a = 0; a < 3; ++a) {
    if (input_dims[a] < 1) throw std::invalid_argument("net: input dims must be >= 1");
    if (input_dims[a] % div != 0)
      throw std::invalid_argument("net: input dims must be divisible by 2^(levels-1)");
  }
}

std::vector<LayerDef> layer_defs(const NetSpec& spec) {
  std::vector<LayerDef> defs;
  for (int l = 0; l < spec.levels; ++l) {
    const int cin = l == 0 ? 1 : spec.channels_at(l - 1);
    const int cl = spec.channels_at(l);
    defs.push_back({"enc" + std::to_string(l) + ".c1", {cl, cin, 3}});
    defs.push_back({"enc" + std::to_string(l) + ".c2", {cl, cl, 3}});
  }
  for (int l = spec.levels - 2; l >= 0; --l) {
    const int cl = spec.channels_at(l);
    defs.push_back({"dec" + std::to_string(l) + ".up", {cl, spec.channels_at(l + 1), 3}});
    defs.push_back({"dec" + std::to_string(l) + ".c1", {cl, 2 * cl, 3}});
    defs.push_back({"dec" + std::to_string(l) + ".c2", {cl, cl, 3}});
  }
  defs.push_back({"head", {spec.output_channels(), spec.channels_at(0), 1}});
  return defs;
}

std::size_t Params::parameter_count() const {
  std::size_t n = 0;
  for (const ConvParams& layer : layers) n += layer.w.size() + layer.b.size();
  return n;
}

Params init_params(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  Params params;
  params.seed = seed;
  Rng rng(seed);
  for (const LayerDef& def : layer_defs(spec)) {
    ConvParams layer;
    layer.name = def.name;
    layer.shape = def.shape;
    const int k = def.shape.kernel;
    const double fan_in = static_cast<double>(def.shape.in_channels) * k * k * k;
    const double bound = std::sqrt(6.0 / fan_in);
    layer.w.resize(def.shape.weight_count());
    for (double& w : layer.w) w = rng.uniform(-bound, bound);
    layer.b.assign(def.shape.out_channels, 0.0);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Params zero_like(const Params& params) {
  Params out;
  out.seed = params.seed;
  out.layers.reserve(params.layers.size());
  for (const ConvParams& layer : params.layers) {
    ConvParams z;
    z.name = layer.name;
    z.shape = layer.shape;
    z.w.assign(layer.w.size(), 0.0);
    z.b.assign(layer.b.size(), 0.0);
    out.layers.push_back(std::move(z));
  }
  return out;
}

Tensor4 conv3d_forward(const Tensor4& input, const ConvParams& layer, int threads) {
  check_layer(input, layer);
  const int nx = input.dims[0], ny = input.dims[1], nz = input.dims[2];
  const int cin = layer.shape.in_channels, cout = layer.shape.out_channels;
  const std::size_t plane = static_cast<std::size_t>(nx) * ny;
  const std::size_t chan = plane * nz;
  Tensor4 out(cout, input.dims);

  if (layer.shape.kernel == 1) {
    parallel_for(cout, threads, [&](std::size_t co) {
      double* o = out.values.data() + co * chan;
      std::fill(o, o + chan, layer.b[co]);
      for (int ci = 0; ci < cin; ++ci) {
        const double w = layer.w[co * cin + ci];
        const double* in = input.values.data() + static_cast<std::size_t>(ci) * chan;
        for (std::size_t v = 0; v < chan; ++v) o[v] += w * in[v];
      }
    });
    return out;
  }

  parallel_for(static_cast<std::size_t>(cout) * nz, threads, [&](std::size_t line) {
    const int co = static_cast<int>(line / nz);
    const int z = static_cast<int>(line % nz);
    double* slab = out.values.data() + co * chan + static_cast<std::size_t>(z) * plane;
    std::fill(slab, slab + plane, layer.b[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const double* in_chan = input.values.data() + static_cast<std::size_t>(ci) * chan;
      for (int dz = 0; dz < 3; ++dz) {
        const int iz = z + dz - 1;
        if (iz < 0 || iz >= nz) continue;
        const double* in_plane = in_chan + static_cast<std::size_t>(iz) * plane;
        const double* wbase = layer.w.data() + ((static_cast<std::size_t>(co) * cin + ci) * 3 + dz) * 9;
        for (int dy = 0; dy < 3; ++dy) {
          const double w0 = wbase[dy * 3 + 0];
          const double w1 = wbase[dy * 3 + 1];
          const double w2 = wbase[dy * 3 + 2];
          for (int y = 0; y < ny; ++y) {
            const int iy = y + dy - 1;
            if (iy < 0 || iy >= ny) continue;
            const double* r = in_plane + static_cast<std::size_t>(iy) * nx;
            double* o = slab + static_cast<std::size_t>(y) * nx;
            for (int x = 1; x < nx; ++x) o[x] += w0 * r[x - 1];
            for (int x = 0; x < nx; ++x) o[x] += w1 * r[x];
            for (int x = 0; x < nx - 1; ++x) o[x] += w2 * r[x + 1];
          }
        }
      }
    }
  });
  return out;
}

ConvGrads conv3d_backward(const Tensor4& input, const ConvParams& layer,
                          const Tensor4& grad_output, int threads) {
  check_layer(input, layer);
  if (grad_output.channels != layer.shape.out_channels || grad_output.dims != input.dims)
    throw std::invalid_argument("conv3d_backward: gradient " +
                                dims_str(grad_output.channels, grad_output.dims) +
                                " does not match layer " + layer.name + " output " +
                                dims_str(layer.shape.out_channels, input.dims));
  const int nx = input.dims[0], ny = input.dims[1], nz = input.dims[2];
  const int cin = layer.shape.in_channels, cout = layer.shape.out_channels;
  const std::size_t plane = static_cast<std::size_t>(nx) * ny;
  const std::size_t chan = plane * nz;

  ConvGrads grads;
  grads.w.assign(layer.w.size(), 0.0);
  grads.b.assign(layer.b.size(), 0.0);
  grads.input = Tensor4(cin, input.dims);

  for (int co = 0; co < cout; ++co) {
    const double* g = grad_output.values.data() + static_cast<std::size_t>(co) * chan;
    double s = 0.0;
    for (std::size_t v = 0; v < chan; ++v) s += g[v];
    grads.b[co] = s;
  }

  if (layer.shape.kernel == 1) {
    parallel_for(static_cast<std::size_t>(cout) * cin, threads, [&](std::size_t pair) {
      const int co = static_cast<int>(pair / cin);
      const int ci = static_cast<int>(pair % cin);
      const double* g = grad_output.values.data() + static_cast<std::size_t>(co) * chan;
      const double* in = input.values.data() + static_cast<std::size_t>(ci) * chan;
      double s = 0.0;
      for (std::size_t v = 0; v < chan; ++v) s += g[v] * in[v];
      grads.w[pair] = s;
    });
    parallel_for(cin, threads, [&](std::size_t ci) {
      double* gi = grads.input.values.data() + ci * chan;
      for (int co = 0; co < cout; ++co) {
        const double w = layer.w[static_cast<std::size_t>(co) * cin + ci];
        const double* g = grad_output.values.data() + static_cast<std::size_t>(co) * chan;
        for (std::size_t v = 0; v < chan; ++v) gi[v] += w * g[v];
      }
    });
    return grads;
  }

  parallel_for(static_cast<std::size_t>(cout) * cin, threads, [&](std::size_t pair) {
    const int co = static_cast<int>(pair / cin);
    const int ci = static_cast<int>(pair % cin);
    const double* g_chan = grad_output.values.data() + static_cast<std::size_t>(co) * chan;
    const double* in_chan = input.values.data() + static_cast<std::size_t>(ci) * chan;
    double* wg = grads.w.data() + pair * 27;
    for (int dz = 0; dz < 3; ++dz) {
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
          double s = 0.0;
          const int x0 = std::max(0, 1 - dx), x1 = std::min(nx, nx + 1 - dx);
          for (int z = 0; z < nz; ++z) {
            const int iz = z + dz - 1;
            if (iz < 0 || iz >= nz) continue;
            for (int y = 0; y < ny; ++y) {
              const int iy = y + dy - 1;
              if (iy < 0 || iy >= ny) continue;
              const double* g = g_chan + static_cast<std::size_t>(z) * plane +
                                static_cast<std::size_t>(y) * nx;
              const double* r = in_chan + static_cast<std::size_t>(iz) * plane +
                                static_cast<std::size_t>(iy) * nx + (dx - 1);
              for (int x = x0; x < x1; ++x) s += g[x] * r[x];
            }
          }
          wg[(dz * 3 + dy) * 3 + dx] = s;
        }
      }
    }
  });

  parallel_for(static_cast<std::size_t>(cin) * nz, threads, [&](std::size_t line) {
    const int ci = static_cast<int>(line / nz);
    const int iz = static_cast<int>(line % nz);
    double* gi_plane =
        grads.input.values.data() + ci * chan + static_cast<std::size_t>(iz) * plane;
    for (int co = 0; co < cout; ++co) {
      const double* g_chan = grad_output.values.data() + static_cast<std::size_t>(co) * chan;
      const double* wbase = layer.w.data() + (static_cast<std::size_t>(co) * cin + ci) * 27;
      for (int dz = 0; dz < 3; ++dz) {
        const int z = iz - dz + 1;
        if (z < 0 || z >= nz) continue;
        const double* g_plane = g_chan + static_cast<std::size_t>(z) * plane;
        for (int dy = 0; dy < 3; ++dy) {
          const double w0 = wbase[(dz * 3 + dy) * 3 + 0];
          const double w1 = wbase[(dz * 3 + dy) * 3 + 1];
          const double w2 = wbase[(dz * 3 + dy) * 3 + 2];
          for (int iy = 0; iy < ny; ++iy) {
            const int y = iy - dy + 1;
            if (y < 0 || y >= ny) continue;
            const double* g = g_plane + static_cast<std::size_t>(y) * nx;
            double* gi = gi_plane + static_cast<std::size_t>(iy) * nx;
            for (int x = 1; x < nx; ++x) gi[x - 1] += w0 * g[x];
            for (int x = 0; x < nx; ++x) gi[x] += w1 * g[x];
            for (int x = 0; x < nx - 1; ++x) gi[x + 1] += w2 * g[x];
          }
        }
      }
    }
  });
  return grads;
}

Tensor4 maxpool2(const Tensor4& input, std::vector<std::size_t>* argmax) {
  for (int a = 0; a < 3; ++a)
    if (input.dims[a] % 2 != 0)
      throw std::invalid_argument("maxpool2: dims must be even, got " +
                                  dims_str(input.channels, input.dims));
  const std::array<int, 3> od{input.dims[0] / 2, input.dims[1] / 2, input.dims[2] / 2};
  Tensor4 out(input.channels, od);
  if (argmax) argmax->resize(out.values.size());
  std::size_t oi = 0;
  for (int c = 0; c < input.channels; ++c) {
    for (int k = 0; k < od[2]; ++k) {
      for (int j = 0; j < od[1]; ++j) {
        for (int i = 0; i < od[0]; ++i, ++oi) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (int dz = 0; dz < 2; ++dz) {
            for (int dy = 0; dy < 2; ++dy) {
              for (int dx = 0; dx < 2; ++dx) {
                const std::size_t idx = input.index(c, 2 * i + dx, 2 * j + dy, 2 * k + dz);
                if (input.values[idx] > best) {
                  best = input.values[idx];
                  best_idx = idx;
                }
              }
            }
          }
          out.values[oi] = best;
          if (argmax) (*argmax)[oi] = best_idx;
        }
      }
    }
  }
  return out;
}

Tensor4 maxpool2_backward(const Tensor4& grad_output, const std::vector<std::size_t>& argmax,
                          int input_channels, const std::array<int, 3>& input_dims) {
  if (argmax.size() != grad_output.values.size())
    throw std::invalid_argument("maxpool2_backward: argmax size mismatch");
  Tensor4 grad_in(input_channels, input_dims);
  for (std::size_t i = 0; i < argmax.size(); ++i)
    grad_in.values[argmax[i]] += grad_output.values[i];
  return grad_in;
}

Tensor4 upsample_nearest2(const Tensor4& input) {
  const std::array<int, 3> od{input.dims[0] * 2, input.dims[1] * 2, input.dims[2] * 2};
  Tensor4 out(input.channels, od);
  std::size_t oi = 0;
  for (int c = 0; c < input.channels; ++c)
    for (int k = 0; k < od[2]; ++k)
      for (int j = 0; j < od[1]; ++j)
        for (int i = 0; i < od[0]; ++i, ++oi)
          out.values[oi] = input.at(c, i / 2, j / 2, k / 2);
  return out;
}

Tensor4 upsample_nearest2_backward(const Tensor4& grad_output) {
  for (int a = 0; a < 3; ++a)
    if (grad_output.dims[a] % 2 != 0)
      throw std::invalid_argument("upsample2_backward: dims must be even");
  const std::array<int, 3> id{grad_output.dims[0] / 2, grad_output.dims[1] / 2,
                              grad_output.dims[2] / 2};
  Tensor4 grad_in(grad_output.channels, id);
  std::size_t oi = 0;
  for (int c = 0; c < grad_output.channels; ++c)
    for (int k = 0; k < grad_output.dims[2]; ++k)
      for (int j = 0; j < grad_output.dims[1]; ++j)
        for (int i = 0; i < grad_output.dims[0]; ++i, ++oi)
          grad_in.at(c, i / 2, j / 2, k / 2) += grad_output.values[oi];
  return grad_in;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
  if (a.dims != b.dims)
    throw std::invalid_argument("concat: dims differ, " + dims_str(a.channels, a.dims) +
                                " vs " + dims_str(b.channels, b.dims));
  Tensor4 out(a.channels + b.channels, a.dims);
  std::copy(a.values.begin(), a.values.end(), out.values.begin());
  std::copy(b.values.begin(), b.values.end(), out.values.begin() + a.values.size());
  return out;
}

void softmax2_inplace(Tensor4& t) {
  if (t.channels != 2) throw std::invalid_argument("softmax2: expected 2 channels");
  const std::size_t n = t.voxel_count();
  for (std::size_t v = 0; v < n; ++v) {
    const double l0 = t.values[v], l1 = t.values[n + v];
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    const double s = e0 + e1;
    t.values[v] = e0 / s;
    t.values[n + v] = e1 / s;
  }
}

namespace {

void check_params(const NetSpec& spec, const Params& params) {
  const std::vector<LayerDef> defs = layer_defs(spec);
  if (params.layers.size() != defs.size())
    throw std::invalid_argument("net: params have " + std::to_string(params.layers.size()) +
                                " layers, spec wants " + std::to_string(defs.size()));
  for (std::size_t i = 0; i < defs.size(); ++i) {
    const ConvParams& layer = params.layers[i];
    if (layer.name != defs[i].name || !(layer.shape == defs[i].shape))
      throw std::invalid_argument("net: params layer " + layer.name +
                                  " does not match spec layer " + defs[i].name);
    if (layer.w.size() != defs[i].shape.weight_count() ||
        layer.b.size() != static_cast<std::size_t>(defs[i].shape.out_channels))
      throw std::invalid_argument("net: params layer " + layer.name + " has wrong value counts");
  }
}

}  // namespace

Tensor4 net_forward(const NetSpec& spec, const Params& params, const Tensor4& input,
                    NetTrace* trace, int threads) {
  spec.validate();
  check_params(spec, params);
  if (input.channels != 1 || input.dims != spec.input_dims)
    throw std::invalid_argument("net_forward: input " + dims_str(input.channels, input.dims) +
                                " does not match spec " + dims_str(1, spec.input_dims));
  if (trace) {
    trace->convs.clear();
    trace->pool_argmax.clear();
  }

  int li = 0;
  auto run_conv = [&](const Tensor4& in, bool relu_after) {
    Tensor4 out = conv3d_forward(in, params.layers[li], threads);
    ++li;
    if (relu_after) relu_inplace(out);
    if (trace) trace->convs.push_back({in, out});
    return out;
  };

  std::vector<Tensor4> enc_out;
  Tensor4 x = run_conv(input, true);
  x = run_conv(x, true);
  enc_out.push_back(std::move(x));
  for (int l = 1; l < spec.levels; ++l) {
    std::vector<std::size_t> am;
    Tensor4 pooled = maxpool2(enc_out.back(), trace ? &am : nullptr);
    if (trace) trace->pool_argmax.push_back(std::move(am));
    Tensor4 y = run_conv(pooled, true);
    y = run_conv(y, true);
    enc_out.push_back(std::move(y));
  }

  Tensor4 d = enc_out.back();
  for (int l = spec.levels - 2; l >= 0; --l) {
    Tensor4 up = upsample_nearest2(d);
    Tensor4 upc = run_conv(up, true);
    Tensor4 cat = concat_channels(enc_out[l], upc);
    d = run_conv(cat, true);
    d = run_conv(d, true);
  }

  Tensor4 head = run_conv(d, false);
  if (spec.head == Head::pwc) softmax2_inplace(head);
  return head;
}

Params net_backward(const NetSpec& spec, const Params& params, const NetTrace& trace,
                    const Tensor4& upstream, int threads) {
  spec.validate();
  check_params(spec, params);
  if (trace.convs.size() != params.layers.size())
    throw std::invalid_argument("net_backward: trace does not cover every layer");

  Params grads = zero_like(params);
  int li = static_cast<int>(params.layers.size()) - 1;

  auto back_conv = [&](Tensor4&& g, bool through_relu) {
    if (through_relu) relu_backward_inplace(g, trace.convs[li].output);
    ConvGrads cg = conv3d_backward(trace.convs[li].input, params.layers[li], g, threads);
    grads.layers[li].w = std::move(cg.w);
    grads.layers[li].b = std::move(cg.b);
    --li;
    return std::move(cg.input);
  };

  Tensor4 g = back_conv(Tensor4(upstream), false);  // head

  std::vector<Tensor4> skip_grad(spec.levels > 1 ? spec.levels - 1 : 0);
  for (int l = 0; l <= spec.levels - 2; ++l) {
    g = back_conv(std::move(g), true);              // dec.c2
    Tensor4 g_cat = back_conv(std::move(g), true);  // dec.c1
    const int cl = spec.channels_at(l);
    const std::size_t half = static_cast<std::size_t>(cl) * g_cat.voxel_count();
    Tensor4 g_skip(cl, g_cat.dims);
    std::copy(g_cat.values.begin(), g_cat.values.begin() + half, g_skip.values.begin());
    Tensor4 g_upc(cl, g_cat.dims);
    std::copy(g_cat.values.begin() + half, g_cat.values.end(), g_upc.values.begin());
    skip_grad[l] = std::move(g_skip);
    Tensor4 g_up = back_conv(std::move(g_upc), true);  // dec.up
    g = upsample_nearest2_backward(g_up);
  }

  for (int l = spec.levels - 1; l >= 0; --l) {
    li = 2 * l + 1;
    g = back_conv(std::move(g), true);               // enc.c2
    Tensor4 g_in = back_conv(std::move(g), true);    // enc.c1
    if (l > 0) {
      g = maxpool2_backward(g_in, trace.pool_argmax[l - 1], spec.channels_at(l - 1),
                            dims_at_level(spec.input_dims, l - 1));
      add_inplace(g, skip_grad[l - 1]);
    }
  }
  return grads;
}

LossResult loss_cross_entropy(const Tensor4& probs, const BinaryVolume& target) {
  if (probs.channels != 2 || probs.dims != target.meta.dims)
    throw std::invalid_argument("cross_entropy: prediction " +
                                dims_str(probs.channels, probs.dims) + " does not match target " +
                                dims_str(1, target.meta.dims));
  const std::size_t n = probs.voxel_count();
  LossResult r;
  r.grad = Tensor4(2, probs.dims);
  double sum = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const bool fg = target.voxels[v] != 0;
    const double p0 = probs.values[v], p1 = probs.values[n + v];
    sum -= std::log(std::max(fg ? p1 : p0, 1e-300));
    r.grad.values[v] = (p0 - (fg ? 0.0 : 1.0)) / static_cast<double>(n);
    r.grad.values[n + v] = (p1 - (fg ? 1.0 : 0.0)) / static_cast<double>(n);
  }
  r.loss = sum / static_cast<double>(n);
  return r;
}

LossResult loss_weighted_mse(const Tensor4& pred, const ScalarVolume& target, double epsilon,
                             bool normalize_by_weight_sum) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("weighted_mse: epsilon must be positive");
  if (pred.channels != 1 || pred.dims != target.meta.dims)
    throw std::invalid_argument("weighted_mse: prediction " +
                                dims_str(pred.channels, pred.dims) + " does not match target " +
                                dims_str(1, target.meta.dims));
  const std::size_t n = pred.voxel_count();
  LossResult r;
  r.grad = Tensor4(1, pred.dims);
  double sum = 0.0, wsum = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const double d = target.voxels[v];
    const double w = 1.0 / (std::abs(d) + epsilon);
    const double resid = pred.values[v] - d;
    sum += w * resid * resid;
    wsum += w;
    r.grad.values[v] = 2.0 * w * resid;
  }
  const double denom = normalize_by_weight_sum ? wsum : static_cast<double>(n);
  r.loss = sum / denom;
  for (double& g : r.grad.values) g /= denom;
  return r;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("train: learning rate must be >= 0");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(weight_epsilon > 0.0)) throw std::invalid_argument("train: weight epsilon must be > 0");
  if (clamp_tau < 0.0) throw std::invalid_argument("train: clamp tau must be >= 0");
}

namespace {

void axpy_params(Params& dst, const Params& g, double a) {
  for (std::size_t l = 0; l < dst.layers.size(); ++l) {
    for (std::size_t i = 0; i < dst.layers[l].w.size(); ++i) dst.layers[l].w[i] += a * g.layers[l].w[i];
    for (std::size_t i = 0; i < dst.layers[l].b.size(); ++i) dst.layers[l].b[i] += a * g.layers[l].b[i];
  }
}

void adam_update(std::vector<double>& x, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, double lr, double c1, double c2) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
    v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    x[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
  }
}

}  // namespace

TrainResult train(const NetSpec& spec, const TrainConfig& config,
                  const std::vector<TrainExample>& dataset) {
  spec.validate();
  config.validate();
  const bool pwc = spec.head == Head::pwc;
  if (pwc != (config.loss == LossKind::cross_entropy))
    throw std::invalid_argument("train: loss kind does not match the network head");
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");

  std::vector<Tensor4> inputs;
  std::vector<BinaryVolume> btargets;
  std::vector<ScalarVolume> stargets;
  inputs.reserve(dataset.size());
  for (const TrainExample& ex : dataset) {
    if (ex.input.meta.dims != spec.input_dims)
      throw std::invalid_argument("train: case " + ex.id + " input dims do not match the net");
    inputs.push_back(tensor_from_volume(ex.input));
    if (pwc) {
      const auto* t = std::get_if<BinaryVolume>(&ex.target);
      if (!t) throw std::invalid_argument("train: case " + ex.id + " needs a binary target");
      if (t->meta.dims != spec.input_dims)
        throw std::invalid_argument("train: case " + ex.id + " target dims do not match the net");
      btargets.push_back(*t);
    } else {
      const auto* t = std::get_if<ScalarVolume>(&ex.target);
      if (!t) throw std::invalid_argument("train: case " + ex.id + " needs an SDF target");
      if (t->meta.dims != spec.input_dims)
        throw std::invalid_argument("train: case " + ex.id + " target dims do not match the net");
      ScalarVolume sdf = *t;
      if (config.clamp_tau > 0.0) {
        const float tau = static_cast<float>(config.clamp_tau);
        for (float& d : sdf.voxels) d = std::clamp(d, -tau, tau);
      }
      stargets.push_back(std::move(sdf));
    }
  }

  TrainResult result;
  result.params = init_params(spec, mix_seed(config.seed, 0));
  Params m = zero_like(result.params);
  Params v = zero_like(result.params);
  Rng shuffle_rng(mix_seed(config.seed, 1));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng.uniform_index(i + 1);
      std::swap(order[i], order[j]);
    }
    double epoch_sum = 0.0;
    for (std::size_t idx : order) {
      NetTrace trace;
      Tensor4 out = net_forward(spec, result.params, inputs[idx], &trace, config.threads);
      LossResult lr = pwc ? loss_cross_entropy(out, btargets[idx])
                          : loss_weighted_mse(out, stargets[idx], config.weight_epsilon,
                                              config.normalize_by_weight_sum);
      if (!std::isfinite(lr.loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", case " + dataset[idx].id);
      epoch_sum += lr.loss;
      Params g = net_backward(spec, result.params, trace, lr.grad, config.threads);
      ++step;
      if (config.optimizer == OptimizerKind::sgd) {
        axpy_params(result.params, g, -config.learning_rate);
      } else {
        const double c1 = 1.0 - std::pow(0.9, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(0.999, static_cast<double>(step));
        for (std::size_t l = 0; l < result.params.layers.size(); ++l) {
          adam_update(result.params.layers[l].w, g.layers[l].w, m.layers[l].w, v.layers[l].w,
                      config.learning_rate, c1, c2);
          adam_update(result.params.layers[l].b, g.layers[l].b, m.layers[l].b, v.layers[l].b,
                      config.learning_rate, c1, c2);
        }
      }
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(dataset.size()));
  }
  return result;
}

ScalarVolume predict(const NetSpec& spec, const Params& params, const ScalarVolume& input,
                     int threads) {
  spec.validate();
  check_params(spec, params);
  const ScalarVolume coarse = resample_trilinear(input, spec.input_dims);
  const Tensor4 out = net_forward(spec, params, tensor_from_volume(coarse), nullptr, threads);
  const ScalarVolume field =
      channel_to_volume(out, spec.head == Head::pwc ? 1 : 0, coarse.meta);
  ScalarVolume full = spec.head == Head::pwc ? resample_nearest(field, input.meta.dims)
                                             : resample_trilinear(field, input.meta.dims);
  full.meta = input.meta;
  return full;
}

Tensor4 tensor_from_volume(const ScalarVolume& volume) {
  Tensor4 t(1, volume.meta.dims);
  for (std::size_t i = 0; i < volume.voxels.size(); ++i) t.values[i] = volume.voxels[i];
  return t;
}

ScalarVolume channel_to_volume(const Tensor4& t, int channel, const GridMeta& meta) {
  if (meta.dims != t.dims)
    throw std::invalid_argument("channel_to_volume: meta dims do not match the tensor");
  if (channel < 0 || channel >= t.channels)
    throw std::invalid_argument("channel_to_volume: channel out of range");
  ScalarVolume out;
  out.meta = meta;
  out.voxels.resize(t.voxel_count());
  const std::size_t base = static_cast<std::size_t>(channel) * t.voxel_count();
  for (std::size_t i = 0; i < out.voxels.size(); ++i)
    out.voxels[i] = static_cast<float>(t.values[base + i]);
  return out;
}

namespace {

constexpr char kParamsMagic[6] = {'V', 'N', 'E', 'T', '1', '\n'};

[[noreturn]] void pfail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("vnet: " + what + " (" + path.string() + ")");
}

}  // namespace

void write_params(const std::filesystem::path& path, const NetSpec& spec, const Params& params) {
  spec.validate();
  check_params(spec, params);
  for (const ConvParams& layer : params.layers) {
    for (double w : layer.w)
      if (!std::isfinite(w)) pfail(path, "layer " + layer.name + " has a non-finite weight");
    for (double b : layer.b)
      if (!std::isfinite(b)) pfail(path, "layer " + layer.name + " has a non-finite bias");
  }

  nlohmann::json j;
  j["levels"] = spec.levels;
  j["base_channels"] = spec.base_channels;
  j["input_dims"] = spec.input_dims;
  j["head"] = to_string(spec.head);
  j["seed"] = params.seed;
  nlohmann::json layers = nlohmann::json::array();
  for (const ConvParams& layer : params.layers) {
    layers.push_back({{"name", layer.name},
                      {"out_channels", layer.shape.out_channels},
                      {"in_channels", layer.shape.in_channels},
                      {"kernel", layer.shape.kernel}});
  }
  j["layers"] = std::move(layers);
  const std::string header = j.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) pfail(path, "cannot open for writing");
  out.write(kParamsMagic, sizeof(kParamsMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(header.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const ConvParams& layer : params.layers) {
    out.write(reinterpret_cast<const char*>(layer.w.data()),
              static_cast<std::streamsize>(layer.w.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(layer.b.data()),
              static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
  }
  if (!out) pfail(path, "write failed");
}

std::pair<NetSpec, Params> read_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) pfail(path, "cannot open for reading");

  char magic[6];
  if (!in.read(magic, sizeof(magic))) pfail(path, "truncated header: missing magic");
  if (std::memcmp(magic, kParamsMagic, sizeof(kParamsMagic)) != 0) pfail(path, "bad magic");
  std::uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)))
    pfail(path, "truncated header: missing length");
  std::string header(len, '\0');
  if (!in.read(header.data(), len)) pfail(path, "truncated header");

  NetSpec spec;
  Params params;
  try {
    const nlohmann::json j = nlohmann::json::parse(header);
    j.at("levels").get_to(spec.levels);
    j.at("base_channels").get_to(spec.base_channels);
    j.at("input_dims").get_to(spec.input_dims);
    spec.head = head_from_string(j.at("head").get<std::string>());
    j.at("seed").get_to(params.seed);
    const std::vector<LayerDef> defs = layer_defs(spec);
    const auto& jl = j.at("layers");
    if (jl.size() != defs.size()) pfail(path, "layer list does not match the architecture");
    for (std::size_t i = 0; i < defs.size(); ++i) {
      if (jl[i].at("name").get<std::string>() != defs[i].name ||
          jl[i].at("out_channels").get<int>() != defs[i].shape.out_channels ||
          jl[i].at("in_channels").get<int>() != defs[i].shape.in_channels ||
          jl[i].at("kernel").get<int>() != defs[i].shape.kernel)
        pfail(path, "layer " + defs[i].name + " does not match the architecture");
    }
  } catch (const nlohmann::json::exception& e) {
    pfail(path, std::string("bad header: ") + e.what());
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    pfail(path, std::string("invalid spec: ") + e.what());
  }

  for (const LayerDef& def : layer_defs(spec)) {
    ConvParams layer;
    layer.name = def.name;
    layer.shape = def.shape;
    layer.w.resize(def.shape.weight_count());
    layer.b.resize(def.shape.out_channels);
    if (!in.read(reinterpret_cast<char*>(layer.w.data()),
                 static_cast<std::streamsize>(layer.w.size() * sizeof(double))) ||
        !in.read(reinterpret_cast<char*>(layer.b.data()),
                 static_cast<std::streamsize>(layer.b.size() * sizeof(double))))
      pfail(path, "truncated payload at layer " + def.name);
    for (double w : layer.w)
      if (!std::isfinite(w)) pfail(path, "non-finite weight in layer " + def.name);
    for (double b : layer.b)
      if (!std::isfinite(b)) pfail(path, "non-finite bias in layer " + def.name);
    params.layers.push_back(std::move(layer));
  }
  if (in.get() != std::ifstream::traits_type::eof()) pfail(path, "trailing bytes after payload");
  return {spec, params};
}

}  // namespace vseg
