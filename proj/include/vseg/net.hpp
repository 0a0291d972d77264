#pragma once

// Compact 3D U-net with explicit forward and backward passes.
//
// Tensors are channel-major, x-fastest within a channel. The network halves
// resolution with 2x max pooling on the way down and restores it with nearest
// upsampling followed by a 3x3x3 convolution on the way up; encoder
// activations are concatenated into the decoder at matching resolution. Two
// heads share everything but the final 1x1x1 convolution: "pwc" emits two
// channels passed through a per-voxel softmax, "pwr" emits one linear channel.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vseg/volume.hpp"

namespace vseg {

struct Tensor4 {
  int channels = 0;
  std::array<int, 3> dims{0, 0, 0};
  std::vector<double> values;

  Tensor4() = default;
  Tensor4(int c, const std::array<int, 3>& d)
      : channels(c),
        dims(d),
        values(static_cast<std::size_t>(c) * static_cast<std::size_t>(d[0]) *
                   static_cast<std::size_t>(d[1]) * static_cast<std::size_t>(d[2]),
               0.0) {}

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int c, int i, int j, int k) const {
    return ((static_cast<std::size_t>(c) * dims[2] + k) * dims[1] + j) * dims[0] + i;
  }
  double at(int c, int i, int j, int k) const { return values[index(c, i, j, k)]; }
  double& at(int c, int i, int j, int k) { return values[index(c, i, j, k)]; }
};

enum class Head { pwc, pwr };
enum class LossKind { cross_entropy, weighted_mse };
enum class OptimizerKind { sgd, adam };

std::string to_string(Head head);
Head head_from_string(const std::string& s);

struct NetSpec {
  int levels = 2;
  int base_channels = 8;
  std::array<int, 3> input_dims{32, 32, 32};
  Head head = Head::pwc;

  // base_channels * 2^level.
  int channels_at(int level) const;
  int output_channels() const { return head == Head::pwc ? 2 : 1; }
  // Throws std::invalid_argument unless levels >= 1, base_channels >= 1, and
  // every input dim is positive and divisible by 2^(levels - 1).
  void validate() const;
};

struct ConvShape {
  int out_channels = 0;
  int in_channels = 0;
  int kernel = 3;  // 3 or 1, cubic

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel * kernel;
  }
  bool operator==(const ConvShape&) const = default;
};

struct ConvParams {
  std::string name;
  ConvShape shape;
  std::vector<double> w;  // [out][in][kz][ky][kx]
  std::vector<double> b;  // [out]
};

struct LayerDef {
  std::string name;
  ConvShape shape;
};

// Convolution layers in execution order: encoder levels shallow to deep (two
// convs each), decoder levels deep to shallow (upsample conv + two convs),
// then the head.
std::vector<LayerDef> layer_defs(const NetSpec& spec);

struct Params {
  std::uint64_t seed = 0;
  std::vector<ConvParams> layers;

  std::size_t parameter_count() const;
};

// Fan-in-scaled uniform weights (bound sqrt(6 / fan_in)), zero biases. With
// equal seeds, nets that differ only in the head get identical values for
// every shared layer.
Params init_params(const NetSpec& spec, std::uint64_t seed);
Params zero_like(const Params& params);

// Building blocks (padding "same", zero-filled borders).
Tensor4 conv3d_forward(const Tensor4& input, const ConvParams& layer, int threads = 1);

struct ConvGrads {
  std::vector<double> w;
  std::vector<double> b;
  Tensor4 input;
};
ConvGrads conv3d_backward(const Tensor4& input, const ConvParams& layer,
                          const Tensor4& grad_output, int threads = 1);

// Requires even spatial dims. Ties resolve to the earliest voxel in scan
// order. argmax (if given) records the flat input index of each maximum.
Tensor4 maxpool2(const Tensor4& input, std::vector<std::size_t>* argmax = nullptr);
Tensor4 maxpool2_backward(const Tensor4& grad_output, const std::vector<std::size_t>& argmax,
                          int input_channels, const std::array<int, 3>& input_dims);
Tensor4 upsample_nearest2(const Tensor4& input);
Tensor4 upsample_nearest2_backward(const Tensor4& grad_output);
Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
void softmax2_inplace(Tensor4& t);

// Per-conv activations recorded by the forward pass; output holds the
// post-nonlinearity value (raw for the head).
struct ConvRecord {
  Tensor4 input;
  Tensor4 output;
};
struct NetTrace {
  std::vector<ConvRecord> convs;
  std::vector<std::vector<std::size_t>> pool_argmax;
};

// pwc: softmax probabilities, 2 channels. pwr: linear, 1 channel.
Tensor4 net_forward(const NetSpec& spec, const Params& params, const Tensor4& input,
                    NetTrace* trace = nullptr, int threads = 1);

// upstream is the loss gradient with respect to the head's pre-activation
// output; returns gradients shaped like params.
Params net_backward(const NetSpec& spec, const Params& params, const NetTrace& trace,
                    const Tensor4& upstream, int threads = 1);

struct LossResult {
  double loss = 0.0;
  Tensor4 grad;  // with respect to the head pre-activation
};

// Mean over voxels of -log p(true class); grad = (softmax - onehot) / N.
LossResult loss_cross_entropy(const Tensor4& probs, const BinaryVolume& target);

// loss = (1/N) sum w_i (p_i - d_i)^2 with w_i = 1 / (|d_i| + epsilon);
// normalize_by_weight_sum swaps the 1/N for 1/sum(w).
LossResult loss_weighted_mse(const Tensor4& pred, const ScalarVolume& target, double epsilon,
                             bool normalize_by_weight_sum = false);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 1;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::cross_entropy;
  double weight_epsilon = 1.0;  // coarse-grid voxels
  OptimizerKind optimizer = OptimizerKind::adam;
  double clamp_tau = 0.0;  // 0 leaves targets unclamped
  bool normalize_by_weight_sum = false;
  int threads = 1;

  void validate() const;
};

struct TrainExample {
  std::string id;
  ScalarVolume input;   // coarse grid, matches NetSpec input_dims
  Volume target;        // BinaryVolume for pwc, ScalarVolume SDF for pwr
};

struct TrainResult {
  Params params;
  std::vector<double> epoch_loss;  // per-epoch mean
};

// Batch size 1, seeded shuffled visit order each epoch. Throws
// std::runtime_error naming the epoch and case id if a loss goes non-finite.
TrainResult train(const NetSpec& spec, const TrainConfig& config,
                  const std::vector<TrainExample>& dataset);

// Trilinear-downsamples the input to the net grid, runs the forward pass, and
// returns a full-resolution field: the foreground probability channel upsampled
// with nearest neighbours (pwc) or the predicted SDF upsampled trilinearly
// (pwr). The result reuses the input grid metadata.
ScalarVolume predict(const NetSpec& spec, const Params& params, const ScalarVolume& input,
                     int threads = 1);

Tensor4 tensor_from_volume(const ScalarVolume& volume);
ScalarVolume channel_to_volume(const Tensor4& t, int channel, const GridMeta& meta);

void write_params(const std::filesystem::path& path, const NetSpec& spec, const Params& params);
std::pair<NetSpec, Params> read_params(const std::filesystem::path& path);

}  // namespace vseg
