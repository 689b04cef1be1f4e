#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "dft/prng.hpp"
#include "dft/types.hpp"

namespace dft {

enum class Activation { elu, leaky_relu, gelu, identity };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

// elementwise activation value and first/second derivatives; slope is only
// read by leaky_relu
double act_value(Activation a, double slope, double x);
double act_deriv(Activation a, double slope, double x);
double act_deriv2(Activation a, double slope, double x);

// Plain MLP: affine layers with the same activation on every hidden layer
// and a linear output layer. weights[l] is layer_dims[l+1] x layer_dims[l].
struct FeedForwardNet {
  std::vector<int> layer_dims;
  Activation activation = Activation::elu;
  double leaky_slope = 0.2;
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  uint64_t version = 0;  // bumped on every parameter update

  int n_layers() const { return int(weights.size()); }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  long n_params() const;
};

// Everything the backward passes need; valid only against the (net, version)
// it was recorded from.
struct ForwardTape {
  const FeedForwardNet* net = nullptr;
  uint64_t net_version = 0;
  Mat input;              // n x d_in
  std::vector<Mat> pre;   // pre-activations, one per layer
  std::vector<Mat> post;  // activated hidden outputs (layers 0..L-2)
};

struct NetGrads {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
};

NetGrads zero_grads(const FeedForwardNet& net);

// weights ~ N(0, 2/fan_in), biases zero
FeedForwardNet init_net(const std::vector<int>& layer_dims, Activation act, Prng& prng,
                        double leaky_slope = 0.2);

// x is n x d_in, one sample per row; pass a tape to enable backward passes
Mat forward(const FeedForwardNet& net, const Mat& x, ForwardTape* tape = nullptr);

// gradient of sum over rows of cotangent . output, accumulated in row order
NetGrads backward_params(const FeedForwardNet& net, const ForwardTape& tape, const Mat& cotangent);

// row i of the result is cotangent_i^T J(x_i)
Mat vjp_input(const FeedForwardNet& net, const ForwardTape& tape, const Mat& cotangent);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<Mat> m_w, v_w;
  std::vector<Vec> m_b, v_b;
};

AdamState make_adam(const FeedForwardNet& net, double lr, double beta1 = 0.9,
                    double beta2 = 0.999, double eps = 1e-8);

// standard bias-corrected Adam; mutates net and state, bumps net.version
void adam_step(FeedForwardNet& net, const NetGrads& grads, AdamState& state);

// text checkpoint with hexfloat parameters, round-trips bit-exactly
void save_net(const FeedForwardNet& net, const std::string& path);
FeedForwardNet load_net(const std::string& path);

}  // namespace dft
