#include "dft/nn.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dft/errors.hpp"

namespace dft {

Activation activation_from_string(const std::string& name) {
  if (name == "elu") return Activation::elu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "gelu") return Activation::gelu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::elu: return "elu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::gelu: return "gelu";
    case Activation::identity: return "identity";
  }
  throw StateError("bad activation enum");
}

namespace {

constexpr double kGeluKappa = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;

// tanh-form gelu and its derivatives; u = kappa*(x + 0.044715 x^3)
inline void gelu_parts(double x, double& t, double& du, double& ddu) {
  double u = kGeluKappa * (x + kGeluCubic * x * x * x);
  t = std::tanh(u);
  du = kGeluKappa * (1.0 + 3.0 * kGeluCubic * x * x);
  ddu = kGeluKappa * 6.0 * kGeluCubic * x;
}

}  // namespace

double act_value(Activation a, double slope, double x) {
  switch (a) {
    case Activation::elu: return x > 0 ? x : std::expm1(x);
    case Activation::leaky_relu: return x > 0 ? x : slope * x;
    case Activation::gelu: {
      double t, du, ddu;
      gelu_parts(x, t, du, ddu);
      return 0.5 * x * (1.0 + t);
    }
    case Activation::identity: return x;
  }
  throw StateError("bad activation enum");
}

double act_deriv(Activation a, double slope, double x) {
  switch (a) {
    case Activation::elu: return x > 0 ? 1.0 : std::exp(x);
    case Activation::leaky_relu: return x > 0 ? 1.0 : slope;
    case Activation::gelu: {
      double t, du, ddu;
      gelu_parts(x, t, du, ddu);
      return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
    }
    case Activation::identity: return 1.0;
  }
  throw StateError("bad activation enum");
}

double act_deriv2(Activation a, double slope, double x) {
  switch (a) {
    case Activation::elu: return x > 0 ? 0.0 : std::exp(x);
    case Activation::leaky_relu: (void)slope; return 0.0;
    case Activation::gelu: {
      double t, du, ddu;
      gelu_parts(x, t, du, ddu);
      return (1.0 - t * t) * (du + 0.5 * x * (ddu - 2.0 * t * du * du));
    }
    case Activation::identity: return 0.0;
  }
  throw StateError("bad activation enum");
}

long FeedForwardNet::n_params() const {
  long n = 0;
  for (size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

NetGrads zero_grads(const FeedForwardNet& net) {
  NetGrads g;
  for (int l = 0; l < net.n_layers(); ++l) {
    g.weights.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Vec::Zero(net.biases[l].size()));
  }
  return g;
}

FeedForwardNet init_net(const std::vector<int>& layer_dims, Activation act, Prng& prng,
                        double leaky_slope) {
  if (layer_dims.size() < 2) throw ConfigError("init_net: need at least input and output dims");
  for (int d : layer_dims)
    if (d <= 0) throw ConfigError("init_net: layer dims must be positive");

  FeedForwardNet net;
  net.layer_dims = layer_dims;
  net.activation = act;
  net.leaky_slope = leaky_slope;
  for (size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    int fan_in = layer_dims[l];
    int fan_out = layer_dims[l + 1];
    double scale = std::sqrt(2.0 / fan_in);
    net.weights.push_back(prng.normal_mat(fan_out, fan_in) * scale);
    net.biases.push_back(Vec::Zero(fan_out));
  }
  return net;
}

Mat forward(const FeedForwardNet& net, const Mat& x, ForwardTape* tape) {
  if (x.cols() != net.input_dim())
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, net expects " +
                     std::to_string(net.input_dim()));
  if (!x.allFinite()) throw NumericError("forward: non-finite input");

  if (tape) {
    tape->net = &net;
    tape->net_version = net.version;
    tape->input = x;
    tape->pre.clear();
    tape->post.clear();
  }

  int L = net.n_layers();
  Mat a = x;
  for (int l = 0; l < L; ++l) {
    Mat z = a * net.weights[l].transpose();
    z.rowwise() += net.biases[l].transpose();
    if (tape) tape->pre.push_back(z);
    if (l + 1 < L) {
      a = z.unaryExpr([&](double v) { return act_value(net.activation, net.leaky_slope, v); });
      if (tape) tape->post.push_back(a);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

namespace {

void check_tape(const FeedForwardNet& net, const ForwardTape& tape, const Mat& cotangent,
                const char* who) {
  if (tape.net != &net || tape.net_version != net.version)
    throw StateError(std::string(who) + ": tape does not belong to this net (or the net was "
                     "updated after the forward pass)");
  if (cotangent.rows() != tape.input.rows() || cotangent.cols() != net.output_dim())
    throw ShapeError(std::string(who) + ": cotangent shape mismatch");
}

// shared reverse sweep; either grads or x_bar may be null
void reverse_sweep(const FeedForwardNet& net, const ForwardTape& tape, const Mat& cotangent,
                   NetGrads* grads, Mat* x_bar) {
  int L = net.n_layers();
  Mat g = cotangent;  // gradient w.r.t. the current layer's pre-activation
  for (int l = L - 1; l >= 0; --l) {
    if (l < L - 1) {
      // pass through the activation of layer l
      const Mat& z = tape.pre[l];
      Mat dphi = z.unaryExpr(
          [&](double v) { return act_deriv(net.activation, net.leaky_slope, v); });
      g = g.cwiseProduct(dphi);
    }
    const Mat& a_prev = (l == 0) ? tape.input : tape.post[l - 1];
    if (grads) {
      grads->weights[l] = g.transpose() * a_prev;
      grads->biases[l] = g.colwise().sum().transpose();
    }
    if (l > 0 || x_bar) g = g * net.weights[l];  // becomes gradient w.r.t. a_{l-1}
  }
  if (x_bar) *x_bar = std::move(g);
}

}  // namespace

NetGrads backward_params(const FeedForwardNet& net, const ForwardTape& tape, const Mat& cotangent) {
  check_tape(net, tape, cotangent, "backward_params");
  NetGrads grads = zero_grads(net);
  reverse_sweep(net, tape, cotangent, &grads, nullptr);
  return grads;
}

Mat vjp_input(const FeedForwardNet& net, const ForwardTape& tape, const Mat& cotangent) {
  check_tape(net, tape, cotangent, "vjp_input");
  Mat x_bar;
  reverse_sweep(net, tape, cotangent, nullptr, &x_bar);
  return x_bar;
}

AdamState make_adam(const FeedForwardNet& net, double lr, double beta1, double beta2, double eps) {
  if (lr <= 0) throw ConfigError("adam: lr must be positive");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw ConfigError("adam: betas must lie in [0,1)");
  AdamState st;
  st.lr = lr;
  st.beta1 = beta1;
  st.beta2 = beta2;
  st.eps = eps;
  for (int l = 0; l < net.n_layers(); ++l) {
    st.m_w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
    st.v_w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
    st.m_b.push_back(Vec::Zero(net.biases[l].size()));
    st.v_b.push_back(Vec::Zero(net.biases[l].size()));
  }
  return st;
}

namespace {

template <typename T>
void adam_update(T& param, const T& grad, T& m, T& v, const AdamState& st, double c1, double c2) {
  m = st.beta1 * m + (1.0 - st.beta1) * grad;
  v = st.beta2 * v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
  param -= (st.lr * (m / c1).array() / ((v / c2).cwiseSqrt().array() + st.eps)).matrix();
}

}  // namespace

void adam_step(FeedForwardNet& net, const NetGrads& grads, AdamState& state) {
  if (int(grads.weights.size()) != net.n_layers() || int(state.m_w.size()) != net.n_layers())
    throw ShapeError("adam_step: layer count mismatch");
  for (int l = 0; l < net.n_layers(); ++l) {
    if (grads.weights[l].rows() != net.weights[l].rows() ||
        grads.weights[l].cols() != net.weights[l].cols() ||
        grads.biases[l].size() != net.biases[l].size())
      throw ShapeError("adam_step: gradient shape mismatch at layer " + std::to_string(l));
    if (state.m_w[l].rows() != net.weights[l].rows() ||
        state.m_w[l].cols() != net.weights[l].cols())
      throw ShapeError("adam_step: state shape mismatch at layer " + std::to_string(l));
  }
  state.step_count += 1;
  double c1 = 1.0 - std::pow(state.beta1, double(state.step_count));
  double c2 = 1.0 - std::pow(state.beta2, double(state.step_count));
  for (int l = 0; l < net.n_layers(); ++l) {
    adam_update(net.weights[l], grads.weights[l], state.m_w[l], state.v_w[l], state, c1, c2);
    adam_update(net.biases[l], grads.biases[l], state.m_b[l], state.v_b[l], state, c1, c2);
  }
  net.version += 1;
}

namespace {

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& tok, const std::string& path) {
  const char* s = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw DataError("checkpoint " + path + ": bad float token '" + tok + "'");
  return v;
}

}  // namespace

void save_net(const FeedForwardNet& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << "dftnet 1\n";
  out << "dims";
  for (int d : net.layer_dims) out << ' ' << d;
  out << '\n';
  out << "activation " << to_string(net.activation) << '\n';
  out << "leaky_slope " << hex_double(net.leaky_slope) << '\n';
  for (int l = 0; l < net.n_layers(); ++l) {
    out << "W " << l << '\n';
    const Mat& w = net.weights[l];
    for (int i = 0; i < w.rows(); ++i) {
      for (int j = 0; j < w.cols(); ++j) out << (j ? " " : "") << hex_double(w(i, j));
      out << '\n';
    }
    out << "b " << l << '\n';
    const Vec& b = net.biases[l];
    for (int i = 0; i < b.size(); ++i) out << (i ? " " : "") << hex_double(b[i]);
    out << '\n';
  }
  if (!out) throw IoError("write failed for checkpoint " + path);
}

FeedForwardNet load_net(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path);
  std::string tok;
  auto next = [&]() -> std::string {
    if (!(in >> tok)) throw DataError("checkpoint " + path + ": truncated");
    return tok;
  };
  if (next() != "dftnet" || next() != "1")
    throw DataError("checkpoint " + path + ": not a dftnet v1 file");
  if (next() != "dims") throw DataError("checkpoint " + path + ": expected dims");

  FeedForwardNet net;
  // dims run until the next non-numeric token, which must be "activation"
  while (true) {
    std::string t = next();
    if (t == "activation") break;
    net.layer_dims.push_back(int(parse_double(t, path)));
  }
  if (net.layer_dims.size() < 2) throw DataError("checkpoint " + path + ": bad dims");
  net.activation = activation_from_string(next());
  if (next() != "leaky_slope") throw DataError("checkpoint " + path + ": expected leaky_slope");
  net.leaky_slope = parse_double(next(), path);

  for (size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    if (next() != "W" || size_t(parse_double(next(), path)) != l)
      throw DataError("checkpoint " + path + ": expected W " + std::to_string(l));
    Mat w(net.layer_dims[l + 1], net.layer_dims[l]);
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = parse_double(next(), path);
    if (next() != "b" || size_t(parse_double(next(), path)) != l)
      throw DataError("checkpoint " + path + ": expected b " + std::to_string(l));
    Vec b(net.layer_dims[l + 1]);
    for (int i = 0; i < b.size(); ++i) b[i] = parse_double(next(), path);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

}  // namespace dft
