#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dft/errors.hpp"
#include "dft/nn.hpp"
#include "support/checks.hpp"

using namespace dft;
using dft::testing::close;
using dft::testing::max_rel_err;

namespace {

FeedForwardNet single_layer(const Mat& w, const Vec& b, Activation act) {
  FeedForwardNet net;
  net.layer_dims = {int(w.cols()), int(w.rows())};
  net.activation = act;
  net.weights = {w};
  net.biases = {b};
  return net;
}

// loss(net) = sum_rows cotangent . forward(net, x); FD reference for
// backward_params
double scalar_loss(const FeedForwardNet& net, const Mat& x, const Mat& cot) {
  return (forward(net, x).cwiseProduct(cot)).sum();
}

NetGrads fd_param_grads(FeedForwardNet net, const Mat& x, const Mat& cot, double h) {
  NetGrads g = zero_grads(net);
  for (int l = 0; l < net.n_layers(); ++l) {
    for (int i = 0; i < net.weights[l].rows(); ++i)
      for (int j = 0; j < net.weights[l].cols(); ++j) {
        double orig = net.weights[l](i, j);
        net.weights[l](i, j) = orig + h;
        double up = scalar_loss(net, x, cot);
        net.weights[l](i, j) = orig - h;
        double dn = scalar_loss(net, x, cot);
        net.weights[l](i, j) = orig;
        g.weights[l](i, j) = (up - dn) / (2 * h);
      }
    for (int i = 0; i < net.biases[l].size(); ++i) {
      double orig = net.biases[l][i];
      net.biases[l][i] = orig + h;
      double up = scalar_loss(net, x, cot);
      net.biases[l][i] = orig - h;
      double dn = scalar_loss(net, x, cot);
      net.biases[l][i] = orig;
      g.biases[l][i] = (up - dn) / (2 * h);
    }
  }
  return g;
}

}  // namespace

TEST_CASE("activation derivatives match finite differences") {
  double h = 1e-5;
  for (Activation a : {Activation::elu, Activation::leaky_relu, Activation::gelu,
                       Activation::identity}) {
    for (double x : {-2.3, -0.7, -0.1, 0.4, 1.9}) {
      double d_fd = (act_value(a, 0.2, x + h) - act_value(a, 0.2, x - h)) / (2 * h);
      double d2_fd = (act_deriv(a, 0.2, x + h) - act_deriv(a, 0.2, x - h)) / (2 * h);
      CHECK(close(act_deriv(a, 0.2, x), d_fd, 1e-7, 1e-8));
      CHECK(close(act_deriv2(a, 0.2, x), d2_fd, 1e-6, 1e-7));
    }
  }
}

TEST_CASE("init_net determinism and bias rule") {
  Prng a(7, 1), b(7, 1);
  auto n1 = init_net({2, 2}, Activation::elu, a);
  auto n2 = init_net({2, 2}, Activation::elu, b);
  CHECK(n1.weights[0] == n2.weights[0]);

  Prng c(3, 1);
  auto big = init_net({2, 400, 400, 400, 2}, Activation::elu, c);
  for (const Vec& bias : big.biases) CHECK(bias.cwiseAbs().maxCoeff() == 0.0);

  Prng d(1, 1);
  CHECK_THROWS_AS(init_net({2}, Activation::elu, d), ConfigError);
  CHECK_THROWS_AS(init_net({2, 0, 2}, Activation::elu, d), ConfigError);
}

TEST_CASE("forward on hand-checkable layers") {
  {
    auto net = single_layer(Mat::Identity(2, 2), Vec::Zero(2), Activation::identity);
    Mat x(1, 2);
    x << 1, 2;
    Mat y = forward(net, x);
    CHECK(y(0, 0) == 1.0);
    CHECK(y(0, 1) == 2.0);
  }
  {
    Mat w(2, 2);
    w << 2, 0, 0, 3;
    Vec b(2);
    b << 1, 1;
    auto net = single_layer(w, b, Activation::identity);
    Mat x(1, 2);
    x << 1, 1;
    Mat y = forward(net, x);
    CHECK(y(0, 0) == 3.0);
    CHECK(y(0, 1) == 4.0);
  }
  {
    // hidden leaky_relu(0.2) with pre-activation -1 gives -0.2
    FeedForwardNet net;
    net.layer_dims = {1, 1, 1};
    net.activation = Activation::leaky_relu;
    net.leaky_slope = 0.2;
    net.weights = {Mat::Constant(1, 1, -1.0), Mat::Identity(1, 1)};
    net.biases = {Vec::Zero(1), Vec::Zero(1)};
    Mat x(1, 1);
    x << 1;
    Mat y = forward(net, x);
    CHECK(y(0, 0) == doctest::Approx(-0.2).epsilon(1e-12));
  }
}

TEST_CASE("forward rejects bad input") {
  Prng g(1, 1);
  auto net = init_net({2, 3, 2}, Activation::elu, g);
  Mat bad_shape(1, 3);
  bad_shape.setZero();
  CHECK_THROWS_AS(forward(net, bad_shape), ShapeError);
  Mat bad_value(1, 2);
  bad_value << 1.0, std::nan("");
  CHECK_THROWS_AS(forward(net, bad_value), NumericError);
}

TEST_CASE("backward_params on one affine layer") {
  auto net = single_layer(Mat::Zero(2, 2), Vec::Zero(2), Activation::identity);
  Mat x(1, 2);
  x << 1, 0;
  ForwardTape tape;
  forward(net, x, &tape);
  Mat cot(1, 2);
  cot << 1, 0;
  NetGrads g = backward_params(net, tape, cot);
  CHECK(g.weights[0](0, 0) == 1.0);
  CHECK(g.weights[0](0, 1) == 0.0);
  CHECK(g.weights[0](1, 0) == 0.0);
  CHECK(g.weights[0](1, 1) == 0.0);
  CHECK(g.biases[0][0] == 1.0);
  CHECK(g.biases[0][1] == 0.0);

  NetGrads z = backward_params(net, tape, Mat::Zero(1, 2));
  CHECK(z.weights[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.biases[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward_params matches finite differences for every activation") {
  for (Activation a : {Activation::elu, Activation::leaky_relu, Activation::gelu,
                       Activation::identity}) {
    Prng g(11 + int(a), 1);
    auto net = init_net({4, 8, 8, 4}, a, g);
    Mat x = g.normal_mat(3, 4);
    Mat cot = g.normal_mat(3, 4);
    ForwardTape tape;
    forward(net, x, &tape);
    NetGrads ad = backward_params(net, tape, cot);
    NetGrads fd = fd_param_grads(net, x, cot, 1e-4);
    for (int l = 0; l < net.n_layers(); ++l) {
      CHECK(max_rel_err(ad.weights[l], fd.weights[l]) < 1e-4);
      CHECK(max_rel_err(Mat(ad.biases[l]), Mat(fd.biases[l])) < 1e-4);
    }
  }
}

TEST_CASE("vjp_input on an affine layer is W^T v") {
  Prng g(13, 1);
  Mat w = g.normal_mat(3, 2);
  auto net = single_layer(w, Vec::Zero(3), Activation::identity);
  Mat x = g.normal_mat(1, 2);
  ForwardTape tape;
  forward(net, x, &tape);
  Mat v = g.normal_mat(1, 3);
  Mat got = vjp_input(net, tape, v);
  Mat want = v * w;
  CHECK(max_rel_err(got, want) < 1e-12);
  CHECK(vjp_input(net, tape, Mat::Zero(1, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vjp_input matches a finite-difference Jacobian") {
  Prng g(17, 1);
  auto net = init_net({3, 6, 6, 3}, Activation::gelu, g);
  Mat x = g.normal_mat(1, 3);
  Mat v = g.normal_mat(1, 3);
  ForwardTape tape;
  forward(net, x, &tape);
  Mat got = vjp_input(net, tape, v);

  double h = 1e-4;
  Mat fd(1, 3);
  for (int j = 0; j < 3; ++j) {
    Mat xp = x, xm = x;
    xp(0, j) += h;
    xm(0, j) -= h;
    fd(0, j) = ((forward(net, xp) - forward(net, xm)).cwiseProduct(v)).sum() / (2 * h);
  }
  CHECK(max_rel_err(got, fd) < 1e-4);
}

TEST_CASE("vjp_input is linear in the cotangent") {
  Prng g(19, 1);
  auto net = init_net({2, 5, 2}, Activation::elu, g);
  Mat x = g.normal_mat(4, 2);
  ForwardTape tape;
  forward(net, x, &tape);
  Mat u = g.normal_mat(4, 2), v = g.normal_mat(4, 2);
  Mat lhs = vjp_input(net, tape, 2.5 * u - 0.75 * v);
  Mat rhs = 2.5 * vjp_input(net, tape, u) - 0.75 * vjp_input(net, tape, v);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stale tapes are rejected") {
  Prng g(23, 1);
  auto net = init_net({2, 4, 2}, Activation::elu, g);
  Mat x = g.normal_mat(2, 2);
  ForwardTape tape;
  forward(net, x, &tape);
  auto adam = make_adam(net, 1e-3);
  NetGrads grads = zero_grads(net);
  grads.weights[0].setConstant(0.1);
  adam_step(net, grads, adam);
  CHECK_THROWS_AS(backward_params(net, tape, Mat::Zero(2, 2)), StateError);
  CHECK_THROWS_AS(vjp_input(net, tape, Mat::Zero(2, 2)), StateError);

  auto other = init_net({2, 4, 2}, Activation::elu, g);
  ForwardTape tape2;
  forward(net, x, &tape2);
  CHECK_THROWS_AS(backward_params(other, tape2, Mat::Zero(2, 2)), StateError);
}

TEST_CASE("adam first step and bias correction") {
  auto net = single_layer(Mat::Zero(1, 1), Vec::Zero(1), Activation::identity);
  auto st = make_adam(net, 1e-3);
  NetGrads g = zero_grads(net);
  g.weights[0](0, 0) = 2.0;
  adam_step(net, g, st);
  CHECK(net.weights[0](0, 0) == doctest::Approx(-1e-3 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));
  CHECK(st.step_count == 1);
  CHECK(net.biases[0][0] == 0.0);
}

TEST_CASE("adam two constant-gradient steps move by about lr each") {
  auto net = single_layer(Mat::Zero(1, 1), Vec::Zero(1), Activation::identity);
  auto st = make_adam(net, 0.1, 0.9, 0.999);
  NetGrads g = zero_grads(net);
  g.weights[0](0, 0) = 1.0;
  adam_step(net, g, st);
  adam_step(net, g, st);
  CHECK(net.weights[0](0, 0) == doctest::Approx(-0.2).epsilon(1e-6));
}

TEST_CASE("adam with zero gradient and zero moments is a fixed point") {
  Prng r(29, 1);
  auto net = init_net({2, 3, 2}, Activation::elu, r);
  Mat w0 = net.weights[0];
  auto st = make_adam(net, 1e-2);
  adam_step(net, zero_grads(net), st);
  CHECK(net.weights[0] == w0);
}

TEST_CASE("adam rejects mismatched shapes") {
  Prng r(31, 1);
  auto net = init_net({2, 3, 2}, Activation::elu, r);
  auto other = init_net({2, 4, 2}, Activation::elu, r);
  auto st = make_adam(net, 1e-3);
  CHECK_THROWS_AS(adam_step(net, zero_grads(other), st), ShapeError);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  Prng r(37, 1);
  auto net = init_net({2, 5, 3}, Activation::gelu, r);
  std::string path = "nn_roundtrip.ckpt";
  save_net(net, path);
  auto back = load_net(path);
  CHECK(back.layer_dims == net.layer_dims);
  CHECK(back.activation == net.activation);
  for (int l = 0; l < net.n_layers(); ++l) {
    CHECK(back.weights[l] == net.weights[l]);
    CHECK(back.biases[l] == net.biases[l]);
  }
  // saving the loaded net reproduces the file byte for byte
  std::string path2 = "nn_roundtrip2.ckpt";
  save_net(back, path2);
  std::ifstream f1(path), f2(path2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
  std::remove(path.c_str());
  std::remove(path2.c_str());

  CHECK_THROWS_AS(load_net("does_not_exist.ckpt"), IoError);
}
