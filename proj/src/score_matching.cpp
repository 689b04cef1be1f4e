#include "dft/score_matching.hpp"

#include <cmath>
#include <string>

#include "dft/errors.hpp"

namespace dft {

PerturbedBatch perturb(const Mat& x0, const NoiseModel& noise, Prng& prng) {
  if (noise.sigma <= 0) throw ConfigError("perturb: sigma must be positive");
  if (!x0.allFinite()) throw NumericError("perturb: non-finite x0");
  PerturbedBatch batch;
  batch.x0 = x0;
  batch.eps = prng.normal_mat(int(x0.rows()), int(x0.cols()));
  batch.x_sigma = x0 + noise.sigma * batch.eps;
  batch.sigma = noise.sigma;
  return batch;
}

Mat conditional_score(const PerturbedBatch& batch) {
  return batch.eps * (-1.0 / batch.sigma);
}

double dsm_loss(const FeedForwardNet& score_net, const PerturbedBatch& batch) {
  Mat residual = forward(score_net, batch.x_sigma) - conditional_score(batch);
  return residual.squaredNorm() / double(batch.rows());
}

double dsm_loss_with_grads(const FeedForwardNet& score_net, const PerturbedBatch& batch,
                           NetGrads& grads) {
  ForwardTape tape;
  Mat residual = forward(score_net, batch.x_sigma, &tape) - conditional_score(batch);

  double n = double(batch.rows());
  double loss = residual.squaredNorm() / n;
  if (!std::isfinite(loss)) {
    for (int i = 0; i < residual.rows(); ++i)
      if (!residual.row(i).allFinite())
        throw NumericError("dsm loss non-finite at batch row " + std::to_string(i));
    throw NumericError("dsm loss non-finite");
  }
  grads = backward_params(score_net, tape, residual * (2.0 / n));
  return loss;
}

double dsm_step(FeedForwardNet& score_net, const Mat& x0, const NoiseModel& noise,
                AdamState& adam, Prng& prng) {
  PerturbedBatch batch = perturb(x0, noise, prng);
  NetGrads grads;
  double loss = dsm_loss_with_grads(score_net, batch, grads);
  adam_step(score_net, grads, adam);
  return loss;
}

namespace {

void check_sm_dim(const FeedForwardNet& net, const char* who) {
  if (net.output_dim() != net.input_dim())
    throw ConfigError(std::string(who) + ": score net must map R^D to R^D");
  if (net.input_dim() > 8)
    throw ConfigError(std::string(who) + ": exact divergence is quadratic in D and guarded to " +
                      "D <= 8; use dsm_step for higher dimensions");
}

}  // namespace

double sm_loss(const FeedForwardNet& score_net, const Mat& x) {
  check_sm_dim(score_net, "sm_loss");
  int n = int(x.rows());
  int D = int(x.cols());
  ForwardTape tape;
  Mat s = forward(score_net, x, &tape);

  double total = s.squaredNorm();
  // divergence via D unit-cotangent VJPs: row k of vjp_input(e_i) is
  // e_i^T J(x_k), whose i-th entry is J_ii
  for (int i = 0; i < D; ++i) {
    Mat cot = Mat::Zero(n, D);
    cot.col(i).setOnes();
    total += 2.0 * vjp_input(score_net, tape, cot).col(i).sum();
  }
  return total / double(n);
}

double sm_loss_with_grads(const FeedForwardNet& score_net, const Mat& x, NetGrads& grads_out) {
  check_sm_dim(score_net, "sm_loss_with_grads");
  int n = int(x.rows());
  int D = int(x.cols());
  int L = score_net.n_layers();
  const Activation act = score_net.activation;
  const double slope = score_net.leaky_slope;

  NetGrads grads = zero_grads(score_net);
  double total = 0.0;

  // Per-sample forward-over-reverse pass. The loss couples the net's value
  // and its Jacobian trace, so each sample carries a D-column tangent bundle
  // T alongside the primal activations; the reverse sweep then backpropagates
  // both the value cotangent and the tangent-bundle cotangent C at once.
  std::vector<Vec> a(L + 1), z(L);
  std::vector<Mat> T(L + 1), U(L);
  for (int k = 0; k < n; ++k) {
    a[0] = x.row(k).transpose();
    T[0] = Mat::Identity(D, D);
    for (int l = 0; l < L; ++l) {
      z[l] = score_net.weights[l] * a[l] + score_net.biases[l];
      U[l] = score_net.weights[l] * T[l];
      if (l + 1 < L) {
        a[l + 1] = z[l].unaryExpr([&](double v) { return act_value(act, slope, v); });
        Vec dphi = z[l].unaryExpr([&](double v) { return act_deriv(act, slope, v); });
        T[l + 1] = dphi.asDiagonal() * U[l];
      } else {
        a[l + 1] = z[l];
        T[l + 1] = U[l];
      }
    }
    total += a[L].squaredNorm() + 2.0 * T[L].trace();

    Vec da = 2.0 * a[L];             // d loss / d output value
    Mat C = 2.0 * Mat::Identity(D, D);  // d loss / d output tangent
    for (int l = L - 1; l >= 0; --l) {
      Vec dz;
      Mat Cz;
      if (l == L - 1) {
        dz = da;
        Cz = C;
      } else {
        Vec dphi = z[l].unaryExpr([&](double v) { return act_deriv(act, slope, v); });
        Vec ddphi = z[l].unaryExpr([&](double v) { return act_deriv2(act, slope, v); });
        // the tangent chain T = diag(phi'(z)) U feeds z twice: through the
        // primal path and through phi'(z)'s dependence on z
        dz = da.cwiseProduct(dphi) + ddphi.cwiseProduct((C.cwiseProduct(U[l])).rowwise().sum());
        Cz = dphi.asDiagonal() * C;
      }
      grads.weights[l] += dz * a[l].transpose() + Cz * T[l].transpose();
      grads.biases[l] += dz;
      if (l > 0) {
        da = score_net.weights[l].transpose() * dz;
        C = score_net.weights[l].transpose() * Cz;
      }
    }
  }

  double loss = total / double(n);
  if (!std::isfinite(loss)) throw NumericError("sm loss non-finite");
  for (int l = 0; l < L; ++l) {
    grads.weights[l] /= double(n);
    grads.biases[l] /= double(n);
  }
  grads_out = std::move(grads);
  return loss;
}

double sm_step(FeedForwardNet& score_net, const Mat& x, AdamState& adam) {
  NetGrads grads;
  double loss = sm_loss_with_grads(score_net, x, grads);
  adam_step(score_net, grads, adam);
  return loss;
}

}  // namespace dft
