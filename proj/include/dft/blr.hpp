#pragma once
#include <memory>
#include <string>
#include <vector>

#include "dft/prng.hpp"
#include "dft/targets.hpp"
#include "dft/types.hpp"

namespace dft {

// Binary classification data with a fixed train/test split. Features are
// standardized with statistics from the train split only, so the test rows
// never leak into the scaling.
struct BlrDataset {
  Mat features;  // N x d, standardized
  Vec labels;    // N entries, each exactly 0 or 1
  std::vector<int> train_idx;
  std::vector<int> test_idx;
  std::vector<std::string> feature_names;
  std::vector<std::string> warnings;  // dropped columns, label remaps
};

// Reads a numeric CSV (first row header, comma separated) and builds a
// standardized dataset with a seeded random split. The label column is
// picked by name; labels coded {1,2} are remapped to {0,1} with a warning,
// matching the usual UCI binary coding. Columns that are constant on the
// train split are dropped with a warning since they cannot be standardized.
BlrDataset load_blr_csv(const std::string& path, const std::string& label_column,
                        double test_fraction, Prng& prng);

// Posterior over xi = (w in R^d, bias, log alpha) for logistic regression
// on the train split, with prior w ~ N(0, alpha^{-1} I) and
// alpha ~ Gamma(1, 0.01). Sampling log alpha keeps the space unconstrained;
// the +log alpha change-of-variables term is included so the density over
// log alpha is the correctly transformed one. The bias is flat.
class BlrPosterior final : public TargetDistribution {
 public:
  // minibatch_size is the draw size used by draw_minibatch
  BlrPosterior(BlrDataset dataset, int minibatch_size);

  int dim() const override { return d_ + 2; }
  std::string name() const override { return "blr"; }
  double log_density(const Vec& xi) const override;
  Vec score(const Vec& xi) const override;

  // likelihood summed over the given train-split positions and scaled by
  // n_train / |B|; prior terms enter unscaled. Duplicate indices allowed.
  Vec minibatch_score(const Vec& xi, const std::vector<int>& minibatch_indices) const;
  Vec minibatch_score_vjp(const Vec& xi, const Vec& v,
                          const std::vector<int>& minibatch_indices) const;

  // minibatch_size positions into the train split, uniform with replacement
  std::vector<int> draw_minibatch(Prng& prng) const;

  const BlrDataset& dataset() const { return data_; }
  const Mat& train_features() const { return x_train_; }
  const Vec& train_labels() const { return y_train_; }
  const Mat& test_features() const { return x_test_; }
  const Vec& test_labels() const { return y_test_; }
  int feature_dim() const { return d_; }
  int minibatch_size() const { return minibatch_size_; }

 protected:
  Vec score_vjp_impl(const Vec& xi, const Vec& v) const override;

 private:
  void gather(const std::vector<int>& idx, Mat& xb, Vec& yb) const;
  Vec score_core(const Vec& xi, const Mat& xb, const Vec& yb, double scale) const;
  Vec vjp_core(const Vec& xi, const Vec& v, const Mat& xb, double scale) const;

  BlrDataset data_;
  Mat x_train_, x_test_;
  Vec y_train_, y_test_;
  int d_ = 0;
  int minibatch_size_ = 0;
};

// stochastic score at explicit indices, and test accuracy of averaged
// predictive probabilities thresholded at 1/2
Vec blr_score(const BlrPosterior& posterior, const Vec& xi,
              const std::vector<int>& minibatch_indices);
double blr_accuracy(const BlrPosterior& posterior, const Mat& xi_samples);

// Training adapter: presents the posterior as a target whose likelihood is
// subsampled. score_batch draws a fresh minibatch from the adapter's own
// stream and the following score_vjp_batch / score calls reuse it, so one
// gradient step sees a consistent subsample. Draws are internal state, hence
// the mutable members behind the const evaluation interface; runs stay
// deterministic for a fixed seed.
class StochasticBlrTarget final : public TargetDistribution {
 public:
  StochasticBlrTarget(std::shared_ptr<const BlrPosterior> posterior, Prng minibatch_prng);

  int dim() const override { return posterior_->dim(); }
  std::string name() const override { return "blr_minibatch"; }
  double log_density(const Vec& xi) const override { return posterior_->log_density(xi); }
  Vec score(const Vec& xi) const override;
  Mat score_batch(const Mat& x) const override;
  Mat score_vjp_batch(const Mat& x, const Mat& v) const override;

 protected:
  Vec score_vjp_impl(const Vec& xi, const Vec& v) const override;

 private:
  std::shared_ptr<const BlrPosterior> posterior_;
  mutable Prng prng_;
  mutable std::vector<int> batch_;
};

}  // namespace dft
