#include "dft/blr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include "dft/errors.hpp"

namespace dft {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow on either tail
double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

constexpr double kGammaRate = 0.01;  // alpha ~ Gamma(shape 1, rate 0.01)

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trimmed(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_cell(const std::string& raw, const std::string& path, long line_no,
                  const std::string& column) {
  std::string s = trimmed(raw);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError(path + " line " + std::to_string(line_no) + ", column '" + column +
                    "': cannot parse '" + s + "' as a number");
  if (!std::isfinite(v))
    throw DataError(path + " line " + std::to_string(line_no) + ", column '" + column +
                    "': non-finite value");
  return v;
}

}  // namespace

BlrDataset load_blr_csv(const std::string& path, const std::string& label_column,
                        double test_fraction, Prng& prng) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
    throw ConfigError("load_blr_csv: test_fraction must lie in [0, 1], got " +
                      std::to_string(test_fraction));

  std::ifstream in(path);
  if (!in) throw IoError("load_blr_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("load_blr_csv: " + path + " is empty");
  std::vector<std::string> header = split_fields(line);
  for (auto& h : header) h = trimmed(h);

  int label_col = -1;
  for (size_t j = 0; j < header.size(); ++j) {
    if (header[j] != label_column) continue;
    if (label_col >= 0)
      throw ConfigError("load_blr_csv: label column '" + label_column + "' appears twice");
    label_col = int(j);
  }
  if (label_col < 0) {
    std::string avail;
    for (size_t j = 0; j < header.size(); ++j) avail += (j ? ", " : "") + header[j];
    throw ConfigError("load_blr_csv: no column '" + label_column + "' in header (" + avail + ")");
  }
  int d_raw = int(header.size()) - 1;
  if (d_raw < 1) throw ConfigError("load_blr_csv: no feature columns besides the label");

  std::vector<double> feat_flat;
  std::vector<double> labels_raw;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.peek() == EOF) break;  // trailing newline
    std::vector<std::string> fields = split_fields(line);
    if (fields.size() != header.size())
      throw DataError("load_blr_csv: " + path + " line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    for (size_t j = 0; j < fields.size(); ++j) {
      double v = parse_cell(fields[j], path, line_no, header[j]);
      if (int(j) == label_col)
        labels_raw.push_back(v);
      else
        feat_flat.push_back(v);
    }
  }
  long n = long(labels_raw.size());
  if (n == 0) throw DataError("load_blr_csv: " + path + " has no data rows");

  BlrDataset ds;

  // labels: accept {0,1} as-is; a pure {1,2} coding is shifted down
  bool all01 = true, all12 = true;
  for (double y : labels_raw) {
    all01 = all01 && (y == 0.0 || y == 1.0);
    all12 = all12 && (y == 1.0 || y == 2.0);
  }
  ds.labels = Vec(n);
  if (all01) {
    for (long i = 0; i < n; ++i) ds.labels[i] = labels_raw[size_t(i)];
  } else if (all12) {
    for (long i = 0; i < n; ++i) ds.labels[i] = labels_raw[size_t(i)] - 1.0;
    ds.warnings.push_back("labels coded {1,2} remapped to {0,1}");
  } else {
    for (long i = 0; i < n; ++i) {
      double y = labels_raw[size_t(i)];
      if (y != 0.0 && y != 1.0 && y != 2.0)
        throw DataError("load_blr_csv: " + path + " line " + std::to_string(i + 2) +
                        ": label value " + std::to_string(y) + " is not binary");
    }
    throw DataError("load_blr_csv: " + path + " mixes label codings {0,1} and {1,2}");
  }

  // seeded split: Fisher-Yates, first chunk of the shuffle becomes the test set
  std::vector<int> perm(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) perm[size_t(i)] = int(i);
  for (long i = n - 1; i > 0; --i)
    std::swap(perm[size_t(i)], perm[size_t(prng.uniform_u64(uint64_t(i + 1)))]);
  long n_test = std::lround(test_fraction * double(n));
  ds.test_idx.assign(perm.begin(), perm.begin() + n_test);
  ds.train_idx.assign(perm.begin() + n_test, perm.end());
  std::sort(ds.test_idx.begin(), ds.test_idx.end());
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  long n_train = long(ds.train_idx.size());
  if (n_train < 2)
    throw ConfigError("load_blr_csv: train split has " + std::to_string(n_train) +
                      " rows, need at least 2 to standardize");

  using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajorMat> raw(feat_flat.data(), n, d_raw);

  // train-split statistics only; population std like the usual scalers
  Vec mean = Vec::Zero(d_raw), var = Vec::Zero(d_raw);
  for (int i : ds.train_idx) mean += raw.row(i).transpose();
  mean /= double(n_train);
  for (int i : ds.train_idx) var += (raw.row(i).transpose() - mean).cwiseAbs2();
  var /= double(n_train);

  std::vector<int> kept;
  for (int j = 0, fj = 0; j < int(header.size()); ++j) {
    if (j == label_col) continue;
    if (var[fj] > 0.0) {
      kept.push_back(fj);
      ds.feature_names.push_back(header[size_t(j)]);
    } else {
      ds.warnings.push_back("column '" + header[size_t(j)] +
                            "' is constant on the train split, dropped");
    }
    ++fj;
  }
  if (kept.empty()) throw ConfigError("load_blr_csv: every feature column is constant");

  ds.features = Mat(n, long(kept.size()));
  for (size_t k = 0; k < kept.size(); ++k) {
    double sd = std::sqrt(var[kept[k]]);
    ds.features.col(long(k)) = (raw.col(kept[k]).array() - mean[kept[k]]) / sd;
  }
  return ds;
}

BlrPosterior::BlrPosterior(BlrDataset dataset, int minibatch_size)
    : data_(std::move(dataset)), minibatch_size_(minibatch_size) {
  long n = data_.features.rows();
  d_ = int(data_.features.cols());
  if (d_ < 1) throw ConfigError("blr: dataset has no feature columns");
  if (data_.labels.size() != n) throw ShapeError("blr: labels/features row mismatch");
  if (!data_.features.allFinite()) throw DataError("blr: non-finite feature values");
  for (long i = 0; i < n; ++i)
    if (data_.labels[i] != 0.0 && data_.labels[i] != 1.0)
      throw DataError("blr: label at row " + std::to_string(i) + " is not 0 or 1");
  if (minibatch_size_ < 1) throw ConfigError("blr: minibatch_size must be positive");

  std::vector<char> seen(size_t(n), 0);
  auto take = [&](const std::vector<int>& idx, const char* which) {
    for (int i : idx) {
      if (i < 0 || i >= n)
        throw ConfigError(std::string("blr: ") + which + " index " + std::to_string(i) +
                          " out of range");
      if (seen[size_t(i)]++)
        throw ConfigError("blr: row " + std::to_string(i) + " is in both splits");
    }
  };
  take(data_.train_idx, "train");
  take(data_.test_idx, "test");
  if (data_.train_idx.empty()) throw ConfigError("blr: empty train split");

  x_train_ = Mat(long(data_.train_idx.size()), d_);
  y_train_ = Vec(long(data_.train_idx.size()));
  for (size_t k = 0; k < data_.train_idx.size(); ++k) {
    x_train_.row(long(k)) = data_.features.row(data_.train_idx[k]);
    y_train_[long(k)] = data_.labels[data_.train_idx[k]];
  }
  x_test_ = Mat(long(data_.test_idx.size()), d_);
  y_test_ = Vec(long(data_.test_idx.size()));
  for (size_t k = 0; k < data_.test_idx.size(); ++k) {
    x_test_.row(long(k)) = data_.features.row(data_.test_idx[k]);
    y_test_[long(k)] = data_.labels[data_.test_idx[k]];
  }
}

double BlrPosterior::log_density(const Vec& xi) const {
  check_point(xi);
  Vec w = xi.head(d_);
  double b = xi[d_], t = xi[d_ + 1];
  double alpha = std::exp(t);
  Vec z = x_train_ * w;
  z.array() += b;
  double ll = 0.0;
  for (long i = 0; i < z.size(); ++i) ll += y_train_[i] * z[i] - softplus(z[i]);
  // N(w; 0, alpha^{-1} I) keeps its alpha-dependent normalizer; the final
  // +t is the log-alpha change of variables
  return ll + 0.5 * d_ * t - 0.5 * alpha * w.squaredNorm() - kGammaRate * alpha + t;
}

Vec BlrPosterior::score(const Vec& xi) const {
  check_point(xi);
  return score_core(xi, x_train_, y_train_, 1.0);
}

void BlrPosterior::gather(const std::vector<int>& idx, Mat& xb, Vec& yb) const {
  if (idx.empty()) throw ConfigError("blr: empty minibatch");
  long n_train = x_train_.rows();
  xb.resize(long(idx.size()), d_);
  yb.resize(long(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= n_train)
      throw ConfigError("blr: minibatch index " + std::to_string(idx[k]) +
                        " outside the train split");
    xb.row(long(k)) = x_train_.row(idx[k]);
    yb[long(k)] = y_train_[idx[k]];
  }
}

Vec BlrPosterior::minibatch_score(const Vec& xi, const std::vector<int>& idx) const {
  check_point(xi);
  Mat xb;
  Vec yb;
  gather(idx, xb, yb);
  return score_core(xi, xb, yb, double(x_train_.rows()) / double(idx.size()));
}

Vec BlrPosterior::score_core(const Vec& xi, const Mat& xb, const Vec& yb, double scale) const {
  Vec w = xi.head(d_);
  double b = xi[d_], t = xi[d_ + 1];
  double alpha = std::exp(t);
  Vec z = xb * w;
  z.array() += b;
  Vec r = yb - z.unaryExpr([](double v) { return sigmoid(v); });

  Vec g(d_ + 2);
  g.head(d_) = scale * (xb.transpose() * r) - alpha * w;
  g[d_] = scale * r.sum();
  g[d_ + 1] = 0.5 * d_ - 0.5 * alpha * w.squaredNorm() - kGammaRate * alpha + 1.0;
  return g;
}

Vec BlrPosterior::minibatch_score_vjp(const Vec& xi, const Vec& v,
                                      const std::vector<int>& idx) const {
  check_point(xi);
  if (v.size() != dim()) throw ShapeError("blr: cotangent dim mismatch");
  if (!v.allFinite()) throw NumericError("blr: non-finite cotangent");
  Mat xb;
  Vec yb;
  gather(idx, xb, yb);
  return vjp_core(xi, v, xb, double(x_train_.rows()) / double(idx.size()));
}

Vec BlrPosterior::vjp_core(const Vec& xi, const Vec& v, const Mat& xb, double scale) const {
  Vec w = xi.head(d_);
  double b = xi[d_], t = xi[d_ + 1];
  double alpha = std::exp(t);
  Vec vw = v.head(d_);
  double vb = v[d_], vt = v[d_ + 1];

  Vec z = xb * w;
  z.array() += b;
  Vec sp = z.unaryExpr([](double u) {
    double s = sigmoid(u);
    return s * (1.0 - s);
  });
  // likelihood block: H = -[X 1]^T diag(sp) [X 1]; the prior couples (w, t)
  // through -alpha w and t to itself through the Gamma and normalizer terms
  Vec u = xb * vw;
  u.array() += vb;
  Vec ru = sp.cwiseProduct(u);

  Vec out(d_ + 2);
  out.head(d_) = -scale * (xb.transpose() * ru) - alpha * vw - alpha * w * vt;
  out[d_] = -scale * ru.sum();
  out[d_ + 1] =
      -alpha * w.dot(vw) + (-0.5 * alpha * w.squaredNorm() - kGammaRate * alpha) * vt;
  return out;
}

Vec BlrPosterior::score_vjp_impl(const Vec& xi, const Vec& v) const {
  return vjp_core(xi, v, x_train_, 1.0);
}

std::vector<int> BlrPosterior::draw_minibatch(Prng& prng) const {
  std::vector<int> out(static_cast<size_t>(minibatch_size_));
  for (auto& i : out) i = int(prng.uniform_u64(uint64_t(x_train_.rows())));
  return out;
}

Vec blr_score(const BlrPosterior& posterior, const Vec& xi,
              const std::vector<int>& minibatch_indices) {
  return posterior.minibatch_score(xi, minibatch_indices);
}

double blr_accuracy(const BlrPosterior& posterior, const Mat& xi_samples) {
  const Mat& x = posterior.test_features();
  const Vec& y = posterior.test_labels();
  if (x.rows() == 0) throw ConfigError("blr_accuracy: empty test set");
  if (xi_samples.rows() < 1) throw ConfigError("blr_accuracy: need at least one sample");
  if (xi_samples.cols() != posterior.dim())
    throw ShapeError("blr_accuracy: samples have " + std::to_string(xi_samples.cols()) +
                     " columns, posterior dim is " + std::to_string(posterior.dim()));
  if (!xi_samples.allFinite()) throw NumericError("blr_accuracy: non-finite samples");

  int d = posterior.feature_dim();
  Mat z = x * xi_samples.leftCols(d).transpose();  // n_test x k
  z.rowwise() += xi_samples.col(d).transpose();
  long hits = 0;
  for (long i = 0; i < x.rows(); ++i) {
    double pbar = z.row(i).unaryExpr([](double v) { return sigmoid(v); }).mean();
    double pred = pbar > 0.5 ? 1.0 : 0.0;
    hits += pred == y[i];
  }
  return double(hits) / double(x.rows());
}

StochasticBlrTarget::StochasticBlrTarget(std::shared_ptr<const BlrPosterior> posterior,
                                         Prng minibatch_prng)
    : posterior_(std::move(posterior)), prng_(minibatch_prng) {
  if (!posterior_) throw ConfigError("blr_minibatch: null posterior");
  batch_ = posterior_->draw_minibatch(prng_);
}

Vec StochasticBlrTarget::score(const Vec& xi) const {
  return posterior_->minibatch_score(xi, batch_);
}

Mat StochasticBlrTarget::score_batch(const Mat& x) const {
  batch_ = posterior_->draw_minibatch(prng_);
  Mat out(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i)
    out.row(i) = posterior_->minibatch_score(x.row(i).transpose(), batch_).transpose();
  return out;
}

Mat StochasticBlrTarget::score_vjp_batch(const Mat& x, const Mat& v) const {
  Mat out(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i)
    out.row(i) =
        posterior_->minibatch_score_vjp(x.row(i).transpose(), v.row(i).transpose(), batch_)
            .transpose();
  return out;
}

Vec StochasticBlrTarget::score_vjp_impl(const Vec& xi, const Vec& v) const {
  return posterior_->minibatch_score_vjp(xi, v, batch_);
}

}  // namespace dft
