#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trustnet/graph.hpp"
#include "trustnet/numerics.hpp"

namespace trustnet {

enum class Label : std::uint8_t { NoTrust = 0, Trust = 1 };

struct TrainingExample {
  UserId trustor;
  UserId trustee;
  Label label;
};

/// Classifier weights of the joint model. Output index 1 is the trust class.
template <typename Scalar>
struct ModelParams {
  Matrix<Scalar> w_star;  // n_h x d, applied to the elementwise product
  Matrix<Scalar> w_plus;  // n_h x d, applied to the absolute difference
  Vector<Scalar> b1;      // n_h
  Matrix<Scalar> u_out;   // 2 x n_h
  Vector<Scalar> b2;      // 2

  Eigen::Index dim() const { return w_star.cols(); }
  Eigen::Index hidden() const { return w_star.rows(); }

  static ModelParams zeros(Eigen::Index d, Eigen::Index n_h) {
    return {Matrix<Scalar>::Zero(n_h, d), Matrix<Scalar>::Zero(n_h, d), Vector<Scalar>::Zero(n_h),
            Matrix<Scalar>::Zero(2, n_h), Vector<Scalar>::Zero(2)};
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    return {w_star.template cast<Other>(), w_plus.template cast<Other>(),
            b1.template cast<Other>(), u_out.template cast<Other>(), b2.template cast<Other>()};
  }

  bool all_finite() const {
    return w_star.allFinite() && w_plus.allFinite() && b1.allFinite() && u_out.allFinite() &&
           b2.allFinite();
  }
};

/// Glorot-uniform weights, zero biases.
ModelParams<float> init_model_params(std::size_t d, std::size_t n_h, Rng& rng);

/// Row u holds the representation of user u.
template <typename Scalar>
using EmbeddingTable = Matrix<Scalar>;

template <typename Scalar>
struct FeaturePair {
  Vector<Scalar> h_star;  // v_r (.) v_s
  Vector<Scalar> h_plus;  // |v_r - v_s|
};

template <typename DerivedR, typename DerivedS>
FeaturePair<typename DerivedR::Scalar> compute_features(const Eigen::MatrixBase<DerivedR>& v_r,
                                                        const Eigen::MatrixBase<DerivedS>& v_s) {
  if (v_r.size() != v_s.size()) throw std::invalid_argument("compute_features: dimension mismatch");
  return {v_r.cwiseProduct(v_s).eval(), (v_r - v_s).cwiseAbs().eval()};
}

template <typename Scalar>
struct ForwardCache {
  FeaturePair<Scalar> features;
  Vector<Scalar> hidden;
  Vector<Scalar> logits;
};

template <typename Scalar>
struct ForwardResult {
  Vector<Scalar> p;  // [p_no_trust, p_trust]
  ForwardCache<Scalar> cache;
};

namespace detail {

template <typename Scalar>
void check_user(const EmbeddingTable<Scalar>& embeddings, UserId u) {
  if (index(u) >= static_cast<std::uint64_t>(embeddings.rows())) {
    throw std::out_of_range("unknown user id " + std::to_string(index(u)));
  }
}

template <typename Scalar>
void check_shapes(const ModelParams<Scalar>& params, const EmbeddingTable<Scalar>& embeddings) {
  const auto d = params.dim();
  const auto n_h = params.hidden();
  if (embeddings.cols() != d || params.w_plus.rows() != n_h || params.w_plus.cols() != d ||
      params.b1.size() != n_h || params.u_out.rows() != 2 || params.u_out.cols() != n_h ||
      params.b2.size() != 2) {
    throw std::invalid_argument("model parameter shapes do not conform");
  }
}

template <typename Derived>
auto log_sum_exp_rows(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> row_max = z.rowwise().maxCoeff();
  return (row_max.array() +
          (z.colwise() - row_max).array().exp().rowwise().sum().log())
      .matrix()
      .eval();
}

}  // namespace detail

template <typename Scalar>
ForwardResult<Scalar> forward(UserId r, UserId s, const ModelParams<Scalar>& params,
                              const EmbeddingTable<Scalar>& embeddings) {
  detail::check_user(embeddings, r);
  detail::check_user(embeddings, s);
  detail::check_shapes(params, embeddings);
  ForwardResult<Scalar> out;
  out.cache.features = compute_features(embeddings.row(index(r)).transpose(),
                                        embeddings.row(index(s)).transpose());
  const auto& f = out.cache.features;
  out.cache.hidden =
      tanh_vec(params.w_star * f.h_star + affine(params.w_plus, f.h_plus, params.b1));
  out.cache.logits = affine(params.u_out, out.cache.hidden, params.b2);
  out.p = softmax(out.cache.logits);
  return out;
}

/// Row i of every matrix corresponds to example i of the batch.
template <typename Scalar>
struct BatchForward {
  Matrix<Scalar> v_r;
  Matrix<Scalar> v_s;
  Matrix<Scalar> h_star;
  Matrix<Scalar> h_plus;
  Matrix<Scalar> hidden;  // N x n_h
  Matrix<Scalar> logits;  // N x 2
  Vector<Scalar> log_partition;
};

template <typename Scalar>
void gather_pairs(std::span<const TrainingExample> batch, const EmbeddingTable<Scalar>& embeddings,
                  Matrix<Scalar>& v_r, Matrix<Scalar>& v_s) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  v_r.resize(n, embeddings.cols());
  v_s.resize(n, embeddings.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ex = batch[static_cast<std::size_t>(i)];
    detail::check_user(embeddings, ex.trustor);
    detail::check_user(embeddings, ex.trustee);
    v_r.row(i) = embeddings.row(index(ex.trustor));
    v_s.row(i) = embeddings.row(index(ex.trustee));
  }
}

template <typename Scalar>
BatchForward<Scalar> forward_batch(std::span<const TrainingExample> batch,
                                   const ModelParams<Scalar>& params,
                                   const EmbeddingTable<Scalar>& embeddings) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  detail::check_shapes(params, embeddings);
  BatchForward<Scalar> fw;
  gather_pairs(batch, embeddings, fw.v_r, fw.v_s);
  fw.h_star = fw.v_r.cwiseProduct(fw.v_s);
  fw.h_plus = (fw.v_r - fw.v_s).cwiseAbs();
  fw.hidden = ((fw.h_star * params.w_star.transpose() + fw.h_plus * params.w_plus.transpose())
                   .rowwise() +
               params.b1.transpose())
                  .array()
                  .tanh()
                  .matrix();
  fw.logits = (fw.hidden * params.u_out.transpose()).rowwise() + params.b2.transpose();
  fw.log_partition = detail::log_sum_exp_rows(fw.logits);
  return fw;
}

/// Mean negative log-likelihood of the labels, computed through log-sum-exp.
template <typename Scalar>
Scalar batch_loss(std::span<const TrainingExample> batch, const BatchForward<Scalar>& fw) {
  Scalar total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    total += fw.log_partition[row] - fw.logits(row, static_cast<int>(batch[i].label));
  }
  return total / static_cast<Scalar>(batch.size());
}

template <typename Scalar>
Scalar batch_loss(std::span<const TrainingExample> batch, const ModelParams<Scalar>& params,
                  const EmbeddingTable<Scalar>& embeddings) {
  return batch_loss(batch, forward_batch(batch, params, embeddings));
}

/// Gradient rows for the embedding users a batch touched, sorted by user id.
template <typename Scalar>
struct SparseRowGrad {
  std::vector<UserId> users;
  Matrix<Scalar> rows;

  Eigen::Index find(UserId u) const {
    const auto it = std::lower_bound(users.begin(), users.end(), u);
    return it != users.end() && *it == u ? static_cast<Eigen::Index>(it - users.begin()) : -1;
  }
};

template <typename Scalar>
struct Gradients {
  ModelParams<Scalar> params;
  SparseRowGrad<Scalar> embeddings;
};

namespace detail {

template <typename Scalar>
SparseRowGrad<Scalar> accumulate_rows(std::span<const TrainingExample> batch,
                                      const Matrix<Scalar>& grad_r, const Matrix<Scalar>& grad_s) {
  SparseRowGrad<Scalar> out;
  out.users.reserve(2 * batch.size());
  for (const auto& ex : batch) {
    out.users.push_back(ex.trustor);
    out.users.push_back(ex.trustee);
  }
  std::sort(out.users.begin(), out.users.end());
  out.users.erase(std::unique(out.users.begin(), out.users.end()), out.users.end());
  out.rows = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(out.users.size()), grad_r.cols());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out.rows.row(out.find(batch[i].trustor)) += grad_r.row(row);
    out.rows.row(out.find(batch[i].trustee)) += grad_s.row(row);
  }
  return out;
}

/// (p - onehot(y)) / N, where p = softmax(logits) row by row.
template <typename Scalar>
Matrix<Scalar> logit_gradient(std::span<const TrainingExample> batch,
                              const Matrix<Scalar>& logits, const Vector<Scalar>& log_partition) {
  Matrix<Scalar> g = (logits.colwise() - log_partition).array().exp().matrix();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    g(static_cast<Eigen::Index>(i), static_cast<int>(batch[i].label)) -= Scalar(1);
  }
  return g / static_cast<Scalar>(batch.size());
}

}  // namespace detail

/// Hand-derived gradients of batch_loss with respect to every classifier weight and every
/// embedding row in the batch. The subgradient of |x| at 0 is taken as 0.
template <typename Scalar>
Gradients<Scalar> backward(std::span<const TrainingExample> batch,
                           const ModelParams<Scalar>& params,
                           const BatchForward<Scalar>& fw) {
  const Matrix<Scalar> g_logits = detail::logit_gradient(batch, fw.logits, fw.log_partition);

  Gradients<Scalar> g;
  g.params.u_out = g_logits.transpose() * fw.hidden;
  g.params.b2 = g_logits.colwise().sum().transpose();

  const Matrix<Scalar> g_pre =
      ((g_logits * params.u_out).array() * (Scalar(1) - fw.hidden.array().square())).matrix();
  g.params.w_star = g_pre.transpose() * fw.h_star;
  g.params.w_plus = g_pre.transpose() * fw.h_plus;
  g.params.b1 = g_pre.colwise().sum().transpose();

  const Matrix<Scalar> g_star = g_pre * params.w_star;
  const Matrix<Scalar> g_plus =
      ((g_pre * params.w_plus).array() * (fw.v_r - fw.v_s).array().sign()).matrix();
  const Matrix<Scalar> g_r = g_star.cwiseProduct(fw.v_s) + g_plus;
  const Matrix<Scalar> g_s = g_star.cwiseProduct(fw.v_r) - g_plus;
  g.embeddings = detail::accumulate_rows(batch, g_r, g_s);
  return g;
}

template <typename Scalar>
Gradients<Scalar> backward(std::span<const TrainingExample> batch,
                           const ModelParams<Scalar>& params,
                           const EmbeddingTable<Scalar>& embeddings) {
  return backward(batch, params, forward_batch(batch, params, embeddings));
}

namespace detail {

template <typename Derived>
void check_finite(const Eigen::DenseBase<Derived>& x, const char* name) {
  if (!x.allFinite()) throw NumericError(std::string("non-finite values in ") + name +
                                          " after SGD step");
}

}  // namespace detail

/// theta <- theta - lr * grad on the touched embedding rows.
template <typename Scalar>
void sgd_step(EmbeddingTable<Scalar>& embeddings, const SparseRowGrad<Scalar>& grad, Scalar lr) {
  if (!(lr > 0)) throw std::invalid_argument("learning rate must be positive");
  for (std::size_t i = 0; i < grad.users.size(); ++i) {
    const auto u = static_cast<Eigen::Index>(index(grad.users[i]));
    embeddings.row(u) -= lr * grad.rows.row(static_cast<Eigen::Index>(i));
    detail::check_finite(embeddings.row(u), "embeddings");
  }
}

template <typename Scalar>
void sgd_step(ModelParams<Scalar>& params, EmbeddingTable<Scalar>& embeddings,
              const Gradients<Scalar>& grad, Scalar lr) {
  if (!(lr > 0)) throw std::invalid_argument("learning rate must be positive");
  params.w_star -= lr * grad.params.w_star;
  detail::check_finite(params.w_star, "W_star");
  params.w_plus -= lr * grad.params.w_plus;
  detail::check_finite(params.w_plus, "W_plus");
  params.b1 -= lr * grad.params.b1;
  detail::check_finite(params.b1, "b1");
  params.u_out -= lr * grad.params.u_out;
  detail::check_finite(params.u_out, "U");
  params.b2 -= lr * grad.params.b2;
  detail::check_finite(params.b2, "b2");
  sgd_step(embeddings, grad.embeddings, lr);
}

// Dot-product baseline: p = softmax([0, v_r . v_s]), embeddings are the only parameters.

template <typename Scalar>
Vector<Scalar> simple_nn_forward(UserId r, UserId s, const EmbeddingTable<Scalar>& embeddings) {
  detail::check_user(embeddings, r);
  detail::check_user(embeddings, s);
  Vector<Scalar> z(2);
  z << Scalar(0), embeddings.row(index(r)).dot(embeddings.row(index(s)));
  return softmax(z);
}

template <typename Scalar>
struct SimpleBatchForward {
  Matrix<Scalar> v_r;
  Matrix<Scalar> v_s;
  Matrix<Scalar> logits;  // N x 2, first column zero
  Vector<Scalar> log_partition;
};

template <typename Scalar>
SimpleBatchForward<Scalar> simple_nn_forward_batch(std::span<const TrainingExample> batch,
                                                   const EmbeddingTable<Scalar>& embeddings) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  SimpleBatchForward<Scalar> fw;
  gather_pairs(batch, embeddings, fw.v_r, fw.v_s);
  fw.logits = Matrix<Scalar>::Zero(fw.v_r.rows(), 2);
  fw.logits.col(1) = fw.v_r.cwiseProduct(fw.v_s).rowwise().sum();
  fw.log_partition = detail::log_sum_exp_rows(fw.logits);
  return fw;
}

template <typename Scalar>
Scalar simple_nn_batch_loss(std::span<const TrainingExample> batch,
                            const EmbeddingTable<Scalar>& embeddings) {
  const auto fw = simple_nn_forward_batch(batch, embeddings);
  Scalar total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    total += fw.log_partition[row] - fw.logits(row, static_cast<int>(batch[i].label));
  }
  return total / static_cast<Scalar>(batch.size());
}

template <typename Scalar>
SparseRowGrad<Scalar> simple_nn_backward(std::span<const TrainingExample> batch,
                                         const EmbeddingTable<Scalar>& embeddings) {
  const auto fw = simple_nn_forward_batch(batch, embeddings);
  const Vector<Scalar> g_z = detail::logit_gradient(batch, fw.logits, fw.log_partition).col(1);
  const Matrix<Scalar> g_r = fw.v_s.array().colwise() * g_z.array();
  const Matrix<Scalar> g_s = fw.v_r.array().colwise() * g_z.array();
  return detail::accumulate_rows(batch, g_r, g_s);
}

/// One shuffled epoch: every training positive plus one freshly sampled negative each.
class EpochBatches {
 public:
  EpochBatches(std::vector<TrainingExample> examples, std::size_t batch_size)
      : examples_(std::move(examples)), batch_size_(batch_size) {}

  std::size_t size() const noexcept { return (examples_.size() + batch_size_ - 1) / batch_size_; }
  std::span<const TrainingExample> operator[](std::size_t i) const {
    const std::size_t begin = i * batch_size_;
    return std::span(examples_).subspan(begin, std::min(batch_size_, examples_.size() - begin));
  }
  std::span<const TrainingExample> examples() const noexcept { return examples_; }

 private:
  std::vector<TrainingExample> examples_;
  std::size_t batch_size_;
};

EpochBatches make_epoch_batches(std::span<const TrustEdge> train_edges, const TrustGraph& graph,
                                Rng& rng, std::size_t batch_size);

enum class Architecture { Joint, SimpleNN };

struct TrainConfig {
  float lr = 0.4F;
  std::size_t dim = 64;
  std::size_t hidden = 32;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  Architecture arch = Architecture::Joint;

  void validate() const;
};

struct TrainedModel {
  Architecture arch = Architecture::Joint;
  ModelParams<float> params;  // empty shapes for the SimpleNN baseline
  EmbeddingTable<float> embeddings;
  std::vector<RawId> raw_ids;  // raw_ids[u] is the external id of dense user u

  std::size_t num_users() const { return static_cast<std::size_t>(embeddings.rows()); }
};

struct TrainResult {
  TrainedModel model;
  std::vector<double> loss_trace;  // mean example loss per epoch
};

/// Randomly initialised model, or one seeded with `initial_embeddings` (n x dim).
TrainedModel init_model(const TrustGraph& graph, const TrainConfig& config,
                        const std::optional<MatrixF>& initial_embeddings = std::nullopt);

TrainResult train(const TrustGraph& graph, const EdgeSplit& split, const TrainConfig& config,
                  const std::optional<MatrixF>& initial_embeddings = std::nullopt);

/// p(trust | r, s) under either architecture.
float trust_probability(const TrainedModel& model, UserId r, UserId s);

inline constexpr float kDefaultThreshold = 0.5F;

struct Prediction {
  bool trust;
  float p_trust;
};

/// Trust iff p_trust >= threshold, so an exact tie counts as trust.
Prediction predict(const TrainedModel& model, UserId r, UserId s,
                   float threshold = kDefaultThreshold);

}  // namespace trustnet
