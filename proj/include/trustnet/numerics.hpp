#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "trustnet/errors.hpp"

namespace trustnet {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixF = Matrix<float>;
using VectorF = Vector<float>;
using MatrixD = Matrix<double>;
using VectorD = Vector<double>;

/// xoshiro256** seeded through splitmix64. The algorithm is part of the file-format
/// contract: models trained with the same seed must be byte-identical on every platform,
/// so nothing here delegates to the implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n). Requires n > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_[4];
};

/// Independent seed for a named sub-stream of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

/// W x + b.
template <typename DerivedW, typename DerivedX, typename DerivedB>
Vector<typename DerivedW::Scalar> affine(const Eigen::MatrixBase<DerivedW>& W,
                                         const Eigen::MatrixBase<DerivedX>& x,
                                         const Eigen::MatrixBase<DerivedB>& b) {
  if (W.cols() != x.size() || W.rows() != b.size()) {
    throw std::invalid_argument("affine: shape mismatch");
  }
  return W * x + b;
}

/// Max-subtracted softmax.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  if (z.size() == 0) throw std::invalid_argument("softmax: empty input");
  if (!z.allFinite()) throw NumericError("softmax: non-finite logits");
  const Scalar shift = z.maxCoeff();
  Vector<Scalar> e = (z.array() - shift).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
Vector<typename Derived::Scalar> tanh_vec(const Eigen::MatrixBase<Derived>& x) {
  return x.array().tanh().matrix();
}

/// n x d table, entries uniform in [-0.5/d, 0.5/d].
MatrixF init_uniform_embedding(std::size_t n, std::size_t d, Rng& rng);

/// rows x cols, entries uniform in [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))].
MatrixF init_glorot(std::size_t rows, std::size_t cols, Rng& rng);

/// Central differences (f(t + h e_i) - f(t - h e_i)) / 2h for every coordinate, in
/// double precision. Used as the reference for hand-derived gradients.
template <typename F>
VectorD finite_diff_gradient(F&& f, VectorD theta, double h = 1e-4) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: h must be positive");
  VectorD grad(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double up = f(std::as_const(theta));
    theta[i] = saved - h;
    const double down = f(std::as_const(theta));
    theta[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_gradient: function is not finite near coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace trustnet
