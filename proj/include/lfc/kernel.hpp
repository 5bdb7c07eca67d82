#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>

#include "lfc/errors.hpp"
#include "lfc/trajectory.hpp"

namespace lfc {

enum class KernelVariant { Identity, Velocity, Rbf };

/// Which propagation kernel to build. `sigma` is the RBF width in timesteps
/// and must be present exactly when the variant is Rbf.
struct KernelSpec {
  KernelVariant variant = KernelVariant::Identity;
  std::optional<double> sigma;

  static KernelSpec identity() { return {KernelVariant::Identity, std::nullopt}; }
  static KernelSpec velocity() { return {KernelVariant::Velocity, std::nullopt}; }
  static KernelSpec rbf(double sigma) { return {KernelVariant::Rbf, sigma}; }

  void validate() const {
    if (variant == KernelVariant::Rbf) {
      if (!sigma) throw InvalidArgument("rbf kernel requires sigma", "sigma");
      if (!(*sigma > 0.0) || !std::isfinite(*sigma)) {
        throw InvalidArgument("rbf sigma must be positive and finite", "sigma");
      }
    } else if (sigma) {
      throw InvalidArgument("sigma is only accepted by the rbf kernel", "sigma");
    }
  }

  /// "identity", "velocity" or "rbf:<sigma>".
  [[nodiscard]] std::string name() const {
    switch (variant) {
      case KernelVariant::Identity: return "identity";
      case KernelVariant::Velocity: return "velocity";
      case KernelVariant::Rbf: {
        std::ostringstream os;
        os.precision(17);
        os << "rbf:" << sigma.value_or(0.0);
        return os.str();
      }
    }
    return "unknown";
  }

  /// Inverse of name(); also accepts "euclidean" for identity.
  static KernelSpec parse(std::string_view text) {
    if (text == "identity" || text == "euclidean") return identity();
    if (text == "velocity") return velocity();
    if (text.starts_with("rbf:")) {
      const std::string number(text.substr(4));
      std::size_t used = 0;
      double sigma = 0.0;
      try {
        sigma = std::stod(number, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != number.size()) {
        throw InvalidArgument("cannot parse rbf sigma from '" + std::string(text) + "'", "sigma");
      }
      KernelSpec spec = rbf(sigma);
      spec.validate();
      return spec;
    }
    if (text == "rbf") throw InvalidArgument("rbf kernel requires sigma (use rbf:<sigma>)", "sigma");
    throw InvalidArgument("unknown kernel '" + std::string(text) + "'", "kernel");
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Tridiagonal finite-differencing metric over `n` interior timepoints:
/// 2 on the diagonal, -1 on the first off-diagonals. With both endpoints held
/// fixed, x^T A x is the sum of squared velocities of the trajectory.
inline Matrix velocity_metric(int n) {
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = 2.0;
    if (i + 1 < n) {
      a(i, i + 1) = -1.0;
      a(i + 1, i) = -1.0;
    }
  }
  return a;
}

/// A^{-1} restricted to the interior timepoints 1..T-1. Interior timepoint t
/// maps to row/column t-1. Copies share the underlying matrix.
class PropagationKernel {
 public:
  PropagationKernel(KernelSpec spec, std::shared_ptr<const Matrix> entries)
      : spec_(std::move(spec)), entries_(std::move(entries)) {}

  [[nodiscard]] const KernelSpec& spec() const { return spec_; }
  [[nodiscard]] KernelVariant variant() const { return spec_.variant; }
  [[nodiscard]] int size() const { return static_cast<int>(entries_->rows()); }
  /// T of the trajectories this kernel applies to.
  [[nodiscard]] int horizon() const { return size() + 1; }
  [[nodiscard]] const Matrix& matrix() const { return *entries_; }
  [[nodiscard]] double operator()(int i, int j) const { return (*entries_)(i, j); }

 private:
  KernelSpec spec_;
  std::shared_ptr<const Matrix> entries_;
};

namespace detail {

inline Matrix build_kernel_matrix(const KernelSpec& spec, int n) {
  switch (spec.variant) {
    case KernelVariant::Identity:
      return Matrix::Identity(n, n);
    case KernelVariant::Velocity: {
      Eigen::LLT<Matrix> llt(velocity_metric(n));
      if (llt.info() != Eigen::Success) {
        throw NumericalError("velocity metric factorization failed for n=" + std::to_string(n));
      }
      Matrix inv = llt.solve(Matrix::Identity(n, n));
      return 0.5 * (inv + inv.transpose());
    }
    case KernelVariant::Rbf: {
      const double sigma = *spec.sigma;
      const double scale = 1.0 / (2.0 * sigma * sigma);
      Matrix k(n, n);
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          const double d = static_cast<double>(i - j);
          k(i, j) = std::exp(-d * d * scale);
        }
      }
      // The Gaussian Gram matrix is positive definite in exact arithmetic, but
      // for wide kernels its smallest eigenvalues fall below double rounding
      // and a plain Cholesky can fail. Reject only matrices that are
      // indefinite beyond the rounding level of their largest eigenvalue.
      Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
      if (eig.info() != Eigen::Success) {
        throw NumericalError("rbf kernel eigendecomposition failed for sigma=" + spec.name() +
                             " n=" + std::to_string(n));
      }
      const double lo = eig.eigenvalues().minCoeff();
      const double hi = eig.eigenvalues().maxCoeff();
      const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * hi;
      if (!std::isfinite(lo) || !std::isfinite(hi) || lo < -tol || !(hi > 0.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "rbf kernel is numerically not positive definite for sigma=" << sigma
           << " n=" << n << " (smallest eigenvalue " << lo << ")";
        throw NumericalError(os.str(), "sigma");
      }
      return k;
    }
  }
  throw InvalidArgument("unknown kernel variant", "kernel");
}

/// Process-wide cache keyed on (variant, n, sigma bits). Concurrent readers
/// share a lock; concurrent inserts of the same key keep the first entry.
class KernelCache {
 public:
  static KernelCache& instance() {
    static KernelCache cache;
    return cache;
  }

  std::shared_ptr<const Matrix> get(const KernelSpec& spec, int n) {
    const Key key{static_cast<int>(spec.variant), n,
                  spec.sigma ? std::bit_cast<std::uint64_t>(*spec.sigma) : 0};
    {
      std::shared_lock lock(mutex_);
      if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    auto built = std::make_shared<const Matrix>(build_kernel_matrix(spec, n));
    std::unique_lock lock(mutex_);
    return entries_.try_emplace(key, std::move(built)).first->second;
  }

 private:
  using Key = std::tuple<int, int, std::uint64_t>;
  std::shared_mutex mutex_;
  std::map<Key, std::shared_ptr<const Matrix>> entries_;
};

}  // namespace detail

/// Builds (or fetches from cache) the propagation kernel for trajectories
/// with horizon T, i.e. an (T-1)x(T-1) matrix over the interior timepoints.
inline PropagationKernel make_kernel(const KernelSpec& spec, int horizon) {
  spec.validate();
  if (horizon < 2) {
    throw InvalidArgument("kernel horizon must be >= 2, got " + std::to_string(horizon), "T");
  }
  return PropagationKernel(spec, detail::KernelCache::instance().get(spec, horizon - 1));
}

inline PropagationKernel make_kernel(KernelVariant variant, int horizon,
                                     std::optional<double> sigma = std::nullopt) {
  return make_kernel(KernelSpec{variant, sigma}, horizon);
}

}  // namespace lfc
