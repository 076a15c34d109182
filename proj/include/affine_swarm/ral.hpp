#pragma once

// Relative affine localization: least-squares recovery of the shape matrix
// Theta from locally observed relative positions, its constrained variants,
// and the covariance of the resulting geometric edge estimates.

#include <optional>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "affine_swarm/core.hpp"
#include "affine_swarm/formation.hpp"

namespace affine_swarm {

/// (H H^T)^{-1} with condition number above this is treated as infeasible.
inline constexpr double kMaxGramCondition = 1e12;

/// Phi = (H H^T)^{-1} H, D x N_ik. Empty when H is not full row rank.
struct RalFactor {
  bool feasible = false;
  MatrixXd phi;
};

inline RalFactor ral_factor(const MatrixXd& h) {
  RalFactor f;
  const int dim = static_cast<int>(h.rows());
  if (h.cols() < dim || dim == 0) return f;
  const DimMat gram = h * h.transpose();
  Eigen::SelfAdjointEigenSolver<DimMat> es(gram, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  const double lmax = es.eigenvalues()(dim - 1);
  if (!(lmin > 0.0) || lmax > kMaxGramCondition * lmin) return f;
  f.feasible = true;
  f.phi = gram.llt().solve(h);
  return f;
}

/// Theta = Y Phi^T; nullopt when infeasible.
inline std::optional<MatrixXd> ral_estimate(const MatrixXd& y, const MatrixXd& h) {
  const RalFactor f = ral_factor(h);
  if (!f.feasible) return std::nullopt;
  return MatrixXd(y * f.phi.transpose());
}

/// z_geo = Theta p_ij
inline VectorXd ral_reconstruct(const MatrixXd& theta, const Eigen::Ref<const VectorXd>& p_ij) {
  return theta * p_ij;
}

/// R_geo = (p^T Phi (x) I_D)(I (x) R)(p^T Phi (x) I_D)^T, evaluated literally.
inline MatrixXd ral_covariance(const MatrixXd& phi, const Eigen::Ref<const VectorXd>& p_ij, const MatrixXd& r) {
  const int dim = static_cast<int>(r.rows());
  const int n = static_cast<int>(phi.cols());
  const Eigen::RowVectorXd a = p_ij.transpose() * phi;
  MatrixXd abar = MatrixXd::Zero(dim, n * dim);
  for (int m = 0; m < n; ++m) abar.block(0, m * dim, dim, dim) = a(m) * MatrixXd::Identity(dim, dim);
  MatrixXd big = MatrixXd::Zero(n * dim, n * dim);
  for (int m = 0; m < n; ++m) big.block(m * dim, m * dim, dim, dim) = r;
  return abar * big * abar.transpose();
}

/// Same quantity for a common R: ||Phi^T p||^2 R. Reduces to sigma^2 ||Phi^T p||^2 I for isotropic R.
inline DimMat ral_covariance_fast(const MatrixXd& phi, const Eigen::Ref<const VectorXd>& p_ij, const DimMat& r) {
  return (phi.transpose() * p_ij).squaredNorm() * r;
}

// ---------------------------------------------------------------------------
// Constrained variants

enum class RalConstraint { kAffine, kScaling, kRotation, kSimilarity };

inline std::string constraint_name(RalConstraint c) {
  switch (c) {
    case RalConstraint::kAffine: return "affine";
    case RalConstraint::kScaling: return "scaling";
    case RalConstraint::kRotation: return "rotation";
    default: return "similarity";
  }
}

namespace detail {

// U diag(1, .., det(U V^T)) V^T from the SVD of Y H^T.
inline MatrixXd procrustes_rotation(const MatrixXd& y, const MatrixXd& h) {
  const MatrixXd m = y * h.transpose();
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  VectorXd d = VectorXd::Ones(m.rows());
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(d.size() - 1) = -1.0;
  return svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace detail

/// Theta restricted to diag / proper rotation / scaled rotation. nullopt when
/// there are no observations or a Scaling row of H vanishes.
inline std::optional<MatrixXd> constrained_ral(const MatrixXd& y, const MatrixXd& h, RalConstraint mode) {
  const int dim = static_cast<int>(h.rows());
  if (h.cols() == 0) return std::nullopt;
  switch (mode) {
    case RalConstraint::kAffine:
      return ral_estimate(y, h);
    case RalConstraint::kScaling: {
      MatrixXd theta = MatrixXd::Zero(dim, dim);
      for (int d = 0; d < dim; ++d) {
        const double den = h.row(d).squaredNorm();
        if (!(den > 1e-300)) return std::nullopt;
        theta(d, d) = y.row(d).dot(h.row(d)) / den;
      }
      return theta;
    }
    case RalConstraint::kRotation:
      return detail::procrustes_rotation(y, h);
    case RalConstraint::kSimilarity: {
      // descending singular values of H and Y paired index by index
      const VectorXd sh = Eigen::JacobiSVD<MatrixXd>(h).singularValues();
      const VectorXd sy = Eigen::JacobiSVD<MatrixXd>(y).singularValues();
      const double tol = kRankTolerance * (sh.size() ? sh(0) : 0.0);
      double acc = 0.0;
      int r = 0;
      for (int m = 0; m < sh.size(); ++m) {
        if (!(sh(m) > tol)) continue;
        acc += sy(m) / sh(m);
        ++r;
      }
      if (r == 0) return std::nullopt;
      return MatrixXd((acc / r) * detail::procrustes_rotation(y, h));
    }
  }
  return std::nullopt;
}

/// Covariance of Theta p_ij for a constrained estimate. Exact for Scaling;
/// for Rotation/Similarity the isotropic approximation
/// (tr R / D) ||p||^2 / ||H||_F^2 I.
inline DimMat constrained_covariance(const MatrixXd& h, const Eigen::Ref<const VectorXd>& p_ij, const DimMat& r,
                                     RalConstraint mode) {
  const int dim = static_cast<int>(h.rows());
  if (mode == RalConstraint::kScaling) {
    DimMat out(dim, dim);
    for (int d = 0; d < dim; ++d)
      for (int e = 0; e < dim; ++e)
        out(d, e) = p_ij(d) * p_ij(e) * r(d, e) * h.row(d).dot(h.row(e)) /
                    (h.row(d).squaredNorm() * h.row(e).squaredNorm());
    return out;
  }
  const double s2 = r.trace() / dim;
  return DimMat::Identity(dim, dim) * (s2 * p_ij.squaredNorm() / h.squaredNorm());
}

}  // namespace affine_swarm
