#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace affine_swarm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Small matrices (D <= 3, filter states <= 9) live on the stack.
inline constexpr int kMaxDim = 3;
inline constexpr int kMaxState = 3 * kMaxDim;

using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxState, 1>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxState, kMaxState>;
using DimVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using DimMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Raised for invalid user input: scenario files, loss schedules, graph data.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
  ConfigError(const std::string& summary, std::vector<std::string> issues)
      : std::runtime_error(join(summary, issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::string& summary, const std::vector<std::string>& issues) {
    std::string out = summary;
    for (const auto& s : issues) {
      out += "\n  - ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

/// Raised when a numerical precondition fails (non-PSD covariance, no stress certificate).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown by compute_stress when no PSD stress of rank N-D-1 exists.
class NotUniversallyRigid : public NumericalError {
 public:
  explicit NotUniversallyRigid(const std::string& what) : NumericalError(what) {}
};

/// Thrown by compute_stress when the nominal points are affinely degenerate.
class NonGenericConfiguration : public NumericalError {
 public:
  explicit NonGenericConfiguration(const std::string& what) : NumericalError(what) {}
};

inline void symmetrize(SmallMat& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = j + 1; i < m.rows(); ++i) m(i, j) = m(j, i) = 0.5 * (m(i, j) + m(j, i));
}

}  // namespace affine_swarm
