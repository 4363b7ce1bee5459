#include "visphrase/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <charconv>
#include <cmath>
#include <limits>

#include "visphrase/error.hpp"

namespace visphrase::linalg {

namespace {

// Flip signs so the largest-magnitude entry of each right singular
// vector is non-negative; first entry wins ties. Keeps U*V^T invariant.
void fix_signs(Eigen::MatrixXd& u, Eigen::MatrixXd& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Eigen::Index pivot = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const double mag = std::abs(v(i, j));
      if (mag > best) {
        best = mag;
        pivot = i;
      }
    }
    if (v(pivot, j) < 0.0) {
      v.col(j) = -v.col(j);
      u.col(j) = -u.col(j);
    }
  }
}

}  // namespace

ThinSvd thin_svd(const Eigen::MatrixXd& m) {
  ThinSvd out;
  // BDC is faster on larger problems; Jacobi is more accurate on small ones.
  if (std::min(m.rows(), m.cols()) > 32) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = svd.matrixU();
    out.sigma = svd.singularValues();
    out.v = svd.matrixV();
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = svd.matrixU();
    out.sigma = svd.singularValues();
    out.v = svd.matrixV();
  }
  fix_signs(out.u, out.v);
  return out;
}

int numerical_rank(const Eigen::VectorXd& sigma, Eigen::Index rows, Eigen::Index cols) {
  if (sigma.size() == 0) return 0;
  const double tol = static_cast<double>(std::max(rows, cols)) *
                     std::numeric_limits<double>::epsilon() * sigma(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > tol) ++rank;
  }
  return rank;
}

RidgeSolution ridge_solve(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& inputs,
                          double lambda) {
  if (targets.cols() != inputs.cols()) {
    throw ContractError("ridge_solve: targets and inputs disagree on sample count");
  }
  return ridge_solve(targets, thin_svd(inputs), lambda, inputs.rows());
}

// With inputs = U diag(s) V^T the minimizer is
//   F = targets * V * diag(s / (s^2 + lambda)) * U^T,
// exact for lambda > 0 at any rank; lambda == 0 keeps only singular values
// above the rank tolerance, which is the pseudoinverse solution.
RidgeSolution ridge_solve(const Eigen::MatrixXd& targets, const ThinSvd& input_svd,
                          double lambda, Eigen::Index input_rows) {
  if (lambda < 0.0) throw ContractError("ridge_solve: lambda must be non-negative");
  const Eigen::VectorXd& s = input_svd.sigma;
  const int rank = numerical_rank(s, input_rows, input_svd.v.rows());

  Eigen::VectorXd filter = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (lambda > 0.0) {
      filter(i) = s(i) / (s(i) * s(i) + lambda);
    } else if (i < rank) {
      filter(i) = 1.0 / s(i);
    }
  }

  RidgeSolution out;
  out.coeffs = (targets * input_svd.v) * filter.asDiagonal() * input_svd.u.transpose();
  out.pseudoinverse_fallback = (lambda == 0.0 && rank < input_rows);
  return out;
}

Eigen::MatrixXd inverse_sqrt_spd(const Eigen::MatrixXd& c) {
  if (c.rows() != c.cols()) throw ContractError("inverse_sqrt_spd: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success) {
    throw NumericError("inverse_sqrt_spd: eigendecomposition failed");
  }
  const Eigen::VectorXd& vals = eig.eigenvalues();
  if (vals.size() == 0 || vals(0) <= 0.0) {
    throw NumericError("inverse_sqrt_spd: matrix is not positive definite (min eigenvalue " +
                       format_double(vals.size() ? vals(0) : 0.0) + ")");
  }
  const Eigen::VectorXd inv_sqrt = vals.array().rsqrt();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace visphrase::linalg
