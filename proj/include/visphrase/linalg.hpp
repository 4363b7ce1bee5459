#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace visphrase::linalg {

// Thin SVD m = U diag(sigma) V^T with a fixed sign convention: the
// largest-magnitude entry of each right singular vector is non-negative
// (first such entry on ties). Singular values are non-increasing.
struct ThinSvd {
  Eigen::MatrixXd u;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd v;
};
ThinSvd thin_svd(const Eigen::MatrixXd& m);

// Numerical rank given the singular values of a matrix with the stated
// extents: sigma_i > max(rows, cols) * eps * sigma_max.
int numerical_rank(const Eigen::VectorXd& sigma, Eigen::Index rows, Eigen::Index cols);

// Minimizes ||targets - F * inputs||_F^2 + lambda * ||F||_F^2 over F.
// `inputs` is d_in x n, `targets` d_out x n; the solution is d_out x d_in.
// At lambda == 0 a rank-deficient system falls back to the Moore-Penrose
// pseudoinverse and sets the flag.
struct RidgeSolution {
  Eigen::MatrixXd coeffs;
  bool pseudoinverse_fallback = false;
};
RidgeSolution ridge_solve(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& inputs,
                          double lambda);
RidgeSolution ridge_solve(const Eigen::MatrixXd& targets, const ThinSvd& input_svd,
                          double lambda, Eigen::Index input_rows);

// Inverse square root of a symmetric positive definite matrix. Throws
// NumericError when an eigenvalue is not strictly positive.
Eigen::MatrixXd inverse_sqrt_spd(const Eigen::MatrixXd& c);

// Shortest round-trip decimal form of a double (std::to_chars).
std::string format_double(double x);

// FNV-1a 64-bit hash, hex-encoded; used to stamp outputs with a config
// fingerprint.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

}  // namespace visphrase::linalg
