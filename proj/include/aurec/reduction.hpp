#pragma once

#include "aurec/common.hpp"

namespace aurec {

struct SymEig {
  Vec values;      // descending
  Mat vectors;     // column i is the eigenvector of values[i]
};

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Converges when the off-diagonal Frobenius norm drops below 1e-12 * ||m||.
// Eigenvector sign convention: first nonzero component positive.
SymEig sym_eig(const Mat& m);

struct PcaBasis {
  Vec mean;
  Mat components;   // d x k, orthonormal columns, descending eigenvalue order
  Vec eigenvalues;  // k values

  int input_dim() const { return components.rows; }
  int output_dim() const { return components.cols; }
};

// Top-k eigenvectors of the ML sample covariance (1/n). When d > n the
// n x n Gram matrix is decomposed instead; the resulting components are
// identical for nonzero eigenvalues.
PcaBasis pca_fit(const std::vector<Vec>& samples, int k);
Vec pca_project(const PcaBasis& basis, const Vec& x);
Vec pca_reconstruct(const PcaBasis& basis, const Vec& y);

struct TwoDPcaBasis {
  Mat mean_matrix;
  Mat components;   // c x k right-projection vectors
  Vec eigenvalues;

  int input_cols() const { return components.rows; }
  int output_cols() const { return components.cols; }
};

// 2DPCA on image matrices: eigenvectors of G = (1/n) sum (A_i - Abar)^T (A_i - Abar).
TwoDPcaBasis twod_pca_fit(const std::vector<Mat>& samples, int k);
// Pointer variant so large pools need not be copied per channel.
TwoDPcaBasis twod_pca_fit(const std::vector<const Mat*>& samples, int k);
// (A - Abar) * components, an r x k matrix.
Mat twod_pca_project(const TwoDPcaBasis& basis, const Mat& sample);
Mat twod_pca_reconstruct(const TwoDPcaBasis& basis, const Mat& projected);

}  // namespace aurec
