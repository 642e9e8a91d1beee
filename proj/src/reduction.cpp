#include "aurec/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aurec {

namespace {

double frobenius(const Mat& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

// Flips sign so the first component with nonzero magnitude is positive.
void fix_sign(double* v, int n, int stride) {
  for (int i = 0; i < n; ++i) {
    const double x = v[size_t(i) * stride];
    if (x != 0.0) {
      if (x < 0.0)
        for (int j = i; j < n; ++j) v[size_t(j) * stride] = -v[size_t(j) * stride];
      return;
    }
  }
}

void sort_descending(Vec& values, Mat& vectors) {
  const int n = int(values.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return values[i] > values[j]; });
  Vec sv(n);
  Mat sm(vectors.rows, n);
  for (int j = 0; j < n; ++j) {
    sv[j] = values[order[j]];
    for (int i = 0; i < vectors.rows; ++i) sm(i, j) = vectors(i, order[j]);
  }
  values = std::move(sv);
  vectors = std::move(sm);
}

}  // namespace

SymEig sym_eig(const Mat& m) {
  if (m.rows != m.cols) throw numeric_error("sym_eig: matrix not square");
  const int n = m.rows;
  double max_abs = 0.0;
  for (double v : m.a) max_abs = std::max(max_abs, std::fabs(v));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::fabs(m(i, j) - m(j, i)) > 1e-9 * std::max(1.0, max_abs))
        throw numeric_error("sym_eig: matrix not symmetric");

  // Work on the symmetrized copy; rotations keep it symmetric. Eigenvectors
  // accumulate as rows (contiguous updates) and are transposed on return.
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = 0.5 * (m(i, j) + m(j, i));
  Mat vt(n, n);
  for (int i = 0; i < n; ++i) vt(i, i) = 1.0;

  const double target = 1e-12 * frobenius(m);
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    off = std::sqrt(off);
    if (off <= target || off == 0.0) break;

    // Skip rotations that cannot reduce the off-diagonal mass meaningfully.
    const double thresh = (sweep < 3) ? 0.2 * off / (double(n) * n) : 0.0;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        const double scale = 100.0 * std::fabs(apq);
        if (sweep > 4 && scale <= 1e-15 * std::fabs(a(p, p)) &&
            scale <= 1e-15 * std::fabs(a(q, q))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        if (std::fabs(apq) <= thresh) continue;

        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;  // tan of the rotation angle, smaller root
        if (std::fabs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        const double app = a(p, p), aqq = a(q, q);

        // Rotate rows p and q in full (vector-friendly), then patch the
        // (p,p), (p,q), (q,q) entries and mirror the columns.
        double* rp = a.row(p);
        double* rq = a.row(q);
        for (int i = 0; i < n; ++i) {
          const double aip = rp[i], aiq = rq[i];
          rp[i] = aip - s * (aiq + tau * aip);
          rq[i] = aiq + s * (aip - tau * aiq);
        }
        rp[p] = app - t * apq;
        rq[q] = aqq + t * apq;
        rp[q] = rq[p] = 0.0;
        for (int i = 0; i < n; ++i) {
          a(i, p) = rp[i];
          a(i, q) = rq[i];
        }
        double* vrp = vt.row(p);
        double* vrq = vt.row(q);
        for (int i = 0; i < n; ++i) {
          const double vip = vrp[i], viq = vrq[i];
          vrp[i] = vip - s * (viq + tau * vip);
          vrq[i] = viq + s * (vip - tau * viq);
        }
      }
    }
  }

  SymEig out;
  out.values.resize(n);
  for (int i = 0; i < n; ++i) out.values[i] = a(i, i);
  out.vectors = mat_transpose(vt);
  sort_descending(out.values, out.vectors);
  for (int j = 0; j < n; ++j) fix_sign(out.vectors.a.data() + j, n, n);
  return out;
}

PcaBasis pca_fit(const std::vector<Vec>& samples, int k) {
  const int n = int(samples.size());
  if (n < 2) throw data_error("pca_fit: need at least 2 samples");
  const int d = int(samples[0].size());
  for (const auto& s : samples)
    if (int(s.size()) != d) throw data_error("pca_fit: inconsistent sample dimensions");
  if (k < 1 || k > std::min(d, n - 1))
    throw data_error("pca_fit: k out of range [1, min(d, n-1)]");

  PcaBasis basis;
  basis.mean.assign(d, 0.0);
  for (const auto& s : samples)
    for (int j = 0; j < d; ++j) basis.mean[j] += s[j];
  for (int j = 0; j < d; ++j) basis.mean[j] /= n;

  Mat x(n, d);  // centered samples
  double total_var = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      const double c = samples[i][j] - basis.mean[j];
      x(i, j) = c;
      total_var += c * c;
    }
  if (total_var == 0.0) throw numeric_error("pca_fit: zero variance (all samples identical)");

  basis.eigenvalues.resize(k);
  basis.components = Mat(d, k);

  if (d <= n) {
    Mat cov(d, d);
    for (int i = 0; i < n; ++i) {
      const double* xi = x.row(i);
      for (int r = 0; r < d; ++r) {
        const double xr = xi[r];
        if (xr == 0.0) continue;
        double* cr = cov.row(r);
        for (int c = r; c < d; ++c) cr[c] += xr * xi[c];
      }
    }
    for (int r = 0; r < d; ++r)
      for (int c = r; c < d; ++c) {
        cov(r, c) /= n;
        cov(c, r) = cov(r, c);
      }
    SymEig eig = sym_eig(cov);
    for (int j = 0; j < k; ++j) {
      basis.eigenvalues[j] = std::max(0.0, eig.values[j]);
      for (int i = 0; i < d; ++i) basis.components(i, j) = eig.vectors(i, j);
    }
  } else {
    // Dual (Gram) route: eigenvectors of (1/n) X X^T map to covariance
    // eigenvectors as X^T u / sqrt(n * lambda).
    Mat gram(n, n);
    for (int i = 0; i < n; ++i) {
      const double* xi = x.row(i);
      for (int j = i; j < n; ++j) {
        const double* xj = x.row(j);
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += xi[c] * xj[c];
        gram(i, j) = gram(j, i) = s / n;
      }
    }
    SymEig eig = sym_eig(gram);
    for (int j = 0; j < k; ++j) {
      const double lambda = eig.values[j];
      if (lambda <= 1e-12 * std::max(eig.values[0], 0.0) || lambda <= 0.0)
        throw numeric_error("pca_fit: covariance rank below requested dimension");
      basis.eigenvalues[j] = lambda;
      const double inv_norm = 1.0 / std::sqrt(double(n) * lambda);
      for (int c = 0; c < d; ++c) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += x(i, c) * eig.vectors(i, j);
        basis.components(c, j) = s * inv_norm;
      }
      fix_sign(basis.components.a.data() + j, d, k);
    }
  }
  return basis;
}

Vec pca_project(const PcaBasis& basis, const Vec& x) {
  const int d = basis.input_dim();
  const int k = basis.output_dim();
  if (int(x.size()) != d) throw numeric_error("pca_project: dimension mismatch");
  Vec y(k, 0.0);
  for (int i = 0; i < d; ++i) {
    const double c = x[i] - basis.mean[i];
    if (c == 0.0) continue;
    const double* row = basis.components.row(i);
    for (int j = 0; j < k; ++j) y[j] += c * row[j];
  }
  return y;
}

Vec pca_reconstruct(const PcaBasis& basis, const Vec& y) {
  const int d = basis.input_dim();
  const int k = basis.output_dim();
  if (int(y.size()) != k) throw numeric_error("pca_reconstruct: dimension mismatch");
  Vec x(basis.mean);
  for (int i = 0; i < d; ++i) {
    const double* row = basis.components.row(i);
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += row[j] * y[j];
    x[i] += s;
  }
  return x;
}

TwoDPcaBasis twod_pca_fit(const std::vector<Mat>& samples, int k) {
  std::vector<const Mat*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  return twod_pca_fit(ptrs, k);
}

TwoDPcaBasis twod_pca_fit(const std::vector<const Mat*>& samples, int k) {
  const int n = int(samples.size());
  if (n < 2) throw data_error("twod_pca_fit: need at least 2 samples");
  const int r = samples[0]->rows, c = samples[0]->cols;
  for (const Mat* s : samples)
    if (s->rows != r || s->cols != c)
      throw data_error("twod_pca_fit: inconsistent sample shapes");
  if (k < 1 || k > c) throw data_error("twod_pca_fit: k out of range [1, cols]");

  TwoDPcaBasis basis;
  basis.mean_matrix = Mat(r, c);
  for (const Mat* s : samples)
    for (size_t i = 0; i < s->a.size(); ++i) basis.mean_matrix.a[i] += s->a[i];
  for (double& v : basis.mean_matrix.a) v /= n;

  Mat g(c, c);  // image covariance over columns
  Mat centered(r, c);
  for (const Mat* s : samples) {
    for (size_t i = 0; i < s->a.size(); ++i) centered.a[i] = s->a[i] - basis.mean_matrix.a[i];
    for (int row = 0; row < r; ++row) {
      const double* cr = centered.row(row);
      for (int i = 0; i < c; ++i) {
        const double ci = cr[i];
        if (ci == 0.0) continue;
        double* gi = g.row(i);
        for (int j = i; j < c; ++j) gi[j] += ci * cr[j];
      }
    }
  }
  for (int i = 0; i < c; ++i)
    for (int j = i; j < c; ++j) {
      g(i, j) /= n;
      g(j, i) = g(i, j);
    }

  SymEig eig = sym_eig(g);
  basis.eigenvalues.assign(eig.values.begin(), eig.values.begin() + k);
  basis.components = Mat(c, k);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < k; ++j) basis.components(i, j) = eig.vectors(i, j);
  return basis;
}

Mat twod_pca_project(const TwoDPcaBasis& basis, const Mat& sample) {
  if (!sample.same_shape(basis.mean_matrix))
    throw numeric_error("twod_pca_project: shape mismatch");
  Mat centered(sample.rows, sample.cols);
  for (size_t i = 0; i < sample.a.size(); ++i)
    centered.a[i] = sample.a[i] - basis.mean_matrix.a[i];
  return mat_mul(centered, basis.components);
}

Mat twod_pca_reconstruct(const TwoDPcaBasis& basis, const Mat& projected) {
  if (projected.cols != basis.components.cols)
    throw numeric_error("twod_pca_reconstruct: shape mismatch");
  Mat rec = mat_mul(projected, mat_transpose(basis.components));
  for (size_t i = 0; i < rec.a.size(); ++i) rec.a[i] += basis.mean_matrix.a[i];
  return rec;
}

}  // namespace aurec
