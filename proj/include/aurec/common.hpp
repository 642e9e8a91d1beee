#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aurec {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Small sizes throughout; no view types.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(size_t(r) * c, fill) {}

  double& operator()(int r, int c) { return a[size_t(r) * cols + c]; }
  double operator()(int r, int c) const { return a[size_t(r) * cols + c]; }

  double* row(int r) { return a.data() + size_t(r) * cols; }
  const double* row(int r) const { return a.data() + size_t(r) * cols; }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Mat& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
};

Mat mat_mul(const Mat& x, const Mat& y);
Mat mat_transpose(const Mat& x);

// Malformed or inconsistent input data (exit code 3 at the CLI).
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: degenerate systems, rank deficiency, non-convergence
// (exit code 4 at the CLI).
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// splitmix64; used to derive independent per-item seeds so that results do
// not depend on the number of worker threads.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

// Runs fn(0..n-1) on up to `jobs` threads. Callers write results into
// preallocated slots indexed by i, keeping output independent of scheduling.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace aurec
