#include "opinsum/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace opinsum {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  require(values_.size() == rows_ * cols_, "Matrix: value count does not match shape");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

NotPositiveDefinite::NotPositiveDefinite(std::size_t pivot, double value)
    : std::runtime_error("matrix is not positive definite: pivot " + std::to_string(pivot) +
                         " = " + std::to_string(value)),
      pivot_(pivot) {}

double log_sum_exp(std::span<const double> v) {
  require(!v.empty(), "log_sum_exp: empty input");
  require(std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }),
          "log_sum_exp: non-finite input");
  const double top = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - top);
  return top + std::log(sum);
}

Vector softmax(std::span<const double> v) {
  require(!v.empty(), "softmax: empty input");
  require(std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }),
          "softmax: non-finite input");
  const double top = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - top);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

Vector log_softmax(std::span<const double> v) {
  const double lse = log_sum_exp(v);
  Vector out(v.begin(), v.end());
  for (double& x : out) x -= lse;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid_elem(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return sigmoid(x); });
  return out;
}

Vector tanh_elem(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::tanh(x); });
  return out;
}

Vector hadamard(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "hadamard: dimension mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vector add(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "add: dimension mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

void matvec_accumulate(const Matrix& m, std::span<const double> v, std::span<double> y) {
  require(m.cols() == v.size() && m.rows() == y.size(), "matvec: dimension mismatch");
  const double* data = m.values().data();
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = data + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * v[c];
    y[r] += acc;
  }
}

void matvec_transposed_accumulate(const Matrix& m, std::span<const double> v,
                                  std::span<double> y) {
  require(m.rows() == v.size() && m.cols() == y.size(), "matvec_transposed: dimension mismatch");
  const double* data = m.values().data();
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double vr = v[r];
    if (vr == 0.0) continue;
    const double* row = data + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] += row[c] * vr;
  }
}

void outer_accumulate(Matrix& m, std::span<const double> a, std::span<const double> b,
                      double scale) {
  require(m.rows() == a.size() && m.cols() == b.size(), "outer: dimension mismatch");
  double* data = m.values().data();
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ar = scale * a[r];
    if (ar == 0.0) continue;
    double* row = data + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += ar * b[c];
  }
}

void axpy(double scale, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += scale * x[i];
}

Vector matvec(const Matrix& m, std::span<const double> v) {
  Vector out(m.rows(), 0.0);
  matvec_accumulate(m, v, out);
  return out;
}

Vector affine(const Matrix& m, std::span<const double> v, std::span<const double> b) {
  require(b.size() == m.rows(), "affine: bias dimension mismatch");
  Vector out(b.begin(), b.end());
  matvec_accumulate(m, v, out);
  return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> v) {
  Vector out(m.cols(), 0.0);
  matvec_transposed_accumulate(m, v, out);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double norm2_squared(std::span<const double> v) { return dot(v, v); }

Vector concat(std::span<const double> a, std::span<const double> b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Vector solve_spd(const Matrix& a, std::span<const double> b) {
  const std::size_t n = a.rows();
  require(a.cols() == n, "solve_spd: matrix is not square");
  require(b.size() == n, "solve_spd: right-hand side dimension mismatch");
  const double scale = std::max(1.0, norm_inf(a.values()));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      require(std::abs(a(i, j) - a(j, i)) <= 1e-10 * scale, "solve_spd: matrix is not symmetric");

  // Lower-triangular L with A = L L^T.
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) throw NotPositiveDefinite(j, diag);
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }

  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

double SeededRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t SeededRng::below(std::size_t n) {
  require(n > 0, "SeededRng::below: empty range");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double SeededRng::normal() {
  // Box-Muller; the second variate is discarded to keep the stream simple.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  return splitmix(splitmix(seed) ^ fnv1a(name));
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  return splitmix(derive_seed(seed, name) ^ splitmix(index));
}

std::vector<std::size_t> multinomial_draw(std::span<const double> weights, std::size_t count,
                                          SeededRng& rng, bool without_replacement) {
  std::size_t positive = 0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, "multinomial_draw: weights must be finite and >= 0");
    if (w > 0.0) ++positive;
  }
  require(positive > 0 || count == 0, "multinomial_draw: weights sum to zero");
  if (without_replacement)
    require(count <= positive, "multinomial_draw: count exceeds positive-weight entries");

  Vector remaining(weights.begin(), weights.end());
  std::vector<std::size_t> drawn;
  drawn.reserve(count);
  for (std::size_t d = 0; d < count; ++d) {
    const double total = std::accumulate(remaining.begin(), remaining.end(), 0.0);
    const double target = rng.uniform() * total;
    double cumulative = 0.0;
    std::size_t pick = remaining.size();
    std::size_t last_positive = remaining.size();
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (remaining[i] <= 0.0) continue;
      last_positive = i;
      cumulative += remaining[i];
      if (target < cumulative) {
        pick = i;
        break;
      }
    }
    // Rounding can leave target just above the final cumulative sum.
    if (pick == remaining.size()) pick = last_positive;
    drawn.push_back(pick);
    if (without_replacement) remaining[pick] = 0.0;
  }
  return drawn;
}

}  // namespace opinsum
