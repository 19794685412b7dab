#pragma once

// Dense numeric kernel: vectors, row-major matrices, elementwise
// nonlinearities, an SPD solver and a seeded random source.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace opinsum {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  void fill(double v);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Raised by solve_spd when a Cholesky pivot is not strictly positive.
class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(std::size_t pivot, double value);
  std::size_t pivot() const { return pivot_; }

 private:
  std::size_t pivot_;
};

// Elementwise / linear algebra. All functions throw std::invalid_argument on
// dimension mismatch.
Vector softmax(std::span<const double> v);
Vector log_softmax(std::span<const double> v);
double log_sum_exp(std::span<const double> v);
double sigmoid(double x);
Vector sigmoid_elem(std::span<const double> v);
Vector tanh_elem(std::span<const double> v);
Vector hadamard(std::span<const double> a, std::span<const double> b);
Vector add(std::span<const double> a, std::span<const double> b);
Vector matvec(const Matrix& m, std::span<const double> v);
Vector affine(const Matrix& m, std::span<const double> v, std::span<const double> b);
/// Returns m^T v.
Vector matvec_transposed(const Matrix& m, std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
double norm_inf(std::span<const double> v);
double norm2_squared(std::span<const double> v);

/// y += m v
void matvec_accumulate(const Matrix& m, std::span<const double> v, std::span<double> y);
/// y += m^T v
void matvec_transposed_accumulate(const Matrix& m, std::span<const double> v, std::span<double> y);
/// m += scale * a b^T
void outer_accumulate(Matrix& m, std::span<const double> a, std::span<const double> b,
                      double scale = 1.0);
/// y += scale * x
void axpy(double scale, std::span<const double> x, std::span<double> y);

Vector concat(std::span<const double> a, std::span<const double> b);

Matrix transpose(const Matrix& m);
Matrix matmul(const Matrix& a, const Matrix& b);

/// Solves A x = b for symmetric positive-definite A by Cholesky
/// factorization. A must be symmetric within 1e-10 (relative to its largest
/// entry).
Vector solve_spd(const Matrix& a, std::span<const double> b);

/// Seeded 64-bit generator. Identical seeds give identical draw sequences on
/// every platform: only the engine output is used, never std distributions.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  double normal();

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Derives a named sub-seed from a global seed so that components can be
/// re-run in isolation.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name, std::uint64_t index);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Draws `count` indices proportionally to `weights`. Without replacement
/// (default) every draw renormalizes over the remaining entries, so the
/// returned indices are distinct.
std::vector<std::size_t> multinomial_draw(std::span<const double> weights, std::size_t count,
                                          SeededRng& rng, bool without_replacement = true);

}  // namespace opinsum
