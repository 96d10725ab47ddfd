#pragma once

// Test-side random inputs. Uses std::mt19937_64 so that fixtures do not share
// a generator with the code under test.

#include <random>

#include <gtest/gtest.h>

#include "ojapca/errors.hpp"
#include "ojapca/geometry.hpp"

namespace ojapca::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(engine_); }

  MatrixXd gaussian(Index rows, Index cols) {
    MatrixXd m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  /// Orthonormal columns via modified Gram-Schmidt (independent of the library).
  MatrixXd orthonormal(Index d, Index p) {
    MatrixXd q = gaussian(d, p);
    for (Index k = 0; k < p; ++k) {
      for (int pass = 0; pass < 2; ++pass)
        for (Index j = 0; j < k; ++j) q.col(k) -= q.col(j).dot(q.col(k)) * q.col(j);
      q.col(k).normalize();
    }
    return q;
  }

  BasisMatrix basis(Index d, Index p) { return BasisMatrix(orthonormal(d, p)); }

  MatrixXd orthogonal(Index d) { return orthonormal(d, d); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

inline BasisMatrix basis_of(std::initializer_list<std::initializer_list<double>> rows) {
  MatrixXd m(Index(rows.size()), Index(rows.begin()->size()));
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return BasisMatrix(m);
}

inline MatrixXd matrix_of(std::initializer_list<std::initializer_list<double>> rows) {
  MatrixXd m(Index(rows.size()), Index(rows.begin()->size()));
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

#define EXPECT_ERRC(stmt, errc)                                   \
  do {                                                            \
    try {                                                         \
      stmt;                                                       \
      ADD_FAILURE() << "expected " << ::ojapca::to_string(errc);  \
    } catch (const ::ojapca::Error& e) {                          \
      EXPECT_EQ(e.code(), errc) << e.what();                      \
    }                                                             \
  } while (0)

}  // namespace ojapca::testing
