#pragma once

#include <cstdint>

#include "attnq/matrix.hpp"

namespace attnq {

// Wrapper asserting the triangular shape invariants: entries on the wrong
// side of the diagonal are exactly zero and the diagonal is strictly
// positive (both hold for Cholesky factors of SPD inputs).
class LowerTriangular {
  public:
    explicit LowerTriangular(DenseMatrix m);

    int size() const { return m_.rows(); }
    double operator()(int i, int j) const { return m_(i, j); }
    const DenseMatrix& matrix() const { return m_; }

  private:
    DenseMatrix m_;
};

class UpperTriangular {
  public:
    explicit UpperTriangular(DenseMatrix m);

    int size() const { return m_.rows(); }
    double operator()(int i, int j) const { return m_(i, j); }
    const DenseMatrix& matrix() const { return m_; }

  private:
    DenseMatrix m_;
};

// L with L·Lᵀ = (h + hᵀ)/2. No pivoting; a non-positive pivot raises
// NotPositiveDefinite and the caller is expected to dampen first.
LowerTriangular cholesky_lower(const DenseMatrix& h);

// U upper triangular with UᵀU = h⁻¹, i.e. U = Chol(h⁻¹)ᵀ. Computed by
// factorizing the index-reversed h and inverting the triangular factor;
// h⁻¹ is never formed densely and then refactorized.
UpperTriangular inverse_cholesky_upper(const DenseMatrix& h);

// Exact inverse of a triangular matrix by substitution.
DenseMatrix invert_upper_triangular(const UpperTriangular& r);
DenseMatrix invert_lower_triangular(const LowerTriangular& l);

// h⁻¹ = UᵀU assembled from the factored inverse; symmetric by construction.
DenseMatrix inverse_spd(const DenseMatrix& h);

inline constexpr int64_t kDefaultKronElementCap = int64_t(1) << 24;

// Kronecker product; desk-scale only, guarded by an element cap.
DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b,
                 int64_t element_cap = kDefaultKronElementCap);

} // namespace attnq
