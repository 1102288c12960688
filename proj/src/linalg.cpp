#include "attnq/linalg.hpp"

#include <cmath>
#include <string>

namespace attnq {

namespace {

void require_square(const DenseMatrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw ShapeMismatch(std::string(what) + ": expected a non-empty square matrix, got " +
                            std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

// Relative Frobenius asymmetry must stay below 1e-10 at the module boundary.
void require_symmetric(const DenseMatrix& m, const char* what) {
    double asym = 0.0;
    double ref = 0.0;
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            const double d = m(i, j) - m(j, i);
            asym += d * d;
            ref += m(i, j) * m(i, j);
        }
    }
    if (std::sqrt(asym) > 1e-10 * std::max(std::sqrt(ref), 1e-300)) {
        throw InvalidArgument(std::string(what) + ": input is not symmetric");
    }
}

DenseMatrix symmetrized(const DenseMatrix& m) {
    DenseMatrix out(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            out(i, j) = 0.5 * (m(i, j) + m(j, i));
        }
    }
    return out;
}

DenseMatrix reversed_both(const DenseMatrix& m) {
    const int n = m.rows();
    DenseMatrix out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            out(i, j) = m(n - 1 - i, n - 1 - j);
        }
    }
    return out;
}

// Plain left-looking Cholesky on an already symmetrized matrix.
DenseMatrix cholesky_core(const DenseMatrix& h, const char* what) {
    const int n = h.rows();
    DenseMatrix l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = h(i, j);
            for (int k = 0; k < j; ++k) {
                s -= l(i, k) * l(j, k);
            }
            if (i == j) {
                if (!(s > 0.0)) {
                    throw NotPositiveDefinite(std::string(what) + ": non-positive pivot at index " +
                                              std::to_string(i) + " (" + std::to_string(s) + ")");
                }
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

} // namespace

LowerTriangular::LowerTriangular(DenseMatrix m) : m_(std::move(m)) {
    require_square(m_, "LowerTriangular");
    for (int i = 0; i < m_.rows(); ++i) {
        if (!(m_(i, i) > 0.0)) {
            throw InvalidArgument("LowerTriangular: non-positive diagonal");
        }
        for (int j = i + 1; j < m_.cols(); ++j) {
            if (m_(i, j) != 0.0) {
                throw InvalidArgument("LowerTriangular: nonzero entry above diagonal");
            }
        }
    }
}

UpperTriangular::UpperTriangular(DenseMatrix m) : m_(std::move(m)) {
    require_square(m_, "UpperTriangular");
    for (int i = 0; i < m_.rows(); ++i) {
        if (!(m_(i, i) > 0.0)) {
            throw InvalidArgument("UpperTriangular: non-positive diagonal");
        }
        for (int j = 0; j < i; ++j) {
            if (m_(i, j) != 0.0) {
                throw InvalidArgument("UpperTriangular: nonzero entry below diagonal");
            }
        }
    }
}

LowerTriangular cholesky_lower(const DenseMatrix& h) {
    require_square(h, "cholesky_lower");
    require_finite(h, "cholesky_lower");
    require_symmetric(h, "cholesky_lower");
    return LowerTriangular(cholesky_core(symmetrized(h), "cholesky_lower"));
}

UpperTriangular inverse_cholesky_upper(const DenseMatrix& h) {
    require_square(h, "inverse_cholesky_upper");
    require_finite(h, "inverse_cholesky_upper");
    require_symmetric(h, "inverse_cholesky_upper");

    // Factor the index-reversed matrix: if J·h·J = M·Mᵀ then R = J·M·J is
    // upper triangular with R·Rᵀ = h, so U = R⁻¹ satisfies UᵀU = h⁻¹ and by
    // uniqueness of the factorization U = Chol(h⁻¹)ᵀ.
    const DenseMatrix sym = symmetrized(h);
    const DenseMatrix m = cholesky_core(reversed_both(sym), "inverse_cholesky_upper");
    UpperTriangular r(reversed_both(m));
    return UpperTriangular(invert_upper_triangular(r));
}

DenseMatrix invert_upper_triangular(const UpperTriangular& r) {
    const int n = r.size();
    DenseMatrix x(n, n);
    for (int c = 0; c < n; ++c) {
        x(c, c) = 1.0 / r(c, c);
        for (int i = c - 1; i >= 0; --i) {
            double s = 0.0;
            for (int k = i + 1; k <= c; ++k) {
                s += r(i, k) * x(k, c);
            }
            x(i, c) = -s / r(i, i);
        }
    }
    return x;
}

DenseMatrix invert_lower_triangular(const LowerTriangular& l) {
    const int n = l.size();
    DenseMatrix x(n, n);
    for (int c = 0; c < n; ++c) {
        x(c, c) = 1.0 / l(c, c);
        for (int i = c + 1; i < n; ++i) {
            double s = 0.0;
            for (int k = c; k < i; ++k) {
                s += l(i, k) * x(k, c);
            }
            x(i, c) = -s / l(i, i);
        }
    }
    return x;
}

DenseMatrix inverse_spd(const DenseMatrix& h) {
    const UpperTriangular u = inverse_cholesky_upper(h);
    const int n = u.size();
    DenseMatrix out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double s = 0.0;
            // Column i and column j of U share nonzeros only in rows <= min(i, j).
            for (int k = 0; k <= i; ++k) {
                s += u(k, i) * u(k, j);
            }
            out(i, j) = s;
            out(j, i) = s;
        }
    }
    return out;
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b, int64_t element_cap) {
    require_finite(a, "kron");
    require_finite(b, "kron");
    const int64_t rows = int64_t(a.rows()) * b.rows();
    const int64_t cols = int64_t(a.cols()) * b.cols();
    if (rows * cols > element_cap) {
        throw DimensionOverflow("kron: output of " + std::to_string(rows * cols) +
                                " elements exceeds cap " + std::to_string(element_cap));
    }
    DenseMatrix out(static_cast<int>(rows), static_cast<int>(cols));
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            const double aij = a(i, j);
            for (int p = 0; p < b.rows(); ++p) {
                for (int q = 0; q < b.cols(); ++q) {
                    out(i * b.rows() + p, j * b.cols() + q) = aij * b(p, q);
                }
            }
        }
    }
    return out;
}

} // namespace attnq
