#include "attnq/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace attnq {

DenseMatrix::DenseMatrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) {
        throw InvalidArgument("DenseMatrix: negative dimensions");
    }
}

DenseMatrix::DenseMatrix(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (rows < 0 || cols < 0 || data_.size() != static_cast<size_t>(rows) * cols) {
        throw ShapeMismatch("DenseMatrix: data length does not match rows*cols");
    }
}

DenseMatrix DenseMatrix::identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    DenseMatrix m(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) {
            throw ShapeMismatch("from_rows: ragged rows");
        }
        int j = 0;
        for (double v : row) {
            m(i, j++) = v;
        }
        ++i;
    }
    return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeMismatch("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                            " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    DenseMatrix out(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = arow[k];
            if (aik == 0.0) {
                continue;
            }
            const double* brow = b.row_ptr(k);
            for (int j = 0; j < b.cols(); ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix out(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch("operator+: shape mismatch");
    }
    DenseMatrix out = a;
    for (size_t i = 0; i < out.data().size(); ++i) {
        out.data()[i] += b.data()[i];
    }
    return out;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch("operator-: shape mismatch");
    }
    DenseMatrix out = a;
    for (size_t i = 0; i < out.data().size(); ++i) {
        out.data()[i] -= b.data()[i];
    }
    return out;
}

DenseMatrix scaled(const DenseMatrix& a, double factor) {
    DenseMatrix out = a;
    for (double& v : out.data()) {
        v *= factor;
    }
    return out;
}

DenseMatrix gram_rows(const DenseMatrix& a) {
    DenseMatrix out(a.rows(), a.rows());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = i; j < a.rows(); ++j) {
            double s = 0.0;
            const double* ri = a.row_ptr(i);
            const double* rj = a.row_ptr(j);
            for (int k = 0; k < a.cols(); ++k) {
                s += ri[k] * rj[k];
            }
            out(i, j) = s;
            out(j, i) = s;
        }
    }
    return out;
}

DenseMatrix gram_cols(const DenseMatrix& a) {
    DenseMatrix out(a.cols(), a.cols());
    for (int k = 0; k < a.rows(); ++k) {
        const double* rk = a.row_ptr(k);
        for (int i = 0; i < a.cols(); ++i) {
            const double v = rk[i];
            if (v == 0.0) {
                continue;
            }
            for (int j = 0; j < a.cols(); ++j) {
                out(i, j) += v * rk[j];
            }
        }
    }
    return out;
}

double frobenius_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (double v : a.data()) {
        s += v * v;
    }
    return std::sqrt(s);
}

double relative_frobenius_error(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch("relative_frobenius_error: shape mismatch");
    }
    double diff = 0.0;
    double ref = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        diff += d * d;
        ref += b.data()[i] * b.data()[i];
    }
    const double denom = std::max(std::sqrt(ref), 1e-300);
    return std::sqrt(diff) / denom;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch("max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i) {
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    }
    return m;
}

DenseMatrix submatrix(const DenseMatrix& m, int row0, int row1, int col0, int col1) {
    if (row0 < 0 || col0 < 0 || row1 > m.rows() || col1 > m.cols() || row0 > row1 || col0 > col1) {
        throw ShapeMismatch("submatrix: range out of bounds");
    }
    DenseMatrix out(row1 - row0, col1 - col0);
    for (int i = row0; i < row1; ++i) {
        for (int j = col0; j < col1; ++j) {
            out(i - row0, j - col0) = m(i, j);
        }
    }
    return out;
}

void set_submatrix(DenseMatrix& m, int row0, int col0, const DenseMatrix& block) {
    if (row0 < 0 || col0 < 0 || row0 + block.rows() > m.rows() || col0 + block.cols() > m.cols()) {
        throw ShapeMismatch("set_submatrix: block out of bounds");
    }
    for (int i = 0; i < block.rows(); ++i) {
        for (int j = 0; j < block.cols(); ++j) {
            m(row0 + i, col0 + j) = block(i, j);
        }
    }
}

std::vector<double> vec_column_major(const DenseMatrix& m) {
    std::vector<double> v(static_cast<size_t>(m.rows()) * m.cols());
    size_t idx = 0;
    for (int j = 0; j < m.cols(); ++j) {
        for (int i = 0; i < m.rows(); ++i) {
            v[idx++] = m(i, j);
        }
    }
    return v;
}

DenseMatrix from_vec_column_major(std::span<const double> v, int rows, int cols) {
    if (v.size() != static_cast<size_t>(rows) * cols) {
        throw ShapeMismatch("from_vec_column_major: length mismatch");
    }
    DenseMatrix m(rows, cols);
    size_t idx = 0;
    for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < rows; ++i) {
            m(i, j) = v[idx++];
        }
    }
    return m;
}

double quadratic_form(std::span<const double> x, const DenseMatrix& h) {
    if (h.rows() != h.cols() || x.size() != static_cast<size_t>(h.rows())) {
        throw ShapeMismatch("quadratic_form: size mismatch");
    }
    double total = 0.0;
    for (int i = 0; i < h.rows(); ++i) {
        double s = 0.0;
        const double* hrow = h.row_ptr(i);
        for (int j = 0; j < h.cols(); ++j) {
            s += hrow[j] * x[j];
        }
        total += x[i] * s;
    }
    return total;
}

bool all_finite(const DenseMatrix& m) {
    for (double v : m.data()) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

void require_finite(const DenseMatrix& m, const char* what) {
    if (!all_finite(m)) {
        throw InvalidArgument(std::string(what) + ": non-finite entries");
    }
}

} // namespace attnq
