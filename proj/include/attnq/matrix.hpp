#pragma once

#include <initializer_list>
#include <span>
#include <vector>

#include "attnq/errors.hpp"

namespace attnq {

// Dense row-major matrix of 64-bit reals. The universal numeric carrier of
// this library; all internal arithmetic is double precision.
class DenseMatrix {
  public:
    DenseMatrix() = default;
    DenseMatrix(int rows, int cols, double fill = 0.0);
    DenseMatrix(int rows, int cols, std::vector<double> values);

    static DenseMatrix identity(int n);
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

    double* row_ptr(int i) { return data_.data() + static_cast<size_t>(i) * cols_; }
    const double* row_ptr(int i) const { return data_.data() + static_cast<size_t>(i) * cols_; }
    std::span<double> row(int i) { return {row_ptr(i), static_cast<size_t>(cols_)}; }
    std::span<const double> row(int i) const { return {row_ptr(i), static_cast<size_t>(cols_)}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const DenseMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// Integer matrix used for quantization codes.
struct IntMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> data;

    IntMatrix() = default;
    IntMatrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0) {}

    int& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    int at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    bool operator==(const IntMatrix& other) const = default;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& a, double factor);

// a * aᵀ (rows x rows) and aᵀ * a (cols x cols).
DenseMatrix gram_rows(const DenseMatrix& a);
DenseMatrix gram_cols(const DenseMatrix& a);

double frobenius_norm(const DenseMatrix& a);
// ‖a − b‖_F / max(‖b‖_F, tiny); b is the reference.
double relative_frobenius_error(const DenseMatrix& a, const DenseMatrix& b);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

// Half-open row/column ranges.
DenseMatrix submatrix(const DenseMatrix& m, int row0, int row1, int col0, int col1);
void set_submatrix(DenseMatrix& m, int row0, int col0, const DenseMatrix& block);

// Column-major vectorization, so vec(M1 · W · M2) = (M2ᵀ ⊗ M1) · vec(W).
std::vector<double> vec_column_major(const DenseMatrix& m);
DenseMatrix from_vec_column_major(std::span<const double> v, int rows, int cols);

// xᵀ · h · x for a square h.
double quadratic_form(std::span<const double> x, const DenseMatrix& h);

bool all_finite(const DenseMatrix& m);
// Throws InvalidArgument naming `what` when a NaN/Inf crosses a module boundary.
void require_finite(const DenseMatrix& m, const char* what);

} // namespace attnq
