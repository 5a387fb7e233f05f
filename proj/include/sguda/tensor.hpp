#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace sguda {

// Dense 2-D array of doubles, row-major. The whole library runs in 64-bit
// precision; see README for the layout contract used by the CSV formats.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_init);

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    std::string shape_str() const;

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// D[i][j] = sum_c (x[i][c] - y[j][c])^2
Matrix pairwise_sqeuclidean(const Matrix& x, const Matrix& y);

void add_inplace(Matrix& a, const Matrix& b);
void axpy_inplace(Matrix& a, double alpha, const Matrix& b);  // a += alpha * b
void scale_inplace(Matrix& a, double alpha);

Matrix gather_rows(const Matrix& a, const std::vector<std::size_t>& idx);

double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);

// Rows with norm below 1e-12 are left untouched.
void l2_normalize_rows(Matrix& a);

}  // namespace sguda
