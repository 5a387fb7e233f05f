#include "sguda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sguda {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
    Matrix m;
    m.rows = rows_init.size();
    m.cols = rows_init.size() ? rows_init.begin()->size() : 0;
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : rows_init) {
        if (r.size() != m.cols)
            throw std::invalid_argument("Matrix::from_rows: ragged initializer");
        m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
}

std::string Matrix::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: shape mismatch " + a.shape_str() + " * " + b.shape_str());
    Matrix out(a.rows, b.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Matrix pairwise_sqeuclidean(const Matrix& x, const Matrix& y) {
    if (x.cols != y.cols)
        throw std::invalid_argument("pairwise_sqeuclidean: dimension mismatch " + x.shape_str() +
                                    " vs " + y.shape_str());
    Matrix d(x.rows, y.rows, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        for (std::size_t j = 0; j < y.rows; ++j) {
            const double* yj = y.row(j);
            double s = 0.0;
            for (std::size_t c = 0; c < x.cols; ++c) {
                const double diff = xi[c] - yj[c];
                s += diff * diff;
            }
            d.at(i, j) = s;
        }
    }
    return d;
}

void add_inplace(Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("add_inplace: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void axpy_inplace(Matrix& a, double alpha, const Matrix& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("axpy_inplace: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += alpha * b.data[i];
}

void scale_inplace(Matrix& a, double alpha) {
    for (double& v : a.data) v *= alpha;
}

Matrix gather_rows(const Matrix& a, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), a.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.rows) throw std::out_of_range("gather_rows: index out of range");
        std::copy(a.row(idx[i]), a.row(idx[i]) + a.cols, out.row(i));
    }
    return out;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("max_abs_diff: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

bool all_finite(const Matrix& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

void l2_normalize_rows(Matrix& a) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* r = a.row(i);
        double s = 0.0;
        for (std::size_t c = 0; c < a.cols; ++c) s += r[c] * r[c];
        const double n = std::sqrt(s);
        if (n < 1e-12) continue;
        for (std::size_t c = 0; c < a.cols; ++c) r[c] /= n;
    }
}

}  // namespace sguda
