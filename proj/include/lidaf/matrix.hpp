#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "lidaf/error.hpp"

namespace lidaf {

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (data_.size() != rows_ * cols_) {
            throw ArgumentError("Matrix: value count " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
        }
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ArgumentError("Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::span<const double> d) {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<double> col(std::size_t j) const {
        std::vector<double> c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    // First `count` columns.
    Matrix left_cols(std::size_t count) const {
        Matrix m(rows_, count);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < count; ++j) m(i, j) = (*this)(i, j);
        return m;
    }

    Matrix select_cols(std::span<const std::size_t> idx) const {
        Matrix m(rows_, idx.size());
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < idx.size(); ++j) m(i, j) = (*this)(i, idx[j]);
        return m;
    }

    Matrix select_rows(std::span<const std::size_t> idx) const {
        Matrix m(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i)
            std::copy_n(row(idx[i]).begin(), cols_, m.row(i).begin());
        return m;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    Matrix& operator+=(const Matrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    Matrix& operator-=(const Matrix& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) {
            throw ArgumentError("Matrix product: inner dimensions " + std::to_string(a.cols_) +
                                " and " + std::to_string(b.rows_) + " differ");
        }
        Matrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            auto crow = c.row(i);
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                auto brow = b.row(k);
                for (std::size_t j = 0; j < b.cols_; ++j) crow[j] += aik * brow[j];
            }
        }
        return c;
    }

    bool operator==(const Matrix&) const = default;

private:
    void check_same_shape(const Matrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw ArgumentError("Matrix: shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace lidaf
