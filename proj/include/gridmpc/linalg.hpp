#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridmpc {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
  public:
    using Error::Error;
};

class NonFiniteError : public Error {
  public:
    using Error::Error;
};

class SingularMatrixError : public Error {
  public:
    using Error::Error;
};

class UnstableSystemError : public Error {
  public:
    using Error::Error;
};

using Vector = std::vector<double>;

// Dense row-major matrix with value semantics. Sized for control problems
// (tens to a few hundred rows); nothing here tries to be clever about memory.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
    static Matrix diagonal(std::span<const double> diag);
    static Matrix column(std::span<const double> v);

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }
    [[nodiscard]] bool square() const { return rows_ == cols_; }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<const double> data() const { return data_; }
    [[nodiscard]] std::span<double> data() { return data_; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * cols_, cols_);
    }

    [[nodiscard]] Matrix transpose() const;
    [[nodiscard]] Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
    void set_block(std::size_t r0, std::size_t c0, const Matrix& src);
    [[nodiscard]] Matrix select(std::span<const std::size_t> row_idx, std::span<const std::size_t> col_idx) const;
    [[nodiscard]] Vector col_vector(std::size_t c) const;

    [[nodiscard]] bool is_finite() const;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    friend bool operator==(const Matrix&, const Matrix&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, Matrix a);
Vector operator*(const Matrix& a, std::span<const double> x);

// Induced infinity norm (max absolute row sum); for column vectors this is max |x_i|.
double norm_inf(const Matrix& a);
double norm_inf(std::span<const double> v);
// Induced 1-norm (max absolute column sum).
double norm_one(const Matrix& a);
double max_abs(const Matrix& a);
bool all_finite(std::span<const double> v);

// Overridable numerical thresholds for this module.
struct LinalgTolerances {
    // Relative pivot threshold, scaled by the largest initial row norm.
    double singular_pivot = 1e-12;
    // Diagonal shift (scaled by max(1, max|m_ij|)) used by the PSD test.
    double psd_shift = 1e-10;
    double symmetry = 1e-12;
};

// Gaussian elimination with partial pivoting. Throws SingularMatrixError.
Matrix solve_linear(const Matrix& a, const Matrix& b, const LinalgTolerances& tol = {});
Vector solve_linear(const Matrix& a, std::span<const double> b, const LinalgTolerances& tol = {});

// e^a by scaling and squaring around a degree-13 Taylor core.
Matrix matrix_exponential(const Matrix& a);

Matrix kronecker(const Matrix& a, const Matrix& b);

// Solves a X a^T - X + q = 0 by vectorization. Throws UnstableSystemError when
// the vectorized operator is singular or the result betrays |lambda(a)| >= 1.
Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q, const LinalgTolerances& tol = {});

// Lower-triangular L with L L^T = m + shift*I, or nullopt if a pivot is not positive.
std::optional<Matrix> cholesky(const Matrix& m, double shift = 0.0);
bool is_symmetric(const Matrix& m, double tol = 1e-12);
bool is_positive_semidefinite(const Matrix& m, const LinalgTolerances& tol = {});
bool is_positive_definite(const Matrix& m);

std::string to_string(const Matrix& m);

}  // namespace gridmpc
