#include "gridmpc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gridmpc {

namespace {

void require_finite(const Matrix& m, const char* what) {
    if (!m.is_finite()) {
        throw NonFiniteError(std::string(what) + ": non-finite matrix entry");
    }
}

void require_square(const Matrix& m, const char* what) {
    if (!m.square()) {
        throw DimensionError(std::string(what) + ": matrix must be square, got " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw DimensionError("Matrix: ragged initializer");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) {
        m(i, i) = diag[i];
    }
    return m;
}

Matrix Matrix::column(std::span<const double> v) {
    Matrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            t(j, i) = (*this)(i, j);
        }
    }
    return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) {
        throw DimensionError("Matrix::block out of range");
    }
    Matrix b(nr, nc);
    for (std::size_t i = 0; i < nr; ++i) {
        for (std::size_t j = 0; j < nc; ++j) {
            b(i, j) = (*this)(r0 + i, c0 + j);
        }
    }
    return b;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& src) {
    if (r0 + src.rows_ > rows_ || c0 + src.cols_ > cols_) {
        throw DimensionError("Matrix::set_block out of range");
    }
    for (std::size_t i = 0; i < src.rows_; ++i) {
        for (std::size_t j = 0; j < src.cols_; ++j) {
            (*this)(r0 + i, c0 + j) = src(i, j);
        }
    }
}

Matrix Matrix::select(std::span<const std::size_t> row_idx, std::span<const std::size_t> col_idx) const {
    Matrix s(row_idx.size(), col_idx.size());
    for (std::size_t i = 0; i < row_idx.size(); ++i) {
        for (std::size_t j = 0; j < col_idx.size(); ++j) {
            if (row_idx[i] >= rows_ || col_idx[j] >= cols_) {
                throw DimensionError("Matrix::select index out of range");
            }
            s(i, j) = (*this)(row_idx[i], col_idx[j]);
        }
    }
    return s;
}

Vector Matrix::col_vector(std::size_t c) const {
    Vector v(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        v[i] = (*this)(i, c);
    }
    return v;
}

bool Matrix::is_finite() const { return all_finite(data_); }

Matrix& Matrix::operator+=(const Matrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_) {
        throw DimensionError("Matrix +: shape mismatch");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += o.data_[i];
    }
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_) {
        throw DimensionError("Matrix -: shape mismatch");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] -= o.data_[i];
    }
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (auto& v : data_) {
        v *= s;
    }
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("Matrix *: inner dimension mismatch");
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < b.cols(); ++j) {
                c(i, j) += aik * b(k, j);
            }
        }
    }
    return c;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw DimensionError("Matrix * vector: dimension mismatch");
    }
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        const auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            s += r[j] * x[j];
        }
        y[i] = s;
    }
    return y;
}

double norm_inf(const Matrix& a) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (double v : a.row(i)) {
            s += std::abs(v);
        }
        best = std::max(best, s);
    }
    return best;
}

double norm_inf(std::span<const double> v) {
    double best = 0.0;
    for (double x : v) {
        best = std::max(best, std::abs(x));
    }
    return best;
}

double norm_one(const Matrix& a) {
    double best = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) {
            s += std::abs(a(i, j));
        }
        best = std::max(best, s);
    }
    return best;
}

double max_abs(const Matrix& a) { return norm_inf(a.data()); }

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Matrix solve_linear(const Matrix& a, const Matrix& b, const LinalgTolerances& tol) {
    require_square(a, "solve_linear");
    if (b.rows() != a.rows()) {
        throw DimensionError("solve_linear: right-hand side has " + std::to_string(b.rows()) + " rows, expected " +
                             std::to_string(a.rows()));
    }
    require_finite(a, "solve_linear");
    require_finite(b, "solve_linear");

    const std::size_t n = a.rows();
    const std::size_t k = b.cols();
    Matrix lu = a;
    Matrix x = b;

    double max_row = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        max_row = std::max(max_row, norm_inf(a.row(i)));
    }
    const double threshold = tol.singular_pivot * max_row;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(lu(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(lu(r, col)) > best) {
                best = std::abs(lu(r, col));
                piv = r;
            }
        }
        if (best <= threshold || best == 0.0) {
            throw SingularMatrixError("solve_linear: pivot " + std::to_string(best) + " below threshold in column " +
                                      std::to_string(col));
        }
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(lu(col, j), lu(piv, j));
            }
            for (std::size_t j = 0; j < k; ++j) {
                std::swap(x(col, j), x(piv, j));
            }
        }
        const double inv = 1.0 / lu(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = lu(r, col) * inv;
            if (factor == 0.0) {
                continue;
            }
            lu(r, col) = 0.0;
            for (std::size_t j = col + 1; j < n; ++j) {
                lu(r, j) -= factor * lu(col, j);
            }
            for (std::size_t j = 0; j < k; ++j) {
                x(r, j) -= factor * x(col, j);
            }
        }
    }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t j = 0; j < k; ++j) {
            double s = x(ii, j);
            for (std::size_t c = ii + 1; c < n; ++c) {
                s -= lu(ii, c) * x(c, j);
            }
            x(ii, j) = s / lu(ii, ii);
        }
    }
    return x;
}

Vector solve_linear(const Matrix& a, std::span<const double> b, const LinalgTolerances& tol) {
    return solve_linear(a, Matrix::column(b), tol).col_vector(0);
}

Matrix matrix_exponential(const Matrix& a) {
    require_square(a, "matrix_exponential");
    require_finite(a, "matrix_exponential");
    const std::size_t n = a.rows();
    if (n == 0) {
        return {};
    }

    // Scale so that ||a / 2^s||_1 <= 1/2; the order-13 remainder is then
    // below 0.5^14 / 14! ~ 7e-16.
    const double norm = norm_one(a);
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm))) + 1;
    }
    const Matrix scaled = std::ldexp(1.0, -squarings) * a;

    constexpr int kOrder = 13;
    const Matrix eye = Matrix::identity(n);
    Matrix result = eye;
    for (int k = kOrder; k >= 1; --k) {
        result = eye + (1.0 / k) * (scaled * result);
    }
    for (int i = 0; i < squarings; ++i) {
        result = result * result;
    }
    return result;
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
    require_finite(a, "kronecker");
    require_finite(b, "kronecker");
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double aij = a(i, j);
            for (std::size_t p = 0; p < b.rows(); ++p) {
                for (std::size_t q = 0; q < b.cols(); ++q) {
                    k(i * b.rows() + p, j * b.cols() + q) = aij * b(p, q);
                }
            }
        }
    }
    return k;
}

Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q, const LinalgTolerances& tol) {
    require_square(a, "solve_discrete_lyapunov");
    require_square(q, "solve_discrete_lyapunov");
    if (a.rows() != q.rows()) {
        throw DimensionError("solve_discrete_lyapunov: a and q differ in size");
    }
    require_finite(a, "solve_discrete_lyapunov");
    require_finite(q, "solve_discrete_lyapunov");
    const std::size_t n = a.rows();

    // Row-major vec: vec(a X a^T) = (a (x) a) vec(X).
    Matrix op = kronecker(a, a) - Matrix::identity(n * n);
    Vector rhs(q.data().begin(), q.data().end());
    for (auto& v : rhs) {
        v = -v;
    }
    Vector vec_x;
    try {
        vec_x = solve_linear(op, rhs, tol);
    } catch (const SingularMatrixError&) {
        throw UnstableSystemError("solve_discrete_lyapunov: a has an eigenvalue on or near the unit circle");
    }

    Matrix x(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            x(i, j) = 0.5 * (vec_x[i * n + j] + vec_x[j * n + i]);
        }
    }
    // For stable a and PSD q the solution is PSD; anything else means |lambda| > 1.
    if (is_positive_semidefinite(q, tol) && !is_positive_semidefinite(x, tol)) {
        throw UnstableSystemError("solve_discrete_lyapunov: a is not Schur stable (solution indefinite)");
    }
    return x;
}

std::optional<Matrix> cholesky(const Matrix& m, double shift) {
    require_square(m, "cholesky");
    const std::size_t n = m.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j) + shift;
        for (std::size_t k = 0; k < j; ++k) {
            d -= l(j, k) * l(j, k);
        }
        if (!(d > 0.0)) {
            return std::nullopt;
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                s -= l(i, k) * l(j, k);
            }
            l(i, j) = s / ljj;
        }
    }
    return l;
}

bool is_symmetric(const Matrix& m, double tol) {
    if (!m.square()) {
        return false;
    }
    const double scale = std::max(1.0, max_abs(m));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = i + 1; j < m.cols(); ++j) {
            if (std::abs(m(i, j) - m(j, i)) > tol * scale) {
                return false;
            }
        }
    }
    return true;
}

bool is_positive_semidefinite(const Matrix& m, const LinalgTolerances& tol) {
    if (!is_symmetric(m, std::max(tol.symmetry, 1e-9))) {
        return false;
    }
    return cholesky(m, tol.psd_shift * std::max(1.0, max_abs(m))).has_value();
}

bool is_positive_definite(const Matrix& m) { return is_symmetric(m) && cholesky(m).has_value(); }

std::string to_string(const Matrix& m) {
    std::ostringstream os;
    os.precision(10);
    os << "[";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        os << (i ? "; " : "");
        for (std::size_t j = 0; j < m.cols(); ++j) {
            os << (j ? ", " : "") << m(i, j);
        }
    }
    os << "]";
    return os.str();
}

}  // namespace gridmpc
