#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace toposim::detail {

// Dense row-major matrix. Small and boring on purpose; the heavy all-pairs
// work elsewhere uses packed raw arrays, this type backs PCA and OLS.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::size_t rows_, cols_;
    std::vector<double> data_;
};

struct SymmetricEigen {
    std::vector<double> values;   // descending
    Matrix vectors;               // column j is the eigenvector for values[j]
};

// Cyclic Jacobi for symmetric matrices. Fine for the small covariance and
// cross-product matrices this library needs (dimension ~100 at most).
inline SymmetricEigen jacobi_eigen(Matrix a, int max_sweeps = 100) {
    const std::size_t n = a.rows();
    if (n != a.cols()) throw std::invalid_argument("jacobi_eigen: matrix must be square");
    Matrix v(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

    SymmetricEigen out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = diag[order[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

struct LeastSquares {
    std::vector<double> beta;
    double rss = 0.0;
    bool rank_deficient = false;
    std::size_t deficient_column = 0;  // valid when rank_deficient
};

// Householder QR least squares. Destroys local copies; X is n x p with
// n >= p expected. Rank deficiency is flagged, not thrown, so callers can
// name the offending model term.
inline LeastSquares qr_least_squares(const Matrix& x_in, const std::vector<double>& y_in) {
    const std::size_t n = x_in.rows();
    const std::size_t p = x_in.cols();
    if (y_in.size() != n) throw std::invalid_argument("qr_least_squares: size mismatch");
    if (n < p) throw std::invalid_argument("qr_least_squares: more columns than rows");

    Matrix x = x_in;
    std::vector<double> y = y_in;

    // column norms for the relative rank tolerance
    double max_col_norm = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x(i, j) * x(i, j);
        max_col_norm = std::max(max_col_norm, std::sqrt(s));
    }
    const double tol = std::max(1e-300, max_col_norm * 1e-10 * static_cast<double>(n));

    LeastSquares out;
    for (std::size_t k = 0; k < p; ++k) {
        double norm = 0.0;
        for (std::size_t i = k; i < n; ++i) norm += x(i, k) * x(i, k);
        norm = std::sqrt(norm);
        if (norm < tol) {
            out.rank_deficient = true;
            out.deficient_column = k;
            return out;
        }
        double alpha = (x(k, k) > 0.0) ? -norm : norm;
        // Householder vector stored in-place below the diagonal
        double vkk = x(k, k) - alpha;
        x(k, k) = alpha;
        // apply H = I - 2 v v^T / (v^T v) to remaining columns and to y
        double vtv = vkk * vkk;
        for (std::size_t i = k + 1; i < n; ++i) vtv += x(i, k) * x(i, k);
        if (vtv > 0.0) {
            for (std::size_t j = k + 1; j < p; ++j) {
                double dot = vkk * x(k, j);
                for (std::size_t i = k + 1; i < n; ++i) dot += x(i, k) * x(i, j);
                double f = 2.0 * dot / vtv;
                x(k, j) -= f * vkk;
                for (std::size_t i = k + 1; i < n; ++i) x(i, j) -= f * x(i, k);
            }
            double dot = vkk * y[k];
            for (std::size_t i = k + 1; i < n; ++i) dot += x(i, k) * y[i];
            double f = 2.0 * dot / vtv;
            y[k] -= f * vkk;
            for (std::size_t i = k + 1; i < n; ++i) y[i] -= f * x(i, k);
        }
    }

    // back substitution on R
    out.beta.assign(p, 0.0);
    for (std::size_t jj = p; jj-- > 0;) {
        double s = y[jj];
        for (std::size_t j2 = jj + 1; j2 < p; ++j2) s -= x(jj, j2) * out.beta[j2];
        if (std::abs(x(jj, jj)) < tol) {
            out.rank_deficient = true;
            out.deficient_column = jj;
            return out;
        }
        out.beta[jj] = s / x(jj, jj);
    }

    // residual sum of squares from the transformed rhs tail
    double rss = 0.0;
    for (std::size_t i = p; i < n; ++i) rss += y[i] * y[i];
    out.rss = rss;
    return out;
}

} // namespace toposim::detail
