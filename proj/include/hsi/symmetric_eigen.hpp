#pragma once

// Dense symmetric eigensolvers: cyclic Jacobi for small and mid-sized
// matrices, Householder tridiagonalization + implicit QL above a size
// threshold. Both return eigenvalues in nonincreasing order with
// orthonormal eigenvector columns under a fixed sign convention.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hsi/error.hpp"

namespace hsi {

struct SymmetricEigen {
    Eigen::VectorXd values;   ///< nonincreasing
    Eigen::MatrixXd vectors;  ///< column i pairs with values[i]
};

enum class EigenMethod { automatic, jacobi, tridiagonal_ql };

/// Matrices larger than this use the tridiagonal route under
/// EigenMethod::automatic.
inline constexpr Eigen::Index kJacobiMaxDimension = 256;

namespace detail {

inline void sort_and_fix_signs(Eigen::VectorXd &values, Eigen::MatrixXd &vectors) {
    const Eigen::Index n = values.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });
    Eigen::VectorXd sorted_values(n);
    Eigen::MatrixXd sorted_vectors(vectors.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        sorted_values[i] = values[order[static_cast<std::size_t>(i)]];
        sorted_vectors.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
    }
    // largest-magnitude entry positive; ties resolve to the first such entry
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < sorted_vectors.rows(); ++r) {
            const double a = std::abs(sorted_vectors(r, i));
            if (a > best) {
                best = a;
                arg = r;
            }
        }
        if (sorted_vectors(arg, i) < 0) sorted_vectors.col(i) *= -1.0;
    }
    values = std::move(sorted_values);
    vectors = std::move(sorted_vectors);
}

inline double off_diagonal_norm(const Eigen::MatrixXd &a) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

/// Cyclic Jacobi. Stops once the off-diagonal Frobenius norm drops below
/// 1e-12 * ||A||_F; gives up after 100 sweeps.
inline SymmetricEigen jacobi_eigen(Eigen::MatrixXd a) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    const double norm = a.norm();
    const double threshold = 1e-12 * norm;
    int sweep = 0;
    while (norm > 0.0 && off_diagonal_norm(a) > threshold) {
        if (++sweep > 100) throw Error(ErrorKind::numerical, "eigen", "Jacobi did not converge in 100 sweeps");
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                // A <- J^T A J with J the (p,q) plane rotation
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    SymmetricEigen out{a.diagonal(), std::move(v)};
    sort_and_fix_signs(out.values, out.vectors);
    return out;
}

/// Householder reduction to tridiagonal form followed by implicit QL with
/// Wilkinson-style shifts (the EISPACK tred2/tql2 pair).
inline SymmetricEigen tridiagonal_ql_eigen(const Eigen::MatrixXd &a) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd v = a;
    Eigen::VectorXd d(n), e(n);
    for (Eigen::Index j = 0; j < n; ++j) d[j] = v(n - 1, j);

    for (Eigen::Index i = n - 1; i > 0; --i) {
        double scale = 0.0, h = 0.0;
        for (Eigen::Index k = 0; k < i; ++k) scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (Eigen::Index j = 0; j < i; ++j) {
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
                v(j, i) = 0.0;
            }
        } else {
            for (Eigen::Index k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0) g = -g;
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (Eigen::Index j = 0; j < i; ++j) e[j] = 0.0;
            for (Eigen::Index j = 0; j < i; ++j) {
                f = d[j];
                v(j, i) = f;
                g = e[j] + v(j, j) * f;
                for (Eigen::Index k = j + 1; k <= i - 1; ++k) {
                    g += v(k, j) * d[k];
                    e[k] += v(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (Eigen::Index j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (Eigen::Index j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (Eigen::Index j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                for (Eigen::Index k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
                d[j] = v(i - 1, j);
                v(i, j) = 0.0;
            }
        }
        d[i] = h;
    }
    for (Eigen::Index i = 0; i < n - 1; ++i) {
        v(n - 1, i) = v(i, i);
        v(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            for (Eigen::Index k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
            for (Eigen::Index j = 0; j <= i; ++j) {
                double g = 0.0;
                for (Eigen::Index k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
                for (Eigen::Index k = 0; k <= i; ++k) v(k, j) -= g * d[k];
            }
        }
        for (Eigen::Index k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        d[j] = v(n - 1, j);
        v(n - 1, j) = 0.0;
    }
    v(n - 1, n - 1) = 1.0;
    e[0] = 0.0;

    // implicit QL
    for (Eigen::Index i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    double f = 0.0, tst1 = 0.0;
    const double eps = std::ldexp(1.0, -52);
    for (Eigen::Index l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        Eigen::Index m = l;
        while (m < n) {
            if (std::abs(e[m]) <= eps * tst1) break;
            ++m;
        }
        if (m > l) {
            int iter = 0;
            do {
                if (++iter > 60) throw Error(ErrorKind::numerical, "eigen", "QL iteration did not converge");
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (Eigen::Index i = l + 2; i < n; ++i) d[i] -= h;
                f += h;
                p = d[m];
                double c = 1.0, c2 = 1.0, c3 = 1.0, s = 0.0, s2 = 0.0;
                const double el1 = e[l + 1];
                for (Eigen::Index i = m - 1; i >= l; --i) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for (Eigen::Index k = 0; k < n; ++k) {
                        h = v(k, i + 1);
                        v(k, i + 1) = s * v(k, i) + c * h;
                        v(k, i) = c * v(k, i) - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
    SymmetricEigen out{std::move(d), std::move(v)};
    sort_and_fix_signs(out.values, out.vectors);
    return out;
}

}  // namespace detail

/// Eigen-decomposition of a symmetric matrix. Inputs whose asymmetry exceeds
/// 1e-10 * max(1, ||A||_F) are rejected; smaller asymmetry is averaged out.
inline SymmetricEigen symmetric_eigen(const Eigen::MatrixXd &matrix, EigenMethod method = EigenMethod::automatic) {
    if (matrix.rows() != matrix.cols() || matrix.rows() == 0)
        throw Error(ErrorKind::invalid_argument, "eigen", "matrix must be square and non-empty");
    if (!matrix.allFinite()) throw Error(ErrorKind::numerical, "eigen", "matrix contains non-finite entries");
    const double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * std::max(1.0, matrix.norm()))
        throw Error(ErrorKind::invalid_argument, "eigen", "matrix is not symmetric (max |A - A^T| = " + std::to_string(asym) + ")");
    Eigen::MatrixXd sym = 0.5 * (matrix + matrix.transpose());
    if (method == EigenMethod::automatic)
        method = sym.rows() > kJacobiMaxDimension ? EigenMethod::tridiagonal_ql : EigenMethod::jacobi;
    if (sym.rows() == 1) return SymmetricEigen{sym.diagonal(), Eigen::MatrixXd::Identity(1, 1)};
    return method == EigenMethod::jacobi ? detail::jacobi_eigen(std::move(sym)) : detail::tridiagonal_ql_eigen(sym);
}

}  // namespace hsi
