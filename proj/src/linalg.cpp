#include "ledt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ledt {

Mat cholesky(const Mat& spd) {
    if (spd.rows != spd.cols) throw std::invalid_argument("cholesky: matrix not square");
    const int n = spd.rows;
    Mat l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = spd(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s))
                    throw std::runtime_error("cholesky: matrix not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

void jacobi_eigh(const Mat& sym, std::vector<double>& eigvals, Mat& eigvecs) {
    if (sym.rows != sym.cols) throw std::invalid_argument("jacobi_eigh: matrix not square");
    require_finite(sym, "jacobi_eigh");
    const int n = sym.rows;
    Mat a = sym;
    // Symmetrize defensively; rounding in callers can leave tiny asymmetry.
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) {
            const double m = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = m;
            a(j, i) = m;
        }
    Mat v = identity(n);

    auto off_norm = [&]() {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    const double scale = std::max(1.0, max_abs(a));
    for (int sweep = 0; sweep < 128 && off_norm() > 1e-14 * scale; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) <= 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return a(i, i) < a(j, j); });
    eigvals.assign(n, 0.0);
    eigvecs = Mat(n, n);
    for (int j = 0; j < n; ++j) {
        eigvals[j] = a(order[j], order[j]);
        for (int i = 0; i < n; ++i) eigvecs(i, j) = v(i, order[j]);
    }
}

static Mat eig_rebuild(const Mat& v, const std::vector<double>& w) {
    const int n = v.rows;
    Mat out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += v(i, k) * w[k] * v(j, k);
            out(i, j) = s;
            out(j, i) = s;
        }
    return out;
}

Mat sqrt_psd(const Mat& sym, double neg_tol) {
    std::vector<double> w;
    Mat v;
    jacobi_eigh(sym, w, v);
    std::vector<double> r(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] < -neg_tol) throw std::runtime_error("sqrt_psd: matrix not PSD within tolerance");
        r[i] = std::sqrt(std::max(w[i], 0.0));
    }
    return eig_rebuild(v, r);
}

Mat psd_factor(const Mat& sym, double neg_tol) {
    std::vector<double> w;
    Mat v;
    jacobi_eigh(sym, w, v);
    const int n = sym.rows;
    Mat f(n, n);
    for (int j = 0; j < n; ++j) {
        if (w[j] < -neg_tol) throw std::runtime_error("psd_factor: matrix not PSD within tolerance");
        const double s = std::sqrt(std::max(w[j], 0.0));
        for (int i = 0; i < n; ++i) f(i, j) = v(i, j) * s;
    }
    return f;
}

Mat solve_spd(const Mat& spd, const Mat& b) {
    if (spd.rows != b.rows) throw std::invalid_argument("solve_spd: dimension mismatch");
    const Mat l = cholesky(spd);
    const int n = spd.rows;
    Mat x = b;
    // Forward substitution L y = b, then back substitution L^T x = y.
    for (int col = 0; col < b.cols; ++col) {
        for (int i = 0; i < n; ++i) {
            double s = x(i, col);
            for (int k = 0; k < i; ++k) s -= l(i, k) * x(k, col);
            x(i, col) = s / l(i, i);
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = x(i, col);
            for (int k = i + 1; k < n; ++k) s -= l(k, i) * x(k, col);
            x(i, col) = s / l(i, i);
        }
    }
    return x;
}

Mat pinv_full_col_rank(const Mat& g) {
    if (g.rows < g.cols) throw std::invalid_argument("pinv_full_col_rank: matrix has more columns than rows");
    const Mat gt = transpose(g);
    const Mat gram = matmul(gt, g);
    return solve_spd(gram, gt);
}

Mat orthonormal_rows(const Mat& a) {
    Mat q = a;
    for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i < q.rows; ++i) {
            for (int j = 0; j < i; ++j) {
                double d = 0.0;
                for (int k = 0; k < q.cols; ++k) d += q(i, k) * q(j, k);
                for (int k = 0; k < q.cols; ++k) q(i, k) -= d * q(j, k);
            }
            double n = 0.0;
            for (int k = 0; k < q.cols; ++k) n += q(i, k) * q(i, k);
            n = std::sqrt(n);
            if (n < 1e-12) throw std::runtime_error("orthonormal_rows: rank deficient input");
            for (int k = 0; k < q.cols; ++k) q(i, k) /= n;
        }
    }
    return q;
}

}  // namespace ledt
