#include "ledt/mat.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ledt {

Mat::Mat(int r, int c, double fill) : rows(r), cols(c) {
    if (r < 0 || c < 0) throw std::invalid_argument("Mat: negative dimensions");
    data.assign(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill);
}

Mat mat_from(int rows, int cols, std::initializer_list<double> vals) {
    Mat m(rows, cols);
    if (vals.size() != m.size()) throw std::invalid_argument("mat_from: value count mismatch");
    std::copy(vals.begin(), vals.end(), m.data.begin());
    return m;
}

Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool all_finite(const Mat& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_finite(const Mat& m, const char* where) {
    if (!all_finite(m)) throw std::runtime_error(std::string(where) + ": non-finite entries");
}

void require_same_shape(const Mat& a, const Mat& b, const char* where) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

Mat add(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "add");
    Mat out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    return out;
}

Mat sub(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "sub");
    Mat out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] - b.data[i];
    return out;
}

Mat scale(const Mat& a, double k) {
    Mat out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * k;
    return out;
}

Mat hadamard(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "hadamard");
    Mat out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    return out;
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimension mismatch");
    Mat out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
            double* orow = &out.data[static_cast<std::size_t>(i) * out.cols];
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Mat transpose(const Mat& a) {
    Mat out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
    return out;
}

Mat reshape(const Mat& a, int rows, int cols) {
    if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) != a.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Mat out = a;
    out.rows = rows;
    out.cols = cols;
    return out;
}

Mat get_row(const Mat& a, int r) {
    if (r < 0 || r >= a.rows) throw std::invalid_argument("get_row: index out of range");
    Mat out(1, a.cols);
    for (int j = 0; j < a.cols; ++j) out(0, j) = a(r, j);
    return out;
}

void set_row(Mat& a, int r, const Mat& row) {
    if (r < 0 || r >= a.rows) throw std::invalid_argument("set_row: index out of range");
    if (row.rows != 1 || row.cols != a.cols) throw std::invalid_argument("set_row: shape mismatch");
    for (int j = 0; j < a.cols; ++j) a(r, j) = row(0, j);
}

Mat softmax_rows(const Mat& x) {
    require_finite(x, "softmax_rows");
    Mat out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        double mx = x(i, 0);
        for (int j = 1; j < x.cols; ++j) mx = std::max(mx, x(i, j));
        double sum = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            const double e = std::exp(x(i, j) - mx);
            out(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < x.cols; ++j) out(i, j) /= sum;
    }
    return out;
}

double frob_norm(const Mat& a) { return std::sqrt(sum_sq(a)); }

double sum_sq(const Mat& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return s;
}

double max_abs(const Mat& a) {
    double s = 0.0;
    for (double v : a.data) s = std::max(s, std::fabs(v));
    return s;
}

double max_abs_diff(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "max_abs_diff");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::fabs(a.data[i] - b.data[i]));
    return s;
}

double dot_all(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "dot_all");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double trace(const Mat& a) {
    if (a.rows != a.cols) throw std::invalid_argument("trace: matrix not square");
    double s = 0.0;
    for (int i = 0; i < a.rows; ++i) s += a(i, i);
    return s;
}

}  // namespace ledt
