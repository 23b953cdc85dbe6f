#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace ledt {

// Dense row-major matrix of 64-bit floats. All exported operations keep
// entries finite; operations that can produce non-finite values check their
// result and throw std::runtime_error.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    Mat() = default;
    Mat(int r, int c, double fill = 0.0);

    double& operator()(int r, int c) {
        return data[static_cast<std::size_t>(r) * cols + c];
    }
    double operator()(int r, int c) const {
        return data[static_cast<std::size_t>(r) * cols + c];
    }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

Mat mat_from(int rows, int cols, std::initializer_list<double> vals);
Mat identity(int n);

bool all_finite(const Mat& m);
void require_finite(const Mat& m, const char* where);
void require_same_shape(const Mat& a, const Mat& b, const char* where);

Mat add(const Mat& a, const Mat& b);
Mat sub(const Mat& a, const Mat& b);
Mat scale(const Mat& a, double k);
Mat hadamard(const Mat& a, const Mat& b);
Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);
Mat reshape(const Mat& a, int rows, int cols);
Mat get_row(const Mat& a, int r);
void set_row(Mat& a, int r, const Mat& row);

// Row-wise softmax, stabilized by row-max subtraction so saturated inputs
// stay exact. Throws on non-finite input.
Mat softmax_rows(const Mat& x);

double frob_norm(const Mat& a);
double sum_sq(const Mat& a);
double max_abs(const Mat& a);
double max_abs_diff(const Mat& a, const Mat& b);
double dot_all(const Mat& a, const Mat& b);
double trace(const Mat& a);

}  // namespace ledt
