#include "ledt/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace ledt {

namespace {

double eval_scalar(const std::function<ad::Var(const ad::Var&)>& loss, const Mat& point) {
    const ad::Var out = loss(ad::constant(point));
    if (out->value.rows != 1 || out->value.cols != 1)
        throw std::invalid_argument("grad_check: loss must return a 1x1 scalar");
    const double v = out->value(0, 0);
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss value");
    return v;
}

}  // namespace

double grad_check(const std::function<ad::Var(const ad::Var&)>& loss,
                  const Mat& point, double eps) {
    if (!(eps > 0.0 && eps <= 1e-2)) throw std::invalid_argument("grad_check: eps must be in (0, 1e-2]");

    ad::Var p = ad::param(point);
    ad::Var out = loss(p);
    if (out->value.rows != 1 || out->value.cols != 1)
        throw std::invalid_argument("grad_check: loss must return a 1x1 scalar");
    if (!std::isfinite(out->value(0, 0))) throw std::runtime_error("grad_check: non-finite loss value");
    ad::backward(out);
    const Mat analytic = p->grad;

    double max_err = 0.0;
    Mat x = point;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x.data[i];
        x.data[i] = orig + eps;
        const double fp = eval_scalar(loss, x);
        x.data[i] = orig - eps;
        const double fm = eval_scalar(loss, x);
        x.data[i] = orig;
        const double fd = (fp - fm) / (2.0 * eps);
        const double err = std::fabs(analytic.data[i] - fd) / std::max(1.0, std::fabs(fd));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

}  // namespace ledt
