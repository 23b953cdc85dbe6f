#include "ledt/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ledt {

void adam_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
               AdamState& state, const AdamConfig& cfg) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: param/grad count mismatch");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");

    if (state.t == 0) {
        state.m.clear();
        state.v.clear();
        for (const Mat* p : params) {
            state.m.emplace_back(p->rows, p->cols);
            state.v.emplace_back(p->rows, p->cols);
        }
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state size mismatch");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

    for (std::size_t k = 0; k < params.size(); ++k) {
        Mat& p = *params[k];
        const Mat& g = *grads[k];
        require_same_shape(p, g, "adam_step");
        require_same_shape(p, state.m[k], "adam_step state");
        require_finite(g, "adam_step gradient");
        Mat& m = state.m[k];
        Mat& v = state.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace ledt
