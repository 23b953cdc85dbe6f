#include "ledt/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace ledt::ad {

namespace {

Var make_node(Mat value, std::vector<Var> parents, std::function<void(DiffNode&)> rule) {
    auto n = std::make_shared<DiffNode>();
    n->requires_grad = false;
    for (const Var& p : parents)
        if (p && p->requires_grad) n->requires_grad = true;
    n->value = std::move(value);
    n->grad = Mat(n->value.rows, n->value.cols);
    n->parents = std::move(parents);
    if (n->requires_grad) n->backward_rule = std::move(rule);
    return n;
}

void accumulate(const Var& p, const Mat& g) {
    if (!p->requires_grad) return;
    require_same_shape(p->grad, g, "autodiff accumulate");
    for (std::size_t i = 0; i < g.size(); ++i) p->grad.data[i] += g.data[i];
}

}  // namespace

Var constant(Mat value) {
    auto n = std::make_shared<DiffNode>();
    n->value = std::move(value);
    n->grad = Mat(n->value.rows, n->value.cols);
    n->requires_grad = false;
    return n;
}

Var param(Mat value) {
    auto n = std::make_shared<DiffNode>();
    n->value = std::move(value);
    n->grad = Mat(n->value.rows, n->value.cols);
    n->requires_grad = true;
    return n;
}

void backward(const Var& root) {
    if (!root) throw std::invalid_argument("backward: null root");
    if (root->value.rows != 1 || root->value.cols != 1)
        throw std::invalid_argument("backward: root must be a 1x1 scalar");

    // Iterative post-order DFS; `order` lists parents before consumers.
    std::vector<DiffNode*> order;
    std::unordered_set<DiffNode*> visited{root.get()};
    struct Frame {
        DiffNode* node;
        std::size_t next;
    };
    std::vector<Frame> stack{{root.get(), 0}};
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.node->parents.size()) {
            DiffNode* p = f.node->parents[f.next++].get();
            if (p && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root->grad(0, 0) = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        DiffNode* n = *it;
        if (n->requires_grad && n->backward_rule) n->backward_rule(*n);
    }
}

Var add(const Var& a, const Var& b) {
    Mat v = ledt::add(a->value, b->value);
    return make_node(std::move(v), {a, b}, [a, b](DiffNode& n) {
        accumulate(a, n.grad);
        accumulate(b, n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    Mat v = ledt::sub(a->value, b->value);
    return make_node(std::move(v), {a, b}, [a, b](DiffNode& n) {
        accumulate(a, n.grad);
        accumulate(b, ledt::scale(n.grad, -1.0));
    });
}

Var scale(const Var& a, double k) { return affine(a, k, 0.0); }

Var affine(const Var& a, double k, double c) {
    Mat v(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < v.size(); ++i) v.data[i] = k * a->value.data[i] + c;
    return make_node(std::move(v), {a}, [a, k](DiffNode& n) {
        accumulate(a, ledt::scale(n.grad, k));
    });
}

Var matmul(const Var& a, const Var& b) {
    Mat v = ledt::matmul(a->value, b->value);
    return make_node(std::move(v), {a, b}, [a, b](DiffNode& n) {
        if (a->requires_grad) accumulate(a, ledt::matmul(n.grad, ledt::transpose(b->value)));
        if (b->requires_grad) accumulate(b, ledt::matmul(ledt::transpose(a->value), n.grad));
    });
}

Var transpose(const Var& a) {
    return make_node(ledt::transpose(a->value), {a}, [a](DiffNode& n) {
        accumulate(a, ledt::transpose(n.grad));
    });
}

Var reshape(const Var& a, int rows, int cols) {
    const int pr = a->value.rows, pc = a->value.cols;
    return make_node(ledt::reshape(a->value, rows, cols), {a}, [a, pr, pc](DiffNode& n) {
        accumulate(a, ledt::reshape(n.grad, pr, pc));
    });
}

Var add_row(const Var& a, const Var& bias) {
    if (bias->value.rows != 1 || bias->value.cols != a->value.cols)
        throw std::invalid_argument("add_row: bias must be 1 x cols");
    Mat v = a->value;
    for (int i = 0; i < v.rows; ++i)
        for (int j = 0; j < v.cols; ++j) v(i, j) += bias->value(0, j);
    return make_node(std::move(v), {a, bias}, [a, bias](DiffNode& n) {
        accumulate(a, n.grad);
        if (bias->requires_grad) {
            Mat g(1, n.grad.cols);
            for (int i = 0; i < n.grad.rows; ++i)
                for (int j = 0; j < n.grad.cols; ++j) g(0, j) += n.grad(i, j);
            accumulate(bias, g);
        }
    });
}

Var softmax_rows(const Var& a) {
    Mat y = ledt::softmax_rows(a->value);
    Mat ycopy = y;
    return make_node(std::move(y), {a}, [a, ycopy](DiffNode& n) {
        Mat g(n.grad.rows, n.grad.cols);
        for (int i = 0; i < n.grad.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < n.grad.cols; ++j) dot += n.grad(i, j) * ycopy(i, j);
            for (int j = 0; j < n.grad.cols; ++j)
                g(i, j) = ycopy(i, j) * (n.grad(i, j) - dot);
        }
        accumulate(a, g);
    });
}

Var leaky_relu(const Var& a, double slope) {
    Mat v(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = a->value.data[i];
        v.data[i] = x >= 0.0 ? x : slope * x;
    }
    return make_node(std::move(v), {a}, [a, slope](DiffNode& n) {
        Mat g(n.grad.rows, n.grad.cols);
        for (std::size_t i = 0; i < g.size(); ++i)
            g.data[i] = n.grad.data[i] * (a->value.data[i] >= 0.0 ? 1.0 : slope);
        accumulate(a, g);
    });
}

Var soft_threshold(const Var& a, double k) {
    if (k < 0.0) throw std::invalid_argument("soft_threshold: negative threshold");
    Mat v(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = a->value.data[i];
        const double m = std::fabs(x) - k;
        v.data[i] = m > 0.0 ? (x > 0.0 ? m : -m) : 0.0;
    }
    return make_node(std::move(v), {a}, [a, k](DiffNode& n) {
        Mat g(n.grad.rows, n.grad.cols);
        for (std::size_t i = 0; i < g.size(); ++i)
            g.data[i] = std::fabs(a->value.data[i]) > k ? n.grad.data[i] : 0.0;
        accumulate(a, g);
    });
}

Var l2_normalize_rows(const Var& a) {
    Mat y(a->value.rows, a->value.cols);
    std::vector<double> norms(a->value.rows);
    for (int i = 0; i < y.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < y.cols; ++j) s += a->value(i, j) * a->value(i, j);
        const double n = std::sqrt(s);
        if (n == 0.0) throw std::runtime_error("l2_normalize_rows: zero-norm row");
        norms[i] = n;
        for (int j = 0; j < y.cols; ++j) y(i, j) = a->value(i, j) / n;
    }
    Mat ycopy = y;
    return make_node(std::move(y), {a}, [a, ycopy, norms](DiffNode& n) {
        Mat g(n.grad.rows, n.grad.cols);
        for (int i = 0; i < g.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < g.cols; ++j) dot += n.grad(i, j) * ycopy(i, j);
            for (int j = 0; j < g.cols; ++j)
                g(i, j) = (n.grad(i, j) - dot * ycopy(i, j)) / norms[i];
        }
        accumulate(a, g);
    });
}

Var gather_rows(const Var& a, const std::vector<int>& idx) {
    Mat v(static_cast<int>(idx.size()), a->value.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= a->value.rows)
            throw std::invalid_argument("gather_rows: index out of range");
        for (int j = 0; j < v.cols; ++j) v(static_cast<int>(r), j) = a->value(idx[r], j);
    }
    return make_node(std::move(v), {a}, [a, idx](DiffNode& n) {
        Mat g(a->value.rows, a->value.cols);
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (int j = 0; j < g.cols; ++j) g(idx[r], j) += n.grad(static_cast<int>(r), j);
        accumulate(a, g);
    });
}

Var sum_sq(const Var& a) {
    Mat v(1, 1);
    v(0, 0) = ledt::sum_sq(a->value);
    return make_node(std::move(v), {a}, [a](DiffNode& n) {
        accumulate(a, ledt::scale(a->value, 2.0 * n.grad(0, 0)));
    });
}

Var l2_norm(const Var& a) {
    Mat v(1, 1);
    const double nrm = ledt::frob_norm(a->value);
    v(0, 0) = nrm;
    return make_node(std::move(v), {a}, [a, nrm](DiffNode& n) {
        if (nrm == 0.0) return;
        accumulate(a, ledt::scale(a->value, n.grad(0, 0) / nrm));
    });
}

Var l1_norm(const Var& a) {
    Mat v(1, 1);
    double s = 0.0;
    for (double x : a->value.data) s += std::fabs(x);
    v(0, 0) = s;
    return make_node(std::move(v), {a}, [a](DiffNode& n) {
        Mat g(a->value.rows, a->value.cols);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = a->value.data[i];
            g.data[i] = n.grad(0, 0) * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
        }
        accumulate(a, g);
    });
}

Var mean_all(const Var& a) {
    if (a->value.size() == 0) throw std::invalid_argument("mean_all: empty matrix");
    Mat v(1, 1);
    double s = 0.0;
    for (double x : a->value.data) s += x;
    const double inv = 1.0 / static_cast<double>(a->value.size());
    v(0, 0) = s * inv;
    return make_node(std::move(v), {a}, [a, inv](DiffNode& n) {
        accumulate(a, Mat(a->value.rows, a->value.cols, n.grad(0, 0) * inv));
    });
}

Var cosine_all(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "cosine_all");
    const double sa = ledt::sum_sq(a->value);
    const double sb = ledt::sum_sq(b->value);
    const double denom = std::sqrt(sa * sb);
    if (denom == 0.0) throw std::runtime_error("cosine_all: zero-norm input");
    const double sab = ledt::dot_all(a->value, b->value);
    const double c = sab / denom;
    Mat v(1, 1);
    v(0, 0) = c;
    return make_node(std::move(v), {a, b}, [a, b, sa, sb, denom, c](DiffNode& n) {
        const double g = n.grad(0, 0);
        if (a->requires_grad) {
            Mat ga(a->value.rows, a->value.cols);
            for (std::size_t i = 0; i < ga.size(); ++i)
                ga.data[i] = g * (b->value.data[i] / denom - c * a->value.data[i] / sa);
            accumulate(a, ga);
        }
        if (b->requires_grad) {
            Mat gb(b->value.rows, b->value.cols);
            for (std::size_t i = 0; i < gb.size(); ++i)
                gb.data[i] = g * (a->value.data[i] / denom - c * b->value.data[i] / sb);
            accumulate(b, gb);
        }
    });
}

Var cross_entropy_rows(const Var& logits, const std::vector<int>& targets) {
    const Mat& x = logits->value;
    if (static_cast<int>(targets.size()) != x.rows)
        throw std::invalid_argument("cross_entropy_rows: target count mismatch");
    for (int t : targets)
        if (t < 0 || t >= x.cols) throw std::invalid_argument("cross_entropy_rows: target out of range");
    require_finite(x, "cross_entropy_rows");

    double loss = 0.0;
    for (int i = 0; i < x.rows; ++i) {
        double mx = x(i, 0);
        for (int j = 1; j < x.cols; ++j) mx = std::max(mx, x(i, j));
        double sum = 0.0;
        for (int j = 0; j < x.cols; ++j) sum += std::exp(x(i, j) - mx);
        loss += mx + std::log(sum) - x(i, targets[i]);
    }
    Mat v(1, 1);
    v(0, 0) = loss / x.rows;
    return make_node(std::move(v), {logits}, [logits, targets](DiffNode& n) {
        const Mat p = ledt::softmax_rows(logits->value);
        Mat g = ledt::scale(p, n.grad(0, 0) / p.rows);
        for (int i = 0; i < g.rows; ++i) g(i, targets[i]) -= n.grad(0, 0) / g.rows;
        accumulate(logits, g);
    });
}

Var stopgrad(const Var& a) { return constant(a->value); }

Var straight_through(const Mat& forward_value, const Var& route) {
    require_same_shape(forward_value, route->value, "straight_through");
    return make_node(forward_value, {route}, [route](DiffNode& n) {
        accumulate(route, n.grad);
    });
}

}  // namespace ledt::ad
