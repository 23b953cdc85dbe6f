#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ledt/mat.hpp"

namespace ledt::ad {

// Reverse-mode autodiff over Mat values. Each operation records its parents
// and a backward rule; backward() walks the graph in reverse topological
// order, visiting each node exactly once. Graphs are built per evaluation
// and discarded; call backward() at most once per graph.
struct DiffNode {
    Mat value;
    Mat grad;  // same shape as value, zero until backward()
    bool requires_grad = false;
    std::vector<std::shared_ptr<DiffNode>> parents;
    std::function<void(DiffNode&)> backward_rule;  // accumulates into parents
};

using Var = std::shared_ptr<DiffNode>;

Var constant(Mat value);
Var param(Mat value);

// Root must be a 1x1 scalar.
void backward(const Var& root);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double k);
// Elementwise k*x + c.
Var affine(const Var& a, double k, double c);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, int rows, int cols);
// Broadcast-add a 1xC bias row to every row of a.
Var add_row(const Var& a, const Var& bias);
Var softmax_rows(const Var& a);
Var leaky_relu(const Var& a, double slope);
// Soft threshold sign(x) * max(|x| - k, 0); gradient zero in the dead zone.
Var soft_threshold(const Var& a, double k);
Var l2_normalize_rows(const Var& a);
// Select rows by index; backward scatter-adds.
Var gather_rows(const Var& a, const std::vector<int>& idx);

// Scalar reductions (1x1 results).
Var sum_sq(const Var& a);
Var l2_norm(const Var& a);   // gradient defined as 0 at the origin
Var l1_norm(const Var& a);   // subgradient 0 at exact zeros
Var mean_all(const Var& a);
// Cosine similarity of the flattened matrices. Throws on zero norm. The
// denominator is sqrt(sum_sq(a) * sum_sq(b)) so identical inputs give
// exactly 1 and exact negations give exactly -1.
Var cosine_all(const Var& a, const Var& b);
// Mean over rows of -log softmax(row)[target].
Var cross_entropy_rows(const Var& logits, const std::vector<int>& targets);

// Value blocked from the gradient tape.
Var stopgrad(const Var& a);
// Forward the given value, route the incoming gradient unchanged to `route`.
Var straight_through(const Mat& forward_value, const Var& route);

}  // namespace ledt::ad
