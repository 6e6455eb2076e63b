#pragma once

#include <functional>
#include <vector>

namespace relearn::ad {

// Reverse-mode tape over row-major matrices of doubles. Nodes are created in
// topological order; backward() walks them in reverse. Leaves created with
// constant() do not accumulate gradients, which lets callers skip parameter
// gradients when only input gradients are needed.

struct Var {
    int node = -1;
    bool valid() const { return node >= 0; }
};

class Tape {
public:
    void reset();

    Var input(const double* data, int rows, int cols);     // gradient leaf
    Var constant(const double* data, int rows, int cols);  // no gradient flow
    Var zeros(int rows, int cols, bool needs_grad = false);

    int rows(Var v) const { return nodes_[v.node].rows; }
    int cols(Var v) const { return nodes_[v.node].cols; }
    const double* val(Var v) const { return nodes_[v.node].val.data(); }
    double* val(Var v) { return nodes_[v.node].val.data(); }
    const double* grad(Var v) const { return nodes_[v.node].grad.data(); }
    double scalar(Var v) const { return nodes_[v.node].val[0]; }

    // --- elementwise / structural ---
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);             // hadamard
    Var scale(Var a, double s);
    Var add_rowvec(Var a, Var row);    // a[m×n] + row[1×n] per row
    Var relu(Var a);
    Var concat_cols(Var a, Var b);
    Var stack_rows(const std::vector<Var>& rows);  // each [1×n]
    Var slice_row(Var a, int row);
    Var broadcast_rows(Var row, int m);
    Var mean_rows(Var a);              // [m×n] -> [1×n]

    Var slice_rows(Var a, int row0, int nrows);
    Var vstack(Var a, Var b);
    Var reshape(Var a, int rows, int cols);  // same element count, row-major

    // --- linear algebra ---
    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);       // a · bᵀ
    Var softmax_rows(Var a);
    Var maxpool_rows(Var a);           // [m×n] -> [1×n], per-column max

    // --- reductions / scalars ---
    Var sum(Var a);                        // -> [1×1]
    Var sum_squares(Var a);                // -> [1×1]
    Var mean_squares(Var a);               // -> [1×1]
    Var norm_fro(Var a);                   // -> [1×1], subgradient 0 at 0
    Var sqrt_scalar(Var a);
    Var add_scalars(const std::vector<Var>& xs);
    Var log_scalar(Var a);

    // --- fused probability heads (logits shaped [slots×2], class 1 = true) ---
    Var two_class_prob(Var logits);                 // -> [slots×1] p(true)
    // Weighted mean cross entropy; empty weights = uniform.
    Var mean_ce(Var logits, const std::vector<int>& labels,
                const std::vector<double>& weights = {});
    Var sum_log_prob(Var logits, const std::vector<int>& labels);  // -> [1×1]
    Var bernoulli_entropy_sum(Var logits);          // -> [1×1], nats

    // Rigid segment transform: out = c + R(yaw - ref_yaw) (p - c) + (t - ref_t)
    // pose is a [1×3] leaf (x, y, yaw); points/centroid are constants.
    Var transform_segment(Var pose, const std::vector<double>& points_xyz, int n_points,
                          double cx, double cy, double ref_x, double ref_y, double ref_yaw);

    void backward(Var root);

private:
    struct Node {
        int rows = 0, cols = 0;
        bool needs_grad = false;
        std::vector<double> val;
        std::vector<double> grad;
        std::function<void(Tape&)> back;
    };

    Var alloc(int rows, int cols, bool needs_grad);
    Node& node(Var v) { return nodes_[v.node]; }

    std::vector<Node> nodes_;
    int used_ = 0;
};

}  // namespace relearn::ad
