#include "relearn/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace relearn::ad {

namespace {

double softplus(double z) { return z > 30 ? z : std::log1p(std::exp(z)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

// Note: alloc() may grow the node vector, so ops must never hold Node&
// references across it; they read shapes first and re-fetch pointers after.

void Tape::reset() { used_ = 0; }

Var Tape::alloc(int rows, int cols, bool needs_grad) {
    if (used_ == static_cast<int>(nodes_.size())) nodes_.emplace_back();
    Node& n = nodes_[used_];
    n.rows = rows;
    n.cols = cols;
    n.needs_grad = needs_grad;
    n.val.assign(static_cast<size_t>(rows) * cols, 0.0);
    n.grad.assign(static_cast<size_t>(rows) * cols, 0.0);
    n.back = nullptr;
    return Var{used_++};
}

Var Tape::input(const double* data, int rows, int cols) {
    Var v = alloc(rows, cols, true);
    std::memcpy(val(v), data, sizeof(double) * rows * cols);
    return v;
}

Var Tape::constant(const double* data, int rows, int cols) {
    Var v = alloc(rows, cols, false);
    std::memcpy(val(v), data, sizeof(double) * rows * cols);
    return v;
}

Var Tape::zeros(int rows, int cols, bool needs_grad) { return alloc(rows, cols, needs_grad); }

#define NG(v) nodes_[(v).node].needs_grad

Var Tape::add(Var a, Var b) {
    int m = rows(a), c = cols(a);
    assert(m == rows(b) && c == cols(b));
    size_t n = static_cast<size_t>(m) * c;
    Var out = alloc(m, c, NG(a) || NG(b));
    const double *pa = val(a), *pb = val(b);
    double* po = val(out);
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    nodes_[out.node].back = [a, b, out, n](Tape& t) {
        const double* g = t.grad(out);
        if (t.nodes_[a.node].needs_grad) {
            double* ga = t.nodes_[a.node].grad.data();
            for (size_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (t.nodes_[b.node].needs_grad) {
            double* gb = t.nodes_[b.node].grad.data();
            for (size_t i = 0; i < n; ++i) gb[i] += g[i];
        }
    };
    return out;
}

Var Tape::sub(Var a, Var b) {
    int m = rows(a), c = cols(a);
    assert(m == rows(b) && c == cols(b));
    size_t n = static_cast<size_t>(m) * c;
    Var out = alloc(m, c, NG(a) || NG(b));
    const double *pa = val(a), *pb = val(b);
    double* po = val(out);
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    nodes_[out.node].back = [a, b, out, n](Tape& t) {
        const double* g = t.grad(out);
        if (t.nodes_[a.node].needs_grad) {
            double* ga = t.nodes_[a.node].grad.data();
            for (size_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (t.nodes_[b.node].needs_grad) {
            double* gb = t.nodes_[b.node].grad.data();
            for (size_t i = 0; i < n; ++i) gb[i] -= g[i];
        }
    };
    return out;
}

Var Tape::mul(Var a, Var b) {
    int m = rows(a), c = cols(a);
    assert(m == rows(b) && c == cols(b));
    size_t n = static_cast<size_t>(m) * c;
    Var out = alloc(m, c, NG(a) || NG(b));
    const double *pa = val(a), *pb = val(b);
    double* po = val(out);
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    nodes_[out.node].back = [a, b, out, n](Tape& t) {
        const double* g = t.grad(out);
        const double *pa = t.val(a), *pb = t.val(b);
        if (t.nodes_[a.node].needs_grad) {
            double* ga = t.nodes_[a.node].grad.data();
            for (size_t i = 0; i < n; ++i) ga[i] += g[i] * pb[i];
        }
        if (t.nodes_[b.node].needs_grad) {
            double* gb = t.nodes_[b.node].grad.data();
            for (size_t i = 0; i < n; ++i) gb[i] += g[i] * pa[i];
        }
    };
    return out;
}

Var Tape::scale(Var a, double s) {
    int m = rows(a), c = cols(a);
    size_t n = static_cast<size_t>(m) * c;
    Var out = alloc(m, c, NG(a));
    const double* pa = val(a);
    double* po = val(out);
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] * s;
    nodes_[out.node].back = [a, out, s, n](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        const double* g = t.grad(out);
        double* ga = t.nodes_[a.node].grad.data();
        for (size_t i = 0; i < n; ++i) ga[i] += g[i] * s;
    };
    return out;
}

Var Tape::add_rowvec(Var a, Var row) {
    int m = rows(a), c = cols(a);
    assert(rows(row) == 1 && cols(row) == c);
    Var out = alloc(m, c, NG(a) || NG(row));
    const double *pa = val(a), *pr = val(row);
    double* po = val(out);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < c; ++j) po[i * c + j] = pa[i * c + j] + pr[j];
    nodes_[out.node].back = [a, row, out, m, c](Tape& t) {
        const double* g = t.grad(out);
        if (t.nodes_[a.node].needs_grad) {
            double* ga = t.nodes_[a.node].grad.data();
            for (int i = 0; i < m * c; ++i) ga[i] += g[i];
        }
        if (t.nodes_[row.node].needs_grad) {
            double* gr = t.nodes_[row.node].grad.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < c; ++j) gr[j] += g[i * c + j];
        }
    };
    return out;
}

Var Tape::relu(Var a) {
    int m = rows(a), c = cols(a);
    size_t n = static_cast<size_t>(m) * c;
    Var out = alloc(m, c, NG(a));
    const double* pa = val(a);
    double* po = val(out);
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] > 0 ? pa[i] : 0.0;
    nodes_[out.node].back = [a, out, n](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        const double* g = t.grad(out);
        const double* pv = t.val(out);
        double* ga = t.nodes_[a.node].grad.data();
        for (size_t i = 0; i < n; ++i)
            if (pv[i] > 0) ga[i] += g[i];
    };
    return out;
}

Var Tape::concat_cols(Var a, Var b) {
    int m = rows(a), ca = cols(a), cb = cols(b);
    assert(rows(b) == m);
    Var out = alloc(m, ca + cb, NG(a) || NG(b));
    const double *pa = val(a), *pb = val(b);
    double* po = val(out);
    for (int i = 0; i < m; ++i) {
        std::memcpy(po + i * (ca + cb), pa + i * ca, sizeof(double) * ca);
        std::memcpy(po + i * (ca + cb) + ca, pb + i * cb, sizeof(double) * cb);
    }
    nodes_[out.node].back = [a, b, out, m, ca, cb](Tape& t) {
        const double* g = t.grad(out);
        if (t.nodes_[a.node].needs_grad) {
            double* ga = t.nodes_[a.node].grad.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < ca; ++j) ga[i * ca + j] += g[i * (ca + cb) + j];
        }
        if (t.nodes_[b.node].needs_grad) {
            double* gb = t.nodes_[b.node].grad.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < cb; ++j) gb[i * cb + j] += g[i * (ca + cb) + ca + j];
        }
    };
    return out;
}

Var Tape::stack_rows(const std::vector<Var>& rs) {
    assert(!rs.empty());
    int c = cols(rs[0]);
    bool ng = false;
    for (Var r : rs) {
        assert(rows(r) == 1 && cols(r) == c);
        ng = ng || NG(r);
    }
    Var out = alloc(static_cast<int>(rs.size()), c, ng);
    double* po = val(out);
    for (size_t i = 0; i < rs.size(); ++i)
        std::memcpy(po + i * c, val(rs[i]), sizeof(double) * c);
    std::vector<Var> rows_copy = rs;
    nodes_[out.node].back = [rows_copy, out, c](Tape& t) {
        const double* g = t.grad(out);
        for (size_t i = 0; i < rows_copy.size(); ++i) {
            if (!t.nodes_[rows_copy[i].node].needs_grad) continue;
            double* gr = t.nodes_[rows_copy[i].node].grad.data();
            for (int j = 0; j < c; ++j) gr[j] += g[i * c + j];
        }
    };
    return out;
}

Var Tape::slice_row(Var a, int row) {
    int c = cols(a);
    assert(row >= 0 && row < rows(a));
    Var out = alloc(1, c, NG(a));
    std::memcpy(val(out), val(a) + static_cast<size_t>(row) * c, sizeof(double) * c);
    nodes_[out.node].back = [a, out, row, c](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        const double* g = t.grad(out);
        double* ga = t.nodes_[a.node].grad.data() + static_cast<size_t>(row) * c;
        for (int j = 0; j < c; ++j) ga[j] += g[j];
    };
    return out;
}

Var Tape::broadcast_rows(Var row, int m) {
    assert(rows(row) == 1);
    int c = cols(row);
    Var out = alloc(m, c, NG(row));
    double* po = val(out);
    for (int i = 0; i < m; ++i) std::memcpy(po + i * c, val(row), sizeof(double) * c);
    nodes_[out.node].back = [row, out, m, c](Tape& t) {
        if (!t.nodes_[row.node].needs_grad) return;
        const double* g = t.grad(out);
        double* gr = t.nodes_[row.node].grad.data();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < c; ++j) gr[j] += g[i * c + j];
    };
    return out;
}

Var Tape::mean_rows(Var a) {
    int m = rows(a), c = cols(a);
    Var out = alloc(1, c, NG(a));
    double* po = val(out);
    const double* pa = val(a);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < c; ++j) po[j] += pa[i * c + j];
    for (int j = 0; j < c; ++j) po[j] /= m;
    nodes_[out.node].back = [a, out, m, c](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        const double* g = t.grad(out);
        double* ga = t.nodes_[a.node].grad.data();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < c; ++j) ga[i * c + j] += g[j] / m;
    };
    return out;
}

Var Tape::slice_rows(Var a, int row0, int nrows) {
    int c = cols(a);
    assert(row0 >= 0 && row0 + nrows <= rows(a));
    Var out = alloc(nrows, c, NG(a));
    std::memcpy(val(out), val(a) + static_cast<size_t>(row0) * c,
                sizeof(double) * nrows * c);
    nodes_[out.node].back = [a, out, row0, nrows, c](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        const double* g = t.grad(out);
        double* ga = t.nodes_[a.node].grad.data() + static_cast<size_t>(row0) * c;
        for (int i = 0; i < nrows * c; ++i) ga[i] += g[i];
    };
    return out;
}

Var Tape::vstack(Var a, Var b) {
    int c = cols(a);
    assert(cols(b) == c);
    int ma = rows(a), mb = rows(b);
    Var out = alloc(ma + mb, c, NG(a) || NG(b));
    std::memcpy(val(out), val(a), sizeof(double) * ma * c);
    std::memcpy(val(out) + static_cast<size_t>(ma) * c, val(b), sizeof(double) * mb * c);
    nodes_[out.node].back = [a, b, out, ma, mb, c](Tape& t) {
        const double* g = t.grad(out);
        if (t.nodes_[a.node].needs_grad) {
            double* ga = t.nodes_[a.node].grad.data();
            for (int i = 0; i < ma * c; ++i) ga[i] += g[i];
        }
        if (t.nodes_[b.node].needs_grad) {
            double* gb = t.nodes_[b.node].grad.data();
            const double* gsrc = g + static_cast<size_t>(ma) * c;
            for (int i = 0; i < mb * c; ++i) gb[i] += gsrc[i];
        }
    };
    return out;
}

Var Tape::reshape(Var a, int r, int c) {
    assert(rows(a) * cols(a) == r * c);
    size_t n = static_cast<size_t>(r) * c;
    Var out = alloc(r, c, NG(a));
    std::memcpy(val(out), val(a), sizeof(double) * n);
    nodes_[out.node].back = [a, out, n](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        const double* g = t.grad(out);
        double* ga = t.nodes_[a.node].grad.data();
        for (size_t i = 0; i < n; ++i) ga[i] += g[i];
    };
    return out;
}

Var Tape::matmul(Var a, Var b) {
    int m = rows(a), k = cols(a), n = cols(b);
    assert(k == rows(b));
    Var out = alloc(m, n, NG(a) || NG(b));
    const double *pa = val(a), *pb = val(b);
    double* po = val(out);
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
            double av = pa[i * k + kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * n;
            double* orow = po + i * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    nodes_[out.node].back = [a, b, out, m, k, n](Tape& t) {
        const double* g = t.grad(out);
        const double *pa = t.val(a), *pb = t.val(b);
        if (t.nodes_[a.node].needs_grad) {
            double* ga = t.nodes_[a.node].grad.data();
            for (int i = 0; i < m; ++i)
                for (int kk = 0; kk < k; ++kk) {
                    const double* brow = pb + kk * n;
                    const double* grow = g + i * n;
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    ga[i * k + kk] += acc;
                }
        }
        if (t.nodes_[b.node].needs_grad) {
            double* gb = t.nodes_[b.node].grad.data();
            for (int i = 0; i < m; ++i)
                for (int kk = 0; kk < k; ++kk) {
                    double av = pa[i * k + kk];
                    if (av == 0.0) continue;
                    const double* grow = g + i * n;
                    double* gbrow = gb + kk * n;
                    for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
        }
    };
    return out;
}

Var Tape::matmul_nt(Var a, Var b) {
    int m = rows(a), k = cols(a), n = rows(b);
    assert(cols(b) == k);
    Var out = alloc(m, n, NG(a) || NG(b));
    const double *pa = val(a), *pb = val(b);
    double* po = val(out);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const double* arow = pa + i * k;
            const double* brow = pb + j * k;
            double acc = 0.0;
            for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            po[i * n + j] = acc;
        }
    nodes_[out.node].back = [a, b, out, m, k, n](Tape& t) {
        const double* g = t.grad(out);
        const double *pa = t.val(a), *pb = t.val(b);
        if (t.nodes_[a.node].needs_grad) {
            double* ga = t.nodes_[a.node].grad.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    double gv = g[i * n + j];
                    if (gv == 0.0) continue;
                    const double* brow = pb + j * k;
                    double* garow = ga + i * k;
                    for (int kk = 0; kk < k; ++kk) garow[kk] += gv * brow[kk];
                }
        }
        if (t.nodes_[b.node].needs_grad) {
            double* gb = t.nodes_[b.node].grad.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    double gv = g[i * n + j];
                    if (gv == 0.0) continue;
                    const double* arow = pa + i * k;
                    double* gbrow = gb + j * k;
                    for (int kk = 0; kk < k; ++kk) gbrow[kk] += gv * arow[kk];
                }
        }
    };
    return out;
}

Var Tape::softmax_rows(Var a) {
    int m = rows(a), c = cols(a);
    Var out = alloc(m, c, NG(a));
    const double* pa = val(a);
    double* po = val(out);
    for (int i = 0; i < m; ++i) {
        double mx = pa[i * c];
        for (int j = 1; j < c; ++j) mx = std::max(mx, pa[i * c + j]);
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            po[i * c + j] = std::exp(pa[i * c + j] - mx);
            sum += po[i * c + j];
        }
        for (int j = 0; j < c; ++j) po[i * c + j] /= sum;
    }
    nodes_[out.node].back = [a, out, m, c](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        const double* g = t.grad(out);
        const double* p = t.val(out);
        double* ga = t.nodes_[a.node].grad.data();
        for (int i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += g[i * c + j] * p[i * c + j];
            for (int j = 0; j < c; ++j) ga[i * c + j] += p[i * c + j] * (g[i * c + j] - dot);
        }
    };
    return out;
}

Var Tape::maxpool_rows(Var a) {
    int m = rows(a), c = cols(a);
    Var out = alloc(1, c, NG(a));
    const double* pa = val(a);
    double* po = val(out);
    std::vector<int> arg(c, 0);
    for (int j = 0; j < c; ++j) {
        double best = pa[j];
        int bi = 0;
        for (int i = 1; i < m; ++i)
            if (pa[i * c + j] > best) {
                best = pa[i * c + j];
                bi = i;
            }
        po[j] = best;
        arg[j] = bi;
    }
    nodes_[out.node].back = [a, out, arg, c](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        const double* g = t.grad(out);
        double* ga = t.nodes_[a.node].grad.data();
        for (int j = 0; j < c; ++j) ga[arg[j] * c + j] += g[j];
    };
    return out;
}

Var Tape::sum(Var a) {
    size_t n = static_cast<size_t>(rows(a)) * cols(a);
    Var out = alloc(1, 1, NG(a));
    const double* pa = val(a);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += pa[i];
    val(out)[0] = acc;
    nodes_[out.node].back = [a, out, n](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        double g = t.grad(out)[0];
        double* ga = t.nodes_[a.node].grad.data();
        for (size_t i = 0; i < n; ++i) ga[i] += g;
    };
    return out;
}

Var Tape::sum_squares(Var a) {
    size_t n = static_cast<size_t>(rows(a)) * cols(a);
    Var out = alloc(1, 1, NG(a));
    const double* pa = val(a);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += pa[i] * pa[i];
    val(out)[0] = acc;
    nodes_[out.node].back = [a, out, n](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        double g = t.grad(out)[0];
        const double* pa = t.val(a);
        double* ga = t.nodes_[a.node].grad.data();
        for (size_t i = 0; i < n; ++i) ga[i] += 2.0 * g * pa[i];
    };
    return out;
}

Var Tape::mean_squares(Var a) {
    size_t n = static_cast<size_t>(rows(a)) * cols(a);
    return scale(sum_squares(a), 1.0 / static_cast<double>(n));
}

Var Tape::norm_fro(Var a) {
    size_t n = static_cast<size_t>(rows(a)) * cols(a);
    Var out = alloc(1, 1, NG(a));
    const double* pa = val(a);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += pa[i] * pa[i];
    val(out)[0] = std::sqrt(acc);
    nodes_[out.node].back = [a, out, n](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        double v = t.val(out)[0];
        if (v <= 0.0) return;  // subgradient 0 at the kink
        double g = t.grad(out)[0] / v;
        const double* pa = t.val(a);
        double* ga = t.nodes_[a.node].grad.data();
        for (size_t i = 0; i < n; ++i) ga[i] += g * pa[i];
    };
    return out;
}

Var Tape::sqrt_scalar(Var a) {
    assert(rows(a) == 1 && cols(a) == 1);
    Var out = alloc(1, 1, NG(a));
    val(out)[0] = std::sqrt(std::max(0.0, val(a)[0]));
    nodes_[out.node].back = [a, out](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        double v = t.val(out)[0];
        if (v <= 0.0) return;
        t.nodes_[a.node].grad[0] += t.grad(out)[0] * 0.5 / v;
    };
    return out;
}

Var Tape::add_scalars(const std::vector<Var>& xs) {
    assert(!xs.empty());
    bool ng = false;
    double acc = 0.0;
    for (Var x : xs) {
        assert(rows(x) == 1 && cols(x) == 1);
        acc += val(x)[0];
        ng = ng || NG(x);
    }
    Var out = alloc(1, 1, ng);
    val(out)[0] = acc;
    std::vector<Var> copy = xs;
    nodes_[out.node].back = [copy, out](Tape& t) {
        double g = t.grad(out)[0];
        for (Var x : copy)
            if (t.nodes_[x.node].needs_grad) t.nodes_[x.node].grad[0] += g;
    };
    return out;
}

Var Tape::log_scalar(Var a) {
    assert(rows(a) == 1 && cols(a) == 1);
    Var out = alloc(1, 1, NG(a));
    val(out)[0] = std::log(std::max(val(a)[0], 1e-300));
    nodes_[out.node].back = [a, out](Tape& t) {
        if (!t.nodes_[a.node].needs_grad) return;
        double v = std::max(t.val(a)[0], 1e-300);
        t.nodes_[a.node].grad[0] += t.grad(out)[0] / v;
    };
    return out;
}

Var Tape::two_class_prob(Var logits) {
    assert(cols(logits) == 2);
    int m = rows(logits);
    Var out = alloc(m, 1, NG(logits));
    const double* pl = val(logits);
    double* po = val(out);
    for (int i = 0; i < m; ++i) po[i] = sigmoid(pl[i * 2 + 1] - pl[i * 2]);
    nodes_[out.node].back = [logits, out, m](Tape& t) {
        if (!t.nodes_[logits.node].needs_grad) return;
        const double* g = t.grad(out);
        const double* p = t.val(out);
        double* gl = t.nodes_[logits.node].grad.data();
        for (int i = 0; i < m; ++i) {
            double d = g[i] * p[i] * (1.0 - p[i]);
            gl[i * 2 + 1] += d;
            gl[i * 2] -= d;
        }
    };
    return out;
}

Var Tape::mean_ce(Var logits, const std::vector<int>& labels,
                  const std::vector<double>& weights) {
    assert(cols(logits) == 2 && rows(logits) == static_cast<int>(labels.size()));
    assert(weights.empty() || weights.size() == labels.size());
    int m = rows(logits);
    Var out = alloc(1, 1, NG(logits));
    const double* pl = val(logits);
    double acc = 0.0, wsum = 0.0;
    for (int i = 0; i < m; ++i) {
        double w = weights.empty() ? 1.0 : weights[i];
        double z = pl[i * 2 + 1] - pl[i * 2];
        acc += w * (labels[i] ? softplus(-z) : softplus(z));
        wsum += w;
    }
    val(out)[0] = acc / wsum;
    std::vector<int> lab = labels;
    std::vector<double> ws = weights;
    nodes_[out.node].back = [logits, out, lab, ws, m, wsum](Tape& t) {
        if (!t.nodes_[logits.node].needs_grad) return;
        double g = t.grad(out)[0] / wsum;
        const double* pl = t.val(logits);
        double* gl = t.nodes_[logits.node].grad.data();
        for (int i = 0; i < m; ++i) {
            double w = ws.empty() ? 1.0 : ws[i];
            double p = sigmoid(pl[i * 2 + 1] - pl[i * 2]);
            double d = g * w * (p - (lab[i] ? 1.0 : 0.0));
            gl[i * 2 + 1] += d;
            gl[i * 2] -= d;
        }
    };
    return out;
}

Var Tape::sum_log_prob(Var logits, const std::vector<int>& labels) {
    assert(cols(logits) == 2 && rows(logits) == static_cast<int>(labels.size()));
    int m = rows(logits);
    Var out = alloc(1, 1, NG(logits));
    const double* pl = val(logits);
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        double z = pl[i * 2 + 1] - pl[i * 2];
        acc -= labels[i] ? softplus(-z) : softplus(z);
    }
    val(out)[0] = acc;
    std::vector<int> lab = labels;
    nodes_[out.node].back = [logits, out, lab, m](Tape& t) {
        if (!t.nodes_[logits.node].needs_grad) return;
        double g = t.grad(out)[0];
        const double* pl = t.val(logits);
        double* gl = t.nodes_[logits.node].grad.data();
        for (int i = 0; i < m; ++i) {
            double p = sigmoid(pl[i * 2 + 1] - pl[i * 2]);
            double d = g * ((lab[i] ? 1.0 : 0.0) - p);
            gl[i * 2 + 1] += d;
            gl[i * 2] -= d;
        }
    };
    return out;
}

Var Tape::bernoulli_entropy_sum(Var logits) {
    assert(cols(logits) == 2);
    int m = rows(logits);
    Var out = alloc(1, 1, NG(logits));
    const double* pl = val(logits);
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        double z = pl[i * 2 + 1] - pl[i * 2];
        double p = sigmoid(z);
        acc += p * softplus(-z) + (1.0 - p) * softplus(z);
    }
    val(out)[0] = acc;
    nodes_[out.node].back = [logits, out, m](Tape& t) {
        if (!t.nodes_[logits.node].needs_grad) return;
        double g = t.grad(out)[0];
        const double* pl = t.val(logits);
        double* gl = t.nodes_[logits.node].grad.data();
        for (int i = 0; i < m; ++i) {
            double z = pl[i * 2 + 1] - pl[i * 2];
            double p = sigmoid(z);
            double d = g * (-z * p * (1.0 - p));
            gl[i * 2 + 1] += d;
            gl[i * 2] -= d;
        }
    };
    return out;
}

Var Tape::transform_segment(Var pose, const std::vector<double>& points_xyz, int n_points,
                            double cx, double cy, double ref_x, double ref_y, double ref_yaw) {
    assert(rows(pose) == 1 && cols(pose) == 3);
    Var out = alloc(n_points, 3, NG(pose));
    const double* ps = val(pose);
    double dyaw = ps[2] - ref_yaw;
    double cth = std::cos(dyaw), sth = std::sin(dyaw);
    double tx = ps[0] - ref_x, ty = ps[1] - ref_y;
    double* po = val(out);
    for (int i = 0; i < n_points; ++i) {
        double qx = points_xyz[i * 3] - cx, qy = points_xyz[i * 3 + 1] - cy;
        po[i * 3] = cx + cth * qx - sth * qy + tx;
        po[i * 3 + 1] = cy + sth * qx + cth * qy + ty;
        po[i * 3 + 2] = points_xyz[i * 3 + 2];
    }
    std::vector<double> pts = points_xyz;
    nodes_[out.node].back = [pose, out, pts, n_points, cx, cy, ref_yaw](Tape& t) {
        if (!t.nodes_[pose.node].needs_grad) return;
        const double* g = t.grad(out);
        const double* ps = t.val(pose);
        double dyaw = ps[2] - ref_yaw;
        double cth = std::cos(dyaw), sth = std::sin(dyaw);
        double* gp = t.nodes_[pose.node].grad.data();
        double gx = 0, gy = 0, gyaw = 0;
        for (int i = 0; i < n_points; ++i) {
            double qx = pts[i * 3] - cx, qy = pts[i * 3 + 1] - cy;
            gx += g[i * 3];
            gy += g[i * 3 + 1];
            gyaw += g[i * 3] * (-sth * qx - cth * qy) + g[i * 3 + 1] * (cth * qx - sth * qy);
        }
        gp[0] += gx;
        gp[1] += gy;
        gp[2] += gyaw;
    };
    return out;
}

#undef NG

void Tape::backward(Var root) {
    Node& r = nodes_[root.node];
    assert(r.rows == 1 && r.cols == 1);
    r.grad[0] = 1.0;
    for (int i = root.node; i >= 0; --i) {
        if (nodes_[i].back && nodes_[i].needs_grad) nodes_[i].back(*this);
    }
}

}  // namespace relearn::ad
