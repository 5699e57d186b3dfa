#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "curvebind/tensor.hpp"

namespace curvebind {

using VarId = std::int32_t;
constexpr VarId kNoVar = -1;

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every operation in creation order; creation order is a
// topological order, so backward() is a single reverse sweep. Backward
// closures capture parent VarIds (never references into the node vector)
// and read parent values through the tape at callback time.
//
// With grad disabled the tape is a plain forward evaluator: no closures are
// allocated and no gradients are stored.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }
    std::size_t size() const { return nodes_.size(); }

    VarId leaf(Tensor value, bool requires_grad);
    VarId constant(Tensor value) { return leaf(std::move(value), false); }
    VarId constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    const Tensor& val(VarId id) const { return nodes_[id].value; }
    const Tensor& grad(VarId id) const;
    bool requires_grad(VarId id) const { return nodes_[id].requires_grad; }

    // root must be 1x1; seeds with 1 and sweeps the whole tape once.
    void backward(VarId root);

    // --- elementwise / broadcast ---
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);
    VarId add_rowvec(VarId a, VarId row);   // a [n x d] + row [1 x d]
    VarId scale_rows(VarId a, VarId s);     // a [n x d] * s [n x 1] per row
    VarId scale(VarId a, double c);
    VarId add_const(VarId a, double c);
    VarId silu(VarId a);
    VarId sigmoid(VarId a);
    VarId tanh(VarId a);
    VarId softplus(VarId a);
    VarId log(VarId a);
    VarId pow_const(VarId a, double p);     // a > 0 expected for fractional p
    VarId clamp(VarId a, double lo, double hi);

    // --- linear algebra ---
    VarId matmul(VarId a, VarId b);
    VarId matmul_nt(VarId a, VarId b);      // a * b^T
    VarId transpose(VarId a);
    VarId reshape(VarId a, std::size_t r, std::size_t c);

    // --- structure ---
    VarId concat_cols(const std::vector<VarId>& parts);
    VarId slice_cols(VarId a, std::size_t c0, std::size_t c1); // [c0, c1)
    VarId gather_rows(VarId a, std::vector<int> idx);
    VarId scatter_add_rows(VarId a, std::vector<int> seg, std::size_t n_out);

    // --- reductions ---
    VarId row_sum(VarId a);   // [n x d] -> [n x 1]
    VarId col_sum(VarId a);   // [n x d] -> [1 x d]
    VarId sum_all(VarId a);   // -> [1 x 1]
    VarId mean_all(VarId a);  // -> [1 x 1]

    // --- normalization / attention ---
    VarId layer_norm(VarId a, VarId gain, VarId bias, double eps = 1e-5);
    VarId softmax_rows(VarId a);
    VarId softmax_all(VarId a);
    // logits [E x 1], seg nondecreasing in [0, nseg); softmax within segments
    VarId segment_softmax(VarId logits, std::vector<int> seg, std::size_t nseg);

    // --- geometry-flavored ---
    VarId norm_rows(VarId a);                 // [n x d] -> [n x 1] euclidean
    VarId huber_rows(VarId a, double delta);  // huber of each row norm
    VarId div_by_scalar(VarId a, VarId s);    // s [1 x 1]

    // Outer-product pair fusion: out[(i*m+j), c] =
    //   sum_{s,t} A(i,s) B(j,t) W(s*k+t, c) + b(c).
    VarId opm_combine(VarId a, VarId b, VarId w, VarId bias);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, const Tensor&)> back;
        bool requires_grad = false;
    };

    std::vector<Node> nodes_;
    bool grad_enabled_ = true;

    VarId push(Tensor value, bool rg, std::function<void(Tape&, const Tensor&)> back);
    void accumulate(VarId id, const Tensor& g);
    bool want_grad(VarId a) const { return grad_enabled_ && nodes_[a].requires_grad; }
    bool want_grad(VarId a, VarId b) const { return want_grad(a) || want_grad(b); }
};

// -- small composite helpers used throughout the model --

inline VarId affine(Tape& t, VarId x, VarId w, VarId b) {
    return t.add_rowvec(t.matmul(x, w), b);
}

// two affine layers with a smooth nonlinearity between
inline VarId mlp2(Tape& t, VarId x, VarId w1, VarId b1, VarId w2, VarId b2) {
    return affine(t, t.silu(affine(t, x, w1, b1)), w2, b2);
}

} // namespace curvebind
