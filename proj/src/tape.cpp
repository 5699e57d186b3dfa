#include "curvebind/tape.hpp"

#include <algorithm>
#include <cmath>

namespace curvebind {

VarId Tape::push(Tensor value, bool rg, std::function<void(Tape&, const Tensor&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = rg && grad_enabled_;
    if (n.requires_grad) {
        n.grad = Tensor(n.value.rows(), n.value.cols());
        n.back = std::move(back);
    }
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

const Tensor& Tape::grad(VarId id) const {
    if (!nodes_[id].requires_grad) throw Error("grad requested for a non-grad node");
    return nodes_[id].grad;
}

void Tape::accumulate(VarId id, const Tensor& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    axpy(n.grad, g);
}

void Tape::backward(VarId root) {
    if (val(root).size() != 1) throw ShapeError("backward root must be scalar");
    if (!nodes_[root].requires_grad) return;
    nodes_[root].grad[0] += 1.0;
    for (VarId i = root; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.back) n.back(*this, n.grad);
    }
}

// ---------------------------------------------------------------------------
// elementwise / broadcast
// ---------------------------------------------------------------------------

VarId Tape::add(VarId a, VarId b) {
    check_same_shape(val(a), val(b), "add");
    Tensor out = val(a);
    axpy(out, val(b));
    return push(std::move(out), want_grad(a, b), [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

VarId Tape::sub(VarId a, VarId b) {
    check_same_shape(val(a), val(b), "sub");
    Tensor out = val(a);
    axpy(out, val(b), -1.0);
    return push(std::move(out), want_grad(a, b), [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a, g);
        if (t.nodes_[b].requires_grad) axpy(t.nodes_[b].grad, g, -1.0);
    });
}

VarId Tape::mul(VarId a, VarId b) {
    check_same_shape(val(a), val(b), "mul");
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= val(b)[k];
    return push(std::move(out), want_grad(a, b), [a, b](Tape& t, const Tensor& g) {
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        if (t.nodes_[a].requires_grad)
            for (std::size_t k = 0; k < g.size(); ++k) t.nodes_[a].grad[k] += g[k] * bv[k];
        if (t.nodes_[b].requires_grad)
            for (std::size_t k = 0; k < g.size(); ++k) t.nodes_[b].grad[k] += g[k] * av[k];
    });
}

VarId Tape::add_rowvec(VarId a, VarId row) {
    const Tensor& av = val(a);
    const Tensor& rv = val(row);
    if (rv.rows() != 1 || rv.cols() != av.cols())
        throw ShapeError("add_rowvec: " + av.shape_str() + " + " + rv.shape_str());
    Tensor out = av;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += rv(0, j);
    return push(std::move(out), want_grad(a, row), [a, row](Tape& t, const Tensor& g) {
        t.accumulate(a, g);
        if (t.nodes_[row].requires_grad) {
            Tensor& gr = t.nodes_[row].grad;
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
        }
    });
}

VarId Tape::scale_rows(VarId a, VarId s) {
    const Tensor& av = val(a);
    const Tensor& sv = val(s);
    if (sv.cols() != 1 || sv.rows() != av.rows())
        throw ShapeError("scale_rows: " + av.shape_str() + " * " + sv.shape_str());
    Tensor out = av;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= sv(i, 0);
    return push(std::move(out), want_grad(a, s), [a, s](Tape& t, const Tensor& g) {
        const Tensor& av2 = t.val(a);
        const Tensor& sv2 = t.val(s);
        if (t.nodes_[a].requires_grad) {
            Tensor& ga = t.nodes_[a].grad;
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) * sv2(i, 0);
        }
        if (t.nodes_[s].requires_grad) {
            Tensor& gs = t.nodes_[s].grad;
            for (std::size_t i = 0; i < g.rows(); ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) acc += g(i, j) * av2(i, j);
                gs(i, 0) += acc;
            }
        }
    });
}

VarId Tape::scale(VarId a, double c) {
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= c;
    return push(std::move(out), want_grad(a), [a, c](Tape& t, const Tensor& g) {
        if (t.nodes_[a].requires_grad) axpy(t.nodes_[a].grad, g, c);
    });
}

VarId Tape::add_const(VarId a, double c) {
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += c;
    return push(std::move(out), want_grad(a),
                [a](Tape& t, const Tensor& g) { t.accumulate(a, g); });
}

VarId Tape::silu(VarId a) {
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double x = out[k];
        out[k] = x / (1.0 + std::exp(-x));
    }
    return push(std::move(out), want_grad(a), [a](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        const Tensor& x = t.val(a);
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double s = 1.0 / (1.0 + std::exp(-x[k]));
            ga[k] += g[k] * (s * (1.0 + x[k] * (1.0 - s)));
        }
    });
}

VarId Tape::sigmoid(VarId a) {
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = 1.0 / (1.0 + std::exp(-out[k]));
    VarId id = push(std::move(out), want_grad(a), nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [a, id](Tape& t, const Tensor& g) {
            const Tensor& y = t.val(id);
            Tensor& ga = t.nodes_[a].grad;
            for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * y[k] * (1.0 - y[k]);
        };
    return id;
}

VarId Tape::tanh(VarId a) {
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::tanh(out[k]);
    VarId id = push(std::move(out), want_grad(a), nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [a, id](Tape& t, const Tensor& g) {
            const Tensor& y = t.val(id);
            Tensor& ga = t.nodes_[a].grad;
            for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * (1.0 - y[k] * y[k]);
        };
    return id;
}

VarId Tape::softplus(VarId a) {
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double x = out[k];
        out[k] = x > 30.0 ? x : std::log1p(std::exp(x));
    }
    return push(std::move(out), want_grad(a), [a](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        const Tensor& x = t.val(a);
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t k = 0; k < g.size(); ++k)
            ga[k] += g[k] / (1.0 + std::exp(-x[k]));
    });
}

VarId Tape::log(VarId a) {
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::log(out[k]);
    return push(std::move(out), want_grad(a), [a](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        const Tensor& x = t.val(a);
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] / x[k];
    });
}

VarId Tape::pow_const(VarId a, double p) {
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::pow(out[k], p);
    return push(std::move(out), want_grad(a), [a, p](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        const Tensor& x = t.val(a);
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t k = 0; k < g.size(); ++k)
            ga[k] += p == 0.0 ? 0.0 : g[k] * p * std::pow(x[k], p - 1.0);
    });
}

VarId Tape::clamp(VarId a, double lo, double hi) {
    Tensor out = val(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::min(hi, std::max(lo, out[k]));
    return push(std::move(out), want_grad(a), [a, lo, hi](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        const Tensor& x = t.val(a);
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t k = 0; k < g.size(); ++k)
            if (x[k] > lo && x[k] < hi) ga[k] += g[k];
    });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

VarId Tape::matmul(VarId a, VarId b) {
    Tensor out = mat_mul(val(a), val(b));
    return push(std::move(out), want_grad(a, b), [a, b](Tape& t, const Tensor& g) {
        if (t.nodes_[a].requires_grad) axpy(t.nodes_[a].grad, mat_mul_nt(g, t.val(b)));
        if (t.nodes_[b].requires_grad) axpy(t.nodes_[b].grad, mat_mul_tn(t.val(a), g));
    });
}

VarId Tape::matmul_nt(VarId a, VarId b) {
    Tensor out = mat_mul_nt(val(a), val(b));
    return push(std::move(out), want_grad(a, b), [a, b](Tape& t, const Tensor& g) {
        if (t.nodes_[a].requires_grad) axpy(t.nodes_[a].grad, mat_mul(g, t.val(b)));
        if (t.nodes_[b].requires_grad) axpy(t.nodes_[b].grad, mat_mul_tn(g, t.val(a)));
    });
}

VarId Tape::transpose(VarId a) {
    const Tensor& av = val(a);
    Tensor out(av.cols(), av.rows());
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out(j, i) = av(i, j);
    return push(std::move(out), want_grad(a), [a](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) ga(j, i) += g(i, j);
    });
}

VarId Tape::reshape(VarId a, std::size_t r, std::size_t c) {
    const Tensor& av = val(a);
    if (r * c != av.size()) throw ShapeError("reshape: size mismatch");
    Tensor out(r, c);
    for (std::size_t k = 0; k < av.size(); ++k) out[k] = av[k];
    return push(std::move(out), want_grad(a), [a](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
    });
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

VarId Tape::concat_cols(const std::vector<VarId>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const std::size_t n = val(parts[0]).rows();
    std::size_t total = 0;
    bool rg = false;
    for (VarId p : parts) {
        if (val(p).rows() != n) throw ShapeError("concat_cols: row mismatch");
        total += val(p).cols();
        rg = rg || want_grad(p);
    }
    Tensor out(n, total);
    std::size_t off = 0;
    for (VarId p : parts) {
        const Tensor& pv = val(p);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < pv.cols(); ++j) out(i, off + j) = pv(i, j);
        off += pv.cols();
    }
    std::vector<VarId> ps = parts;
    return push(std::move(out), rg, [ps](Tape& t, const Tensor& g) {
        std::size_t off2 = 0;
        for (VarId p : ps) {
            const std::size_t w = t.val(p).cols();
            if (t.nodes_[p].requires_grad) {
                Tensor& gp = t.nodes_[p].grad;
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < w; ++j) gp(i, j) += g(i, off2 + j);
            }
            off2 += w;
        }
    });
}

VarId Tape::slice_cols(VarId a, std::size_t c0, std::size_t c1) {
    const Tensor& av = val(a);
    if (c1 > av.cols() || c0 > c1) throw ShapeError("slice_cols: bad range");
    Tensor out(av.rows(), c1 - c0);
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = c0; j < c1; ++j) out(i, j - c0) = av(i, j);
    return push(std::move(out), want_grad(a), [a, c0](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) ga(i, c0 + j) += g(i, j);
    });
}

VarId Tape::gather_rows(VarId a, std::vector<int> idx) {
    const Tensor& av = val(a);
    Tensor out(idx.size(), av.cols());
    for (std::size_t e = 0; e < idx.size(); ++e)
        for (std::size_t j = 0; j < av.cols(); ++j) out(e, j) = av(static_cast<std::size_t>(idx[e]), j);
    return push(std::move(out), want_grad(a), [a, idx = std::move(idx)](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t e = 0; e < idx.size(); ++e)
            for (std::size_t j = 0; j < g.cols(); ++j)
                ga(static_cast<std::size_t>(idx[e]), j) += g(e, j);
    });
}

VarId Tape::scatter_add_rows(VarId a, std::vector<int> seg, std::size_t n_out) {
    const Tensor& av = val(a);
    if (seg.size() != av.rows()) throw ShapeError("scatter_add_rows: segment count");
    Tensor out(n_out, av.cols());
    for (std::size_t e = 0; e < seg.size(); ++e)
        for (std::size_t j = 0; j < av.cols(); ++j)
            out(static_cast<std::size_t>(seg[e]), j) += av(e, j);
    return push(std::move(out), want_grad(a), [a, seg = std::move(seg)](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t e = 0; e < seg.size(); ++e)
            for (std::size_t j = 0; j < g.cols(); ++j)
                ga(e, j) += g(static_cast<std::size_t>(seg[e]), j);
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

VarId Tape::row_sum(VarId a) {
    const Tensor& av = val(a);
    Tensor out(av.rows(), 1);
    for (std::size_t i = 0; i < av.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < av.cols(); ++j) s += av(i, j);
        out(i, 0) = s;
    }
    return push(std::move(out), want_grad(a), [a](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t i = 0; i < ga.rows(); ++i)
            for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, 0);
    });
}

VarId Tape::col_sum(VarId a) {
    const Tensor& av = val(a);
    Tensor out(1, av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) out(0, j) += av(i, j);
    return push(std::move(out), want_grad(a), [a](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t i = 0; i < ga.rows(); ++i)
            for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j);
    });
}

VarId Tape::sum_all(VarId a) {
    const Tensor& av = val(a);
    double s = 0.0;
    for (std::size_t k = 0; k < av.size(); ++k) s += av[k];
    return push(Tensor::scalar(s), want_grad(a), [a](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[0];
    });
}

VarId Tape::mean_all(VarId a) {
    const Tensor& av = val(a);
    if (av.empty()) throw ShapeError("mean_all of empty tensor");
    double s = 0.0;
    for (std::size_t k = 0; k < av.size(); ++k) s += av[k];
    const double inv = 1.0 / static_cast<double>(av.size());
    return push(Tensor::scalar(s * inv), want_grad(a), [a, inv](Tape& t, const Tensor& g) {
        if (!t.nodes_[a].requires_grad) return;
        Tensor& ga = t.nodes_[a].grad;
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[0] * inv;
    });
}

// ---------------------------------------------------------------------------
// normalization / attention
// ---------------------------------------------------------------------------

VarId Tape::layer_norm(VarId a, VarId gain, VarId bias, double eps) {
    const Tensor& x = val(a);
    const Tensor& gv = val(gain);
    const Tensor& bv = val(bias);
    if (gv.rows() != 1 || gv.cols() != x.cols() || bv.rows() != 1 || bv.cols() != x.cols())
        throw ShapeError("layer_norm: parameter shapes");
    const std::size_t n = x.rows(), d = x.cols();
    Tensor out(n, d);
    Tensor xhat(n, d);
    std::vector<double> inv_sigma(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += x(i, j);
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = x(i, j) - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[i] = is;
        for (std::size_t j = 0; j < d; ++j) {
            xhat(i, j) = (x(i, j) - mu) * is;
            out(i, j) = xhat(i, j) * gv(0, j) + bv(0, j);
        }
    }
    return push(std::move(out), want_grad(a) || want_grad(gain) || want_grad(bias),
                [a, gain, bias, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](
                    Tape& t, const Tensor& g) {
                    const Tensor& gv2 = t.val(gain);
                    const std::size_t n2 = g.rows(), d2 = g.cols();
                    if (t.nodes_[gain].requires_grad) {
                        Tensor& gg = t.nodes_[gain].grad;
                        for (std::size_t i = 0; i < n2; ++i)
                            for (std::size_t j = 0; j < d2; ++j) gg(0, j) += g(i, j) * xhat(i, j);
                    }
                    if (t.nodes_[bias].requires_grad) {
                        Tensor& gb = t.nodes_[bias].grad;
                        for (std::size_t i = 0; i < n2; ++i)
                            for (std::size_t j = 0; j < d2; ++j) gb(0, j) += g(i, j);
                    }
                    if (t.nodes_[a].requires_grad) {
                        Tensor& ga = t.nodes_[a].grad;
                        for (std::size_t i = 0; i < n2; ++i) {
                            double m1 = 0.0, m2 = 0.0;
                            for (std::size_t j = 0; j < d2; ++j) {
                                const double dxh = g(i, j) * gv2(0, j);
                                m1 += dxh;
                                m2 += dxh * xhat(i, j);
                            }
                            m1 /= static_cast<double>(d2);
                            m2 /= static_cast<double>(d2);
                            for (std::size_t j = 0; j < d2; ++j) {
                                const double dxh = g(i, j) * gv2(0, j);
                                ga(i, j) += inv_sigma[i] * (dxh - m1 - xhat(i, j) * m2);
                            }
                        }
                    }
                });
}

VarId Tape::softmax_rows(VarId a) {
    const Tensor& x = val(a);
    Tensor out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
        double s = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            out(i, j) = std::exp(x(i, j) - mx);
            s += out(i, j);
        }
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) /= s;
    }
    VarId id = push(std::move(out), want_grad(a), nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [a, id](Tape& t, const Tensor& g) {
            const Tensor& y = t.val(id);
            Tensor& ga = t.nodes_[a].grad;
            for (std::size_t i = 0; i < g.rows(); ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
                for (std::size_t j = 0; j < g.cols(); ++j)
                    ga(i, j) += y(i, j) * (g(i, j) - dot);
            }
        };
    return id;
}

VarId Tape::softmax_all(VarId a) {
    const Tensor& x = val(a);
    if (x.empty()) throw ShapeError("softmax_all of empty tensor");
    Tensor out(x.rows(), x.cols());
    double mx = -1e300;
    for (std::size_t k = 0; k < x.size(); ++k) mx = std::max(mx, x[k]);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = std::exp(x[k] - mx);
        s += out[k];
    }
    for (std::size_t k = 0; k < x.size(); ++k) out[k] /= s;
    VarId id = push(std::move(out), want_grad(a), nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [a, id](Tape& t, const Tensor& g) {
            const Tensor& y = t.val(id);
            Tensor& ga = t.nodes_[a].grad;
            double dot = 0.0;
            for (std::size_t k = 0; k < g.size(); ++k) dot += g[k] * y[k];
            for (std::size_t k = 0; k < g.size(); ++k) ga[k] += y[k] * (g[k] - dot);
        };
    return id;
}

VarId Tape::segment_softmax(VarId logits, std::vector<int> seg, std::size_t nseg) {
    const Tensor& x = val(logits);
    if (x.cols() != 1 || seg.size() != x.rows()) throw ShapeError("segment_softmax: shapes");
    for (std::size_t e = 1; e < seg.size(); ++e)
        if (seg[e] < seg[e - 1]) throw ShapeError("segment_softmax: segments must be sorted");
    Tensor out(x.rows(), 1);
    std::vector<double> smax(nseg, -1e300), ssum(nseg, 0.0);
    for (std::size_t e = 0; e < seg.size(); ++e)
        smax[seg[e]] = std::max(smax[seg[e]], x(e, 0));
    for (std::size_t e = 0; e < seg.size(); ++e) {
        out(e, 0) = std::exp(x(e, 0) - smax[seg[e]]);
        ssum[seg[e]] += out(e, 0);
    }
    for (std::size_t e = 0; e < seg.size(); ++e) out(e, 0) /= ssum[seg[e]];
    VarId id = push(std::move(out), want_grad(logits), nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [logits, id, seg = std::move(seg), nseg](Tape& t, const Tensor& g) {
            const Tensor& y = t.val(id);
            Tensor& ga = t.nodes_[logits].grad;
            std::vector<double> dot(nseg, 0.0);
            for (std::size_t e = 0; e < seg.size(); ++e) dot[seg[e]] += g(e, 0) * y(e, 0);
            for (std::size_t e = 0; e < seg.size(); ++e)
                ga(e, 0) += y(e, 0) * (g(e, 0) - dot[seg[e]]);
        };
    return id;
}

// ---------------------------------------------------------------------------
// geometry-flavored
// ---------------------------------------------------------------------------

VarId Tape::norm_rows(VarId a) {
    const Tensor& x = val(a);
    Tensor out(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) s += x(i, j) * x(i, j);
        out(i, 0) = std::sqrt(s);
    }
    VarId id = push(std::move(out), want_grad(a), nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [a, id](Tape& t, const Tensor& g) {
            const Tensor& x2 = t.val(a);
            const Tensor& y = t.val(id);
            Tensor& ga = t.nodes_[a].grad;
            for (std::size_t i = 0; i < g.rows(); ++i) {
                if (y(i, 0) <= 0.0) continue;
                const double c = g(i, 0) / y(i, 0);
                for (std::size_t j = 0; j < x2.cols(); ++j) ga(i, j) += c * x2(i, j);
            }
        };
    return id;
}

VarId Tape::huber_rows(VarId a, double delta) {
    const Tensor& x = val(a);
    Tensor out(x.rows(), 1);
    std::vector<double> enorm(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) s += x(i, j) * x(i, j);
        const double e = std::sqrt(s);
        enorm[i] = e;
        out(i, 0) = e <= delta ? 0.5 * s : delta * (e - 0.5 * delta);
    }
    return push(std::move(out), want_grad(a),
                [a, delta, enorm = std::move(enorm)](Tape& t, const Tensor& g) {
                    if (!t.nodes_[a].requires_grad) return;
                    const Tensor& x2 = t.val(a);
                    Tensor& ga = t.nodes_[a].grad;
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                        const double e = enorm[i];
                        const double c = e <= delta ? g(i, 0) : g(i, 0) * delta / e;
                        for (std::size_t j = 0; j < x2.cols(); ++j) ga(i, j) += c * x2(i, j);
                    }
                });
}

VarId Tape::div_by_scalar(VarId a, VarId s) {
    const Tensor& sv = val(s);
    if (sv.size() != 1) throw ShapeError("div_by_scalar: divisor must be 1x1");
    Tensor out = val(a);
    const double inv = 1.0 / sv[0];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= inv;
    VarId id = push(std::move(out), want_grad(a, s), nullptr);
    if (nodes_[id].requires_grad)
        nodes_[id].back = [a, s, id](Tape& t, const Tensor& g) {
            const double sval = t.val(s)[0];
            if (t.nodes_[a].requires_grad) axpy(t.nodes_[a].grad, g, 1.0 / sval);
            if (t.nodes_[s].requires_grad) {
                const Tensor& y = t.val(id);
                double acc = 0.0;
                for (std::size_t k = 0; k < g.size(); ++k) acc += g[k] * y[k];
                t.nodes_[s].grad[0] -= acc / sval;
            }
        };
    return id;
}

VarId Tape::opm_combine(VarId a, VarId b, VarId w, VarId bias) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    const Tensor& W = val(w);
    const Tensor& bv = val(bias);
    const std::size_t n = A.rows(), m = B.rows(), k = A.cols(), d = W.cols();
    if (B.cols() != k || W.rows() != k * k || bv.rows() != 1 || bv.cols() != d)
        throw ShapeError("opm_combine: shapes");
    // C[j*k*d + s*d + c] = sum_t B(j,t) * W(s*k+t, c)
    std::vector<double> C(m * k * d, 0.0);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t s = 0; s < k; ++s)
            for (std::size_t t2 = 0; t2 < k; ++t2) {
                const double bt = B(j, t2);
                if (bt == 0.0) continue;
                const double* wrow = W.data() + (s * k + t2) * d;
                double* crow = C.data() + (j * k + s) * d;
                for (std::size_t c = 0; c < d; ++c) crow[c] += bt * wrow[c];
            }
    Tensor out(n * m, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double* orow = out.data() + (i * m + j) * d;
            for (std::size_t c = 0; c < d; ++c) orow[c] = bv(0, c);
            for (std::size_t s = 0; s < k; ++s) {
                const double av = A(i, s);
                if (av == 0.0) continue;
                const double* crow = C.data() + (j * k + s) * d;
                for (std::size_t c = 0; c < d; ++c) orow[c] += av * crow[c];
            }
        }
    return push(std::move(out), want_grad(a) || want_grad(b) || want_grad(w) || want_grad(bias),
                [a, b, w, bias, C = std::move(C), n, m, k, d](Tape& t, const Tensor& g) {
                    const Tensor& A2 = t.val(a);
                    const Tensor& B2 = t.val(b);
                    const Tensor& W2 = t.val(w);
                    if (t.nodes_[bias].requires_grad) {
                        Tensor& gb = t.nodes_[bias].grad;
                        for (std::size_t p = 0; p < n * m; ++p)
                            for (std::size_t c = 0; c < d; ++c) gb(0, c) += g(p, c);
                    }
                    if (t.nodes_[a].requires_grad) {
                        Tensor& ga = t.nodes_[a].grad;
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < m; ++j) {
                                const double* grow = g.data() + (i * m + j) * d;
                                for (std::size_t s = 0; s < k; ++s) {
                                    const double* crow = C.data() + (j * k + s) * d;
                                    double acc = 0.0;
                                    for (std::size_t c = 0; c < d; ++c) acc += grow[c] * crow[c];
                                    ga(i, s) += acc;
                                }
                            }
                    }
                    const bool need_b = t.nodes_[b].requires_grad;
                    const bool need_w = t.nodes_[w].requires_grad;
                    if (need_b || need_w) {
                        // M[s][j][c] = sum_i A(i,s) * g((i,j), c)
                        std::vector<double> M(k * m * d, 0.0);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t s = 0; s < k; ++s) {
                                const double av = A2(i, s);
                                if (av == 0.0) continue;
                                for (std::size_t j = 0; j < m; ++j) {
                                    const double* grow = g.data() + (i * m + j) * d;
                                    double* mrow = M.data() + (s * m + j) * d;
                                    for (std::size_t c = 0; c < d; ++c) mrow[c] += av * grow[c];
                                }
                            }
                        if (need_b) {
                            Tensor& gb2 = t.nodes_[b].grad;
                            for (std::size_t j = 0; j < m; ++j)
                                for (std::size_t t2 = 0; t2 < k; ++t2) {
                                    double acc = 0.0;
                                    for (std::size_t s = 0; s < k; ++s) {
                                        const double* wrow = W2.data() + (s * k + t2) * d;
                                        const double* mrow = M.data() + (s * m + j) * d;
                                        for (std::size_t c = 0; c < d; ++c)
                                            acc += wrow[c] * mrow[c];
                                    }
                                    gb2(j, t2) += acc;
                                }
                        }
                        if (need_w) {
                            Tensor& gw = t.nodes_[w].grad;
                            for (std::size_t s = 0; s < k; ++s)
                                for (std::size_t t2 = 0; t2 < k; ++t2) {
                                    double* wgrow = gw.data() + (s * k + t2) * d;
                                    for (std::size_t j = 0; j < m; ++j) {
                                        const double bt = B2(j, t2);
                                        if (bt == 0.0) continue;
                                        const double* mrow = M.data() + (s * m + j) * d;
                                        for (std::size_t c = 0; c < d; ++c)
                                            wgrow[c] += bt * mrow[c];
                                    }
                                }
                        }
                    }
                });
}

} // namespace curvebind
