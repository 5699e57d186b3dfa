#include "curvebind/pocket.hpp"

#include <algorithm>
#include <cmath>

#include "curvebind/errors.hpp"

namespace curvebind {

PocketLabels ground_truth_labels(const ComplexRecord& rec, double cutoff) {
    PocketLabels lab;
    lab.y.assign(rec.residues.size(), 0);
    const double c2 = cutoff * cutoff;
    Vec3 center_sum;
    for (std::size_t j = 0; j < rec.residues.size(); ++j) {
        for (const auto& a : rec.ligand_atoms)
            if (distance2(rec.residues[j].ca, a.xyz) < c2) {
                lab.y[j] = 1;
                break;
            }
        if (lab.y[j]) {
            ++lab.positives;
            center_sum += rec.residues[j].ca;
        }
    }
    if (lab.positives == 0) {
        lab.trainable = false;
        return lab;
    }
    lab.trainable = true;
    lab.true_center = center_sum * (1.0 / static_cast<double>(lab.positives));
    for (const auto& a : rec.ligand_atoms)
        lab.true_radius = std::max(lab.true_radius, distance(lab.true_center, a.xyz));
    return lab;
}

VarId classify_logits(Tape& t, ParamVars& P, VarId h_p) {
    const VarId hn = t.scale(t.layer_norm(h_p, P("pocket.cls_ln.g"), P("pocket.cls_ln.b")),
                             kHeadInputScale);
    return affine(t, hn, P("pocket.cls.W"), P("pocket.cls.b"));
}

VarId focal_loss(Tape& t, VarId probs, const std::vector<int>& y, double gamma, double weight,
                 double eps) {
    const Tensor& pv = t.val(probs);
    if (pv.cols() != 1 || pv.rows() != y.size()) throw ShapeError("focal_loss: shapes");
    Tensor ypos(y.size(), 1), yneg(y.size(), 1);
    for (std::size_t j = 0; j < y.size(); ++j) {
        ypos(j, 0) = y[j] ? 1.0 : 0.0;
        yneg(j, 0) = y[j] ? 0.0 : 1.0;
    }
    const VarId p = t.clamp(probs, eps, 1.0 - eps);
    const VarId one = t.constant(Tensor(y.size(), 1, 1.0));
    const VarId q = t.sub(one, p);
    // y (1-p)^g log p + (1-y) p^g log(1-p), negated and weighted
    const VarId pos = t.mul(t.constant(std::move(ypos)), t.mul(t.pow_const(q, gamma), t.log(p)));
    const VarId neg = t.mul(t.constant(std::move(yneg)), t.mul(t.pow_const(p, gamma), t.log(q)));
    return t.scale(t.sum_all(t.add(pos, neg)), -weight);
}

VarId gumbel_weights(Tape& t, VarId logits, double tau, const Tensor* noise) {
    if (tau <= 0.0) throw ValidationError("gumbel_weights: temperature must be > 0");
    if (!noise) return t.softmax_all(logits);
    check_same_shape(t.val(logits), *noise, "gumbel_weights");
    return t.softmax_all(t.scale(t.add(logits, t.constant(*noise)), 1.0 / tau));
}

VarId pocket_center(Tape& t, VarId weights, VarId ca_coords) {
    const Tensor& w = t.val(weights);
    double total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) total += w[k];
    if (!(total > 0.0)) throw NumericError("pocket_center: weights sum to zero");
    const VarId num = t.matmul(t.transpose(weights), ca_coords);
    return t.div_by_scalar(num, t.sum_all(weights));
}

VarId huber_loss(Tape& t, VarId pred, VarId target, double delta) {
    check_same_shape(t.val(pred), t.val(target), "huber_loss");
    if (t.val(pred).rows() != 1) throw ShapeError("huber_loss: expects a single row");
    return t.huber_rows(t.sub(pred, target), delta);
}

double huber_value(double e, double delta) {
    e = std::abs(e);
    return e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
}

VarId radius_head(Tape& t, ParamVars& P, VarId h_l) {
    const VarId pooled = t.col_sum(h_l);
    const VarId pn = t.scale(t.layer_norm(pooled, P("pocket.radius_ln.g"),
                                          P("pocket.radius_ln.b")),
                             kHeadInputScale);
    return mlp2(t, pn, P("pocket.radius.W1"), P("pocket.radius.b1"), P("pocket.radius.W2"),
                P("pocket.radius.b2"));
}

double final_radius(double radius_raw, std::size_t n_ligand_atoms, bool dynamic_radius,
                    double fixed_radius) {
    if (!dynamic_radius) return fixed_radius;
    return radius_raw + std::sqrt(static_cast<double>(n_ligand_atoms));
}

VarId pocket_loss(Tape& t, VarId cls, VarId cen, VarId rad, double alpha1) {
    return t.add(t.add(cls, cen), t.scale(rad, alpha1));
}

std::vector<int> select_pocket(const Tensor& ca_coords, const Vec3& center, double radius,
                               int fallback_k) {
    std::vector<int> sel;
    std::vector<char> in_sel(ca_coords.rows(), 0);
    std::vector<std::pair<double, int>> by_dist;
    for (std::size_t j = 0; j < ca_coords.rows(); ++j) {
        const double d = distance(ca_coords.row_vec3(j), center);
        by_dist.push_back({d, static_cast<int>(j)});
        if (d <= radius) {
            sel.push_back(static_cast<int>(j));
            in_sel[j] = 1;
        }
    }
    // pad undersized spheres with the nearest remaining residues
    const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(fallback_k),
                                                   ca_coords.rows());
    if (sel.size() < want) {
        std::sort(by_dist.begin(), by_dist.end());
        for (const auto& [d, j] : by_dist) {
            if (sel.size() >= want) break;
            if (!in_sel[static_cast<std::size_t>(j)]) {
                sel.push_back(j);
                in_sel[static_cast<std::size_t>(j)] = 1;
            }
        }
    }
    std::sort(sel.begin(), sel.end());
    return sel;
}

} // namespace curvebind
