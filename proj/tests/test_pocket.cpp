#include <doctest.h>

#include <cmath>

#include "curvebind/errors.hpp"
#include "curvebind/pocket.hpp"
#include "test_util.hpp"

using namespace curvebind;

namespace {
ComplexRecord labeled_record() {
    ComplexRecord rec;
    rec.id = "lab";
    rec.residues = {{"ALA", {0, 0, 0}, ""}, {"GLY", {2, 0, 0}, ""}, {"SER", {0, 0, 40}, ""}};
    LigandAtom a;
    a.element = "C";
    a.xyz = {4, 0, 0};
    rec.ligand_atoms.push_back(a);
    return rec;
}
} // namespace

TEST_CASE("ground-truth labels follow the strict 10 A rule") {
    ComplexRecord rec;
    rec.id = "g";
    rec.residues = {{"ALA", {0, 0, 9.5}, ""}};
    LigandAtom a;
    a.element = "C";
    a.xyz = {0, 0, 0};
    rec.ligand_atoms.push_back(a);
    const PocketLabels lab = ground_truth_labels(rec);
    CHECK(lab.y == std::vector<int>{1});
    CHECK(lab.trainable);

    rec.residues[0].ca = {0, 0, 10.0};
    const PocketLabels far = ground_truth_labels(rec);
    CHECK(far.y == std::vector<int>{0});
    CHECK_FALSE(far.trainable);
}

TEST_CASE("label geometry: center and radius arithmetic") {
    const PocketLabels lab = ground_truth_labels(labeled_record());
    CHECK(lab.positives == 2);
    CHECK(lab.true_center.x == doctest::Approx(1.0));
    CHECK(lab.true_center.y == doctest::Approx(0.0));
    CHECK(lab.true_radius == doctest::Approx(3.0));
}

TEST_CASE("classifier head: zero weights give probability one half") {
    ModelConfig cfg;
    cfg.d_node = 8;
    cfg.d_pair = 4;
    cfg.d_opm = 2;
    cfg.heads = 2;
    const ParamStore params = init_params(cfg, 1); // cls head zero-initialized
    Tape t(false);
    ParamVars P(t, params, false);
    Rng rng(81);
    Tensor h(5, 8);
    for (std::size_t k = 0; k < h.size(); ++k) h[k] = rng.uniform(-2, 2);
    const VarId probs = t.sigmoid(classify_logits(t, P, t.constant(h)));
    for (std::size_t i = 0; i < 5; ++i) CHECK(t.val(probs)(i, 0) == 0.5);

    // saturation: huge logit -> probability -> 1
    Tape t2(false);
    Tensor big(1, 1);
    big[0] = 50.0;
    CHECK(t2.val(t2.sigmoid(t2.constant(big)))[0] == doctest::Approx(1.0).epsilon(1e-12));

    // permuted residues give permuted probabilities
    ParamStore params2 = init_params(cfg, 2);
    Rng rng2(82);
    testutil::randomize_params(params2, rng2, 0.2);
    Tape t3(false);
    ParamVars P3(t3, params2, false);
    const VarId p1 = t3.sigmoid(classify_logits(t3, P3, t3.constant(h)));
    Tensor hperm(5, 8);
    const int perm[5] = {4, 2, 0, 1, 3};
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 8; ++j) hperm(i, j) = h(static_cast<std::size_t>(perm[i]), j);
    const VarId p2 = t3.sigmoid(classify_logits(t3, P3, t3.constant(hperm)));
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(t3.val(p2)(i, 0) ==
              doctest::Approx(t3.val(p1)(static_cast<std::size_t>(perm[i]), 0)).epsilon(1e-12));
}

TEST_CASE("focal loss hand values and identities") {
    Tape t(false);

    // perfect prediction: loss under 1e-5 after clamping
    Tensor perfect(2, 1);
    perfect(0, 0) = 1.0;
    perfect(1, 0) = 0.0;
    const VarId l0 = focal_loss(t, t.constant(perfect), {1, 0}, 2.0, 1.0);
    CHECK(t.val(l0)[0] < 1e-5);
    CHECK(t.val(l0)[0] >= 0.0);

    // y = 1, p = 0.5, gamma = 2, weight 1 -> 0.25 ln 2
    Tensor half(1, 1);
    half(0, 0) = 0.5;
    const VarId l1 = focal_loss(t, t.constant(half), {1}, 2.0, 1.0);
    CHECK(t.val(l1)[0] == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-9));

    // gamma = 0, weight 1 equals binary cross-entropy
    Rng rng(83);
    Tensor p(6, 1);
    std::vector<int> y = {1, 0, 1, 1, 0, 0};
    for (std::size_t k = 0; k < 6; ++k) p[k] = rng.uniform(0.05, 0.95);
    const VarId l2 = focal_loss(t, t.constant(p), y, 0.0, 1.0);
    double bce = 0.0;
    for (std::size_t k = 0; k < 6; ++k)
        bce -= y[k] ? std::log(p[k]) : std::log(1.0 - p[k]);
    CHECK(std::abs(t.val(l2)[0] - bce) < 1e-12);

    // permutation invariance
    Tensor pperm(6, 1);
    std::vector<int> yperm(6);
    const int perm[6] = {3, 5, 0, 2, 4, 1};
    for (std::size_t k = 0; k < 6; ++k) {
        pperm[k] = p[static_cast<std::size_t>(perm[k])];
        yperm[k] = y[static_cast<std::size_t>(perm[k])];
    }
    const VarId l4 = focal_loss(t, t.constant(pperm), yperm, 2.0, 1.5);
    const VarId l5 = focal_loss(t, t.constant(p), y, 2.0, 1.5);
    CHECK(t.val(l4)[0] == doctest::Approx(t.val(l5)[0]).epsilon(1e-12));
}

TEST_CASE("focal loss gradient matches finite differences") {
    Rng rng(84);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor logits(4, 1);
        for (std::size_t k = 0; k < 4; ++k) logits[k] = rng.uniform(-2, 2);
        const std::vector<int> y = {1, 0, 0, 1};
        auto eval = [&](const Tensor& lg) {
            Tape t(false);
            return t.val(focal_loss(t, t.sigmoid(t.constant(lg)), y, 2.0, 3.0))[0];
        };
        Tape t(true);
        const VarId v = t.leaf(logits, true);
        t.backward(focal_loss(t, t.sigmoid(v), y, 2.0, 3.0));
        for (std::size_t k = 0; k < 4; ++k) {
            Tensor lp = logits, lm = logits;
            lp[k] += 1e-5;
            lm[k] -= 1e-5;
            const double num = (eval(lp) - eval(lm)) / 2e-5;
            CHECK(std::abs(num - t.grad(v)[k]) <
                  1e-6 * std::max({1.0, std::abs(num), std::abs(t.grad(v)[k])}));
        }
    }
}

TEST_CASE("gumbel weights") {
    Tape t(false);
    Tensor logits(4, 1);
    logits(0, 0) = 0.4;
    logits(1, 0) = -1.0;
    logits(2, 0) = 2.0;
    logits(3, 0) = 0.0;

    // noise off: plain softmax, sums to one
    const VarId w = gumbel_weights(t, t.constant(logits), 1.0, nullptr);
    double sum = 0;
    for (std::size_t k = 0; k < 4; ++k) sum += t.val(w)[k];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    // equal logits, noise off: uniform
    const VarId u = gumbel_weights(t, t.constant(Tensor(4, 1, 0.3)), 1.0, nullptr);
    for (std::size_t k = 0; k < 4; ++k) CHECK(t.val(u)[k] == doctest::Approx(0.25).epsilon(1e-12));

    // tau -> 0 with fixed noise: one-hot at the perturbed argmax
    Tensor noise(4, 1);
    noise(0, 0) = 0.1;
    noise(1, 0) = 3.5; // lifts index 1 to the top: -1.0 + 3.5 = 2.5 > 2.0
    const VarId hot = gumbel_weights(t, t.constant(logits), 1e-3, &noise);
    CHECK(t.val(hot)(1, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(t.val(hot)(0, 0) == doctest::Approx(0.0).epsilon(1e-9));

    // noisy weights still sum to one
    const VarId nw = gumbel_weights(t, t.constant(logits), 0.7, &noise);
    double nsum = 0;
    for (std::size_t k = 0; k < 4; ++k) nsum += t.val(nw)[k];
    CHECK(nsum == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS((void)gumbel_weights(t, t.constant(logits), 0.0, nullptr), ValidationError);
}

TEST_CASE("pocket center is a normalized weighted mean") {
    Tape t(false);
    Tensor ca(2, 3);
    ca(1, 0) = 2.0;

    Tensor onehot(2, 1);
    onehot(1, 0) = 1.0;
    const VarId c1 = pocket_center(t, t.constant(onehot), t.constant(ca));
    CHECK(t.val(c1)(0, 0) == doctest::Approx(2.0));

    Tensor equal_w(2, 1, 0.5);
    const VarId c2 = pocket_center(t, t.constant(equal_w), t.constant(ca));
    CHECK(t.val(c2)(0, 0) == doctest::Approx(1.0));

    CHECK_THROWS_AS((void)pocket_center(t, t.constant(Tensor(2, 1)), t.constant(ca)),
                    NumericError);
}

TEST_CASE("pocket center co-transforms under rigid motion") {
    Rng rng(85);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor ca(5, 3), w(5, 1);
        for (std::size_t k = 0; k < ca.size(); ++k) ca[k] = rng.uniform(-10, 10);
        double sum = 0;
        for (std::size_t k = 0; k < 5; ++k) {
            w[k] = rng.uniform(0.1, 1.0);
            sum += w[k];
        }
        for (std::size_t k = 0; k < 5; ++k) w[k] /= sum;
        const auto m = testutil::random_rigid_motion(rng);
        Tape t(false);
        const VarId c1 = pocket_center(t, t.constant(w), t.constant(ca));
        const VarId c2 = pocket_center(t, t.constant(w),
                                       t.constant(testutil::apply_motion(ca, m)));
        const Vec3 moved = m.apply(t.val(c1).row_vec3(0));
        CHECK(std::abs(moved.x - t.val(c2)(0, 0)) < 1e-9);
        CHECK(std::abs(moved.y - t.val(c2)(0, 1)) < 1e-9);
        CHECK(std::abs(moved.z - t.val(c2)(0, 2)) < 1e-9);
    }
}

TEST_CASE("center and radius huber losses") {
    Tape t(false);
    Tensor zero(1, 3);
    CHECK(t.val(huber_loss(t, t.constant(zero), t.constant(zero), 1.0))[0] == 0.0);

    Tensor p(1, 3);
    p(0, 0) = 0.5;
    CHECK(t.val(huber_loss(t, t.constant(p), t.constant(zero), 1.0))[0] ==
          doctest::Approx(0.125).epsilon(1e-15));
    p(0, 0) = 2.0;
    CHECK(t.val(huber_loss(t, t.constant(p), t.constant(zero), 1.0))[0] ==
          doctest::Approx(1.5).epsilon(1e-15));

    // huber gradient vs finite differences across both branches
    Rng rng(86);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x(1, 3);
        for (std::size_t k = 0; k < 3; ++k) x[k] = rng.uniform(-2, 2);
        Tape tt(true);
        const VarId v = tt.leaf(x, true);
        tt.backward(huber_loss(tt, v, tt.constant(zero), 1.0));
        for (std::size_t k = 0; k < 3; ++k) {
            Tensor xp = x, xm = x;
            xp[k] += 1e-6;
            xm[k] -= 1e-6;
            Tape t2(false);
            const double fp =
                t2.val(huber_loss(t2, t2.constant(xp), t2.constant(zero), 1.0))[0];
            const double fm =
                t2.val(huber_loss(t2, t2.constant(xm), t2.constant(zero), 1.0))[0];
            const double num = (fp - fm) / 2e-6;
            CHECK(std::abs(num - tt.grad(v)[k]) < 1e-5);
        }
    }
}

TEST_CASE("radius head and the dynamic-radius law") {
    CHECK(final_radius(2.0, 16, true, 20.0) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(final_radius(0.0, 1, true, 20.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(final_radius(123.0, 9, false, 20.0) == 20.0); // fixed-radius ablation

    // sqrt(n) is an integer for these sizes, so with dyadic r_hat the
    // subtraction is exact in f64
    for (std::size_t n : {1u, 4u, 16u, 100u})
        for (double raw : {0.0, 0.5, 2.0, 38.25})
            CHECK(final_radius(raw, n, true, 20.0) - raw ==
                  std::sqrt(static_cast<double>(n)));
}

TEST_CASE("pocket loss arithmetic") {
    Tape t(false);
    const VarId a = t.constant_scalar(1.0);
    const VarId b = t.constant_scalar(2.0);
    const VarId c = t.constant_scalar(4.0);
    CHECK(t.val(pocket_loss(t, a, b, c, 0.05))[0] == doctest::Approx(3.2).epsilon(1e-15));
    const VarId z = t.constant_scalar(0.0);
    CHECK(t.val(pocket_loss(t, z, z, z, 0.05))[0] == 0.0);
    CHECK(t.val(pocket_loss(t, a, b, c, 0.0))[0] == doctest::Approx(3.0));
}

TEST_CASE("pocket selection with fallback padding") {
    Tensor ca(10, 3);
    for (std::size_t j = 0; j < 10; ++j) ca(j, 2) = static_cast<double>(j) * 3.0;

    // radius covering everything: full set
    CHECK(select_pocket(ca, {0, 0, 0}, 100.0, 8).size() == 10);

    // radius 0: the 8 nearest
    const auto knn = select_pocket(ca, {0, 0, 0.1}, 0.0, 8);
    CHECK(knn.size() == 8);
    CHECK(knn == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});

    // singleton sphere padded up to 8
    const auto padded = select_pocket(ca, {0, 0, 0}, 1.0, 8);
    CHECK(padded.size() == 8);
    CHECK(padded[0] == 0);

    // tiny protein: min(8, n)
    Tensor small(3, 3);
    for (std::size_t j = 0; j < 3; ++j) small(j, 0) = static_cast<double>(j) * 50.0;
    CHECK(select_pocket(small, {0, 0, 0}, 0.0, 8).size() == 3);
}
