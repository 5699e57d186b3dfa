#include <doctest.h>

#include <cmath>
#include <functional>

#include "curvebind/rng.hpp"
#include "curvebind/tape.hpp"
#include "test_util.hpp"

using namespace curvebind;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    Tensor t(r, c);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = rng.uniform(lo, hi);
    return t;
}

// builds a scalar from leaves; analytic gradient vs central differences
using Builder = std::function<VarId(Tape&, const std::vector<VarId>&)>;

void check_grads(const Builder& build, std::vector<Tensor> inputs, double tol = 2e-6,
                 double h = 1e-5) {
    Tape t(true);
    std::vector<VarId> vars;
    for (const auto& in : inputs) vars.push_back(t.leaf(in, true));
    const VarId out = build(t, vars);
    REQUIRE(t.val(out).size() == 1);
    t.backward(out);

    auto eval = [&](const std::vector<Tensor>& ins) {
        Tape t2(false);
        std::vector<VarId> vs;
        for (const auto& in : ins) vs.push_back(t2.leaf(in, false));
        return t2.val(build(t2, vs))[0];
    };
    for (std::size_t which = 0; which < inputs.size(); ++which) {
        for (std::size_t k = 0; k < inputs[which].size(); ++k) {
            auto pert = inputs;
            pert[which][k] += h;
            const double fp = eval(pert);
            pert[which][k] -= 2 * h;
            const double fm = eval(pert);
            const double num = (fp - fm) / (2 * h);
            const double ana = t.grad(vars[which])[k];
            const double err =
                std::abs(num - ana) / std::max({1.0, std::abs(num), std::abs(ana)});
            CHECK(err < tol);
        }
    }
}

} // namespace

TEST_CASE("elementwise and broadcast ops differentiate") {
    Rng rng(11);
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.mean_all(t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1])));
        },
        {random_tensor(rng, 3, 4), random_tensor(rng, 3, 4)});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.sum_all(t.scale_rows(t.add_rowvec(v[0], v[1]), v[2]));
        },
        {random_tensor(rng, 4, 3), random_tensor(rng, 1, 3), random_tensor(rng, 4, 1)});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.mean_all(t.add_const(t.scale(v[0], 2.5), -0.75));
        },
        {random_tensor(rng, 2, 5)});
}

TEST_CASE("nonlinearities differentiate") {
    Rng rng(12);
    check_grads([](Tape& t, const std::vector<VarId>& v) { return t.mean_all(t.silu(v[0])); },
                {random_tensor(rng, 3, 3, -2, 2)});
    check_grads([](Tape& t, const std::vector<VarId>& v) { return t.mean_all(t.sigmoid(v[0])); },
                {random_tensor(rng, 3, 3, -2, 2)});
    check_grads([](Tape& t, const std::vector<VarId>& v) { return t.mean_all(t.softplus(v[0])); },
                {random_tensor(rng, 3, 3, -2, 2)});
    check_grads([](Tape& t, const std::vector<VarId>& v) { return t.mean_all(t.log(v[0])); },
                {random_tensor(rng, 3, 3, 0.2, 2.0)});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) { return t.mean_all(t.pow_const(v[0], 2.0)); },
        {random_tensor(rng, 3, 3, 0.2, 2.0)});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) { return t.mean_all(t.pow_const(v[0], 0.0)); },
        {random_tensor(rng, 3, 3, 0.2, 2.0)});
    // inputs kept away from the clamp boundaries
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.mean_all(t.clamp(v[0], -10.0, 10.0));
        },
        {random_tensor(rng, 3, 3, -2, 2)});
}

TEST_CASE("clamp zeroes gradient outside the window") {
    Tape t(true);
    Tensor x(1, 3);
    x[0] = -5.0;
    x[1] = 0.5;
    x[2] = 7.0;
    const VarId v = t.leaf(x, true);
    t.backward(t.sum_all(t.clamp(v, 0.0, 1.0)));
    CHECK(t.grad(v)[0] == 0.0);
    CHECK(t.grad(v)[1] == 1.0);
    CHECK(t.grad(v)[2] == 0.0);
}

TEST_CASE("linear algebra ops differentiate") {
    Rng rng(13);
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) { return t.mean_all(t.matmul(v[0], v[1])); },
        {random_tensor(rng, 3, 4), random_tensor(rng, 4, 2)});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) { return t.mean_all(t.matmul_nt(v[0], v[1])); },
        {random_tensor(rng, 3, 4), random_tensor(rng, 5, 4)});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.mean_all(t.reshape(t.transpose(v[0]), 2, 6));
        },
        {random_tensor(rng, 3, 4)});
}

TEST_CASE("structure ops differentiate") {
    Rng rng(14);
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.mean_all(t.slice_cols(t.concat_cols({v[0], v[1]}), 1, 4));
        },
        {random_tensor(rng, 3, 2), random_tensor(rng, 3, 3)});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            const VarId g = t.gather_rows(v[0], {2, 0, 1, 2, 2});
            return t.mean_all(t.mul(g, g));
        },
        {random_tensor(rng, 3, 3)});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            const VarId s = t.scatter_add_rows(v[0], {0, 0, 1, 3}, 4);
            return t.mean_all(t.mul(s, s));
        },
        {random_tensor(rng, 4, 2)});
}

TEST_CASE("reductions differentiate") {
    Rng rng(15);
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.sum_all(t.mul(t.row_sum(v[0]), t.row_sum(v[0])));
        },
        {random_tensor(rng, 4, 3)});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.sum_all(t.mul(t.col_sum(v[0]), t.col_sum(v[0])));
        },
        {random_tensor(rng, 4, 3)});
}

TEST_CASE("layer norm differentiates and normalizes") {
    Rng rng(16);
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.mean_all(t.mul(t.layer_norm(v[0], v[1], v[2]), v[3]));
        },
        {random_tensor(rng, 4, 6), random_tensor(rng, 1, 6, 0.5, 1.5),
         random_tensor(rng, 1, 6), random_tensor(rng, 4, 6)});

    Tape t(false);
    Tensor gain(1, 6, 1.0), bias(1, 6, 0.0);
    const VarId y = t.layer_norm(t.constant(random_tensor(rng, 3, 6, -4, 4)), t.constant(gain),
                                 t.constant(bias));
    for (std::size_t i = 0; i < 3; ++i) {
        double mu = 0, var = 0;
        for (std::size_t j = 0; j < 6; ++j) mu += t.val(y)(i, j);
        mu /= 6;
        for (std::size_t j = 0; j < 6; ++j)
            var += (t.val(y)(i, j) - mu) * (t.val(y)(i, j) - mu);
        CHECK(std::abs(mu) < 1e-12);
        CHECK(std::abs(var / 6.0 - 1.0) < 1e-3); // eps shifts it slightly
    }
}

TEST_CASE("softmax variants differentiate and normalize") {
    Rng rng(17);
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.mean_all(t.mul(t.softmax_rows(v[0]), v[1]));
        },
        {random_tensor(rng, 3, 5, -2, 2), random_tensor(rng, 3, 5)});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.mean_all(t.mul(t.softmax_all(v[0]), v[1]));
        },
        {random_tensor(rng, 4, 1, -2, 2), random_tensor(rng, 4, 1)});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            const VarId s = t.segment_softmax(v[0], {0, 0, 0, 2, 2, 3}, 4);
            return t.mean_all(t.mul(s, v[1]));
        },
        {random_tensor(rng, 6, 1, -2, 2), random_tensor(rng, 6, 1)});

    Tape t(false);
    const VarId s =
        t.segment_softmax(t.constant(random_tensor(rng, 6, 1, -3, 3)), {0, 0, 0, 2, 2, 3}, 4);
    CHECK(std::abs(t.val(s)(0, 0) + t.val(s)(1, 0) + t.val(s)(2, 0) - 1.0) < 1e-12);
    CHECK(std::abs(t.val(s)(3, 0) + t.val(s)(4, 0) - 1.0) < 1e-12);
    CHECK(std::abs(t.val(s)(5, 0) - 1.0) < 1e-12);
}

TEST_CASE("geometry ops differentiate") {
    Rng rng(18);
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.mean_all(t.norm_rows(v[0]));
        },
        {random_tensor(rng, 4, 3, 0.5, 2.0)});
    // rows with norms straddling both huber branches, away from delta
    Tensor h(3, 3);
    h(0, 0) = 0.1;
    h(1, 1) = 0.4;
    h(2, 0) = 2.0;
    h(2, 1) = 1.5;
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.sum_all(t.huber_rows(v[0], 1.0));
        },
        {h});
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.mean_all(t.div_by_scalar(v[0], t.sum_all(v[1])));
        },
        {random_tensor(rng, 3, 3), random_tensor(rng, 4, 1, 0.5, 1.0)});
}

TEST_CASE("huber branch values are exact") {
    Tape t(false);
    Tensor e(3, 1);
    e(0, 0) = 0.0;
    e(1, 0) = 0.5;
    e(2, 0) = 2.0;
    const VarId h = t.huber_rows(t.constant(e), 1.0);
    CHECK(t.val(h)(0, 0) == 0.0);
    CHECK(t.val(h)(1, 0) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(t.val(h)(2, 0) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("opm_combine differentiates and matches the explicit outer product") {
    Rng rng(19);
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            return t.mean_all(t.opm_combine(v[0], v[1], v[2], v[3]));
        },
        {random_tensor(rng, 3, 2), random_tensor(rng, 4, 2), random_tensor(rng, 4, 3),
         random_tensor(rng, 1, 3)});

    // value check against a direct kron-and-project evaluation
    const Tensor a = random_tensor(rng, 2, 3), b = random_tensor(rng, 3, 3);
    const Tensor w = random_tensor(rng, 9, 2), bias = random_tensor(rng, 1, 2);
    Tape t(false);
    const VarId z = t.opm_combine(t.constant(a), t.constant(b), t.constant(w), t.constant(bias));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t c = 0; c < 2; ++c) {
                double want = bias(0, c);
                for (std::size_t s = 0; s < 3; ++s)
                    for (std::size_t u = 0; u < 3; ++u)
                        want += a(i, s) * b(j, u) * w(s * 3 + u, c);
                CHECK(t.val(z)(i * 3 + j, c) == doctest::Approx(want).epsilon(1e-12));
            }
}

TEST_CASE("backward through a composite expression") {
    Rng rng(20);
    check_grads(
        [](Tape& t, const std::vector<VarId>& v) {
            const VarId h = t.silu(t.add_rowvec(t.matmul(v[0], v[1]), v[2]));
            const VarId s = t.softmax_rows(t.matmul_nt(h, h));
            return t.mean_all(t.matmul(s, h));
        },
        {random_tensor(rng, 3, 4), random_tensor(rng, 4, 4), random_tensor(rng, 1, 4)});
}
