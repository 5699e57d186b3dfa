#include <doctest.h>

#include <cmath>

#include "curvebind/model.hpp"
#include "curvebind/net.hpp"
#include "test_util.hpp"

using namespace curvebind;

namespace {

ModelConfig micro_config() {
    ModelConfig cfg;
    cfg.d_node = 8;
    cfg.d_pair = 4;
    cfg.d_opm = 2;
    cfg.heads = 2;
    cfg.pocket_layers = 1;
    cfg.dock_layers = 1;
    cfg.refine_iterations = 1;
    return cfg;
}

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double s = 1.0) {
    Tensor t(r, c);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = rng.uniform(-s, s);
    return t;
}

void zero_param(ParamStore& ps, const std::string& name) {
    Tensor& t = ps.at(name);
    t = Tensor(t.rows(), t.cols());
}

struct MicroSetup {
    ModelConfig cfg = micro_config();
    ParamStore params;
    Tensor h_l, h_p, x_l, x_p;
    DirectedEdges lig_edges;

    explicit MicroSetup(std::uint64_t seed) {
        Rng rng(seed);
        params = init_params(cfg, seed);
        testutil::randomize_params(params, rng, 0.3);
        h_l = random_tensor(rng, 3, 8);
        h_p = random_tensor(rng, 4, 8);
        x_l = random_tensor(rng, 3, 3, 3.0);
        x_p = random_tensor(rng, 4, 3, 6.0);
        lig_edges = directed_with_degree_weights(3, {{0, 1}, {1, 2}}, {1, 2, 1}, false);
    }
};

} // namespace

TEST_CASE("independent update: zero gate leaves coordinates unchanged, h moves") {
    MicroSetup m(61);
    zero_param(m.params, "pocket.l0.lig.gate.W1");
    zero_param(m.params, "pocket.l0.lig.gate.b1");
    zero_param(m.params, "pocket.l0.lig.gate.W2");
    zero_param(m.params, "pocket.l0.lig.gate.b2");
    Tape t(false);
    ParamVars P(t, m.params, false);
    auto [h2, x2] = independent_update(t, P, "pocket.l0.lig.", t.constant(m.h_l),
                                       t.constant(m.x_l), m.lig_edges, true);
    CHECK(max_abs_diff(t.val(x2), m.x_l) == 0.0);
    CHECK(max_abs_diff(t.val(h2), m.h_l) > 1e-6);
}

TEST_CASE("independent update: isolated nodes stay untouched") {
    MicroSetup m(62);
    // node 2 isolated
    const DirectedEdges de = directed_with_degree_weights(3, {{0, 1}}, {1, 1, 0}, false);
    Tape t(false);
    ParamVars P(t, m.params, false);
    auto [h2, x2] = independent_update(t, P, "pocket.l0.lig.", t.constant(m.h_l),
                                       t.constant(m.x_l), de, true);
    for (std::size_t j = 0; j < 8; ++j) CHECK(t.val(h2)(2, j) == m.h_l(2, j));
    for (std::size_t j = 0; j < 3; ++j) CHECK(t.val(x2)(2, j) == m.x_l(2, j));
    CHECK(max_abs_diff(t.val(h2), m.h_l) > 0.0);
}

TEST_CASE("cross attention: all-equal logits give a uniform average") {
    MicroSetup m(63);
    // zero q/k and bias: logits constant -> softmax uniform
    zero_param(m.params, "pocket.l0.att.q.W");
    zero_param(m.params, "pocket.l0.att.q.b");
    zero_param(m.params, "pocket.l0.att.k.W");
    zero_param(m.params, "pocket.l0.att.k.b");
    zero_param(m.params, "pocket.l0.att.bias.W");
    zero_param(m.params, "pocket.l0.att.bias.b");

    Tape t(false);
    ParamVars P(t, m.params, false);
    const VarId hl = t.constant(m.h_l);
    const VarId hp = t.constant(m.h_p);
    const VarId z = t.constant(random_tensor(*(new Rng(99)), 12, 4)); // bias map is zeroed anyway
    const CrossAttentionOut out = cross_attention_update(t, P, "pocket.l0.", hl, hp, z, 3, 4, 2);

    // expected: h_l + Linear(mean over protein of v)
    const Tensor& gain = m.params.at("pocket.l0.prot.ln_att.g");
    (void)gain;
    // compute v rows from normalized h_p, average, project
    Tape t2(false);
    ParamVars P2(t2, m.params, false);
    const VarId hpn = t2.layer_norm(t2.constant(m.h_p), P2("pocket.l0.prot.ln_att.g"),
                                    P2("pocket.l0.prot.ln_att.b"));
    const VarId v = affine(t2, hpn, P2("pocket.l0.att.v.W"), P2("pocket.l0.att.v.b"));
    Tensor vbar(1, 8);
    for (std::size_t j = 0; j < 8; ++j) {
        double s = 0;
        for (std::size_t i = 0; i < 4; ++i) s += t2.val(v)(i, j);
        vbar(0, j) = s / 4.0;
    }
    const VarId delta = affine(t2, t2.constant(vbar), P2("pocket.l0.att.out.W"),
                               P2("pocket.l0.att.out.b"));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            CHECK(t.val(out.h_l)(i, j) ==
                  doctest::Approx(m.h_l(i, j) + t2.val(delta)(0, j)).epsilon(1e-10));
}

TEST_CASE("cross attention: single protein node gets weight one") {
    MicroSetup m(64);
    Tape t(false);
    ParamVars P(t, m.params, false);
    const Tensor hp1 = random_tensor(*(new Rng(7)), 1, 8);
    const VarId z = t.constant(random_tensor(*(new Rng(8)), 3, 4));
    const CrossAttentionOut out = cross_attention_update(t, P, "pocket.l0.", t.constant(m.h_l),
                                                         t.constant(hp1), z, 3, 1, 2);
    // with one key the attention output is Linear(v_0) regardless of logits
    Tape t2(false);
    ParamVars P2(t2, m.params, false);
    const VarId hpn = t2.layer_norm(t2.constant(hp1), P2("pocket.l0.prot.ln_att.g"),
                                    P2("pocket.l0.prot.ln_att.b"));
    const VarId v = affine(t2, hpn, P2("pocket.l0.att.v.W"), P2("pocket.l0.att.v.b"));
    const VarId delta =
        affine(t2, v, P2("pocket.l0.att.out.W"), P2("pocket.l0.att.out.b"));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            CHECK(t.val(out.h_l)(i, j) ==
                  doctest::Approx(m.h_l(i, j) + t2.val(delta)(0, j)).epsilon(1e-10));
}

TEST_CASE("cross attention: zero output projection leaves h unchanged") {
    MicroSetup m(65);
    zero_param(m.params, "pocket.l0.att.out.W");
    zero_param(m.params, "pocket.l0.att.out.b");
    Tape t(false);
    ParamVars P(t, m.params, false);
    const VarId z = t.constant(random_tensor(*(new Rng(9)), 12, 4));
    const CrossAttentionOut out = cross_attention_update(t, P, "pocket.l0.", t.constant(m.h_l),
                                                         t.constant(m.h_p), z, 3, 4, 2);
    CHECK(max_abs_diff(t.val(out.h_l), m.h_l) == 0.0);
    CHECK(max_abs_diff(t.val(out.h_p), m.h_p) == 0.0);
}

TEST_CASE("interface update spec cases") {
    MicroSetup m(66);
    Tape t(false);
    ParamVars P(t, m.params, false);
    const VarId z = t.constant(random_tensor(*(new Rng(10)), 12, 4));

    SUBCASE("single cross neighbor gets attention one") {
        const std::vector<std::pair<int, int>> pairs = {{0, 2}};
        auto [h2, x2] = interface_update(t, P, "pocket.l0.lig.", t.constant(m.h_l),
                                         t.constant(m.x_l), t.constant(m.h_p),
                                         t.constant(m.x_p), z, pairs, true, 4, true);
        // recompute the delta without any softmax: alpha must be 1
        Tape t2(false);
        ParamVars P2(t2, m.params, false);
        const VarId hs = t2.layer_norm(t2.constant(m.h_l), P2("pocket.l0.lig.ln_ifc.g"),
                                       P2("pocket.l0.lig.ln_ifc.b"));
        (void)hs;
        // h delta for node 0 equals v_ij exactly when alpha = 1
        Tensor dh(1, 8);
        for (std::size_t j = 0; j < 8; ++j) dh(0, j) = t.val(h2)(0, j) - m.h_l(0, j);
        CHECK(dh.max_abs() > 0.0);
        // nodes without cross neighbors unchanged
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(t.val(h2)(1, j) == m.h_l(1, j));
            CHECK(t.val(h2)(2, j) == m.h_l(2, j));
        }
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(t.val(x2)(1, j) == m.x_l(1, j));
            CHECK(t.val(x2)(2, j) == m.x_l(2, j));
        }
    }

    SUBCASE("zero coordinate gate freezes coordinates") {
        zero_param(m.params, "pocket.l0.lig.ifxv.W1");
        zero_param(m.params, "pocket.l0.lig.ifxv.b1");
        zero_param(m.params, "pocket.l0.lig.ifxv.W2");
        zero_param(m.params, "pocket.l0.lig.ifxv.b2");
        Tape tz(false);
        ParamVars Pz(tz, m.params, false);
        const VarId zz = tz.constant(random_tensor(*(new Rng(11)), 12, 4));
        auto [h2, x2] = interface_update(tz, Pz, "pocket.l0.lig.", tz.constant(m.h_l),
                                         tz.constant(m.x_l), tz.constant(m.h_p),
                                         tz.constant(m.x_p), zz, {{0, 1}, {0, 2}, {2, 3}}, true,
                                         4, true);
        CHECK(max_abs_diff(tz.val(x2), m.x_l) == 0.0);
        CHECK(max_abs_diff(tz.val(h2), m.h_l) > 0.0);
    }

    SUBCASE("empty cross-edge set is a no-op") {
        auto [h2, x2] = interface_update(t, P, "pocket.l0.lig.", t.constant(m.h_l),
                                         t.constant(m.x_l), t.constant(m.h_p),
                                         t.constant(m.x_p), z, {}, true, 4, true);
        CHECK(max_abs_diff(t.val(h2), m.h_l) == 0.0);
        CHECK(max_abs_diff(t.val(x2), m.x_l) == 0.0);
    }
}

TEST_CASE("full layer: zero gates keep all coordinates fixed") {
    MicroSetup m(67);
    for (const char* side : {"lig", "prot"})
        for (const char* blk : {"gate", "ifxv"})
            for (const char* suffix : {".W1", ".b1", ".W2", ".b2"})
                zero_param(m.params, std::string("pocket.l0.") + side + "." + blk + suffix);
    Tape t(false);
    ParamVars P(t, m.params, false);
    GraphStateVars s;
    s.h_l = t.constant(m.h_l);
    s.h_p = t.constant(m.h_p);
    s.x_l = t.constant(m.x_l);
    s.x_p = t.constant(m.x_p);
    s.n_l = 3;
    s.n_p = 4;
    ModelConfig cfg = m.cfg;
    cfg.freeze_protein_coords = false; // prove the gates, not the freeze flag
    Tape t2(false);
    ParamVars P2(t2, m.params, false);
    GraphStateVars s2;
    s2.h_l = t2.constant(m.h_l);
    s2.h_p = t2.constant(m.h_p);
    s2.x_l = t2.constant(m.x_l);
    s2.x_p = t2.constant(m.x_p);
    s2.n_l = 3;
    s2.n_p = 4;
    StackGeom geom;
    geom.lig = m.lig_edges;
    geom.prot = directed_with_degree_weights(4, {{0, 1}, {1, 2}, {2, 3}}, {1, 2, 2, 1}, false);
    s2.z = t2.constant(random_tensor(*(new Rng(12)), 12, 4));
    const GraphStateVars out = layer_forward(t2, P2, "pocket.l0.", s2, geom,
                                             {{0, 0}, {1, 2}}, cfg);
    CHECK(max_abs_diff(t2.val(out.x_l), m.x_l) == 0.0);
    CHECK(max_abs_diff(t2.val(out.x_p), m.x_p) == 0.0);
}

TEST_CASE("full layer: zero residual branches keep h fixed") {
    MicroSetup m(68);
    for (const char* side : {"lig", "prot"}) {
        for (const char* suffix : {".W2", ".b2"}) {
            zero_param(m.params, std::string("pocket.l0.") + side + ".upd" + suffix);
            zero_param(m.params, std::string("pocket.l0.") + side + ".ifv" + suffix);
        }
    }
    zero_param(m.params, "pocket.l0.att.out.W");
    zero_param(m.params, "pocket.l0.att.out.b");

    Tape t(false);
    ParamVars P(t, m.params, false);
    GraphStateVars s;
    s.h_l = t.constant(m.h_l);
    s.h_p = t.constant(m.h_p);
    s.x_l = t.constant(m.x_l);
    s.x_p = t.constant(m.x_p);
    s.z = t.constant(random_tensor(*(new Rng(13)), 12, 4));
    s.n_l = 3;
    s.n_p = 4;
    StackGeom geom;
    geom.lig = m.lig_edges;
    geom.prot = directed_with_degree_weights(4, {{0, 1}, {1, 2}, {2, 3}}, {1, 2, 2, 1}, false);
    const GraphStateVars out = layer_forward(t, P, "pocket.l0.", s, geom, {{0, 0}, {1, 2}}, m.cfg);
    CHECK(max_abs_diff(t.val(out.h_l), m.h_l) == 0.0);
    CHECK(max_abs_diff(t.val(out.h_p), m.h_p) == 0.0);
}

TEST_CASE("stack with one layer equals layer_forward") {
    MicroSetup m(69);
    StackGeom geom;
    geom.lig = m.lig_edges;
    geom.prot = directed_with_degree_weights(4, {{0, 1}, {1, 2}, {2, 3}}, {1, 2, 2, 1}, false);
    geom.cross_cutoff = 10.0;

    Tape t(false);
    ParamVars P(t, m.params, false);
    GraphStateVars s;
    s.h_l = t.constant(m.h_l);
    s.h_p = t.constant(m.h_p);
    s.x_l = t.constant(m.x_l);
    s.x_p = t.constant(m.x_p);
    s.z = t.constant(random_tensor(*(new Rng(14)), 12, 4));
    s.n_l = 3;
    s.n_p = 4;
    const GraphStateVars a = stack_forward(t, P, "pocket", 1, s, geom, m.cfg);

    const CrossEdges ce = build_cross_edges(coords_from_tensor(m.x_l),
                                            coords_from_tensor(m.x_p), 10.0);
    const GraphStateVars b = layer_forward(t, P, "pocket.l0.", s, geom, ce.pairs, m.cfg);
    CHECK(max_abs_diff(t.val(a.h_l), t.val(b.h_l)) == 0.0);
    CHECK(max_abs_diff(t.val(a.x_l), t.val(b.x_l)) == 0.0);
}

TEST_CASE("layer is E(3) equivariant") {
    MicroSetup m(70);
    StackGeom geom;
    geom.lig = m.lig_edges;
    geom.prot = directed_with_degree_weights(4, {{0, 1}, {1, 2}, {2, 3}}, {1, 2, 2, 1}, false);
    ModelConfig cfg = m.cfg;
    cfg.freeze_protein_coords = false;

    Rng rng(71);
    for (int trial = 0; trial < 5; ++trial) {
        const auto motion = testutil::random_rigid_motion(rng, 10.0);
        const Tensor z0 = random_tensor(rng, 12, 4);
        const std::vector<std::pair<int, int>> cross = {{0, 1}, {1, 1}, {2, 3}};

        Tape t1(false);
        ParamVars P1(t1, m.params, false);
        GraphStateVars s1;
        s1.h_l = t1.constant(m.h_l);
        s1.h_p = t1.constant(m.h_p);
        s1.x_l = t1.constant(m.x_l);
        s1.x_p = t1.constant(m.x_p);
        s1.z = t1.constant(z0);
        s1.n_l = 3;
        s1.n_p = 4;
        const GraphStateVars o1 = layer_forward(t1, P1, "pocket.l0.", s1, geom, cross, cfg);

        Tape t2(false);
        ParamVars P2(t2, m.params, false);
        GraphStateVars s2 = s1;
        s2.h_l = t2.constant(m.h_l);
        s2.h_p = t2.constant(m.h_p);
        s2.x_l = t2.constant(testutil::apply_motion(m.x_l, motion));
        s2.x_p = t2.constant(testutil::apply_motion(m.x_p, motion));
        s2.z = t2.constant(z0);
        const GraphStateVars o2 = layer_forward(t2, P2, "pocket.l0.", s2, geom, cross, cfg);

        CHECK(max_abs_diff(t1.val(o1.h_l), t2.val(o2.h_l)) < 1e-9);
        CHECK(max_abs_diff(t1.val(o1.h_p), t2.val(o2.h_p)) < 1e-9);
        CHECK(max_abs_diff(testutil::apply_motion(t1.val(o1.x_l), motion), t2.val(o2.x_l)) <
              1e-9);
        CHECK(max_abs_diff(testutil::apply_motion(t1.val(o1.x_p), motion), t2.val(o2.x_p)) <
              1e-9);
    }
}

TEST_CASE("attention rows and degree weights are normalized") {
    // degree weights: covered per node in the graph tests; here: attention
    MicroSetup m(72);
    Tape t(false);
    const Tensor logits = random_tensor(*(new Rng(15)), 3, 5, 2.0);
    const VarId s = t.softmax_rows(t.constant(logits));
    for (std::size_t i = 0; i < 3; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < 5; ++j) sum += t.val(s)(i, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}
