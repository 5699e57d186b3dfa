#include <doctest.h>

#include <sstream>

#include "curvebind/errors.hpp"
#include "curvebind/features.hpp"
#include "curvebind/model.hpp"
#include "curvebind/net.hpp"
#include "test_util.hpp"

using namespace curvebind;

namespace {
ComplexRecord one_atom_record(LigandAtom atom) {
    ComplexRecord rec;
    rec.id = "one";
    rec.residues = {{"GLY", {0, 0, 0}, ""}};
    rec.ligand_atoms.push_back(std::move(atom));
    return rec;
}
} // namespace

TEST_CASE("ligand features: one-hot structure for an aromatic ring carbon") {
    LigandAtom a;
    a.element = "C";
    a.aromatic = true;
    a.in_ring = true;
    a.h_count = 1;
    ComplexRecord rec = one_atom_record(a);
    LigandAtom b = a;
    b.element = "N";
    b.xyz = {1.4, 0, 0};
    rec.ligand_atoms.push_back(b);
    rec.ligand_bonds = {{0, 1, BondOrder::Aromatic}};
    const LigandGraph g = build_ligand_graph(rec);
    const Tensor f = ligand_base_features(rec, g);
    REQUIRE(f.cols() == 52);

    auto block_sum = [&](std::size_t i, std::size_t from, std::size_t to) {
        double s = 0;
        for (std::size_t j = from; j < to; ++j) s += f(i, j);
        return s;
    };
    CHECK(block_sum(0, 0, 18) == 1.0);   // element
    CHECK(f(0, 0) == 1.0);               // carbon slot
    CHECK(block_sum(0, 18, 25) == 1.0);  // degree
    CHECK(f(0, 18 + 1) == 1.0);          // degree 1
    CHECK(block_sum(0, 25, 30) == 1.0);  // charge
    CHECK(f(0, 25 + 2) == 1.0);          // charge 0
    CHECK(block_sum(0, 30, 38) == 1.0);  // valence (1.5 aromatic + 1 H -> 2...3)
    CHECK(f(0, 38) == 1.0);              // aromatic flag
    CHECK(f(0, 39) == 1.0);              // ring flag
    CHECK(block_sum(0, 40, 45) == 1.0);  // h-count
    CHECK(f(0, 40 + 1) == 1.0);
    CHECK(block_sum(0, 45, 47) == 0.0);  // chirality reserved
    CHECK(f(0, 47 + 3) == 1.0);          // aromatic bond histogram slot
    CHECK(f(0, 51) == 1.0);              // bias
}

TEST_CASE("ligand features: default atom sums over one-hot blocks plus bias") {
    LigandAtom a;
    a.element = "C";
    const ComplexRecord rec = one_atom_record(a);
    const Tensor f = ligand_base_features(rec, build_ligand_graph(rec));
    double sum = 0;
    for (std::size_t j = 0; j < f.cols(); ++j) sum += f(0, j);
    // 5 one-hot blocks light up (element, degree, charge, valence, h-count)
    // + bias; flags and histogram stay zero
    CHECK(sum == 6.0);
}

TEST_CASE("ligand features: out-of-range attributes clamp to the boundary slot") {
    LigandAtom a;
    a.element = "C";
    a.formal_charge = -3;
    const ComplexRecord rec = one_atom_record(a);
    int clamped = 0;
    const Tensor f = ligand_base_features(rec, build_ligand_graph(rec), &clamped);
    CHECK(f(0, 25 + 0) == 1.0); // -2 slot
    CHECK(clamped == 1);

    LigandAtom h;
    h.element = "C";
    h.h_count = 9;
    const ComplexRecord rec2 = one_atom_record(h);
    int clamped2 = 0;
    const Tensor f2 = ligand_base_features(rec2, build_ligand_graph(rec2), &clamped2);
    CHECK(f2(0, 40 + 4) == 1.0);
    CHECK(clamped2 >= 1);
}

TEST_CASE("unknown element lands in the catch-all slot") {
    LigandAtom a;
    a.element = "Xx";
    const ComplexRecord rec = one_atom_record(a);
    const Tensor f = ligand_base_features(rec, build_ligand_graph(rec));
    CHECK(f(0, 17) == 1.0);
}

TEST_CASE("protein fallback features") {
    ComplexRecord rec;
    rec.id = "prot";
    rec.residues = {{"GLY", {0, 0, 0}, ""}, {"TRP", {4, 0, 0}, ""}};
    LigandAtom a;
    a.element = "C";
    a.xyz = {0, 0, 1};
    rec.ligand_atoms.push_back(a);

    const Tensor f = protein_base_features(rec, nullptr, ProteinFeatureMode::Fallback25);
    REQUIRE(f.cols() == 25);
    CHECK(f(0, static_cast<std::size_t>(amino_acid_index("GLY"))) == 1.0);
    CHECK(f(0, 24) == 0.0); // glycine is not aromatic
    CHECK(f(1, static_cast<std::size_t>(amino_acid_index("TRP"))) == 1.0);
    CHECK(f(1, 24) == 1.0); // tryptophan is
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(f(i, 20) >= 0.0);
        CHECK(f(i, 20) <= 1.0);
        CHECK(f(i, 23) >= 0.0);
        CHECK(f(i, 23) <= 1.0);
    }
}

TEST_CASE("protein precomputed features come from the table") {
    ComplexRecord rec;
    rec.id = "p";
    rec.embedding_key = "p";
    rec.residues = {{"GLY", {0, 0, 0}, ""}, {"ALA", {4, 0, 0}, ""}, {"SER", {8, 0, 0}, ""}};
    LigandAtom a;
    a.element = "C";
    a.xyz = {0, 0, 1};
    rec.ligand_atoms.push_back(a);

    std::ostringstream tsv;
    for (int r = 0; r < 3; ++r) {
        tsv << "p\t" << r;
        for (int c = 0; c < 1280; ++c) tsv << "\t" << 0.001 * (r + 1);
        tsv << "\n";
    }
    std::istringstream in(tsv.str());
    const EmbeddingTable table = load_embedding_table(in);
    const Tensor f = protein_base_features(rec, &table, ProteinFeatureMode::Precomputed1280);
    CHECK(f.rows() == 3);
    CHECK(f.cols() == 1280);

    ComplexRecord missing = rec;
    missing.embedding_key = "absent";
    CHECK_THROWS_AS((void)protein_base_features(missing, &table,
                                                ProteinFeatureMode::Precomputed1280),
                    MissingEmbeddingError);
}

TEST_CASE("assemble_node_features widths and linearity") {
    Tape t(true);
    Rng rng(51);
    ModelConfig cfg;
    cfg.d_node = 8;
    cfg.d_pair = 4;
    cfg.d_opm = 2;
    cfg.heads = 2;

    // ligand: 52 + 5 -> projection input width 57
    Tensor w(57, 8), b(1, 8);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = rng.uniform(-0.5, 0.5);
    Tensor base(3, 52), lcf(3, 5);
    for (std::size_t k = 0; k < base.size(); ++k) base[k] = rng.uniform(-1, 1);
    for (std::size_t k = 0; k < lcf.size(); ++k) lcf[k] = rng.uniform(-1, 1);
    const VarId h = assemble_node_features(t, t.constant(base), t.constant(lcf), t.constant(w),
                                           t.constant(b), true);
    CHECK(t.val(h).rows() == 3);
    CHECK(t.val(h).cols() == 8);

    // fallback protein: 25 + 5 -> input width 30
    Tensor wp(30, 8), bp(1, 8);
    const VarId hp = assemble_node_features(t, t.constant(Tensor(2, 25)), t.constant(Tensor(2, 5)),
                                            t.constant(wp), t.constant(bp), true);
    CHECK(t.val(hp).cols() == 8);

    // zero base, zero LCF, zero bias -> zero rows
    const VarId hz = assemble_node_features(t, t.constant(Tensor(3, 52)), t.constant(Tensor(3, 5)),
                                            t.constant(w), t.constant(Tensor(1, 8)), true);
    CHECK(t.val(hz).max_abs() == 0.0);

    // with use_lcf off the LCF block is zeroed: result must equal passing
    // explicit zeros
    const VarId off = assemble_node_features(t, t.constant(base), t.constant(lcf), t.constant(w),
                                             t.constant(b), false);
    const VarId zeroed = assemble_node_features(t, t.constant(base), t.constant(Tensor(3, 5)),
                                                t.constant(w), t.constant(b), true);
    CHECK(max_abs_diff(t.val(off), t.val(zeroed)) == 0.0);
}

TEST_CASE("OPM pair embedding properties") {
    ModelConfig cfg;
    cfg.d_node = 6;
    cfg.d_pair = 4;
    cfg.d_opm = 2;
    cfg.heads = 2;
    ParamStore params = init_params(cfg, 3);
    Rng rng(52);

    // zero inner maps: z equals the outer-map bias everywhere
    for (const char* n : {"enc.opm.a.W", "enc.opm.a.b", "enc.opm.b.W", "enc.opm.b.b"})
        params.at(n) = Tensor(params.at(n).rows(), params.at(n).cols());
    Tensor out_b(1, 4);
    out_b(0, 2) = 1.25;
    params.at("enc.opm.out.b") = out_b;
    {
        Tape t(false);
        ParamVars P(t, params, false);
        Tensor hl(2, 6), hp(3, 6);
        for (std::size_t k = 0; k < hl.size(); ++k) hl[k] = rng.uniform(-1, 1);
        for (std::size_t k = 0; k < hp.size(); ++k) hp[k] = rng.uniform(-1, 1);
        const VarId z = opm_pair_embedding(t, P, "enc.opm", t.constant(hl), t.constant(hp));
        for (std::size_t p = 0; p < 6; ++p) {
            CHECK(t.val(z)(p, 2) == 1.25);
            CHECK(t.val(z)(p, 0) == 0.0);
        }
    }

    // permuting ligand rows permutes z rows identically
    params = init_params(cfg, 4);
    {
        Tape t(false);
        ParamVars P(t, params, false);
        Tensor hl(3, 6), hp(2, 6);
        for (std::size_t k = 0; k < hl.size(); ++k) hl[k] = rng.uniform(-1, 1);
        for (std::size_t k = 0; k < hp.size(); ++k) hp[k] = rng.uniform(-1, 1);
        const VarId z1 = opm_pair_embedding(t, P, "enc.opm", t.constant(hl), t.constant(hp));
        Tensor hl_perm(3, 6);
        const int perm[3] = {2, 0, 1}; // row i of perm'd = row perm[i] of orig
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 6; ++j)
                hl_perm(i, j) = hl(static_cast<std::size_t>(perm[i]), j);
        const VarId z2 = opm_pair_embedding(t, P, "enc.opm", t.constant(hl_perm), t.constant(hp));
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                for (std::size_t c = 0; c < 4; ++c)
                    CHECK(t.val(z2)(i * 2 + j, c) ==
                          doctest::Approx(t.val(z1)(static_cast<std::size_t>(perm[i]) * 2 + j, c))
                              .epsilon(1e-12));
    }
}

TEST_CASE("d_opm = 1 reduces OPM to a scalar product of affine images") {
    ModelConfig cfg;
    cfg.d_node = 4;
    cfg.d_pair = 3;
    cfg.d_opm = 1;
    cfg.heads = 2;
    ParamStore params = init_params(cfg, 5);
    Tape t(false);
    ParamVars P(t, params, false);
    Rng rng(53);
    Tensor hl(2, 4), hp(2, 4);
    for (std::size_t k = 0; k < hl.size(); ++k) hl[k] = rng.uniform(-1, 1);
    for (std::size_t k = 0; k < hp.size(); ++k) hp[k] = rng.uniform(-1, 1);
    const VarId z = opm_pair_embedding(t, P, "enc.opm", t.constant(hl), t.constant(hp));

    auto aff1 = [&](const char* wn, const char* bn, const Tensor& x, std::size_t row) {
        const Tensor& w = params.at(wn);
        const Tensor& b = params.at(bn);
        double s = b(0, 0);
        for (std::size_t j = 0; j < x.cols(); ++j) s += x(row, j) * w(j, 0);
        return s;
    };
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const double prod = aff1("enc.opm.a.W", "enc.opm.a.b", hl, i) *
                                aff1("enc.opm.b.W", "enc.opm.b.b", hp, j);
            for (std::size_t c = 0; c < 3; ++c) {
                const double want =
                    prod * params.at("enc.opm.out.W")(0, c) + params.at("enc.opm.out.b")(0, c);
                CHECK(t.val(z)(i * 2 + j, c) == doctest::Approx(want).epsilon(1e-12));
            }
        }
}

TEST_CASE("features are invariant under rigid motion of the whole complex") {
    ModelConfig cfg;
    cfg.d_node = 8;
    cfg.d_pair = 4;
    cfg.d_opm = 2;
    cfg.heads = 2;
    Rng rng(54);
    const ComplexRecord rec = make_synthetic_complex(202);
    const auto m = testutil::random_rigid_motion(rng);
    const ComplexInstance a = prepare_instance(rec, nullptr, cfg);
    const ComplexInstance b = prepare_instance(testutil::transform_record(rec, m), nullptr, cfg);
    CHECK(max_abs_diff(a.lig_base, b.lig_base) == 0.0);
    CHECK(max_abs_diff(a.prot_base, b.prot_base) == 0.0);
    CHECK(max_abs_diff(a.lig_lcf, b.lig_lcf) == 0.0);
    CHECK(max_abs_diff(a.prot_lcf, b.prot_lcf) == 0.0);
}

TEST_CASE("feature override file replaces the built-in featurizer") {
    std::ostringstream tsv;
    for (int i = 0; i < 2; ++i) {
        tsv << i;
        for (int j = 0; j < 52; ++j) tsv << '\t' << (i + 1) * 0.5;
        tsv << '\n';
    }
    std::istringstream in(tsv.str());
    const Tensor f = load_ligand_feature_override(in, 2);
    CHECK(f(0, 0) == 0.5);
    CHECK(f(1, 51) == 1.0);

    std::istringstream missing("0\t1\n");
    CHECK_THROWS_AS((void)load_ligand_feature_override(missing, 2), ParseError);
}
