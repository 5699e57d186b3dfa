#pragma once

// shared helpers for the unit and acceptance suites

#include <cmath>
#include <queue>
#include <vector>

#include "curvebind/complex.hpp"
#include "curvebind/curvature.hpp"
#include "curvebind/geom.hpp"
#include "curvebind/params.hpp"
#include "curvebind/rng.hpp"

namespace testutil {

using curvebind::Rng;
using curvebind::SimpleGraph;
using curvebind::Vec3;

inline bool is_connected(const SimpleGraph& g) {
    if (g.n == 0) return true;
    std::vector<char> seen(static_cast<std::size_t>(g.n), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int w : g.adj[static_cast<std::size_t>(u)])
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                ++count;
                q.push(w);
            }
    }
    return count == g.n;
}

inline SimpleGraph random_connected_graph(Rng& rng, int max_n = 12) {
    for (;;) {
        const int n = rng.uniform_int(2, max_n);
        const double p = rng.uniform(0.25, 0.7);
        std::vector<std::pair<int, int>> edges;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.uniform() < p) edges.push_back({i, j});
        const SimpleGraph g = SimpleGraph::from_edges(n, edges);
        bool ok = is_connected(g) && !g.edges.empty();
        if (ok) return g;
    }
}

// orthogonal matrix (rotation or rotoreflection) + translation
inline curvebind::RigidMotion random_rigid_motion(Rng& rng, double shift_scale = 20.0,
                                                  bool allow_reflection = true) {
    // Gram-Schmidt on gaussian vectors
    Vec3 a{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    a = a * (1.0 / a.norm());
    Vec3 b{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    b = b - a * a.dot(b);
    b = b * (1.0 / b.norm());
    Vec3 c{a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
    if (allow_reflection && rng.uniform() < 0.5) c = c * -1.0; // det -1
    curvebind::RigidMotion m;
    m.rot = {a.x, b.x, c.x, a.y, b.y, c.y, a.z, b.z, c.z};
    m.shift = {rng.uniform(-shift_scale, shift_scale), rng.uniform(-shift_scale, shift_scale),
               rng.uniform(-shift_scale, shift_scale)};
    return m;
}

inline curvebind::ComplexRecord transform_record(const curvebind::ComplexRecord& rec,
                                                 const curvebind::RigidMotion& m) {
    curvebind::ComplexRecord out = rec;
    for (auto& r : out.residues) r.ca = m.apply(r.ca);
    for (auto& a : out.ligand_atoms) a.xyz = m.apply(a.xyz);
    for (auto& p : out.input_conformer) p = m.apply(p);
    return out;
}

inline curvebind::Tensor apply_motion(const curvebind::Tensor& coords,
                                      const curvebind::RigidMotion& m) {
    curvebind::Tensor out(coords.rows(), 3);
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        const Vec3 p = m.apply(coords.row_vec3(i));
        out(i, 0) = p.x;
        out(i, 1) = p.y;
        out(i, 2) = p.z;
    }
    return out;
}

// random measure over a given support with strictly positive masses summing
// to one; denominators are bounded so the solver sees clean rationals
inline std::vector<double> random_masses(Rng& rng, std::size_t n, int denom = 64) {
    std::vector<int> parts(n, 1);
    int rest = denom - static_cast<int>(n);
    for (std::size_t k = 0; k + 1 < n && rest > 0; ++k) {
        const int take = rng.uniform_int(0, rest);
        parts[k] += take;
        rest -= take;
    }
    parts[n - 1] += rest;
    std::vector<double> mass(n);
    for (std::size_t k = 0; k < n; ++k) mass[k] = static_cast<double>(parts[k]) / denom;
    return mass;
}

// fill every parameter tensor with small random values (exercises the
// coordinate gates that init_params deliberately zeroes)
inline void randomize_params(curvebind::ParamStore& store, Rng& rng, double scale = 0.15) {
    curvebind::randomize_params(store, rng.bits(), scale);
}

} // namespace testutil
