#include "curvebind/transport.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "curvebind/errors.hpp"

namespace curvebind {

namespace {
constexpr double kMassTol = 1e-13;
constexpr double kFeasTol = 1e-9;
} // namespace

double solve_transport_plan(const std::vector<double>& supply, const std::vector<double>& demand,
                            const Tensor& cost, Tensor& plan) {
    const std::size_t n = supply.size(), m = demand.size();
    if (cost.rows() != n || cost.cols() != m) throw ShapeError("transport: cost shape");
    double total_s = 0.0, total_d = 0.0;
    for (double v : supply) {
        if (v < 0.0 || !std::isfinite(v)) throw NumericError("transport: negative supply");
        total_s += v;
    }
    for (double v : demand) {
        if (v < 0.0 || !std::isfinite(v)) throw NumericError("transport: negative demand");
        total_d += v;
    }
    for (std::size_t k = 0; k < cost.size(); ++k)
        if (!std::isfinite(cost[k]) || cost[k] < 0.0)
            throw NumericError("transport: cost must be finite and nonnegative");
    if (std::abs(total_s - total_d) > kFeasTol)
        throw NumericError("transport: supply/demand mass mismatch");

    std::vector<double> rem_s = supply, rem_d = demand;
    // reconcile rounding so the final remaining masses can reach zero together
    if (total_d > 0.0) {
        const double f = total_s / total_d;
        for (double& v : rem_d) v *= f;
    }

    plan = Tensor(n, m);
    const std::size_t nv = n + m;
    std::vector<double> dist(nv);
    std::vector<int> par(nv);
    std::vector<char> inq(nv);

    const std::size_t max_aug = 8 * nv * nv + 64;
    std::size_t aug = 0;
    while (true) {
        double remaining = 0.0;
        for (double v : rem_s) remaining += v;
        if (remaining <= kMassTol * std::max(1.0, total_s)) break;
        if (++aug > max_aug) throw NumericError("transport: iteration guard exceeded");

        // shortest path from any source with remaining supply to any sink
        // with remaining demand; label-correcting (SPFA) over the residual graph
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        std::fill(par.begin(), par.end(), -1);
        std::fill(inq.begin(), inq.end(), 0);
        std::deque<std::size_t> queue;
        for (std::size_t i = 0; i < n; ++i)
            if (rem_s[i] > kMassTol) {
                dist[i] = 0.0;
                inq[i] = 1;
                queue.push_back(i);
            }
        if (queue.empty()) break;
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            inq[u] = 0;
            if (u < n) {
                for (std::size_t j = 0; j < m; ++j) {
                    const double nd = dist[u] + cost(u, j);
                    if (nd < dist[n + j] - 1e-15) {
                        dist[n + j] = nd;
                        par[n + j] = static_cast<int>(u);
                        if (!inq[n + j]) {
                            inq[n + j] = 1;
                            queue.push_back(n + j);
                        }
                    }
                }
            } else {
                const std::size_t j = u - n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (plan(i, j) <= kMassTol) continue;
                    const double nd = dist[u] - cost(i, j);
                    if (nd < dist[i] - 1e-15) {
                        dist[i] = nd;
                        par[i] = static_cast<int>(u);
                        if (!inq[i]) {
                            inq[i] = 1;
                            queue.push_back(i);
                        }
                    }
                }
            }
        }

        // best reachable sink with demand left
        int best = -1;
        for (std::size_t j = 0; j < m; ++j)
            if (rem_d[j] > kMassTol && std::isfinite(dist[n + j]))
                if (best < 0 || dist[n + j] < dist[n + best]) best = static_cast<int>(j);
        if (best < 0) throw NumericError("transport: no augmenting path (infeasible)");

        // walk back to a source, collecting the bottleneck; forward arcs are
        // uncapacitated, reverse arcs are bounded by the flow they undo
        double delta = rem_d[best];
        std::size_t v = n + best;
        while (par[v] >= 0) {
            const std::size_t p = static_cast<std::size_t>(par[v]);
            if (v < n) delta = std::min(delta, plan(v, p - n));
            v = p;
        }
        delta = std::min(delta, rem_s[v]);
        if (delta <= 0.0) throw NumericError("transport: zero augmentation");

        // apply
        std::size_t w = n + best;
        while (par[w] >= 0) {
            const std::size_t p = static_cast<std::size_t>(par[w]);
            if (w >= n)
                plan(p, w - n) += delta;
            else
                plan(w, p - n) -= delta;
            w = p;
        }
        rem_s[w] -= delta;
        rem_d[best] -= delta;
        if (rem_s[w] < kMassTol) rem_s[w] = 0.0;
        if (rem_d[best] < kMassTol) rem_d[best] = 0.0;
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) total += plan(i, j) * cost(i, j);
    return total;
}

double solve_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                       const Tensor& cost) {
    Tensor plan;
    return solve_transport_plan(supply, demand, cost, plan);
}

} // namespace curvebind
