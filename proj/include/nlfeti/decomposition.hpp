#pragma once

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "nlfeti/error.hpp"
#include "nlfeti/lattice.hpp"

namespace nlfeti {

/// Inclusive axis-aligned index box on the extended lattice.
struct Rect {
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;

    bool empty() const { return x1 < x0 || y1 < y0; }
    bool contains(GridPoint g) const { return g.ix >= x0 && g.ix <= x1 && g.iy >= y0 && g.iy <= y1; }
    Rect intersect(const Rect& o) const {
        return {std::max(x0, o.x0), std::min(x1, o.x1), std::max(y0, o.y0), std::min(y1, o.y1)};
    }
    Rect dilate(int r) const { return {x0 - r, x1 + r, y0 - r, y1 + r}; }

    template <class Fn>
    void for_each(Fn&& fn) const {
        for (int iy = y0; iy <= y1; ++iy)
            for (int ix = x0; ix <= x1; ++ix)
                fn(GridPoint{ix, iy});
    }

    friend bool operator==(const Rect&, const Rect&) = default;
};

/// p x p nonlocal decomposition of a particle lattice. Subdomain ids are
/// 0-based and row-major from the (0,0) corner: n = by * p + bx.
///
/// For subdomain n, `cores[n]` is the shrunken block Omega_n and `reach[n]`
/// is Omega_n dilated by the horizon, i.e. Omega_n ∪ hat-Gamma_n ∪ Gamma_n.
struct Decomposition {
    ParticleLattice lattice;
    int p = 0;
    int N = 0;
    int block = 0;

    std::vector<Rect> blocks;
    std::vector<Rect> cores;
    std::vector<Rect> reach;

    std::vector<std::vector<int>> core_nodes;      // interior indices, row-major
    std::vector<std::vector<int>> halo_nodes;      // interior indices, row-major
    std::vector<std::vector<int>> dirichlet_nodes; // gamma indices, row-major

    // zeta_A_membership is indexed by extended index, zeta_F_membership by
    // interior index. Both lists are sorted by subdomain id.
    std::vector<std::vector<int>> zeta_A_membership;
    std::vector<std::vector<int>> zeta_F_membership;

    std::vector<bool> floating;
    std::vector<std::pair<int, int>> neighbor_graph; // (n, n') with n < n'

    /// Interior nodes of subdomain n (Lambda_n), row-major.
    std::vector<int> local_nodes(int n) const {
        std::vector<int> out;
        out.reserve(core_nodes[n].size() + halo_nodes[n].size());
        std::merge(core_nodes[n].begin(), core_nodes[n].end(), halo_nodes[n].begin(),
                   halo_nodes[n].end(), std::back_inserter(out));
        return out;
    }

    Rect interior_reach(int n) const {
        return reach[n].intersect(Rect{0, lattice.L - 1, 0, lattice.L - 1});
    }

    /// Subdomain whose non-overlapping block contains the interior node.
    int owner(GridPoint g) const { return (g.iy / block) * p + (g.ix / block); }

    std::size_t num_floating() const {
        return static_cast<std::size_t>(std::count(floating.begin(), floating.end(), true));
    }
};

namespace detail {

// Grid cells from g to the nearest node of a foreign block along one axis
// direction; large when the block touches the domain boundary there.
inline int foreign_distance(int coord, int lo, int hi, int L) {
    constexpr int far = 1 << 29;
    int d = far;
    if (lo > 0)
        d = std::min(d, coord - (lo - 1));
    if (hi < L - 1)
        d = std::min(d, (hi + 1) - coord);
    return d;
}

} // namespace detail

inline Decomposition partition(const ParticleLattice& lattice, int p) {
    const int L = lattice.L;
    const int m = lattice.m;
    if (p < 1)
        throw Error(ErrorCode::invalid_dimension, "p must be positive");
    if (L % p != 0)
        throw Error(ErrorCode::indivisible_grid,
                    "p=" + std::to_string(p) + " does not divide L=" + std::to_string(L));
    if (L / p <= m)
        throw Error(ErrorCode::subdomain_too_thin,
                    "L/p=" + std::to_string(L / p) + " must exceed m=" + std::to_string(m));

    Decomposition d;
    d.lattice = lattice;
    d.p = p;
    d.N = p * p;
    d.block = L / p;
    const Rect whole{-m, L + m - 1, -m, L + m - 1};

    for (int by = 0; by < p; ++by)
        for (int bx = 0; bx < p; ++bx) {
            Rect blk{bx * d.block, (bx + 1) * d.block - 1, by * d.block, (by + 1) * d.block - 1};
            // Omega_n keeps nodes strictly farther than delta/2 from every
            // foreign block: 2 * dist > m in integer cells.
            Rect core{blk.x1 + 1, blk.x0 - 1, blk.y1 + 1, blk.y0 - 1};
            blk.for_each([&](GridPoint g) {
                int dist = std::min(detail::foreign_distance(g.ix, blk.x0, blk.x1, L),
                                    detail::foreign_distance(g.iy, blk.y0, blk.y1, L));
                if (2 * dist > m) {
                    core.x0 = std::min(core.x0, g.ix);
                    core.x1 = std::max(core.x1, g.ix);
                    core.y0 = std::min(core.y0, g.iy);
                    core.y1 = std::max(core.y1, g.iy);
                }
            });
            d.blocks.push_back(blk);
            d.cores.push_back(core);
            d.reach.push_back(core.dilate(m).intersect(whole));
        }

    d.core_nodes.resize(d.N);
    d.halo_nodes.resize(d.N);
    d.dirichlet_nodes.resize(d.N);
    d.floating.resize(d.N);
    d.zeta_A_membership.assign(static_cast<std::size_t>(lattice.extended_width()) *
                                   lattice.extended_width(),
                               {});
    d.zeta_F_membership.assign(lattice.num_interior(), {});

    for (int n = 0; n < d.N; ++n) {
        d.reach[n].for_each([&](GridPoint g) {
            d.zeta_A_membership[lattice.extended_index(g)].push_back(n);
            if (lattice.is_interior(g)) {
                int idx = lattice.interior_index(g);
                d.zeta_F_membership[idx].push_back(n);
                (d.cores[n].contains(g) ? d.core_nodes[n] : d.halo_nodes[n]).push_back(idx);
            } else {
                d.dirichlet_nodes[n].push_back(lattice.gamma_index(g));
            }
        });
        d.floating[n] = d.dirichlet_nodes[n].empty();
    }

    for (int n = 0; n < d.N; ++n)
        for (int k = n + 1; k < d.N; ++k)
            if (!d.interior_reach(n).intersect(d.interior_reach(k)).empty())
                d.neighbor_graph.emplace_back(n, k);
    return d;
}

/// One continuity constraint u_n(node) = u_partner(node), n < partner.
struct Constraint {
    int n = 0;
    int partner = 0;
    int node = 0; // interior index
};

/// A constraint as seen from one of its two subdomains.
struct DualEntry {
    int global = 0;  // global dual index
    int node = 0;    // interior index
    int sign = 0;    // +1 if this subdomain is the smaller of the pair
    int partner = 0; // the other subdomain
};

struct ConstraintSet {
    std::vector<Constraint> entries; // position = global dual index
    std::vector<std::vector<DualEntry>> per_subdomain;

    std::size_t size() const { return entries.size(); }
};

inline ConstraintSet enumerate_constraints(const Decomposition& d) {
    ConstraintSet cs;
    cs.per_subdomain.resize(d.N);
    const ParticleLattice& lat = d.lattice;
    for (auto [n, k] : d.neighbor_graph) {
        d.interior_reach(n).intersect(d.interior_reach(k)).for_each([&](GridPoint g) {
            int global = static_cast<int>(cs.entries.size());
            int node = lat.interior_index(g);
            cs.entries.push_back({n, k, node});
            cs.per_subdomain[n].push_back({global, node, +1, k});
            cs.per_subdomain[k].push_back({global, node, -1, n});
        });
    }
    return cs;
}

struct ZetaValues {
    int zeta_A = 0;
    int zeta_F = 0;
};

/// Overlap multiplicities: zeta_A counts subdomains whose reach holds both
/// points, zeta_F counts subdomains whose Lambda_n holds `a` (0 for gamma nodes).
inline ZetaValues zeta_values(const Decomposition& d, GridPoint a, GridPoint b) {
    const auto& ma = d.zeta_A_membership[d.lattice.extended_index(a)];
    const auto& mb = d.zeta_A_membership[d.lattice.extended_index(b)];
    int common = 0;
    auto ia = ma.begin();
    auto ib = mb.begin();
    while (ia != ma.end() && ib != mb.end()) {
        if (*ia < *ib)
            ++ia;
        else if (*ib < *ia)
            ++ib;
        else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    int zf = d.lattice.is_interior(a)
                 ? static_cast<int>(d.zeta_F_membership[d.lattice.interior_index(a)].size())
                 : 0;
    return {common, zf};
}

} // namespace nlfeti
