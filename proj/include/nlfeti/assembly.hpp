#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "nlfeti/decomposition.hpp"
#include "nlfeti/kernel.hpp"
#include "nlfeti/lattice.hpp"
#include "nlfeti/sparse.hpp"

namespace nlfeti {

using ScalarField = std::function<double(Point2)>;

inline std::vector<double> sample_interior(const ParticleLattice& lat, const ScalarField& fn) {
    std::vector<double> out;
    out.reserve(lat.num_interior());
    for (GridPoint g : lat.interior_nodes)
        out.push_back(fn(lat.position(g)));
    return out;
}

inline std::vector<double> sample_gamma(const ParticleLattice& lat, const ScalarField& fn) {
    std::vector<double> out;
    out.reserve(lat.num_gamma());
    for (GridPoint g : lat.gamma_nodes)
        out.push_back(fn(lat.position(g)));
    return out;
}

struct GlobalSystem {
    CsrMatrix A;
    std::vector<double> f;
    std::optional<std::vector<double>> u_exact;
};

/// A constraint from the point of view of one subdomain, with the node given
/// as a local index.
struct LocalDual {
    int global = 0;
    int local = 0;
    int sign = 0;
    int partner = 0;
};

/// Local operator of subdomain n. Nodes of Lambda_n are ordered with the
/// unconstrained block first and the constrained (interface) block second,
/// each row-major; M_n therefore vanishes on the first block.
struct SubdomainSystem {
    int n = 0;
    bool floating = false;
    std::vector<int> local_nodes; // interior indices
    std::size_t num_interior = 0;
    CsrMatrix A;
    std::vector<double> f;
    std::vector<LocalDual> duals; // sorted by global dual index
    std::vector<double> Z;        // nullspace column; all zeros when non-floating

    CsrMatrix A_II, A_IB, A_BI, A_BB;

    std::size_t size() const { return local_nodes.size(); }
    std::size_t num_interface() const { return size() - num_interior; }
    std::size_t num_duals() const { return duals.size(); }

    /// out = M_n u  (local primal -> local dual)
    void apply_M(std::span<const double> u, std::span<double> out) const {
        for (std::size_t d = 0; d < duals.size(); ++d)
            out[d] = duals[d].sign * u[static_cast<std::size_t>(duals[d].local)];
    }

    /// out = M_n^T lambda  (local dual -> local primal)
    void apply_Mt(std::span<const double> lambda, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t d = 0; d < duals.size(); ++d)
            out[static_cast<std::size_t>(duals[d].local)] += duals[d].sign * lambda[d];
    }
};

namespace detail {

// Shared assembly loop. `pair_scale(i, k)` and `gamma_scale(i, j)` return the
// inverse multiplicity for an interior-interior and interior-gamma pair
// (0 to skip); `source_scale(i)` the weight of the source term.
template <class LocalOf, class PairScale, class GammaScale, class SourceScale>
void assemble_block(const ParticleLattice& lat, const StencilWeights& stencil,
                    std::span<const int> nodes, LocalOf&& local_of, PairScale&& pair_scale,
                    GammaScale&& gamma_scale, SourceScale&& source_scale,
                    std::span<const double> source, std::span<const double> dirichlet,
                    CsrMatrix& A_out, std::vector<double>& f_out) {
    const int m = lat.m;
    const std::size_t s = nodes.size();
    const double omega = lat.h * lat.h;
    std::vector<double> diag(s, 0.0);
    f_out.assign(s, 0.0);
    TripletBuilder tb(s, s);
    tb.reserve(s * static_cast<std::size_t>((2 * m + 1) * (2 * m + 1)));

    for (std::size_t li = 0; li < s; ++li) {
        const int i = nodes[li];
        const GridPoint gi = lat.interior_nodes[static_cast<std::size_t>(i)];
        f_out[li] = source_scale(i) * omega * source[static_cast<std::size_t>(i)];
        for (int dy = -m; dy <= m; ++dy)
            for (int dx = -m; dx <= m; ++dx) {
                if (dx == 0 && dy == 0)
                    continue;
                const GridPoint gk{gi.ix + dx, gi.iy + dy};
                if (lat.is_interior(gk)) {
                    // Each interior pair once, from its lower-indexed node.
                    if (dy < 0 || (dy == 0 && dx < 0))
                        continue;
                    const int k = lat.interior_index(gk);
                    const int lk = local_of(k);
                    if (lk < 0)
                        continue;
                    const double scale = pair_scale(gi, gk);
                    if (scale == 0.0)
                        continue;
                    const double w = stencil(dx, dy) * scale;
                    tb.add(static_cast<int>(li), lk, -w);
                    tb.add(lk, static_cast<int>(li), -w);
                    diag[li] += w;
                    diag[static_cast<std::size_t>(lk)] += w;
                } else {
                    const double scale = gamma_scale(gi, gk);
                    if (scale == 0.0)
                        continue;
                    const double w = stencil(dx, dy) * scale;
                    diag[li] += w;
                    f_out[li] += w * dirichlet[static_cast<std::size_t>(lat.gamma_index(gk))];
                }
            }
    }
    for (std::size_t li = 0; li < s; ++li)
        tb.add(static_cast<int>(li), static_cast<int>(li), diag[li]);
    A_out = tb.finalize();
}

} // namespace detail

/// Single-domain system A u = f on the interior nodes, Dirichlet data folded
/// into f. `source` holds f(x_i) per interior node, `dirichlet` g per gamma node.
inline GlobalSystem assemble_global(const ParticleLattice& lat, const Kernel& kernel,
                                    std::span<const double> source,
                                    std::span<const double> dirichlet) {
    StencilWeights stencil(lat, kernel);
    std::vector<int> nodes(lat.num_interior());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        nodes[i] = static_cast<int>(i);
    GlobalSystem sys;
    detail::assemble_block(
        lat, stencil, nodes, [](int k) { return k; }, [](GridPoint, GridPoint) { return 1.0; },
        [&](GridPoint, GridPoint gk) { return lat.in_lattice(gk) ? 1.0 : 0.0; },
        [](int) { return 1.0; }, source, dirichlet, sys.A, sys.f);
    return sys;
}

/// Dirichlet contribution 2 sum_j g_j gamma_ij w_i w_j to the global load.
inline std::vector<double> dirichlet_load(const ParticleLattice& lat, const Kernel& kernel,
                                          std::span<const double> dirichlet) {
    std::vector<double> zero(lat.num_interior(), 0.0);
    return assemble_global(lat, kernel, zero, dirichlet).f;
}

/// Nullspace column of a subdomain: the normalized constant for floating
/// subdomains, a zero column otherwise.
inline std::vector<double> nullspace_basis(const SubdomainSystem& sub) {
    if (!sub.floating)
        return std::vector<double>(sub.size(), 0.0);
    return std::vector<double>(sub.size(), 1.0 / std::sqrt(static_cast<double>(sub.size())));
}

inline SubdomainSystem assemble_subdomain(const Decomposition& d, const ConstraintSet& constraints,
                                          const Kernel& kernel, int n,
                                          std::span<const double> source,
                                          std::span<const double> dirichlet) {
    const ParticleLattice& lat = d.lattice;
    SubdomainSystem sub;
    sub.n = n;
    sub.floating = d.floating[static_cast<std::size_t>(n)];

    const std::vector<int> lambda = d.local_nodes(n);
    std::vector<char> constrained(lat.num_interior(), 0);
    for (const DualEntry& e : constraints.per_subdomain[static_cast<std::size_t>(n)])
        constrained[static_cast<std::size_t>(e.node)] = 1;
    for (int i : lambda)
        if (!constrained[static_cast<std::size_t>(i)])
            sub.local_nodes.push_back(i);
    sub.num_interior = sub.local_nodes.size();
    for (int i : lambda)
        if (constrained[static_cast<std::size_t>(i)])
            sub.local_nodes.push_back(i);

    std::vector<int> local_of(lat.num_interior(), -1);
    for (std::size_t li = 0; li < sub.local_nodes.size(); ++li)
        local_of[static_cast<std::size_t>(sub.local_nodes[li])] = static_cast<int>(li);

    const Rect reach = d.reach[static_cast<std::size_t>(n)];
    StencilWeights stencil(lat, kernel);
    detail::assemble_block(
        lat, stencil, sub.local_nodes, [&](int k) { return local_of[static_cast<std::size_t>(k)]; },
        [&](GridPoint a, GridPoint b) { return 1.0 / zeta_values(d, a, b).zeta_A; },
        [&](GridPoint a, GridPoint b) {
            if (sub.floating || !lat.in_lattice(b) || !reach.contains(b))
                return 0.0;
            return 1.0 / zeta_values(d, a, b).zeta_A;
        },
        [&](int i) {
            return 1.0 / static_cast<double>(d.zeta_F_membership[static_cast<std::size_t>(i)].size());
        },
        source, dirichlet, sub.A, sub.f);

    for (const DualEntry& e : constraints.per_subdomain[static_cast<std::size_t>(n)])
        sub.duals.push_back({e.global, local_of[static_cast<std::size_t>(e.node)], e.sign, e.partner});

    sub.Z = nullspace_basis(sub);

    std::vector<int> I(sub.num_interior), B(sub.num_interface());
    for (std::size_t i = 0; i < I.size(); ++i)
        I[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < B.size(); ++i)
        B[i] = static_cast<int>(sub.num_interior + i);
    sub.A_II = sub.A.submatrix(I, I);
    sub.A_IB = sub.A.submatrix(I, B);
    sub.A_BI = sub.A.submatrix(B, I);
    sub.A_BB = sub.A.submatrix(B, B);
    return sub;
}

} // namespace nlfeti
