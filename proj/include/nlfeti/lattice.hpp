#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <vector>

#include "nlfeti/error.hpp"

namespace nlfeti {

/// Integer lattice coordinates. Interior nodes have ix, iy in [0, L); the
/// interaction layer extends to [-m, L + m).
struct GridPoint {
    int ix = 0;
    int iy = 0;

    friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// l-infinity distance in grid cells.
inline int grid_distance(GridPoint a, GridPoint b) {
    return std::max(std::abs(a.ix - b.ix), std::abs(a.iy - b.iy));
}

/// Uniform cell-centered particle lattice on [0,1]^2 together with the
/// m-layer interaction domain surrounding it.
struct ParticleLattice {
    int L = 0;
    int m = 0;
    double h = 0.0;
    double delta = 0.0;
    std::vector<GridPoint> interior_nodes; // row-major, index = iy * L + ix
    std::vector<GridPoint> gamma_nodes;    // row-major over the extended grid
    std::vector<double> interior_weights;
    std::vector<double> gamma_weights;

    std::size_t num_interior() const { return interior_nodes.size(); }
    std::size_t num_gamma() const { return gamma_nodes.size(); }

    int extended_width() const { return L + 2 * m; }

    bool in_lattice(GridPoint g) const {
        return g.ix >= -m && g.ix < L + m && g.iy >= -m && g.iy < L + m;
    }
    bool is_interior(GridPoint g) const {
        return g.ix >= 0 && g.ix < L && g.iy >= 0 && g.iy < L;
    }

    int interior_index(GridPoint g) const { return g.iy * L + g.ix; }

    /// Index into the full (L + 2m)^2 grid, interior and gamma nodes alike.
    int extended_index(GridPoint g) const {
        return (g.iy + m) * extended_width() + (g.ix + m);
    }

    /// Position of `g` in gamma_nodes; -1 for interior points.
    int gamma_index(GridPoint g) const { return gamma_lookup_[extended_index(g)]; }

    Point2 position(GridPoint g) const { return {(g.ix + 0.5) * h, (g.iy + 0.5) * h}; }

    std::vector<int> gamma_lookup_;
};

inline ParticleLattice build_lattice(int L, int m) {
    if (L < 2 || m < 1 || m >= L)
        throw Error(ErrorCode::invalid_dimension,
                    "lattice requires L >= 2 and 1 <= m < L (got L=" + std::to_string(L) +
                        ", m=" + std::to_string(m) + ")");

    ParticleLattice lat;
    lat.L = L;
    lat.m = m;
    lat.h = 1.0 / L;
    lat.delta = static_cast<double>(m) / L;

    const double weight = lat.h * lat.h;
    lat.interior_nodes.reserve(static_cast<std::size_t>(L) * L);
    for (int iy = 0; iy < L; ++iy)
        for (int ix = 0; ix < L; ++ix)
            lat.interior_nodes.push_back({ix, iy});
    lat.interior_weights.assign(lat.interior_nodes.size(), weight);

    const int W = lat.extended_width();
    lat.gamma_lookup_.assign(static_cast<std::size_t>(W) * W, -1);
    for (int iy = -m; iy < L + m; ++iy)
        for (int ix = -m; ix < L + m; ++ix) {
            GridPoint g{ix, iy};
            if (lat.is_interior(g))
                continue;
            lat.gamma_lookup_[lat.extended_index(g)] = static_cast<int>(lat.gamma_nodes.size());
            lat.gamma_nodes.push_back(g);
        }
    lat.gamma_weights.assign(lat.gamma_nodes.size(), weight);
    return lat;
}

} // namespace nlfeti
