#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "nlfeti/lattice.hpp"

namespace nlfeti {

/// Integral of the Euclidean norm over the unit l-infinity ball [-1,1]^2.
inline double unit_ball_norm_integral() {
    return 4.0 / 3.0 * (std::sqrt(2.0) + std::asinh(1.0));
}

/// Kernel scaling for gamma(x,y) = C / |x-y|: picks C so that the continuum
/// operator maps x1^2 + x2^2 to exactly 4.
inline double scaling_constant(double delta) {
    return 2.0 / (delta * delta * delta * unit_ball_norm_integral());
}

/// gamma(x, y) = C |x - y|_2^{-1} on the l-infinity ball of radius delta.
struct Kernel {
    double delta = 0.0;
    double C = 0.0;

    static Kernel for_horizon(double delta) { return {delta, scaling_constant(delta)}; }

    double operator()(Point2 x, Point2 y) const {
        double dx = x.x - y.x;
        double dy = x.y - y.y;
        if (std::max(std::abs(dx), std::abs(dy)) > delta)
            return 0.0;
        double r = std::hypot(dx, dy);
        return r > 0.0 ? C / r : 0.0;
    }
};

/// Pair weights 2 * gamma * w_i * w_j for every lattice offset inside the
/// horizon, indexed by (dx, dy) in [-m, m]^2. The self offset is zero.
class StencilWeights {
public:
    StencilWeights(const ParticleLattice& lattice, const Kernel& kernel) : m_(lattice.m) {
        const int w = 2 * m_ + 1;
        values_.assign(static_cast<std::size_t>(w) * w, 0.0);
        const double h = lattice.h;
        const double ww = h * h * h * h;
        for (int dy = -m_; dy <= m_; ++dy)
            for (int dx = -m_; dx <= m_; ++dx) {
                if (dx == 0 && dy == 0)
                    continue;
                double r = h * std::sqrt(static_cast<double>(dx * dx + dy * dy));
                values_[index(dx, dy)] = 2.0 * (kernel.C / r) * ww;
            }
    }

    int radius() const { return m_; }
    double operator()(int dx, int dy) const { return values_[index(dx, dy)]; }

private:
    std::size_t index(int dx, int dy) const {
        return static_cast<std::size_t>((dy + m_) * (2 * m_ + 1) + (dx + m_));
    }

    int m_;
    std::vector<double> values_;
};

} // namespace nlfeti
