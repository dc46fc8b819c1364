#pragma once

// Brute-force and dense reference constructions used by the tests. None of
// these reuse the index arithmetic of the library: sets are found by scanning
// every node pair, matrices by looping over explicit coordinates.

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "nlfeti/nlfeti.hpp"

namespace oracle {

using nlfeti::GridPoint;

struct LatticeNode {
    GridPoint g;
    bool interior;
};

inline std::vector<LatticeNode> all_nodes(int L, int m) {
    std::vector<LatticeNode> out;
    for (int iy = -m; iy < L + m; ++iy)
        for (int ix = -m; ix < L + m; ++ix)
            out.push_back({{ix, iy}, ix >= 0 && ix < L && iy >= 0 && iy < L});
    return out;
}

inline int linf(GridPoint a, GridPoint b) { return std::max(std::abs(a.ix - b.ix), std::abs(a.iy - b.iy)); }

inline int block_of(GridPoint g, int L, int p) {
    const int b = L / p;
    return (g.iy / b) * p + g.ix / b;
}

/// Per-subdomain sets by definition: Omega_n keeps block nodes whose distance
/// to every foreign-block node exceeds delta/2; Gamma-hat / Gamma_n collect
/// interior / exterior nodes within delta of Omega_n.
struct SubdomainSets {
    std::vector<std::set<int>> omega;     // interior row-major index iy*L+ix
    std::vector<std::set<int>> halo;      // interior index
    std::vector<std::vector<GridPoint>> gamma;
};

inline SubdomainSets brute_force_sets(int L, int m, int p) {
    const int N = p * p;
    SubdomainSets s;
    s.omega.resize(N);
    s.halo.resize(N);
    s.gamma.resize(N);
    std::vector<GridPoint> interior;
    for (int iy = 0; iy < L; ++iy)
        for (int ix = 0; ix < L; ++ix)
            interior.push_back({ix, iy});
    for (const GridPoint& a : interior) {
        const int n = block_of(a, L, p);
        int dmin = 1 << 30;
        for (const GridPoint& b : interior)
            if (block_of(b, L, p) != n)
                dmin = std::min(dmin, linf(a, b));
        // distance d*h > m*h/2
        if (2LL * dmin > m)
            s.omega[n].insert(a.iy * L + a.ix);
    }
    for (int n = 0; n < N; ++n)
        for (const LatticeNode& x : all_nodes(L, m)) {
            const int idx = x.interior ? x.g.iy * L + x.g.ix : -1;
            if (x.interior && s.omega[n].count(idx))
                continue;
            bool near = false;
            for (int o : s.omega[n])
                if (linf(x.g, {o % L, o / L}) <= m) {
                    near = true;
                    break;
                }
            if (!near)
                continue;
            if (x.interior)
                s.halo[n].insert(idx);
            else
                s.gamma[n].push_back(x.g);
        }
    return s;
}

/// Global system straight from the energy: every ordered pair (i, j) with
/// 0 < |x_i - x_j|_inf <= delta contributes 2 gamma(x_i, x_j) w_i w_j.
struct DenseSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd f;
};

inline DenseSystem dense_global(int L, int m, double source, double (*g)(nlfeti::Point2)) {
    const double h = 1.0 / L;
    const double delta = static_cast<double>(m) / L;
    const double C = 2.0 / (delta * delta * delta * (4.0 / 3.0) * (std::sqrt(2.0) + std::asinh(1.0)));
    const double w = h * h;
    const int s = L * L;
    DenseSystem d{Eigen::MatrixXd::Zero(s, s), Eigen::VectorXd::Zero(s)};
    auto pos = [&](GridPoint q) { return nlfeti::Point2{(q.ix + 0.5) * h, (q.iy + 0.5) * h}; };
    const auto nodes = all_nodes(L, m);
    for (const LatticeNode& a : nodes) {
        if (!a.interior)
            continue;
        const int i = a.g.iy * L + a.g.ix;
        d.f[i] += w * source;
        for (const LatticeNode& b : nodes) {
            const int dist = linf(a.g, b.g);
            if (dist == 0 || dist > m)
                continue;
            const nlfeti::Point2 x = pos(a.g), y = pos(b.g);
            const double gam = C / std::hypot(x.x - y.x, x.y - y.y);
            const double c = 2.0 * gam * w * w;
            d.A(i, i) += c;
            if (b.interior)
                d.A(i, b.g.iy * L + b.g.ix) -= c;
            else
                d.f[i] += c * g(y);
        }
    }
    return d;
}

inline Eigen::MatrixXd to_dense(const nlfeti::CsrMatrix& A) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(A.rows()),
                                              static_cast<Eigen::Index>(A.cols()));
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k)
            D(static_cast<Eigen::Index>(i), A.col_index()[k]) = A.values()[k];
    return D;
}

inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& A, double rcond = 1e-10) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    const double smax = sv.size() ? sv.maxCoeff() : 0.0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > rcond * smax)
            inv[i] = 1.0 / sv[i];
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Explicit global-extended matrices of the torn problem: block-diagonal
/// A_ee, the signed constraint matrix M (q x sum s_n), the nullspace Z
/// (sum s_n x N) and the Dirichlet preconditioner Q.
struct DenseFeti {
    Eigen::MatrixXd A, Apinv, M, Z, Q, K, G, P0;
    Eigen::VectorXd f, e, g;
};

inline DenseFeti dense_feti(const nlfeti::ConstraintSet& cs, const std::vector<nlfeti::SubdomainSystem>& subs) {
    std::vector<Eigen::Index> offset{0};
    for (const auto& s : subs)
        offset.push_back(offset.back() + static_cast<Eigen::Index>(s.size()));
    const Eigen::Index S = offset.back();
    const auto q = static_cast<Eigen::Index>(cs.size());
    const auto N = static_cast<Eigen::Index>(subs.size());
    DenseFeti d;
    d.A = Eigen::MatrixXd::Zero(S, S);
    d.Apinv = Eigen::MatrixXd::Zero(S, S);
    d.M = Eigen::MatrixXd::Zero(q, S);
    d.Z = Eigen::MatrixXd::Zero(S, N);
    d.Q = Eigen::MatrixXd::Zero(q, q);
    d.f = Eigen::VectorXd::Zero(S);

    for (Eigen::Index n = 0; n < N; ++n) {
        const auto& s = subs[static_cast<std::size_t>(n)];
        const auto sn = static_cast<Eigen::Index>(s.size());
        Eigen::MatrixXd An = to_dense(s.A);
        d.A.block(offset[n], offset[n], sn, sn) = An;
        d.Apinv.block(offset[n], offset[n], sn, sn) = pinv(An);
        for (Eigen::Index i = 0; i < sn; ++i)
            d.f[offset[n] + i] = s.f[static_cast<std::size_t>(i)];
        if (s.floating)
            for (Eigen::Index i = 0; i < sn; ++i)
                d.Z(offset[n] + i, n) = 1.0 / std::sqrt(static_cast<double>(sn));

        // Local position of every global node of this subdomain.
        std::vector<int> local(s.local_nodes.size());
        for (std::size_t li = 0; li < s.local_nodes.size(); ++li)
            local[li] = s.local_nodes[li];
        auto local_of = [&](int node) {
            return static_cast<Eigen::Index>(std::find(local.begin(), local.end(), node) - local.begin());
        };
        std::set<Eigen::Index> constrained;
        for (std::size_t k = 0; k < cs.size(); ++k) {
            const auto& c = cs.entries[k];
            if (c.n == n || c.partner == n) {
                Eigen::Index li = local_of(c.node);
                d.M(static_cast<Eigen::Index>(k), offset[n] + li) = c.n == n ? 1.0 : -1.0;
                constrained.insert(li);
            }
        }
        if (constrained.empty())
            continue;
        // Dense Schur complement on the constrained nodes.
        std::vector<Eigen::Index> I, B(constrained.begin(), constrained.end());
        for (Eigen::Index i = 0; i < sn; ++i)
            if (!constrained.count(i))
                I.push_back(i);
        Eigen::MatrixXd AII(I.size(), I.size()), AIB(I.size(), B.size()), ABB(B.size(), B.size());
        for (std::size_t a = 0; a < I.size(); ++a) {
            for (std::size_t b = 0; b < I.size(); ++b)
                AII(a, b) = An(I[a], I[b]);
            for (std::size_t b = 0; b < B.size(); ++b)
                AIB(a, b) = An(I[a], B[b]);
        }
        for (std::size_t a = 0; a < B.size(); ++a)
            for (std::size_t b = 0; b < B.size(); ++b)
                ABB(a, b) = An(B[a], B[b]);
        Eigen::MatrixXd Sn = ABB - AIB.transpose() * AII.ldlt().solve(AIB);
        Eigen::MatrixXd MB = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(B.size()));
        for (std::size_t b = 0; b < B.size(); ++b)
            MB.col(static_cast<Eigen::Index>(b)) = d.M.col(offset[n] + B[b]);
        d.Q += MB * Sn * MB.transpose();
    }
    d.K = d.M * d.Apinv * d.M.transpose();
    d.e = d.M * d.Apinv * d.f;
    d.G = d.M * d.Z;
    d.g = d.Z.transpose() * d.f;
    d.P0 = Eigen::MatrixXd::Identity(q, q) - d.G * pinv(d.G.transpose() * d.G) * d.G.transpose();
    return d;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v)
        x = dist(rng);
    return v;
}

inline double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double s = std::max(a.norm(), b.norm());
    return s == 0.0 ? 0.0 : (a - b).norm() / s;
}

} // namespace oracle
