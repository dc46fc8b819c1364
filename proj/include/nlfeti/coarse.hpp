#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nlfeti/assembly.hpp"
#include "nlfeti/runtime.hpp"
#include "nlfeti/sparse.hpp"

namespace nlfeti {

/// Rows of G = M Z touching one worker's dual entries. Column n of G is
/// M_n Z_n; a row of worker n is nonzero in column n and, through the shared
/// constraint, in the partner's column.
struct LocalCoarseBlock {
    std::vector<double> own;     // (M_n Z_n)_d, column n
    std::vector<double> partner; // (M_k Z_k)_d received from the partner k, column k
};

struct CoarseSystem {
    int z = 0;
    std::vector<LocalCoarseBlock> G_local;
    std::vector<double> g;
    Eigen::MatrixXd GtG;
    Eigen::MatrixXd GtG_pinv;
    double cutoff = 1e-12;
};

/// Symmetric pseudoinverse dropping eigenvalues below tau * lambda_max.
inline Eigen::MatrixXd symmetric_pinv(const Eigen::MatrixXd& S, double tau = 1e-12) {
    const Eigen::Index n = S.rows();
    if (n == 0)
        return S;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double lmax = lam.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(n);
    if (lmax > 0.0)
        for (Eigen::Index i = 0; i < n; ++i)
            if (lam[i] > tau * lmax)
                inv[i] = 1.0 / lam[i];
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

inline CoarseSystem assemble_coarse(const std::vector<SubdomainSystem>& subs, const Topology& topo,
                                    const Runtime& rt) {
    const int N = static_cast<int>(subs.size());
    const auto z = static_cast<std::size_t>(N);
    CoarseSystem cs;
    cs.z = N;
    cs.G_local.resize(z);

    DualVector mz(z);
    rt.for_each_worker([&](int n) {
        const SubdomainSystem& s = subs[static_cast<std::size_t>(n)];
        mz[static_cast<std::size_t>(n)].resize(s.num_duals());
        s.apply_M(s.Z, mz[static_cast<std::size_t>(n)]);
    });
    DualVector received = rt.neighbor_exchange(topo, mz);

    std::vector<std::vector<double>> gtg_parts(z), g_parts(z);
    rt.for_each_worker([&](int n) {
        const auto un = static_cast<std::size_t>(n);
        const SubdomainSystem& s = subs[un];
        LocalCoarseBlock& blk = cs.G_local[un];
        blk.own = std::move(mz[un]);
        blk.partner = std::move(received[un]);

        // Each row of G is counted once, by the owner holding sign +1.
        auto& part = gtg_parts[un];
        part.assign(z * z, 0.0);
        for (std::size_t d = 0; d < s.duals.size(); ++d) {
            if (s.duals[d].sign < 0)
                continue;
            const auto k = static_cast<std::size_t>(s.duals[d].partner);
            const double a = blk.own[d];
            const double b = blk.partner[d];
            part[un * z + un] += a * a;
            part[k * z + k] += b * b;
            part[un * z + k] += a * b;
            part[k * z + un] += a * b;
        }

        g_parts[un].assign(z, 0.0);
        g_parts[un][un] = dot(s.Z, s.f);
    });

    const std::vector<double> gtg = rt.coarse_reduce(gtg_parts);
    cs.g = rt.coarse_reduce(g_parts);
    cs.GtG.resize(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            cs.GtG(i, j) = gtg[static_cast<std::size_t>(i) * z + static_cast<std::size_t>(j)];
    cs.GtG_pinv = symmetric_pinv(cs.GtG, cs.cutoff);
    return cs;
}

} // namespace nlfeti
