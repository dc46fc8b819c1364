#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlfeti/assembly.hpp"
#include "nlfeti/coarse.hpp"
#include "nlfeti/decomposition.hpp"
#include "nlfeti/pseudo_inverse.hpp"
#include "nlfeti/runtime.hpp"
#include "nlfeti/schur.hpp"

namespace nlfeti {

enum class PreconditionerKind { none, dirichlet_exact, dirichlet_cg };

struct PreconditionerConfig {
    PreconditionerKind kind = PreconditionerKind::dirichlet_exact;
    int inner_iterations = 5;

    static PreconditionerConfig none() { return {PreconditionerKind::none, 0}; }
    static PreconditionerConfig dirichlet() { return {PreconditionerKind::dirichlet_exact, 0}; }
    static PreconditionerConfig dirichlet_cg(int k) { return {PreconditionerKind::dirichlet_cg, k}; }
};

inline std::string to_string(const PreconditionerConfig& c) {
    switch (c.kind) {
    case PreconditionerKind::none:
        return "none";
    case PreconditionerKind::dirichlet_exact:
        return "dirichlet";
    case PreconditionerKind::dirichlet_cg:
        return "dirichlet-cg:" + std::to_string(c.inner_iterations);
    }
    return "?";
}

/// Distributed reduced (dual) system. Worker n owns subdomain n: its
/// operator, pseudoinverse, optional Schur complement and its slice of every
/// dual vector. Shared entries are kept consistent on both owners.
class ReducedSystem {
public:
    ReducedSystem(const Decomposition& d, const ConstraintSet& cs, std::vector<SubdomainSystem> subs,
                  const Runtime& rt, PreconditionerConfig precond)
        : rt_(&rt), precond_(precond), q_(cs.size()), subs_(std::move(subs)),
          topo_(make_topology(d, cs)), owner_block_(d.block), p_(d.p) {
        if (rt.workers() != d.N)
            throw Error(ErrorCode::topology_mismatch, "runtime worker count differs from N");
        const auto N = static_cast<std::size_t>(d.N);
        pinv_.resize(N);
        schur_.resize(N);
        rt.for_each_worker([&](int n) {
            const SubdomainSystem& s = subs_[static_cast<std::size_t>(n)];
            pinv_[static_cast<std::size_t>(n)].emplace(s.A, s.floating ? s.Z : std::vector<double>{});
            if (precond_.kind != PreconditionerKind::none && s.num_duals() > 0) {
                InteriorSolver is = precond_.kind == PreconditionerKind::dirichlet_exact
                                        ? InteriorSolver::exact()
                                        : InteriorSolver::cg(precond_.inner_iterations);
                schur_[static_cast<std::size_t>(n)].emplace(s.A_II, s.A_IB, s.A_BI, s.A_BB, is);
            }
        });
        coarse_ = assemble_coarse(subs_, topo_, rt);

        e_ = zeros();
        rt.for_each_worker([&](int n) {
            const auto un = static_cast<std::size_t>(n);
            std::vector<double> y = pinv_[un]->apply(subs_[un].f);
            subs_[un].apply_M(y, e_[un]);
        });
        rt.halo_exchange(topo_, e_);
    }

    int workers() const { return rt_->workers(); }
    std::size_t num_duals() const { return q_; }
    const Runtime& runtime() const { return *rt_; }
    const Topology& topology() const { return topo_; }
    const CoarseSystem& coarse() const { return coarse_; }
    const std::vector<SubdomainSystem>& subdomains() const { return subs_; }
    const PseudoInverseOperator& pseudo_inverse(int n) const { return *pinv_[static_cast<std::size_t>(n)]; }
    const DualVector& e() const { return e_; }
    PreconditionerConfig preconditioner() const { return precond_; }

    DualVector zeros() const {
        DualVector v(subs_.size());
        for (std::size_t n = 0; n < subs_.size(); ++n)
            v[n].assign(subs_[n].num_duals(), 0.0);
        return v;
    }

    /// Global dual vector from the owners' (sign +1) copies.
    std::vector<double> gather(const DualVector& v) const {
        std::vector<double> out(q_, 0.0);
        for (std::size_t n = 0; n < subs_.size(); ++n)
            for (std::size_t d = 0; d < subs_[n].duals.size(); ++d)
                if (subs_[n].duals[d].sign > 0)
                    out[static_cast<std::size_t>(subs_[n].duals[d].global)] = v[n][d];
        return out;
    }

    DualVector scatter(std::span<const double> global) const {
        DualVector v = zeros();
        for (std::size_t n = 0; n < subs_.size(); ++n)
            for (std::size_t d = 0; d < subs_[n].duals.size(); ++d)
                v[n][d] = global[static_cast<std::size_t>(subs_[n].duals[d].global)];
        return v;
    }

    /// Inner product of consistent dual vectors, each entry counted once.
    double dot(const DualVector& a, const DualVector& b) const {
        std::vector<double> partial(subs_.size(), 0.0);
        rt_->for_each_worker([&](int n) {
            const auto un = static_cast<std::size_t>(n);
            long double s = 0.0L;
            for (std::size_t d = 0; d < subs_[un].duals.size(); ++d)
                if (subs_[un].duals[d].sign > 0)
                    s += static_cast<long double>(a[un][d]) * b[un][d];
            partial[un] = static_cast<double>(s);
        });
        return rt_->scalar_allreduce(partial);
    }

    DualVector apply_K(const DualVector& lambda) const {
        DualVector out = zeros();
        rt_->for_each_worker([&](int n) {
            const auto un = static_cast<std::size_t>(n);
            const SubdomainSystem& s = subs_[un];
            std::vector<double> t(s.size());
            s.apply_Mt(lambda[un], t);
            std::vector<double> y = pinv_[un]->apply(t);
            s.apply_M(y, out[un]);
        });
        rt_->halo_exchange(topo_, out);
        return out;
    }

    /// G^T v as a coarse vector (one reduction).
    std::vector<double> apply_Gt(const DualVector& v) const {
        const auto z = static_cast<std::size_t>(coarse_.z);
        std::vector<std::vector<double>> parts(subs_.size());
        rt_->for_each_worker([&](int n) {
            const auto un = static_cast<std::size_t>(n);
            parts[un].assign(z, 0.0);
            parts[un][un] = nlfeti::dot(coarse_.G_local[un].own, v[un]);
        });
        return rt_->coarse_reduce(parts);
    }

    /// G beta for a replicated coarse vector beta.
    DualVector apply_G(std::span<const double> beta) const {
        DualVector out = zeros();
        rt_->for_each_worker([&](int n) {
            const auto un = static_cast<std::size_t>(n);
            const LocalCoarseBlock& blk = coarse_.G_local[un];
            for (std::size_t d = 0; d < subs_[un].duals.size(); ++d) {
                const auto k = static_cast<std::size_t>(subs_[un].duals[d].partner);
                out[un][d] = blk.own[d] * beta[un] + blk.partner[d] * beta[k];
            }
        });
        return out;
    }

    std::vector<double> apply_GtG_pinv(std::span<const double> c) const {
        Eigen::Map<const Eigen::VectorXd> cv(c.data(), static_cast<Eigen::Index>(c.size()));
        Eigen::VectorXd r = coarse_.GtG_pinv * cv;
        return {r.data(), r.data() + r.size()};
    }

    DualVector apply_P0(const DualVector& v) const {
        std::vector<double> beta = apply_GtG_pinv(apply_Gt(v));
        DualVector gb = apply_G(beta);
        DualVector out = v;
        rt_->for_each_worker([&](int n) {
            const auto un = static_cast<std::size_t>(n);
            for (std::size_t d = 0; d < out[un].size(); ++d)
                out[un][d] -= gb[un][d];
        });
        return out;
    }

    DualVector apply_preconditioner(const DualVector& r) const {
        if (precond_.kind == PreconditionerKind::none)
            return r;
        DualVector out = zeros();
        rt_->for_each_worker([&](int n) {
            const auto un = static_cast<std::size_t>(n);
            const SubdomainSystem& s = subs_[un];
            if (!schur_[un])
                return;
            const std::size_t ni = s.num_interior;
            std::vector<double> t(s.num_interface(), 0.0);
            for (std::size_t d = 0; d < s.duals.size(); ++d)
                t[static_cast<std::size_t>(s.duals[d].local) - ni] += s.duals[d].sign * r[un][d];
            std::vector<double> y = schur_[un]->apply(t);
            for (std::size_t d = 0; d < s.duals.size(); ++d)
                out[un][d] = s.duals[d].sign * y[static_cast<std::size_t>(s.duals[d].local) - ni];
        });
        rt_->halo_exchange(topo_, out);
        return out;
    }

    /// Initial multiplier G (G^T G)^+ g, which satisfies G^T lambda = g.
    DualVector initial_guess() const { return apply_G(apply_GtG_pinv(coarse_.g)); }

    /// max |G^T lambda - g|
    double compatibility(const DualVector& lambda) const {
        std::vector<double> c = apply_Gt(lambda);
        double m = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i)
            m = std::max(m, std::abs(c[i] - coarse_.g[i]));
        return m;
    }

    /// Owner subdomain of an interior grid point.
    int owner(GridPoint g) const { return (g.iy / owner_block_) * p_ + (g.ix / owner_block_); }

private:
    const Runtime* rt_;
    PreconditionerConfig precond_;
    std::size_t q_;
    std::vector<SubdomainSystem> subs_;
    Topology topo_;
    int owner_block_;
    int p_;
    std::vector<std::optional<PseudoInverseOperator>> pinv_;
    std::vector<std::optional<SchurComplement>> schur_;
    CoarseSystem coarse_;
    DualVector e_;
};

/// Assembles all subdomain systems in parallel on the runtime.
inline std::vector<SubdomainSystem> assemble_subdomains(const Decomposition& d, const ConstraintSet& cs,
                                                        const Kernel& kernel,
                                                        std::span<const double> source,
                                                        std::span<const double> dirichlet,
                                                        const Runtime& rt) {
    std::vector<SubdomainSystem> subs(static_cast<std::size_t>(d.N));
    rt.for_each_worker([&](int n) {
        subs[static_cast<std::size_t>(n)] = assemble_subdomain(d, cs, kernel, n, source, dirichlet);
    });
    return subs;
}

struct PcgOptions {
    double tol = 1e-5;
    int maxit = 1000;
    bool track_compatibility = false;
    bool record_lambda = false;
};

struct PcgResult {
    DualVector lambda;
    int iterations = 0;
    bool converged = false;
    bool breakdown = false;
    /// sqrt(r_k^T y_k / r_0^T y_0), k = 0..iterations
    std::vector<double> residual_history;
    /// max |G^T lambda_k - g|, k = 0..iterations (when tracked)
    std::vector<double> compatibility_history;
    /// gathered lambda_k, k = 0..iterations (when recorded)
    std::vector<std::vector<double>> lambda_history;
};

/// Projected preconditioned CG on P0 K lambda = P0 e with G^T lambda = g.
inline PcgResult projected_pcg(const ReducedSystem& rs, const PcgOptions& opt) {
    const Runtime& rt = rs.runtime();
    PcgResult res;
    res.lambda = rs.initial_guess();
    auto record = [&](double rel) {
        res.residual_history.push_back(rel);
        if (opt.track_compatibility)
            res.compatibility_history.push_back(rs.compatibility(res.lambda));
        if (opt.record_lambda)
            res.lambda_history.push_back(rs.gather(res.lambda));
    };
    auto axpy = [&](DualVector& y, double a, const DualVector& x) {
        rt.for_each_worker([&](int n) {
            const auto un = static_cast<std::size_t>(n);
            for (std::size_t d = 0; d < y[un].size(); ++d)
                y[un][d] += a * x[un][d];
        });
    };

    DualVector r = rs.apply_K(res.lambda);
    rt.for_each_worker([&](int n) {
        const auto un = static_cast<std::size_t>(n);
        for (std::size_t d = 0; d < r[un].size(); ++d)
            r[un][d] = rs.e()[un][d] - r[un][d];
    });
    r = rs.apply_P0(r);
    DualVector y = rs.apply_P0(rs.apply_preconditioner(r));
    DualVector p = y;
    double alpha = rs.dot(r, y);
    const double alpha0 = alpha;
    if (!(alpha0 > 0.0)) {
        res.converged = alpha0 == 0.0;
        res.breakdown = alpha0 < 0.0;
        record(0.0);
        return res;
    }
    record(1.0);

    const double tol2 = opt.tol * opt.tol;
    double K_est = 0.0;
    for (int k = 0; k < opt.maxit; ++k) {
        DualVector x = rs.apply_P0(rs.apply_K(p));
        const double beta = rs.dot(p, x);
        const double pp = rs.dot(p, p);
        if (pp > 0.0)
            K_est = std::max(K_est, std::abs(beta) / pp);
        if (!(beta > 0.0)) {
            res.breakdown = beta < -1e-14 * pp * K_est;
            res.converged = !res.breakdown;
            break;
        }
        const double s = alpha / beta;
        axpy(res.lambda, s, p);
        axpy(r, -s, x);
        y = rs.apply_P0(rs.apply_preconditioner(r));
        const double alpha_next = rs.dot(r, y);
        ++res.iterations;
        record(std::sqrt(std::max(alpha_next, 0.0) / alpha0));
        if (alpha_next < 0.0) {
            res.breakdown = true;
            break;
        }
        if (alpha_next <= tol2 * alpha0) {
            res.converged = true;
            break;
        }
        const double ratio = alpha_next / alpha;
        rt.for_each_worker([&](int n) {
            const auto un = static_cast<std::size_t>(n);
            for (std::size_t d = 0; d < p[un].size(); ++d)
                p[un][d] = y[un][d] + ratio * p[un][d];
        });
        alpha = alpha_next;
    }
    return res;
}

struct PrimalSolution {
    std::vector<std::vector<double>> u_local;
    std::vector<double> u;
    double duplicate_discrepancy = 0.0;
    std::vector<double> alpha;
};

/// u_n = A_n^+ (f_n - M_n^T lambda_n) + Z_n alpha_n with
/// alpha = (G^T G)^+ G^T (K lambda - e), glued by block ownership.
inline PrimalSolution recover_primal(const ReducedSystem& rs, const DualVector& lambda,
                                     const ParticleLattice& lat) {
    const Runtime& rt = rs.runtime();
    const auto& subs = rs.subdomains();
    PrimalSolution sol;

    DualVector kl = rs.apply_K(lambda);
    rt.for_each_worker([&](int n) {
        const auto un = static_cast<std::size_t>(n);
        for (std::size_t d = 0; d < kl[un].size(); ++d)
            kl[un][d] -= rs.e()[un][d];
    });
    sol.alpha = rs.apply_GtG_pinv(rs.apply_Gt(kl));

    sol.u_local.resize(subs.size());
    rt.for_each_worker([&](int n) {
        const auto un = static_cast<std::size_t>(n);
        const SubdomainSystem& s = subs[un];
        std::vector<double> rhs(s.size());
        s.apply_Mt(lambda[un], rhs);
        for (std::size_t i = 0; i < rhs.size(); ++i)
            rhs[i] = s.f[i] - rhs[i];
        std::vector<double> u = rs.pseudo_inverse(n).apply(rhs);
        if (s.floating)
            for (std::size_t i = 0; i < u.size(); ++i)
                u[i] += s.Z[i] * sol.alpha[un];
        sol.u_local[un] = std::move(u);
    });

    sol.u.assign(lat.num_interior(), 0.0);
    for (std::size_t n = 0; n < subs.size(); ++n)
        for (std::size_t li = 0; li < subs[n].size(); ++li) {
            const int i = subs[n].local_nodes[li];
            if (rs.owner(lat.interior_nodes[static_cast<std::size_t>(i)]) == static_cast<int>(n))
                sol.u[static_cast<std::size_t>(i)] = sol.u_local[n][li];
        }

    DualVector jump = rs.zeros();
    rt.for_each_worker([&](int n) {
        const auto un = static_cast<std::size_t>(n);
        subs[un].apply_M(sol.u_local[un], jump[un]);
    });
    rt.halo_exchange(rs.topology(), jump);
    for (const auto& v : jump)
        sol.duplicate_discrepancy = std::max(sol.duplicate_discrepancy, norm_inf(v));
    return sol;
}

} // namespace nlfeti
