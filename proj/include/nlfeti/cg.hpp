#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "nlfeti/sparse.hpp"

namespace nlfeti {

struct CgResult {
    std::vector<double> x;
    int iterations = 0;
    bool converged = false;
    /// Relative residual ||b - A x_k|| / ||b|| for k = 0..iterations.
    std::vector<double> residual_history;
};

/// Unpreconditioned conjugate gradients from a zero initial guess. `apply`
/// is any callable `void(std::span<const double> in, std::span<double> out)`.
/// Stops once the recursive residual drops to tol * ||b|| or after maxit
/// iterations; tol = 0 runs exactly maxit iterations unless the residual
/// vanishes.
template <class Apply>
    requires std::invocable<Apply&, std::span<const double>, std::span<double>>
CgResult cg(Apply&& apply, std::span<const double> b, double tol, int maxit) {
    const std::size_t n = b.size();
    CgResult out;
    out.x.assign(n, 0.0);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        out.converged = true;
        out.residual_history.push_back(0.0);
        return out;
    }
    std::vector<double> r(b.begin(), b.end());
    std::vector<double> p = r;
    std::vector<double> q(n);
    double rr = dot(r, r);
    out.residual_history.push_back(1.0);
    for (int k = 0; k < maxit; ++k) {
        apply(std::span<const double>(p), std::span<double>(q));
        double pq = dot(p, q);
        if (!(pq > 0.0))
            break;
        double alpha = rr / pq;
        for (std::size_t i = 0; i < n; ++i) {
            out.x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        double rr_new = dot(r, r);
        ++out.iterations;
        out.residual_history.push_back(std::sqrt(rr_new) / bnorm);
        if (rr_new == 0.0 || std::sqrt(rr_new) <= tol * bnorm) {
            out.converged = true;
            return out;
        }
        double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = r[i] + beta * p[i];
    }
    out.converged = out.residual_history.back() <= tol;
    return out;
}

inline CgResult cg(const CsrMatrix& A, std::span<const double> b, double tol, int maxit) {
    return cg([&A](std::span<const double> in, std::span<double> out) { A.multiply(in, out); }, b,
              tol, maxit);
}

} // namespace nlfeti
