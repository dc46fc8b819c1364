#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include "nlfeti/error.hpp"
#include "nlfeti/sparse.hpp"

namespace nlfeti {

/// Sparse Cholesky factorization P A P^T = L L^T with an approximate minimum
/// degree ordering. Up-looking algorithm: row k of L is found by walking the
/// elimination tree from the nonzeros of column k of the permuted upper
/// triangle.
class SpdFactorization {
public:
    /// Pivots below `pivot_tolerance` times the original diagonal entry are
    /// rejected as not positive definite.
    explicit SpdFactorization(const CsrMatrix& A, double pivot_tolerance = 1e-11) {
        if (A.rows() != A.cols())
            throw Error(ErrorCode::invalid_dimension, "Cholesky requires a square matrix");
        n_ = A.rows();
        compute_ordering(A);
        factor(A, pivot_tolerance);
    }

    std::size_t size() const { return n_; }
    std::size_t factor_nnz() const { return Lx_.size(); }

    /// order[k] is the original index eliminated k-th.
    const std::vector<int>& ordering() const { return order_; }

    void solve_in_place(std::span<double> b) const {
        std::vector<double> work(n_);
        for (std::size_t k = 0; k < n_; ++k)
            work[k] = b[static_cast<std::size_t>(order_[k])];
        // L y = b
        for (std::size_t j = 0; j < n_; ++j) {
            work[j] /= Lx_[Lp_[j]];
            double xj = work[j];
            for (std::size_t p = Lp_[j] + 1; p < Lp_[j + 1]; ++p)
                work[static_cast<std::size_t>(Li_[p])] -= Lx_[p] * xj;
        }
        // L^T x = y
        for (std::size_t j = n_; j-- > 0;) {
            double s = work[j];
            for (std::size_t p = Lp_[j] + 1; p < Lp_[j + 1]; ++p)
                s -= Lx_[p] * work[static_cast<std::size_t>(Li_[p])];
            work[j] = s / Lx_[Lp_[j]];
        }
        for (std::size_t k = 0; k < n_; ++k)
            b[static_cast<std::size_t>(order_[k])] = work[k];
    }

    std::vector<double> solve(std::span<const double> b) const {
        std::vector<double> x(b.begin(), b.end());
        solve_in_place(x);
        return x;
    }

private:
    void compute_ordering(const CsrMatrix& A) {
        order_.resize(n_);
        inverse_.resize(n_);
        if (n_ == 0)
            return;
        std::vector<Eigen::Triplet<double, int>> trip;
        trip.reserve(A.nnz());
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k)
                trip.emplace_back(static_cast<int>(i), A.col_index()[k], 1.0);
        Eigen::SparseMatrix<double, Eigen::ColMajor, int> pattern(static_cast<int>(n_),
                                                                  static_cast<int>(n_));
        pattern.setFromTriplets(trip.begin(), trip.end());
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
        Eigen::AMDOrdering<int> amd;
        amd(pattern, perm);
        for (std::size_t k = 0; k < n_; ++k) {
            order_[k] = perm.indices()[static_cast<Eigen::Index>(k)];
            inverse_[static_cast<std::size_t>(order_[k])] = static_cast<int>(k);
        }
    }

    // Upper triangle of P A P^T, stored by column.
    void permuted_upper(const CsrMatrix& A, std::vector<std::size_t>& Cp, std::vector<int>& Ci,
                        std::vector<double>& Cx) const {
        Cp.assign(n_ + 1, 0);
        Ci.clear();
        Cx.clear();
        for (std::size_t k = 0; k < n_; ++k) {
            auto old = static_cast<std::size_t>(order_[k]);
            for (std::size_t p = A.row_ptr()[old]; p < A.row_ptr()[old + 1]; ++p) {
                int i = inverse_[static_cast<std::size_t>(A.col_index()[p])];
                if (i <= static_cast<int>(k)) {
                    Ci.push_back(i);
                    Cx.push_back(A.values()[p]);
                }
            }
            Cp[k + 1] = Ci.size();
        }
    }

    // Pattern of row k of L in topological order, written to stack[top..n).
    std::size_t reach(std::size_t k, const std::vector<std::size_t>& Cp, const std::vector<int>& Ci,
                      std::vector<int>& stack, std::vector<std::size_t>& mark) const {
        std::size_t top = n_;
        mark[k] = k + 1;
        for (std::size_t p = Cp[k]; p < Cp[k + 1]; ++p) {
            int i = Ci[p];
            if (i > static_cast<int>(k))
                continue;
            std::size_t len = 0;
            for (; mark[static_cast<std::size_t>(i)] != k + 1; i = parent_[static_cast<std::size_t>(i)]) {
                stack[len++] = i;
                mark[static_cast<std::size_t>(i)] = k + 1;
            }
            while (len > 0)
                stack[--top] = stack[--len];
        }
        return top;
    }

    void factor(const CsrMatrix& A, double pivot_tolerance) {
        std::vector<std::size_t> Cp;
        std::vector<int> Ci;
        std::vector<double> Cx;
        permuted_upper(A, Cp, Ci, Cx);

        // Elimination tree.
        parent_.assign(n_, -1);
        std::vector<int> ancestor(n_, -1);
        for (std::size_t k = 0; k < n_; ++k)
            for (std::size_t p = Cp[k]; p < Cp[k + 1]; ++p) {
                int i = Ci[p];
                while (i != -1 && i < static_cast<int>(k)) {
                    int next = ancestor[static_cast<std::size_t>(i)];
                    ancestor[static_cast<std::size_t>(i)] = static_cast<int>(k);
                    if (next == -1)
                        parent_[static_cast<std::size_t>(i)] = static_cast<int>(k);
                    i = next;
                }
            }

        std::vector<int> stack(n_);
        std::vector<std::size_t> mark(n_, 0);

        // Column counts from the row patterns.
        std::vector<std::size_t> count(n_, 1);
        for (std::size_t k = 0; k < n_; ++k)
            for (std::size_t t = reach(k, Cp, Ci, stack, mark); t < n_; ++t)
                ++count[static_cast<std::size_t>(stack[t])];
        Lp_.assign(n_ + 1, 0);
        for (std::size_t k = 0; k < n_; ++k)
            Lp_[k + 1] = Lp_[k] + count[k];
        Li_.assign(Lp_[n_], 0);
        Lx_.assign(Lp_[n_], 0.0);

        std::vector<std::size_t> next(Lp_.begin(), Lp_.end() - 1);
        std::vector<double> x(n_, 0.0);
        std::fill(mark.begin(), mark.end(), 0);
        for (std::size_t k = 0; k < n_; ++k) {
            std::size_t top = reach(k, Cp, Ci, stack, mark);
            x[k] = 0.0;
            for (std::size_t p = Cp[k]; p < Cp[k + 1]; ++p)
                x[static_cast<std::size_t>(Ci[p])] = Cx[p];
            double d = x[k];
            const double diag0 = d;
            x[k] = 0.0;
            for (; top < n_; ++top) {
                auto i = static_cast<std::size_t>(stack[top]);
                double lki = x[i] / Lx_[Lp_[i]];
                x[i] = 0.0;
                for (std::size_t p = Lp_[i] + 1; p < next[i]; ++p)
                    x[static_cast<std::size_t>(Li_[p])] -= Lx_[p] * lki;
                d -= lki * lki;
                std::size_t p = next[i]++;
                Li_[p] = static_cast<int>(k);
                Lx_[p] = lki;
            }
            if (!(d > pivot_tolerance * std::abs(diag0)) || !(d > 0.0))
                throw NotPositiveDefinite(static_cast<std::size_t>(order_[k]), d);
            std::size_t p = next[k]++;
            Li_[p] = static_cast<int>(k);
            Lx_[p] = std::sqrt(d);
        }
    }

    std::size_t n_ = 0;
    std::vector<int> order_;
    std::vector<int> inverse_;
    std::vector<int> parent_;
    std::vector<std::size_t> Lp_;
    std::vector<int> Li_;
    std::vector<double> Lx_;
};

inline SpdFactorization factorize_spd(const CsrMatrix& A) { return SpdFactorization(A); }

} // namespace nlfeti
