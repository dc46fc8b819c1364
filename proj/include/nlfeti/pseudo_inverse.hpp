#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "nlfeti/cholesky.hpp"
#include "nlfeti/sparse.hpp"

namespace nlfeti {

/// Moore-Penrose action of a symmetric positive semidefinite matrix whose
/// nullspace is spanned by one unit vector z (or trivial when z is empty):
///
///   A^+ v = (I - z z^T) (A + beta e_k e_k^T)^{-1} (I - z z^T) v
///
/// with k an index where z is largest and beta the mean diagonal of A. For a
/// right-hand side orthogonal to z the regularized solve leaves y_k = 0, so it
/// solves A y = w exactly and the factor keeps the sparsity of A.
class PseudoInverseOperator {
public:
    PseudoInverseOperator(const CsrMatrix& A, std::vector<double> nullspace)
        : n_(A.rows()), z_(std::move(nullspace)) {
        if (z_.empty() || norm2(z_) == 0.0) {
            z_.clear();
            fact_.emplace(A);
            return;
        }
        for (std::size_t i = 0; i < z_.size(); ++i)
            if (std::abs(z_[i]) > std::abs(z_[static_cast<std::size_t>(pinned_)]))
                pinned_ = static_cast<int>(i);
        double mean_diag = 0.0;
        for (std::size_t i = 0; i < n_; ++i)
            mean_diag += A.diagonal(i);
        beta_ = mean_diag / static_cast<double>(n_);

        std::vector<std::size_t> ptr = A.row_ptr();
        std::vector<int> ci = A.col_index();
        std::vector<double> cv = A.values();
        for (std::size_t k = ptr[static_cast<std::size_t>(pinned_)];
             k < ptr[static_cast<std::size_t>(pinned_) + 1]; ++k)
            if (ci[k] == pinned_)
                cv[k] += beta_;
        fact_.emplace(CsrMatrix(n_, n_, std::move(ptr), std::move(ci), std::move(cv)));
    }

    std::size_t size() const { return n_; }
    bool singular() const { return !z_.empty(); }
    const std::vector<double>& nullspace() const { return z_; }
    double regularization() const { return beta_; }

    void apply(std::span<const double> v, std::span<double> out) const {
        std::copy(v.begin(), v.end(), out.begin());
        project(out);
        fact_->solve_in_place(out);
        project(out);
    }

    std::vector<double> apply(std::span<const double> v) const {
        std::vector<double> out(v.size());
        apply(v, out);
        return out;
    }

private:
    void project(std::span<double> x) const {
        if (z_.empty())
            return;
        double c = dot(z_, x);
        for (std::size_t i = 0; i < n_; ++i)
            x[i] -= c * z_[i];
    }

    std::size_t n_;
    std::vector<double> z_;
    int pinned_ = 0;
    double beta_ = 0.0;
    std::optional<SpdFactorization> fact_;
};

inline std::vector<double> pseudo_apply(const PseudoInverseOperator& op, std::span<const double> v) {
    return op.apply(v);
}

} // namespace nlfeti
