#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "nlfeti/cg.hpp"
#include "nlfeti/cholesky.hpp"
#include "nlfeti/sparse.hpp"

namespace nlfeti {

/// How the interior block is inverted inside a Schur complement apply.
struct InteriorSolver {
    enum class Kind { exact, cg };
    Kind kind = Kind::exact;
    int cg_iterations = 5;

    static InteriorSolver exact() { return {}; }
    static InteriorSolver cg(int k) { return {Kind::cg, k}; }
};

/// S v = A_BB v - A_BI A_II^{-1} A_IB v on interface-sized vectors. With the
/// cg solver the interior solve is a fixed number of CG steps from zero, so
/// the operator stays linear.
class SchurComplement {
public:
    SchurComplement(CsrMatrix A_II, CsrMatrix A_IB, CsrMatrix A_BI, CsrMatrix A_BB,
                    InteriorSolver solver)
        : A_II_(std::move(A_II)), A_IB_(std::move(A_IB)), A_BI_(std::move(A_BI)),
          A_BB_(std::move(A_BB)), solver_(solver) {
        if (solver_.kind == InteriorSolver::Kind::exact && A_II_.rows() > 0)
            fact_.emplace(A_II_);
    }

    std::size_t size() const { return A_BB_.rows(); }

    void apply(std::span<const double> v, std::span<double> out) const {
        A_BB_.multiply(v, out);
        const std::size_t ni = A_II_.rows();
        if (ni == 0)
            return;
        std::vector<double> t(ni);
        A_IB_.multiply(v, t);
        std::vector<double> w;
        if (fact_) {
            fact_->solve_in_place(t);
            w = std::move(t);
        } else {
            w = nlfeti::cg(A_II_, t, 0.0, solver_.cg_iterations).x;
        }
        std::vector<double> c(out.size());
        A_BI_.multiply(w, c);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] -= c[i];
    }

    std::vector<double> apply(std::span<const double> v) const {
        std::vector<double> out(size());
        apply(v, out);
        return out;
    }

private:
    CsrMatrix A_II_, A_IB_, A_BI_, A_BB_;
    InteriorSolver solver_;
    std::optional<SpdFactorization> fact_;
};

inline std::vector<double> schur_apply(const SchurComplement& S, std::span<const double> v) {
    return S.apply(v);
}

} // namespace nlfeti
