#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace nlfeti {

/// Dot product accumulated in long double, left to right.
inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(s);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
    double s = 0.0;
    for (double v : a)
        s = std::max(s, std::abs(v));
    return s;
}

/// Row-compressed sparse matrix with sorted column indices. Square symmetric
/// matrices carry both triangles.
class CsrMatrix {
public:
    CsrMatrix() = default;
    CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
              std::vector<int> col_index, std::vector<double> values)
        : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_(std::move(col_index)),
          val_(std::move(values)) {
        assert(row_ptr_.size() == rows_ + 1);
        symmetric_ = rows_ == cols_ && check_symmetric();
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return val_.size(); }
    bool symmetric() const { return symmetric_; }

    const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
    const std::vector<int>& col_index() const { return col_; }
    const std::vector<double>& values() const { return val_; }

    double at(std::size_t i, std::size_t j) const {
        auto first = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
        auto last = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
        auto it = std::lower_bound(first, last, static_cast<int>(j));
        return (it != last && *it == static_cast<int>(j)) ? val_[static_cast<std::size_t>(it - col_.begin())]
                                                          : 0.0;
    }

    double diagonal(std::size_t i) const { return at(i, i); }

    /// y = A x
    void multiply(std::span<const double> x, std::span<double> y) const {
        assert(x.size() == cols_ && y.size() == rows_);
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                s += val_[k] * x[static_cast<std::size_t>(col_[k])];
            y[i] = s;
        }
    }

    std::vector<double> operator*(std::span<const double> x) const {
        std::vector<double> y(rows_);
        multiply(x, y);
        return y;
    }

    /// Rows `rows` and columns `cols` of this matrix, both given as index lists.
    CsrMatrix submatrix(std::span<const int> rows, std::span<const int> cols) const {
        std::vector<int> col_map(cols_, -1);
        for (std::size_t j = 0; j < cols.size(); ++j)
            col_map[static_cast<std::size_t>(cols[j])] = static_cast<int>(j);
        std::vector<std::size_t> ptr{0};
        std::vector<int> ci;
        std::vector<double> cv;
        std::vector<std::pair<int, double>> row;
        for (int r : rows) {
            row.clear();
            for (std::size_t k = row_ptr_[static_cast<std::size_t>(r)];
                 k < row_ptr_[static_cast<std::size_t>(r) + 1]; ++k) {
                int c = col_map[static_cast<std::size_t>(col_[k])];
                if (c >= 0)
                    row.emplace_back(c, val_[k]);
            }
            std::sort(row.begin(), row.end());
            for (auto [c, v] : row) {
                ci.push_back(c);
                cv.push_back(v);
            }
            ptr.push_back(ci.size());
        }
        return CsrMatrix(rows.size(), cols.size(), std::move(ptr), std::move(ci), std::move(cv));
    }

    /// Max absolute row sum.
    double norm_inf() const {
        double s = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            double r = 0.0;
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                r += std::abs(val_[k]);
            s = std::max(s, r);
        }
        return s;
    }

    static CsrMatrix identity(std::size_t n) {
        std::vector<std::size_t> ptr(n + 1);
        std::iota(ptr.begin(), ptr.end(), std::size_t{0});
        std::vector<int> ci(n);
        std::iota(ci.begin(), ci.end(), 0);
        return CsrMatrix(n, n, std::move(ptr), std::move(ci), std::vector<double>(n, 1.0));
    }

private:
    bool check_symmetric() const {
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                if (at(static_cast<std::size_t>(col_[k]), i) != val_[k])
                    return false;
        return true;
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<int> col_;
    std::vector<double> val_;
    bool symmetric_ = true;
};

/// Coordinate-format accumulator. Duplicates are summed in insertion order;
/// exact zeros are dropped by finalize().
class TripletBuilder {
public:
    TripletBuilder(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

    void reserve(std::size_t n) { entries_.reserve(n); }
    void add(int i, int j, double v) { entries_.push_back({i, j, v}); }

    CsrMatrix finalize() {
        std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
            return a.i != b.i ? a.i < b.i : a.j < b.j;
        });
        std::vector<std::size_t> ptr(rows_ + 1, 0);
        std::vector<int> ci;
        std::vector<double> cv;
        ci.reserve(entries_.size());
        cv.reserve(entries_.size());
        std::size_t k = 0;
        for (std::size_t r = 0; r < rows_; ++r) {
            while (k < entries_.size() && entries_[k].i == static_cast<int>(r)) {
                int c = entries_[k].j;
                double s = 0.0;
                while (k < entries_.size() && entries_[k].i == static_cast<int>(r) && entries_[k].j == c)
                    s += entries_[k++].v;
                if (s != 0.0) {
                    ci.push_back(c);
                    cv.push_back(s);
                }
            }
            ptr[r + 1] = ci.size();
        }
        entries_.clear();
        return CsrMatrix(rows_, cols_, std::move(ptr), std::move(ci), std::move(cv));
    }

private:
    struct Entry {
        int i;
        int j;
        double v;
    };
    std::size_t rows_;
    std::size_t cols_;
    std::vector<Entry> entries_;
};

} // namespace nlfeti
