#pragma once

// Natural cubic spline through sorted knots, with analytic first-derivative
// evaluation. Used to turn tabulated Green/Robin data into a C^2 landscape
// whose gradient can be differentiated consistently with finite differences.

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fracbubble {

class CubicSpline {
  public:
    CubicSpline() = default;

    CubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw std::invalid_argument("CubicSpline: need >= 2 matching knots");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1]))
                throw std::invalid_argument("CubicSpline: knots must increase");
        m_.assign(n, 0.0);
        if (n == 2) return; // linear segment, second derivatives stay zero

        // tridiagonal system for interior second derivatives, natural ends
        std::vector<double> diag(n, 2.0), rhs(n, 0.0), sub(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double hl = x_[i] - x_[i - 1];
            const double hr = x_[i + 1] - x_[i];
            sub[i] = hl / (hl + hr);
            rhs[i] = 6.0 / (hl + hr) *
                     ((y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl);
        }
        // forward sweep on rows 1..n-2 (rows 0 and n-1 are identities)
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double w = sub[i] / diag[i - 1];
            diag[i] -= w * (1.0 - sub[i - 1]);
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = (rhs[i] - (1.0 - sub[i]) * m_[i + 1]) / diag[i];
            if (i == 1) break;
        }
    }

    double operator()(double t) const {
        const std::size_t i = segment(t);
        const double h = x_[i + 1] - x_[i];
        const double u = (t - x_[i]) / h;
        const double v = 1.0 - u;
        return v * y_[i] + u * y_[i + 1] +
               h * h / 6.0 *
                   ((v * v * v - v) * m_[i] + (u * u * u - u) * m_[i + 1]);
    }

    double derivative(double t) const {
        const std::size_t i = segment(t);
        const double h = x_[i + 1] - x_[i];
        const double u = (t - x_[i]) / h;
        const double v = 1.0 - u;
        return (y_[i + 1] - y_[i]) / h +
               h / 6.0 *
                   ((3.0 * u * u - 1.0) * m_[i + 1] - (3.0 * v * v - 1.0) * m_[i]);
    }

    double front() const { return x_.front(); }
    double back() const { return x_.back(); }
    bool valid() const { return x_.size() >= 2; }

  private:
    // locate the segment containing t; evaluation outside the knot range
    // extends the end cubics (callers keep admissible points well inside)
    std::size_t segment(double t) const {
        if (x_.size() < 2)
            throw std::logic_error("CubicSpline: empty spline evaluated");
        std::size_t lo = 0, hi = x_.size() - 1;
        if (t <= x_.front()) return 0;
        if (t >= x_.back()) return x_.size() - 2;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (x_[mid] <= t ? lo : hi) = mid;
        }
        return lo;
    }

    std::vector<double> x_, y_, m_;
};

} // namespace fracbubble
