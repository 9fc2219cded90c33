#pragma once

// Domain geometry and the cell-centered grids the operators live on.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fracbubble/profiles.hpp"

namespace fracbubble {

enum class DomainKind { interval, rectangle, ball, half_space_trunc };

struct DomainSpec {
    DomainKind kind = DomainKind::interval;
    int n = 1;

    // interval / half-space: [a, b] (half-space: a = 0, b = truncation T)
    double a = -1.0, b = 1.0;
    // rectangle: [ax,bx] x [ay,by]
    double ax = 0.0, bx = 1.0, ay = 0.0, by = 1.0;
    // ball: center + radius (n = 1 gives the centered interval)
    Point center{0.0, 0.0, 0.0};
    double radius = 1.0;
    // half-space only: extent of the region of interest near the wall
    double roi = 1.0;

    void validate() const {
        switch (kind) {
            case DomainKind::interval:
                if (!(b > a)) throw std::invalid_argument("interval: need b > a");
                if (n != 1) throw std::invalid_argument("interval: n must be 1");
                break;
            case DomainKind::rectangle:
                if (!(bx > ax && by > ay))
                    throw std::invalid_argument("rectangle: empty");
                if (n != 2) throw std::invalid_argument("rectangle: n must be 2");
                break;
            case DomainKind::ball:
                if (radius <= 0.0) throw std::invalid_argument("ball: radius <= 0");
                if (n < 1 || n > 2) throw std::invalid_argument("ball: n must be 1 or 2");
                break;
            case DomainKind::half_space_trunc:
                if (!(a == 0.0 && b > 0.0))
                    throw std::invalid_argument("half-space: need [0, T], T > 0");
                if (n != 1) throw std::invalid_argument("half-space grid: n must be 1");
                if (b < 10.0 * roi)
                    throw std::invalid_argument(
                        "half-space: truncation must be >= 10x region of interest");
                break;
        }
    }

    // characteristic length: for the truncated half-space this is the region
    // of interest, not the truncation length, so blow-up windows and
    // near-boundary thresholds scale with the physics rather than with how
    // far the artificial cut was pushed
    double diam() const {
        switch (kind) {
            case DomainKind::interval: return b - a;
            case DomainKind::half_space_trunc: return roi;
            case DomainKind::rectangle:
                return std::hypot(bx - ax, by - ay);
            case DomainKind::ball: return 2.0 * radius;
        }
        return 0.0;
    }

    bool contains(const Point& x) const {
        switch (kind) {
            case DomainKind::interval:
            case DomainKind::half_space_trunc: return x[0] > a && x[0] < b;
            case DomainKind::rectangle:
                return x[0] > ax && x[0] < bx && x[1] > ay && x[1] < by;
            case DomainKind::ball:
                return dist2(x, center, n) < radius * radius;
        }
        return false;
    }

    // distance to the domain boundary; for the truncated half-space only the
    // genuine boundary at x = a counts (the cut at x = b is artificial)
    double dist_to_boundary(const Point& x) const {
        switch (kind) {
            case DomainKind::interval:
                return std::min(x[0] - a, b - x[0]);
            case DomainKind::half_space_trunc:
                return x[0] - a;
            case DomainKind::rectangle:
                return std::min(std::min(x[0] - ax, bx - x[0]),
                                std::min(x[1] - ay, by - x[1]));
            case DomainKind::ball:
                return radius - std::sqrt(dist2(x, center, n));
        }
        return 0.0;
    }
};

inline const char* kind_name(DomainKind k) {
    switch (k) {
        case DomainKind::interval: return "interval";
        case DomainKind::rectangle: return "rectangle";
        case DomainKind::ball: return "ball";
        case DomainKind::half_space_trunc: return "half_space_trunc";
    }
    return "unknown";
}

inline DomainSpec make_interval(double a, double b) {
    DomainSpec d;
    d.kind = DomainKind::interval; d.n = 1; d.a = a; d.b = b;
    d.validate();
    return d;
}

inline DomainSpec make_rectangle(double ax, double bx, double ay, double by) {
    DomainSpec d;
    d.kind = DomainKind::rectangle; d.n = 2;
    d.ax = ax; d.bx = bx; d.ay = ay; d.by = by;
    d.validate();
    return d;
}

inline DomainSpec make_ball(int n, Point center, double radius) {
    DomainSpec d;
    d.kind = DomainKind::ball; d.n = n; d.center = center; d.radius = radius;
    d.validate();
    return d;
}

inline DomainSpec make_half_space(double T, double roi) {
    DomainSpec d;
    d.kind = DomainKind::half_space_trunc; d.n = 1; d.a = 0.0; d.b = T; d.roi = roi;
    d.validate();
    return d;
}

// Cell-centered grid: nodes x_j = a + (j - 1/2) h. For the ball in 2-D only
// the interior cells are kept; index maps recover the tensor position.
struct Grid {
    DomainSpec dom;
    double h = 0.0;
    int nx = 0, ny = 0;            // cells per axis of the bounding box
    std::vector<Point> nodes;      // interior nodes, row-major for 2-D
    std::vector<int> ix, iy;       // tensor indices of each node (2-D)

    int size() const { return static_cast<int>(nodes.size()); }
    double cell_volume() const { return dom.n == 1 ? h : h * h; }

    // nearest node index to a point (must be inside)
    int nearest(const Point& x) const;

    static Grid make(const DomainSpec& dom, int cells_per_axis);
};

using Field = std::vector<double>;

} // namespace fracbubble
