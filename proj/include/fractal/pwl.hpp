#pragma once

#include <vector>

#include "fractal/net.hpp"

namespace fractal {

// Piece cap for breakpoint propagation.
inline constexpr std::size_t kPieceBudget = 10000000;
// Breakpoints closer than this are merged.
inline constexpr double kBreakMergeTol = 1e-12;

// Exact breakpoint form of a scalar function on [lo, hi]: piece p covers
// [boundary(p), boundary(p+1)] and evaluates slope[p]*x + intercept[p].
struct PiecewiseLinear1D {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> breaks; // strictly increasing, interior
    std::vector<double> slope;
    std::vector<double> intercept;

    std::size_t pieces() const { return slope.size(); }
    double piece_lo(std::size_t p) const { return p == 0 ? lo : breaks[p - 1]; }
    double piece_hi(std::size_t p) const { return p == breaks.size() ? hi : breaks[p]; }
    std::size_t piece_index(double x) const;
    double eval(double x) const;
    double max_abs() const; // max |f| over [lo, hi]
    double min_value() const;
    double max_value() const;
};

// Layer-wise zero-crossing propagation; exact on [lo, hi] for any
// scalar-input net. Throws PieceBudgetExceeded past kPieceBudget pieces.
PiecewiseLinear1D extract_pwl_1d(const LayeredNet& net, double lo = 0.0, double hi = 1.0);

struct RegionCount {
    long regions = 0;      // pieces after merging collinear neighbors
    long sign_changes = 0; // strict sign flips, sign(0) treated as +1
};

RegionCount count_regions_and_crossings(const PiecewiseLinear1D& pwl);

} // namespace fractal
