#include "fractal/pwl.hpp"

#include <algorithm>
#include <cmath>

namespace fractal {

std::size_t PiecewiseLinear1D::piece_index(double x) const {
    return static_cast<std::size_t>(std::upper_bound(breaks.begin(), breaks.end(), x) -
                                    breaks.begin());
}

double PiecewiseLinear1D::eval(double x) const {
    const std::size_t p = piece_index(x);
    return slope[p] * x + intercept[p];
}

double PiecewiseLinear1D::max_abs() const {
    return std::max(std::abs(min_value()), std::abs(max_value()));
}

double PiecewiseLinear1D::min_value() const {
    double best = 1e300;
    for (std::size_t p = 0; p < pieces(); ++p) {
        best = std::min(best, slope[p] * piece_lo(p) + intercept[p]);
        best = std::min(best, slope[p] * piece_hi(p) + intercept[p]);
    }
    return best;
}

double PiecewiseLinear1D::max_value() const {
    double best = -1e300;
    for (std::size_t p = 0; p < pieces(); ++p) {
        best = std::max(best, slope[p] * piece_lo(p) + intercept[p]);
        best = std::max(best, slope[p] * piece_hi(p) + intercept[p]);
    }
    return best;
}

namespace {

// Vector-valued piecewise-linear function on a shared breakpoint grid.
struct LayerPwl {
    std::vector<double> bounds;               // piece boundaries incl. lo and hi
    std::vector<std::vector<double>> slope;   // [neuron][piece]
    std::vector<std::vector<double>> inter;   // [neuron][piece]

    std::size_t pieces() const { return bounds.size() - 1; }
};

} // namespace

PiecewiseLinear1D extract_pwl_1d(const LayeredNet& net, double lo, double hi) {
    net.check_shapes();
    if (net.input_dim() != 1) throw ShapeMismatch("extract_pwl_1d needs a scalar-input net");
    if (net.output_dim() != 1) throw ShapeMismatch("extract_pwl_1d needs a scalar-output net");
    if (!(lo < hi)) throw InvalidArgument("extract_pwl_1d: empty domain");

    LayerPwl cur;
    cur.bounds = {lo, hi};
    cur.slope = {{1.0}};
    cur.inter = {{0.0}};

    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[static_cast<std::size_t>(l)];
        const std::size_t pieces = cur.pieces();
        // Affine combination of the neurons below, piece by piece.
        LayerPwl next;
        next.bounds = cur.bounds;
        next.slope.assign(static_cast<std::size_t>(layer.rows), std::vector<double>(pieces, 0.0));
        next.inter = next.slope;
        for (int r = 0; r < layer.rows; ++r) {
            auto& sr = next.slope[static_cast<std::size_t>(r)];
            auto& ir = next.inter[static_cast<std::size_t>(r)];
            for (std::size_t p = 0; p < pieces; ++p) ir[p] = layer.b[static_cast<std::size_t>(r)];
            for (int c = 0; c < layer.cols; ++c) {
                const double w = layer.at(r, c);
                if (w == 0.0) continue;
                const auto& sc = cur.slope[static_cast<std::size_t>(c)];
                const auto& ic = cur.inter[static_cast<std::size_t>(c)];
                for (std::size_t p = 0; p < pieces; ++p) {
                    sr[p] += w * sc[p];
                    ir[p] += w * ic[p];
                }
            }
        }
        if (l + 1 == net.layers.size()) {
            cur = std::move(next);
            break;
        }
        // Split pieces at interior zero crossings of every neuron.
        std::vector<double> cuts;
        for (int r = 0; r < layer.rows; ++r) {
            const auto& sr = next.slope[static_cast<std::size_t>(r)];
            const auto& ir = next.inter[static_cast<std::size_t>(r)];
            for (std::size_t p = 0; p < pieces; ++p) {
                if (sr[p] == 0.0) continue;
                const double x = -ir[p] / sr[p];
                if (x > next.bounds[p] + kBreakMergeTol && x < next.bounds[p + 1] - kBreakMergeTol)
                    cuts.push_back(x);
            }
        }
        if (!cuts.empty()) {
            std::sort(cuts.begin(), cuts.end());
            std::vector<double> merged;
            merged.reserve(next.bounds.size() + cuts.size());
            std::merge(next.bounds.begin(), next.bounds.end(), cuts.begin(), cuts.end(),
                       std::back_inserter(merged));
            std::vector<double> bounds;
            bounds.reserve(merged.size());
            for (double b : merged)
                if (bounds.empty() || b - bounds.back() > kBreakMergeTol) bounds.push_back(b);
            bounds.back() = hi;
            if (bounds.size() - 1 > kPieceBudget)
                throw PieceBudgetExceeded("piece count " + std::to_string(bounds.size() - 1));
            // Re-expand coefficients onto the refined grid.
            LayerPwl refined;
            refined.bounds = std::move(bounds);
            const std::size_t np = refined.bounds.size() - 1;
            refined.slope.assign(next.slope.size(), std::vector<double>(np, 0.0));
            refined.inter = refined.slope;
            std::size_t src = 0;
            for (std::size_t p = 0; p < np; ++p) {
                const double mid = 0.5 * (refined.bounds[p] + refined.bounds[p + 1]);
                while (src + 1 < pieces && mid > next.bounds[src + 1]) ++src;
                for (std::size_t r = 0; r < next.slope.size(); ++r) {
                    refined.slope[r][p] = next.slope[r][src];
                    refined.inter[r][p] = next.inter[r][src];
                }
            }
            next = std::move(refined);
        }
        // ReLU clamp per neuron per piece, decided at the piece midpoint.
        const std::size_t np = next.pieces();
        for (std::size_t r = 0; r < next.slope.size(); ++r) {
            for (std::size_t p = 0; p < np; ++p) {
                const double mid = 0.5 * (next.bounds[p] + next.bounds[p + 1]);
                if (!(next.slope[r][p] * mid + next.inter[r][p] > 0.0)) {
                    next.slope[r][p] = 0.0;
                    next.inter[r][p] = 0.0;
                }
            }
        }
        cur = std::move(next);
    }

    PiecewiseLinear1D out;
    out.lo = lo;
    out.hi = hi;
    out.breaks.assign(cur.bounds.begin() + 1, cur.bounds.end() - 1);
    out.slope = cur.slope[0];
    out.intercept = cur.inter[0];
    return out;
}

RegionCount count_regions_and_crossings(const PiecewiseLinear1D& pwl) {
    RegionCount rc;
    if (pwl.pieces() == 0) return rc;
    // Regions: collapse neighbors that continue the same affine function.
    rc.regions = 1;
    for (std::size_t p = 1; p < pwl.pieces(); ++p) {
        const double smax = std::max({1.0, std::abs(pwl.slope[p - 1]), std::abs(pwl.slope[p])});
        const double imax = std::max({1.0, std::abs(pwl.intercept[p - 1]), std::abs(pwl.intercept[p])});
        const bool same = std::abs(pwl.slope[p] - pwl.slope[p - 1]) <= 1e-9 * smax &&
                          std::abs(pwl.intercept[p] - pwl.intercept[p - 1]) <= 1e-9 * imax;
        if (!same) ++rc.regions;
    }
    // Sign changes: refine at interior zeros, then compare midpoint signs.
    std::vector<double> pts;
    pts.push_back(pwl.lo);
    for (std::size_t p = 0; p < pwl.pieces(); ++p) {
        const double a = pwl.slope[p], b = pwl.intercept[p];
        if (a != 0.0) {
            const double x = -b / a;
            if (x > pwl.piece_lo(p) && x < pwl.piece_hi(p)) pts.push_back(x);
        }
        if (p < pwl.breaks.size()) pts.push_back(pwl.breaks[p]);
    }
    pts.push_back(pwl.hi);
    std::sort(pts.begin(), pts.end());
    int prev_sign = 0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (!(pts[i + 1] - pts[i] > 0.0)) continue;
        const double mid = 0.5 * (pts[i] + pts[i + 1]);
        const int sign = pwl.eval(mid) >= 0.0 ? 1 : -1;
        if (prev_sign != 0 && sign != prev_sign) ++rc.sign_changes;
        prev_sign = sign;
    }
    return rc;
}

} // namespace fractal
