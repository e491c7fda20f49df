#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fractal/distribution.hpp"
#include "fractal/net.hpp"
#include "fractal/pwl.hpp"

namespace fractal {

// Closed-form conditional moments of one level-n' interval of the Cantor
// distribution.
struct IntervalMoments {
    double lo = 0.0;
    double hi = 0.0;
    double center = 0.0;
    double mass = 0.0; // P(x in I_j)
    double ey = 0.0;   // E[y | x in I_j]
    double exy = 0.0;  // E[xy | x in I_j]
};

// Requires a 1-D middle-thirds Cantor distribution and n' < depth.
std::vector<IntervalMoments> interval_moments(const FractalDistribution& dist, int n_prime);

struct PopulationGradient {
    LayeredNet grad;      // same shapes as the net
    double w_max = 0.0;   // max |entry| over all weight matrices
    double b_max = 0.0;   // max |entry| over all bias vectors
};

// Exact E[d/dtheta max(1 - y f(x), 0)] by closed-form integration of the
// per-piece affine parameter gradients against the distribution strata.
// Requires |f| <= 1 on [0,1] (hinge active); throws MarginSaturated.
PopulationGradient exact_population_gradient(const LayeredNet& net,
                                             const FractalDistribution& dist, int n_prime);

// Exact L_D(net): probability that sign(f(x)) != y, sign(0) = +1.
double init_error_exact(const LayeredNet& net, const FractalDistribution& dist);

// True iff no breakpoint lies strictly inside any level-n' cell.
bool affine_on_leaves(const PiecewiseLinear1D& pwl, const IteratedFunctionSystem& ifs,
                      int n_prime);

// log(4 t k^2 / delta) / log(3/2).
double hardness_threshold(int t, int k, double delta);

struct ProbeTrial {
    std::uint64_t seed = 0;
    double grad_w_max = 0.0;
    double grad_b_max = 0.0;
    double init_error = 0.0;
    bool affine_ok = false;
};

struct GradientProbeReport {
    int t = 0, k = 0, n = 0, n_prime = 0;
    double delta = 0.0;
    int trials = 0;
    double p_nprime = 0.0;
    double bound_w = 0.0;   // 5 (P(n') - 1/2)
    double bound_b = 0.0;   // 3 (P(n') - 1/2)
    double bound_err = 0.0; // (3/2 - P(n'))(1 - P(n'))
    std::vector<ProbeTrial> rows;
    double frac_w = 0.0;
    double frac_b = 0.0;
    double frac_err = 0.0;
    double frac_affine = 0.0;
};

// Paper-init nets probed against the initialization-gradient and error
// bounds; n' is the smallest integer above hardness_threshold. Throws
// ThresholdViolated unless n > n'.
GradientProbeReport hardness_probe(int t, int k, const ApproximationCurve& curve, int n,
                                   double delta, int trials, std::uint64_t seed);

void write_probe_csv(std::ostream& os, const GradientProbeReport& report);
void write_probe_summary(std::ostream& os, const GradientProbeReport& report);

// Exact minimum error over sign functions with at most budget-1 sign changes,
// by dynamic programming over the full cell/gap partition. Requires an
// equal-weight (FullComplement) 1-D Cantor distribution.
double best_error_region_budget(const FractalDistribution& dist, int j, long budget);

} // namespace fractal
