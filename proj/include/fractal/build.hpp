#pragma once

#include <cstdint>

#include "fractal/ifs.hpp"
#include "fractal/net.hpp"

namespace fractal {

// Saturation gain plus the quantities it was derived from.
struct GainSchedule {
    double N = 0.0;
    double gamma = 0.0;
    double epsilon = 0.0;
};

// N = 4 * (1 + diameter([0,1]^d)) / min(eps/2, gamma, 1). Throws
// DegenerateMargin when the denominator is not positive.
double choose_gain(int dim, double gamma, double epsilon);
GainSchedule make_gain_schedule(const IteratedFunctionSystem& ifs, double gamma);

// Two-hidden-layer nets realizing the box primitives on [0,1]^d.
// Identity on the box, zero once the l2 distance to the box exceeds epsilon.
LayeredNet build_box_identity(int d, double epsilon, double N);
// 1 outside the box, 0 on [gamma,1-gamma]^d, values in [0,1] in between.
LayeredNet build_box_indicator(int d, double gamma, double N);

// One-level fold g(x) = sum_i f(F_i^-1 x): maps K_m into K_{m-1} and
// K_1 \ K_m outside K_{m-1}. Width 3dr, vector output.
LayeredNet build_fold_block(const IteratedFunctionSystem& ifs, double N);

// One-level gap detector: 1 on X \ K_1, 0 on K_1^gamma. Width 2dr, scalar.
LayeredNet build_gap_block(const IteratedFunctionSystem& ifs, double gamma, double N);

// Exact classifier: sign +1 on K_n^gamma, -1 on X \ K_n. Depth 2n+1, max
// hidden width exactly 5dr. gain_override = 0 selects choose_gain.
LayeredNet build_exact_classifier(const IteratedFunctionSystem& ifs, int n, double gamma,
                                  double gain_override = 0.0);

// Blocked variant over the r^s composed maps. Depth 2*floor(n/s)+2 when s
// divides n; one extra layer pair handles the level-(n mod s) residual
// otherwise (depth 2*floor(n/s)+3). Max hidden width exactly 5d*r^s.
LayeredNet build_blocked_classifier(const IteratedFunctionSystem& ifs, int n, int s,
                                    double gamma, double gain_override = 0.0);

// Classifier for K_j^gamma vs X \ K_j, used as the depth-truncated
// approximation of a depth-n distribution.
LayeredNet build_coarse_classifier(const IteratedFunctionSystem& ifs, int n, int j, int s,
                                   double gamma);

struct VerificationReport {
    std::size_t pos_total = 0;
    std::size_t pos_correct = 0;
    std::size_t neg_total = 0;
    std::size_t neg_correct = 0;
    std::size_t boundary_skipped = 0;

    double pos_rate() const { return pos_total ? double(pos_correct) / double(pos_total) : 0.0; }
    double neg_rate() const { return neg_total ? double(neg_correct) / double(neg_total) : 0.0; }
    bool perfect() const { return pos_correct == pos_total && neg_correct == neg_total; }
};

// Stratified sign check against the membership oracle: m/2 points from
// K_n^gamma, the rest uniform over the complement; complement points within
// gamma of K_n are skipped and counted.
VerificationReport verify_classifier(const LayeredNet& net, const IteratedFunctionSystem& ifs,
                                     int n, double gamma, std::size_t m, std::uint64_t seed);

} // namespace fractal
