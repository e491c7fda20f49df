#pragma once

#include <vector>

#include "fractal/errors.hpp"

namespace fractal {

// Level weights p_1..p_n of the negative mixture. P(j) = 1/2 + 1/2 * sum_{i<=j} p_i
// rises from 1/2 at level 0 to 1 at level n.
class ApproximationCurve {
  public:
    explicit ApproximationCurve(std::vector<double> level_weights);

    int levels() const { return static_cast<int>(weights_.size()); }
    const std::vector<double>& weights() const { return weights_; }
    double weight(int j) const; // p_j, 1-based

    double P(int j) const; // j in {0..n}

  private:
    std::vector<double> weights_;
};

double curve_P(const ApproximationCurve& curve, int j);

// The six level-5 curves used in the experiments; the P values are pinned
// plot constants and the weights are their exact consecutive differences.
ApproximationCurve preset_curve(int id, int n = 5);

// All mass on the deepest level: P(0..n-1) = 1/2, P(n) = 1.
ApproximationCurve fine_curve(int n);
// Equal weight per level.
ApproximationCurve uniform_curve(int n);

} // namespace fractal
