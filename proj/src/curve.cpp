#include "fractal/curve.hpp"

#include <array>
#include <cmath>
#include <string>

namespace fractal {

ApproximationCurve::ApproximationCurve(std::vector<double> level_weights)
    : weights_(std::move(level_weights)) {
    if (weights_.empty()) throw InvalidArgument("curve needs at least one level");
    double sum = 0.0;
    for (double p : weights_) {
        if (p < 0.0) throw InvalidArgument("curve weights must be nonnegative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw InvalidArgument("curve weights sum to " + std::to_string(sum) + ", expected 1");
}

double ApproximationCurve::weight(int j) const {
    if (j < 1 || j > levels()) throw IndexOutOfRange("curve weight index " + std::to_string(j));
    return weights_[static_cast<std::size_t>(j - 1)];
}

double ApproximationCurve::P(int j) const {
    if (j < 0 || j > levels()) throw IndexOutOfRange("curve P index " + std::to_string(j));
    double partial = 0.0;
    for (int i = 0; i < j; ++i) partial += weights_[static_cast<std::size_t>(i)];
    return 0.5 + 0.5 * partial;
}

double curve_P(const ApproximationCurve& curve, int j) { return curve.P(j); }

ApproximationCurve preset_curve(int id, int n) {
    if (n != 5) throw UnknownPreset("presets are defined only at n = 5");
    if (id < 1 || id > 6) throw UnknownPreset("preset id " + std::to_string(id));
    // P(1..5) per preset, read off the published curve panels.
    static const std::array<std::array<double, 5>, 6> kP = {{
        {0.629449436703876, 0.742141716744801, 0.840246044613553, 0.925650822501483, 1.0},
        {0.5, 0.5, 0.7062994740159, 0.870039475052563, 1.0},
        {0.5, 0.5, 0.5, 0.792893218813452, 1.0},
        {0.500156631162693, 0.505155895716397, 0.542312339311059, 0.684241121587126, 1.0},
        {0.500000310068408, 0.500159052467644, 0.506242576182648, 0.583822107898522, 1.0},
        {0.5, 0.5, 0.5, 0.5, 1.0},
    }};
    const auto& P = kP[static_cast<std::size_t>(id - 1)];
    std::vector<double> w(5);
    double prev = 0.5;
    for (int j = 0; j < 5; ++j) {
        w[static_cast<std::size_t>(j)] = 2.0 * (P[static_cast<std::size_t>(j)] - prev);
        prev = P[static_cast<std::size_t>(j)];
    }
    return ApproximationCurve(std::move(w));
}

ApproximationCurve fine_curve(int n) {
    if (n < 1) throw InvalidArgument("fine_curve needs n >= 1");
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    w.back() = 1.0;
    return ApproximationCurve(std::move(w));
}

ApproximationCurve uniform_curve(int n) {
    if (n < 1) throw InvalidArgument("uniform_curve needs n >= 1");
    std::vector<double> w(static_cast<std::size_t>(n), 1.0 / n);
    return ApproximationCurve(std::move(w));
}

} // namespace fractal
