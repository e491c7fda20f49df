#include "fractal/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include "fractal/rng.hpp"
#include "fractal/train.hpp"

namespace fractal {

namespace {

void require_standard_cantor(const IteratedFunctionSystem& ifs) {
    bool ok = ifs.dim() == 1 && ifs.map_count() == 2;
    if (ok) {
        ok = std::abs(ifs.map(0).matrix.at(0, 0) - 1.0 / 3.0) <= 1e-12 &&
             std::abs(ifs.map(0).offset[0]) <= 1e-12 &&
             std::abs(ifs.map(1).matrix.at(0, 0) - 1.0 / 3.0) <= 1e-12 &&
             std::abs(ifs.map(1).offset[0] - 2.0 / 3.0) <= 1e-12;
    }
    if (!ok)
        throw DimensionMismatch("operation requires the 1-D middle-thirds Cantor system");
}

double pow3neg(int k) { return std::pow(3.0, -k); }
double pow2neg(int k) { return std::ldexp(1.0, -k); }

// Partition of [0,1] into the level-`resolution` cells and the containing
// gap levels.
struct Atom {
    double lo = 0.0, hi = 0.0;
    bool is_cell = false;
    int level = 0; // cell level when is_cell, else 1-based gap level
};

void atoms_rec(double a, int level, int resolution, std::vector<Atom>& out) {
    if (level == resolution) {
        out.push_back({a, a + pow3neg(level), true, level});
        return;
    }
    const double third = pow3neg(level + 1);
    atoms_rec(a, level + 1, resolution, out);
    out.push_back({a + third, a + 2.0 * third, false, level + 1});
    atoms_rec(a + 2.0 * third, level + 1, resolution, out);
}

std::vector<Atom> cantor_atoms(int resolution) {
    std::vector<Atom> out;
    out.reserve((std::size_t(1) << (resolution + 1)) - 1);
    atoms_rec(0.0, 0, resolution, out);
    return out;
}

// Signed measures restricted to a query interval: integrals of 1 and x
// against the positive part (uniform on C_n^gamma) and the negative part
// (gap levels), accumulated over the subtree of one level-`level` cell.
struct Moments {
    double pos0 = 0.0, pos1 = 0.0;
    double neg0 = 0.0, neg1 = 0.0;
};

struct CantorMeasure {
    int n = 0;
    double gamma = 0.0;
    const ApproximationCurve* curve = nullptr;

    double gap_mass(int j) const { return curve->weight(j) * pow2neg(j); }

    void uniform_piece(double lo, double hi, double qlo, double qhi, double mass, bool positive,
                       Moments& m) const {
        const double a = std::max(lo, qlo), b = std::min(hi, qhi);
        if (!(b > a)) return;
        const double density = mass / (hi - lo);
        const double m0 = density * (b - a);
        const double m1 = density * (b - a) * 0.5 * (a + b);
        if (positive) {
            m.pos0 += m0;
            m.pos1 += m1;
        } else {
            m.neg0 += m0;
            m.neg1 += m1;
        }
    }

    void cell_integrals(double a, int level, double qlo, double qhi, Moments& m) const {
        const double width = pow3neg(level);
        const double b = a + width;
        if (!(qhi > a) || !(qlo < b)) return;
        if (qlo <= a && qhi >= b) {
            // Whole cell: positives are uniform with mass 2^-level / 2 and
            // symmetric about the center, negatives below this level carry
            // mass 2^-level (1 - P(level)) and share the same center.
            const double center = a + 0.5 * width;
            const double pos = 0.5 * pow2neg(level);
            const double neg = pow2neg(level) * (1.0 - curve->P(level));
            m.pos0 += pos;
            m.pos1 += pos * center;
            m.neg0 += neg;
            m.neg1 += neg * center;
            return;
        }
        if (level == n) {
            uniform_piece(a + gamma, b - gamma, qlo, qhi, 0.5 * pow2neg(n), true, m);
            return;
        }
        const double third = pow3neg(level + 1);
        cell_integrals(a, level + 1, qlo, qhi, m);
        uniform_piece(a + third, a + 2.0 * third, qlo, qhi, gap_mass(level + 1), false, m);
        cell_integrals(a + 2.0 * third, level + 1, qlo, qhi, m);
    }

    // Moments of one atom clipped to [qlo, qhi].
    void atom_integrals(const Atom& atom, double qlo, double qhi, Moments& m) const {
        if (atom.is_cell)
            cell_integrals(atom.lo, atom.level, qlo, qhi, m);
        else
            uniform_piece(atom.lo, atom.hi, qlo, qhi, gap_mass(atom.level), false, m);
    }
};

void require_cantor_dist(const FractalDistribution& dist) {
    require_standard_cantor(dist.ifs());
}

} // namespace

std::vector<IntervalMoments> interval_moments(const FractalDistribution& dist, int n_prime) {
    require_cantor_dist(dist);
    if (n_prime < 0 || n_prime >= dist.depth())
        throw IndexOutOfRange("interval_moments requires 0 <= n' < depth");
    const double P = dist.curve().P(n_prime);
    const double mass = pow2neg(n_prime) * (1.5 - P);
    const double ey = (P - 0.5) / (1.5 - P);
    const double width = pow3neg(n_prime);
    std::vector<IntervalMoments> out;
    const std::size_t cells = std::size_t(1) << n_prime;
    out.reserve(cells);
    for (std::size_t idx = 0; idx < cells; ++idx) {
        double a = 0.0;
        for (int bit = 0; bit < n_prime; ++bit) {
            if (idx >> (n_prime - 1 - bit) & 1) a += 2.0 * pow3neg(bit + 1);
        }
        IntervalMoments im;
        im.lo = a;
        im.hi = a + width;
        im.center = a + 0.5 * width;
        im.mass = mass;
        im.ey = ey;
        im.exy = im.center * ey;
        out.push_back(im);
    }
    return out;
}

namespace {

// Per-piece affine coefficients of every parameter gradient: on one linear
// piece, d f / d W[l][r][c] (x) = alpha x + beta with constant alpha, beta.
struct PieceParamGrads {
    // Indexed like the net: [layer] (rows x cols) pairs.
    std::vector<std::vector<double>> w_alpha, w_beta;
    std::vector<std::vector<double>> b_beta; // bias gradients are constant
};

PieceParamGrads piece_param_grads(const LayeredNet& net, double x_mid) {
    const int t = net.depth();
    auto acts = forward_trace(net, {x_mid});
    // Forward affine coefficients of each layer input: input_coeff[l] holds
    // (slope, intercept) per coordinate of the input to layer l.
    std::vector<std::vector<std::pair<double, double>>> input_coeff(static_cast<std::size_t>(t));
    std::vector<std::pair<double, double>> cur{{1.0, 0.0}};
    for (int l = 0; l < t; ++l) {
        input_coeff[static_cast<std::size_t>(l)] = cur;
        const auto& layer = net.layers[static_cast<std::size_t>(l)];
        std::vector<std::pair<double, double>> next(static_cast<std::size_t>(layer.rows));
        for (int r = 0; r < layer.rows; ++r) {
            double s = 0.0, c = layer.b[static_cast<std::size_t>(r)];
            for (int j = 0; j < layer.cols; ++j) {
                s += layer.at(r, j) * cur[static_cast<std::size_t>(j)].first;
                c += layer.at(r, j) * cur[static_cast<std::size_t>(j)].second;
            }
            const bool active = l + 1 == t || acts[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)] > 0.0;
            next[static_cast<std::size_t>(r)] = active ? std::make_pair(s, c)
                                                       : std::make_pair(0.0, 0.0);
        }
        cur = std::move(next);
    }
    // Backward constants.
    std::vector<std::vector<double>> delta(static_cast<std::size_t>(t));
    delta[static_cast<std::size_t>(t - 1)] = {1.0};
    for (int l = t - 1; l >= 1; --l) {
        const auto& layer = net.layers[static_cast<std::size_t>(l)];
        auto& below = delta[static_cast<std::size_t>(l - 1)];
        below.assign(static_cast<std::size_t>(layer.cols), 0.0);
        for (int r = 0; r < layer.rows; ++r) {
            const double dr = delta[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)];
            if (dr == 0.0) continue;
            for (int c = 0; c < layer.cols; ++c)
                below[static_cast<std::size_t>(c)] += dr * layer.at(r, c);
        }
        const auto& post = acts[static_cast<std::size_t>(l - 1)];
        for (int c = 0; c < layer.cols; ++c)
            if (!(post[static_cast<std::size_t>(c)] > 0.0)) below[static_cast<std::size_t>(c)] = 0.0;
    }
    PieceParamGrads out;
    out.w_alpha.resize(static_cast<std::size_t>(t));
    out.w_beta.resize(static_cast<std::size_t>(t));
    out.b_beta.resize(static_cast<std::size_t>(t));
    for (int l = 0; l < t; ++l) {
        const auto& layer = net.layers[static_cast<std::size_t>(l)];
        auto& wa = out.w_alpha[static_cast<std::size_t>(l)];
        auto& wb = out.w_beta[static_cast<std::size_t>(l)];
        auto& bb = out.b_beta[static_cast<std::size_t>(l)];
        wa.assign(layer.w.size(), 0.0);
        wb.assign(layer.w.size(), 0.0);
        bb.assign(layer.b.size(), 0.0);
        const auto& in = input_coeff[static_cast<std::size_t>(l)];
        for (int r = 0; r < layer.rows; ++r) {
            const double dr = delta[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)];
            bb[static_cast<std::size_t>(r)] = dr;
            if (dr == 0.0) continue;
            for (int c = 0; c < layer.cols; ++c) {
                wa[static_cast<std::size_t>(r) * layer.cols + c] = dr * in[static_cast<std::size_t>(c)].first;
                wb[static_cast<std::size_t>(r) * layer.cols + c] = dr * in[static_cast<std::size_t>(c)].second;
            }
        }
    }
    return out;
}

LayeredNet zero_like(const LayeredNet& net) {
    LayeredNet z = net;
    for (auto& l : z.layers) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    return z;
}

} // namespace

PopulationGradient exact_population_gradient(const LayeredNet& net,
                                             const FractalDistribution& dist, int n_prime) {
    require_cantor_dist(dist);
    if (n_prime < 1 || n_prime >= dist.depth())
        throw IndexOutOfRange("exact_population_gradient requires 1 <= n' < depth");
    const PiecewiseLinear1D pwl = extract_pwl_1d(net);
    if (pwl.max_abs() > 1.0 + 1e-12)
        throw MarginSaturated("|f| exceeds 1 on [0,1]; the hinge is not active everywhere");

    const CantorMeasure measure{dist.depth(), dist.gamma(), &dist.curve()};
    const auto atoms = cantor_atoms(n_prime);

    // Per-piece stratum moments, accumulated with a joint sweep.
    const std::size_t pieces = pwl.pieces();
    std::vector<Moments> piece_m(pieces);
    std::size_t p = 0;
    for (const Atom& atom : atoms) {
        while (p > 0 && pwl.piece_lo(p) > atom.lo) --p;
        while (pwl.piece_hi(p) <= atom.lo && p + 1 < pieces) ++p;
        for (std::size_t q = p; q < pieces && pwl.piece_lo(q) < atom.hi; ++q)
            measure.atom_integrals(atom, std::max(atom.lo, pwl.piece_lo(q)),
                                   std::min(atom.hi, pwl.piece_hi(q)), piece_m[q]);
    }

    PopulationGradient out;
    out.grad = zero_like(net);
    for (std::size_t q = 0; q < pieces; ++q) {
        const Moments& m = piece_m[q];
        // Pieces where f is identically +/-1 have a flat hinge for that label.
        const bool skip_pos = pwl.slope[q] == 0.0 && pwl.intercept[q] == 1.0;
        const bool skip_neg = pwl.slope[q] == 0.0 && pwl.intercept[q] == -1.0;
        const double s0 = (skip_pos ? 0.0 : m.pos0) - (skip_neg ? 0.0 : m.neg0);
        const double s1 = (skip_pos ? 0.0 : m.pos1) - (skip_neg ? 0.0 : m.neg1);
        if (s0 == 0.0 && s1 == 0.0) continue;
        const double mid = 0.5 * (pwl.piece_lo(q) + pwl.piece_hi(q));
        const PieceParamGrads pg = piece_param_grads(net, mid);
        for (std::size_t l = 0; l < out.grad.layers.size(); ++l) {
            auto& gl = out.grad.layers[l];
            const auto& wa = pg.w_alpha[l];
            const auto& wb = pg.w_beta[l];
            const auto& bb = pg.b_beta[l];
            for (std::size_t i = 0; i < gl.w.size(); ++i)
                gl.w[i] -= wa[i] * s1 + wb[i] * s0;
            for (std::size_t i = 0; i < gl.b.size(); ++i) gl.b[i] -= bb[i] * s0;
        }
    }
    for (const auto& l : out.grad.layers) {
        for (double v : l.w) out.w_max = std::max(out.w_max, std::abs(v));
        for (double v : l.b) out.b_max = std::max(out.b_max, std::abs(v));
    }
    return out;
}

double init_error_exact(const LayeredNet& net, const FractalDistribution& dist) {
    require_cantor_dist(dist);
    const PiecewiseLinear1D pwl = extract_pwl_1d(net);
    const CantorMeasure measure{dist.depth(), dist.gamma(), &dist.curve()};
    // Atom resolution only affects the sweep cost; full depth keeps the gap
    // levels explicit and the leaf cells pure.
    const auto atoms = cantor_atoms(std::min(dist.depth(), 12));

    double error = 0.0;
    auto add_signed_piece = [&](const Atom& atom, double lo, double hi, bool sign_pos) {
        if (!(hi > lo)) return;
        Moments m;
        measure.atom_integrals(atom, lo, hi, m);
        error += sign_pos ? m.neg0 : m.pos0;
    };
    const std::size_t pieces = pwl.pieces();
    std::size_t p = 0;
    for (const Atom& atom : atoms) {
        while (p > 0 && pwl.piece_lo(p) > atom.lo) --p;
        while (pwl.piece_hi(p) <= atom.lo && p + 1 < pieces) ++p;
        for (std::size_t q = p; q < pieces && pwl.piece_lo(q) < atom.hi; ++q) {
            const double lo = std::max(atom.lo, pwl.piece_lo(q));
            const double hi = std::min(atom.hi, pwl.piece_hi(q));
            if (!(hi > lo)) continue;
            const double a = pwl.slope[q], b = pwl.intercept[q];
            if (a == 0.0) {
                add_signed_piece(atom, lo, hi, b >= 0.0);
                continue;
            }
            const double x0 = -b / a;
            if (x0 <= lo || x0 >= hi) {
                const double mid = 0.5 * (lo + hi);
                add_signed_piece(atom, lo, hi, a * mid + b >= 0.0);
            } else {
                // sign(0) counts as +1, so the crossing point itself is
                // measure zero either way.
                add_signed_piece(atom, lo, x0, a > 0.0 ? false : true);
                add_signed_piece(atom, x0, hi, a > 0.0 ? true : false);
            }
        }
    }
    return error;
}

bool affine_on_leaves(const PiecewiseLinear1D& pwl, const IteratedFunctionSystem& ifs,
                      int n_prime) {
    require_standard_cantor(ifs);
    const double width = pow3neg(n_prime);
    const std::size_t cells = std::size_t(1) << n_prime;
    for (std::size_t idx = 0; idx < cells; ++idx) {
        double a = 0.0;
        for (int bit = 0; bit < n_prime; ++bit)
            if (idx >> (n_prime - 1 - bit) & 1) a += 2.0 * pow3neg(bit + 1);
        auto it = std::upper_bound(pwl.breaks.begin(), pwl.breaks.end(), a + kBreakMergeTol);
        if (it != pwl.breaks.end() && *it < a + width - kBreakMergeTol) return false;
    }
    return true;
}

double hardness_threshold(int t, int k, double delta) {
    if (t < 1 || k < 1 || !(delta > 0.0) || !(delta < 1.0))
        throw InvalidArgument("hardness_threshold needs t,k >= 1 and delta in (0,1)");
    return std::log(4.0 * t * double(k) * double(k) / delta) / std::log(1.5);
}

GradientProbeReport hardness_probe(int t, int k, const ApproximationCurve& curve, int n,
                                   double delta, int trials, std::uint64_t seed) {
    const double threshold = hardness_threshold(t, k, delta);
    const int n_prime = static_cast<int>(std::floor(threshold)) + 1;
    if (!(n > n_prime))
        throw ThresholdViolated("need n > n' > log(4tk^2/delta)/log(3/2) = " +
                                std::to_string(threshold) + "; smallest admissible n' = " +
                                std::to_string(n_prime) + ", got n = " + std::to_string(n));
    if (curve.levels() != n) throw InvalidArgument("curve levels must equal n");
    if (trials < 1) throw InvalidArgument("trials must be >= 1");

    FractalDistribution dist(builtin_ifs("cantor1d"), n, 0.25 * pow3neg(n), curve,
                             GapStyle::FullComplement);

    GradientProbeReport report;
    report.t = t;
    report.k = k;
    report.n = n;
    report.n_prime = n_prime;
    report.delta = delta;
    report.trials = trials;
    report.p_nprime = curve.P(n_prime);
    report.bound_w = 5.0 * (report.p_nprime - 0.5);
    report.bound_b = 3.0 * (report.p_nprime - 0.5);
    report.bound_err = (1.5 - report.p_nprime) * (1.0 - report.p_nprime);

    std::vector<int> widths(static_cast<std::size_t>(t) + 1, k);
    widths.front() = 1;
    widths.back() = 1;

    int cw = 0, cb = 0, ce = 0, ca = 0;
    for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t trial_seed = derive_seed(seed, static_cast<std::uint64_t>(trial));
        LayeredNet net = init_net(InitScheme::paper_uniform(0.5), widths, trial_seed);
        ProbeTrial row;
        row.seed = trial_seed;
        PopulationGradient pg = exact_population_gradient(net, dist, n_prime);
        row.grad_w_max = pg.w_max;
        row.grad_b_max = pg.b_max;
        row.init_error = init_error_exact(net, dist);
        row.affine_ok = affine_on_leaves(extract_pwl_1d(net), dist.ifs(), n_prime);
        if (row.grad_w_max <= report.bound_w) ++cw;
        if (row.grad_b_max <= report.bound_b) ++cb;
        if (row.init_error >= report.bound_err) ++ce;
        if (row.affine_ok) ++ca;
        report.rows.push_back(row);
    }
    report.frac_w = double(cw) / trials;
    report.frac_b = double(cb) / trials;
    report.frac_err = double(ce) / trials;
    report.frac_affine = double(ca) / trials;
    return report;
}

void write_probe_csv(std::ostream& os, const GradientProbeReport& report) {
    os << "seed,grad_w_max,grad_b_max,init_error,affine_ok\n";
    os.precision(17);
    for (const auto& row : report.rows)
        os << row.seed << "," << row.grad_w_max << "," << row.grad_b_max << ","
           << row.init_error << "," << (row.affine_ok ? 1 : 0) << "\n";
}

void write_probe_summary(std::ostream& os, const GradientProbeReport& report) {
    os.precision(17);
    os << "t = " << report.t << "\n";
    os << "k = " << report.k << "\n";
    os << "n = " << report.n << "\n";
    os << "n_prime = " << report.n_prime << "\n";
    os << "delta = " << report.delta << "\n";
    os << "trials = " << report.trials << "\n";
    os << "p_nprime = " << report.p_nprime << "\n";
    os << "bound_w = " << report.bound_w << "\n";
    os << "bound_b = " << report.bound_b << "\n";
    os << "bound_err = " << report.bound_err << "\n";
    os << "frac_w = " << report.frac_w << "\n";
    os << "frac_b = " << report.frac_b << "\n";
    os << "frac_err = " << report.frac_err << "\n";
    os << "frac_affine = " << report.frac_affine << "\n";
    os << "target = " << 1.0 - report.delta << "\n";
}

double best_error_region_budget(const FractalDistribution& dist, int j, long budget) {
    require_cantor_dist(dist);
    if (dist.gap_style() != GapStyle::FullComplement)
        throw InvalidArgument("region-budget oracle requires the equal-weight "
                              "FullComplement distribution");
    if (j < 1 || j > dist.depth())
        throw IndexOutOfRange("best_error_region_budget needs 1 <= j <= depth");
    if (budget < 1) throw InvalidArgument("budget must be >= 1");
    const int n = dist.depth();
    const auto atoms = cantor_atoms(n);
    const std::size_t S = atoms.size();
    if (static_cast<double>(S) * budget > 1e8)
        throw BudgetTooLarge("DP table needs " + std::to_string(double(S) * budget) +
                             " entries");
    const CantorMeasure measure{n, dist.gamma(), &dist.curve()};
    // Atom masses: leaf cells are all-positive, gaps all-negative.
    std::vector<double> pos(S, 0.0), neg(S, 0.0);
    for (std::size_t i = 0; i < S; ++i) {
        if (atoms[i].is_cell)
            pos[i] = 0.5 * pow2neg(n);
        else
            neg[i] = measure.gap_mass(atoms[i].level);
    }
    // dp[c][s]: best error with c sign changes so far, current sign s
    // (0 -> +1, 1 -> -1).
    const std::size_t C = static_cast<std::size_t>(budget); // changes allowed: budget-1
    const double inf = 1e300;
    std::vector<std::array<double, 2>> dp(C, {inf, inf}), ndp = dp;
    dp[0] = {neg[0], pos[0]};
    for (std::size_t i = 1; i < S; ++i) {
        for (auto& row : ndp) row = {inf, inf};
        for (std::size_t c = 0; c < C; ++c) {
            for (int s = 0; s < 2; ++s) {
                const double base = dp[c][s];
                if (base >= inf) continue;
                const double here = s == 0 ? neg[i] : pos[i];
                ndp[c][s] = std::min(ndp[c][s], base + here);
                if (c + 1 < C) {
                    const double flipped = s == 0 ? pos[i] : neg[i];
                    ndp[c + 1][1 - s] = std::min(ndp[c + 1][1 - s], base + flipped);
                }
            }
        }
        dp.swap(ndp);
    }
    double best = inf;
    for (std::size_t c = 0; c < C; ++c) best = std::min({best, dp[c][0], dp[c][1]});
    return best;
}

} // namespace fractal
