#include "fractal/build.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "fractal/distribution.hpp"
#include "fractal/rng.hpp"

namespace fractal {

double choose_gain(int dim, double gamma, double epsilon) {
    const double floor = std::min(std::min(epsilon / 2.0, gamma), 1.0);
    if (!(floor > 0.0)) throw DegenerateMargin("gain denominator min(eps/2, gamma, 1) <= 0");
    return 4.0 * (1.0 + std::sqrt(static_cast<double>(dim))) / floor;
}

GainSchedule make_gain_schedule(const IteratedFunctionSystem& ifs, double gamma) {
    GainSchedule g;
    g.gamma = gamma;
    g.epsilon = ifs.separation();
    g.N = choose_gain(ifs.dim(), gamma, g.epsilon);
    return g;
}

namespace {

// Gains below these make the corresponding construction lose its contract.
double min_gain_identity(double epsilon) { return 1.0 + 1.0 / epsilon; }
double min_gain_indicator(double gamma) { return 1.0 / gamma; }
double min_gain_fold(double epsilon) { return 1.0 + 2.0 / epsilon; }

void require_gain(double N, double needed, const char* what) {
    if (!(N >= needed))
        throw GainTooSmall(std::string(what) + ": N = " + std::to_string(N) +
                           " below required " + std::to_string(needed));
}

// Affine expression over the output neurons of the layer below.
struct Expr {
    double c = 0.0;
    std::vector<std::pair<int, double>> terms;
};

Expr expr_const(double v) { return Expr{v, {}}; }

Expr expr_neuron(int idx, double coeff = 1.0) { return Expr{0.0, {{idx, coeff}}}; }

void expr_add(Expr& e, const Expr& o, double scale = 1.0) {
    e.c += scale * o.c;
    for (const auto& [idx, coeff] : o.terms) e.terms.emplace_back(idx, scale * coeff);
}

Expr expr_scaled(const Expr& o, double scale) {
    Expr e;
    expr_add(e, o, scale);
    return e;
}

Expr expr_shift(Expr e, double delta) {
    e.c += delta;
    return e;
}

// Row `row` of A z + off, where each z_k is itself an Expr.
Expr affine_row(const Mat& A, const Vec& off, const std::vector<Expr>& z, int row) {
    Expr e = expr_const(off[static_cast<std::size_t>(row)]);
    for (int k = 0; k < A.dim; ++k) {
        const double a = A.at(row, k);
        if (a != 0.0) expr_add(e, z[static_cast<std::size_t>(k)], a);
    }
    return e;
}

// Builds a LayeredNet layer by layer; neurons are declared as affine
// expressions over the previous layer and get ReLU applied implicitly.
class Assembler {
  public:
    explicit Assembler(int input_dim) : prev_width_(input_dim) {}

    void begin() { pending_.clear(); }

    int add(Expr pre) {
        pending_.push_back(std::move(pre));
        return static_cast<int>(pending_.size()) - 1;
    }

    void end() {
        layers_.push_back(materialize(pending_, prev_width_));
        prev_width_ = layers_.back().rows;
    }

    LayeredNet finish(const std::vector<Expr>& outputs) {
        layers_.push_back(materialize(outputs, prev_width_));
        LayeredNet net;
        net.layers = std::move(layers_);
        net.check_shapes();
        return net;
    }

  private:
    static LayeredNet::Layer materialize(const std::vector<Expr>& rows, int cols) {
        LayeredNet::Layer l;
        l.rows = static_cast<int>(rows.size());
        l.cols = cols;
        l.w.assign(static_cast<std::size_t>(l.rows) * cols, 0.0);
        l.b.assign(static_cast<std::size_t>(l.rows), 0.0);
        for (int r = 0; r < l.rows; ++r) {
            const Expr& e = rows[static_cast<std::size_t>(r)];
            l.b[static_cast<std::size_t>(r)] = e.c;
            for (const auto& [idx, coeff] : e.terms) l.at(r, idx) += coeff;
        }
        return l;
    }

    int prev_width_;
    std::vector<LayeredNet::Layer> layers_;
    std::vector<Expr> pending_;
};

std::vector<Expr> input_exprs(int d) {
    std::vector<Expr> z;
    z.reserve(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) z.push_back(expr_neuron(k));
    return z;
}

struct TripleIdx {
    std::vector<int> val, neg, over; // indexed [i*d + m]
};

struct PqIdx {
    std::vector<int> lo, hi; // indexed [i*d + m]
    int maps = 0;
    int dim = 0;
};

// sigma(u), sigma(-u), sigma(u-1) for u = F_i^-1(z), all maps and coords.
TripleIdx emit_triple(Assembler& asm_, const std::vector<AffineMap>& inverses,
                      const std::vector<Expr>& z, int d) {
    TripleIdx t;
    for (const auto& inv : inverses) {
        for (int m = 0; m < d; ++m) {
            Expr u = affine_row(inv.matrix, inv.offset, z, m);
            t.val.push_back(asm_.add(u));
            t.neg.push_back(asm_.add(expr_scaled(u, -1.0)));
            t.over.push_back(asm_.add(expr_shift(u, -1.0)));
        }
    }
    return t;
}

// sigma(gamma - u), sigma(u - 1 + gamma); u taken from explicit exprs.
PqIdx emit_pq_from_exprs(Assembler& asm_, const std::vector<std::vector<Expr>>& u, int d,
                         double gamma) {
    PqIdx pq;
    pq.maps = static_cast<int>(u.size());
    pq.dim = d;
    for (const auto& ui : u) {
        for (int m = 0; m < d; ++m) {
            pq.lo.push_back(asm_.add(expr_shift(expr_scaled(ui[static_cast<std::size_t>(m)], -1.0), gamma)));
            pq.hi.push_back(asm_.add(expr_shift(ui[static_cast<std::size_t>(m)], gamma - 1.0)));
        }
    }
    return pq;
}

std::vector<std::vector<Expr>> unfolded_exprs(const std::vector<AffineMap>& inverses,
                                              const std::vector<Expr>& z, int d) {
    std::vector<std::vector<Expr>> u;
    u.reserve(inverses.size());
    for (const auto& inv : inverses) {
        std::vector<Expr> ui;
        ui.reserve(static_cast<std::size_t>(d));
        for (int m = 0; m < d; ++m) ui.push_back(affine_row(inv.matrix, inv.offset, z, m));
        u.push_back(std::move(ui));
    }
    return u;
}

// u reconstructed from a triple already in the layer below: u = val - neg.
std::vector<std::vector<Expr>> unfolded_from_triple(const TripleIdx& t, int maps, int d) {
    std::vector<std::vector<Expr>> u(static_cast<std::size_t>(maps));
    for (int i = 0; i < maps; ++i) {
        auto& ui = u[static_cast<std::size_t>(i)];
        ui.reserve(static_cast<std::size_t>(d));
        for (int m = 0; m < d; ++m) {
            Expr e = expr_neuron(t.val[static_cast<std::size_t>(i * d + m)]);
            expr_add(e, expr_neuron(t.neg[static_cast<std::size_t>(i * d + m)]), -1.0);
            ui.push_back(std::move(e));
        }
    }
    return u;
}

// f_im = sigma(val_im - N * sum_m' (neg_im' + over_im')).
std::vector<int> emit_foldout(Assembler& asm_, const TripleIdx& t, int maps, int d, double N) {
    std::vector<int> f;
    f.reserve(static_cast<std::size_t>(maps * d));
    for (int i = 0; i < maps; ++i) {
        Expr penalty;
        for (int m = 0; m < d; ++m) {
            expr_add(penalty, expr_neuron(t.neg[static_cast<std::size_t>(i * d + m)]));
            expr_add(penalty, expr_neuron(t.over[static_cast<std::size_t>(i * d + m)]));
        }
        for (int m = 0; m < d; ++m) {
            Expr e = expr_neuron(t.val[static_cast<std::size_t>(i * d + m)]);
            expr_add(e, penalty, -N);
            f.push_back(asm_.add(std::move(e)));
        }
    }
    return f;
}

// sigma_i = sigma(1 - N * sum_m (lo_im + hi_im)), one per map.
std::vector<int> emit_level_sigmas(Assembler& asm_, const PqIdx& pq, double N) {
    std::vector<int> s;
    s.reserve(static_cast<std::size_t>(pq.maps));
    for (int i = 0; i < pq.maps; ++i) {
        Expr e = expr_const(1.0);
        for (int m = 0; m < pq.dim; ++m) {
            expr_add(e, expr_neuron(pq.lo[static_cast<std::size_t>(i * pq.dim + m)]), -N);
            expr_add(e, expr_neuron(pq.hi[static_cast<std::size_t>(i * pq.dim + m)]), -N);
        }
        s.push_back(asm_.add(std::move(e)));
    }
    return s;
}

Expr sum_of(const std::vector<int>& idx) {
    Expr e;
    for (int i : idx) expr_add(e, expr_neuron(i));
    return e;
}

std::vector<Expr> fold_sum_exprs(const std::vector<int>& f, int maps, int d) {
    std::vector<Expr> z(static_cast<std::size_t>(d));
    for (int m = 0; m < d; ++m)
        for (int i = 0; i < maps; ++i)
            expr_add(z[static_cast<std::size_t>(m)],
                     expr_neuron(f[static_cast<std::size_t>(i * d + m)]));
    return z;
}

// gtilde = 1 - sum_i sigma_i.
Expr gap_value(const std::vector<int>& sigmas) {
    Expr e = expr_const(1.0);
    expr_add(e, sum_of(sigmas), -1.0);
    return e;
}

// The classifier pipeline. fold_blocks levels fold with the main maps and
// feed a running gap accumulator; the final stage detects escape from the
// cell system generated by last_maps. pad inserts one pass-through hidden
// layer before the output to reach an externally fixed depth.
LayeredNet build_pipeline(const IteratedFunctionSystem& ifs, int fold_blocks,
                          const std::vector<AffineMap>& last_maps_inv, double gamma, double N,
                          bool pad) {
    const int d = ifs.dim();
    const int r = ifs.map_count();
    std::vector<AffineMap> main_inv;
    main_inv.reserve(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) main_inv.push_back(ifs.inverse_map(i));

    Assembler asm_(d);
    std::vector<Expr> z = input_exprs(d);

    std::optional<Expr> acc;          // accumulated gap sum, over the top layer
    std::optional<PqIdx> pending_pq;  // gap penalties whose sigmas are not yet emitted
    std::optional<std::vector<int>> pending_sigmas; // sigmas not yet folded into acc

    if (fold_blocks >= 1) {
        // Block 1: triple and gap penalties share the first hidden layer.
        asm_.begin();
        TripleIdx t1 = emit_triple(asm_, main_inv, z, d);
        PqIdx pq1 = emit_pq_from_exprs(asm_, unfolded_exprs(main_inv, z, d), d, gamma);
        asm_.end();

        asm_.begin();
        std::vector<int> f1 = emit_foldout(asm_, t1, r, d, N);
        std::vector<int> s1 = emit_level_sigmas(asm_, pq1, N);
        asm_.end();
        z = fold_sum_exprs(f1, r, d);
        acc = gap_value(s1);

        for (int j = 2; j <= fold_blocks; ++j) {
            // A_j: fold triple of the new block input; sigmas of the previous
            // block's pending penalties; one carrier for the running sum.
            asm_.begin();
            TripleIdx tj = emit_triple(asm_, main_inv, z, d);
            std::vector<int> sprev;
            if (pending_pq) sprev = emit_level_sigmas(asm_, *pending_pq, N);
            int carrier = asm_.add(*acc);
            asm_.end();
            acc = expr_neuron(carrier);
            if (!sprev.empty()) expr_add(*acc, gap_value(sprev));
            pending_pq.reset();

            // B_j: fold outputs, this block's gap penalties, carrier.
            asm_.begin();
            std::vector<int> fj = emit_foldout(asm_, tj, r, d, N);
            PqIdx pqj = emit_pq_from_exprs(asm_, unfolded_from_triple(tj, r, d), d, gamma);
            int carrier2 = asm_.add(*acc);
            asm_.end();
            z = fold_sum_exprs(fj, r, d);
            acc = expr_neuron(carrier2);
            pending_pq = pqj;
        }
    }

    // Final stage: gap detector over last_maps applied to the folded point.
    asm_.begin();
    if (fold_blocks == 0) {
        // Keep the advertised first-layer width; the fold is unused when the
        // whole classifier is a single gap stage.
        emit_triple(asm_, main_inv, z, d);
    }
    PqIdx pq_last = emit_pq_from_exprs(asm_, unfolded_exprs(last_maps_inv, z, d), d, gamma);
    std::vector<int> sprev;
    if (pending_pq) sprev = emit_level_sigmas(asm_, *pending_pq, N);
    int carrier = -1;
    if (acc) carrier = asm_.add(*acc);
    asm_.end();
    if (carrier >= 0) {
        acc = expr_neuron(carrier);
        if (!sprev.empty()) expr_add(*acc, gap_value(sprev));
    }
    pending_pq.reset();

    asm_.begin();
    std::vector<int> s_last = emit_level_sigmas(asm_, pq_last, N);
    int carrier2 = -1;
    if (acc) carrier2 = asm_.add(*acc);
    asm_.end();

    // Output 1/2 - acc_total; acc_total = carried sum + final gap value.
    Expr total = gap_value(s_last);
    if (carrier2 >= 0) expr_add(total, expr_neuron(carrier2));
    Expr out = expr_const(0.5);
    expr_add(out, total, -1.0);

    if (!pad) return asm_.finish({out});

    asm_.begin();
    int p = asm_.add(expr_shift(out, 0.5)); // 1 on the positive side, 0 otherwise
    asm_.end();
    Expr out2 = expr_shift(expr_neuron(p), -0.5);
    return asm_.finish({out2});
}

void require_classifier_inputs(const IteratedFunctionSystem& ifs, int n, double gamma) {
    if (n < 1) throw InvalidArgument("classifier depth n must be >= 1");
    if (!ifs.assumption_report().all_ok())
        throw InvalidArgument("IFS violates the structural assumptions");
    const double cap = ifs.margin_cap(n);
    if (!(gamma > 0.0) || gamma >= cap)
        throw MarginTooLarge("gamma " + std::to_string(gamma) + " outside (0, " +
                             std::to_string(cap) + ")");
}

std::vector<AffineMap> inverse_maps(const IteratedFunctionSystem& ifs) {
    std::vector<AffineMap> inv;
    inv.reserve(static_cast<std::size_t>(ifs.map_count()));
    for (int i = 0; i < ifs.map_count(); ++i) inv.push_back(ifs.inverse_map(i));
    return inv;
}

} // namespace

LayeredNet build_box_identity(int d, double epsilon, double N) {
    if (!(epsilon > 0.0)) throw DegenerateMargin("box identity needs epsilon > 0");
    require_gain(N, min_gain_identity(epsilon), "box identity");
    Assembler asm_(d);
    std::vector<Expr> z = input_exprs(d);
    asm_.begin();
    std::vector<int> val, neg, over;
    for (int m = 0; m < d; ++m) {
        val.push_back(asm_.add(z[static_cast<std::size_t>(m)]));
        neg.push_back(asm_.add(expr_scaled(z[static_cast<std::size_t>(m)], -1.0)));
        over.push_back(asm_.add(expr_shift(z[static_cast<std::size_t>(m)], -1.0)));
    }
    asm_.end();
    asm_.begin();
    Expr penalty;
    for (int m = 0; m < d; ++m) {
        expr_add(penalty, expr_neuron(neg[static_cast<std::size_t>(m)]));
        expr_add(penalty, expr_neuron(over[static_cast<std::size_t>(m)]));
    }
    std::vector<int> f;
    for (int m = 0; m < d; ++m) {
        Expr e = expr_neuron(val[static_cast<std::size_t>(m)]);
        expr_add(e, penalty, -N);
        f.push_back(asm_.add(std::move(e)));
    }
    asm_.end();
    std::vector<Expr> out;
    for (int m = 0; m < d; ++m) out.push_back(expr_neuron(f[static_cast<std::size_t>(m)]));
    return asm_.finish(out);
}

LayeredNet build_box_indicator(int d, double gamma, double N) {
    if (!(gamma > 0.0)) throw DegenerateMargin("box indicator needs gamma > 0");
    require_gain(N, min_gain_indicator(gamma), "box indicator");
    Assembler asm_(d);
    std::vector<Expr> z = input_exprs(d);
    asm_.begin();
    std::vector<int> lo, hi;
    for (int m = 0; m < d; ++m) {
        lo.push_back(asm_.add(expr_shift(expr_scaled(z[static_cast<std::size_t>(m)], -1.0), gamma)));
        hi.push_back(asm_.add(expr_shift(z[static_cast<std::size_t>(m)], gamma - 1.0)));
    }
    asm_.end();
    asm_.begin();
    Expr e = expr_const(1.0);
    for (int m = 0; m < d; ++m) {
        expr_add(e, expr_neuron(lo[static_cast<std::size_t>(m)]), -N);
        expr_add(e, expr_neuron(hi[static_cast<std::size_t>(m)]), -N);
    }
    int s = asm_.add(std::move(e));
    asm_.end();
    Expr out = expr_const(1.0);
    expr_add(out, expr_neuron(s), -1.0);
    return asm_.finish({out});
}

LayeredNet build_fold_block(const IteratedFunctionSystem& ifs, double N) {
    if (!ifs.assumption_report().all_ok())
        throw InvalidArgument("IFS violates the structural assumptions");
    require_gain(N, min_gain_fold(ifs.separation()), "fold block");
    const int d = ifs.dim(), r = ifs.map_count();
    Assembler asm_(d);
    std::vector<Expr> z = input_exprs(d);
    asm_.begin();
    TripleIdx t = emit_triple(asm_, inverse_maps(ifs), z, d);
    asm_.end();
    asm_.begin();
    std::vector<int> f = emit_foldout(asm_, t, r, d, N);
    asm_.end();
    return asm_.finish(fold_sum_exprs(f, r, d));
}

LayeredNet build_gap_block(const IteratedFunctionSystem& ifs, double gamma, double N) {
    if (!ifs.assumption_report().all_ok())
        throw InvalidArgument("IFS violates the structural assumptions");
    if (!(gamma > 0.0)) throw DegenerateMargin("gap block needs gamma > 0");
    require_gain(N, min_gain_indicator(gamma), "gap block");
    const int d = ifs.dim();
    Assembler asm_(d);
    std::vector<Expr> z = input_exprs(d);
    asm_.begin();
    PqIdx pq = emit_pq_from_exprs(asm_, unfolded_exprs(inverse_maps(ifs), z, d), d, gamma);
    asm_.end();
    asm_.begin();
    std::vector<int> s = emit_level_sigmas(asm_, pq, N);
    asm_.end();
    return asm_.finish({gap_value(s)});
}

LayeredNet build_exact_classifier(const IteratedFunctionSystem& ifs, int n, double gamma,
                                  double gain_override) {
    require_classifier_inputs(ifs, n, gamma);
    const double N = gain_override > 0.0 ? gain_override
                                         : choose_gain(ifs.dim(), gamma, ifs.separation());
    require_gain(N, std::max(min_gain_fold(ifs.separation()), min_gain_indicator(gamma)),
                 "exact classifier");
    return build_pipeline(ifs, n - 1, inverse_maps(ifs), gamma, N, /*pad=*/false);
}

LayeredNet build_blocked_classifier(const IteratedFunctionSystem& ifs, int n, int s,
                                    double gamma, double gain_override) {
    if (s < 1 || s > n) throw InvalidArgument("block size s must satisfy 1 <= s <= n");
    require_classifier_inputs(ifs, n, gamma);
    IteratedFunctionSystem blocked = ifs.rewrite_blocked(s);
    const int blocks = n / s;
    const int residue = n % s;
    double eps = blocked.separation();
    std::vector<AffineMap> last_inv;
    if (residue == 0) {
        last_inv = inverse_maps(blocked);
    } else {
        IteratedFunctionSystem res = ifs.rewrite_blocked(residue);
        eps = std::min(eps, res.separation());
        last_inv = inverse_maps(res);
    }
    const double N = gain_override > 0.0 ? gain_override : choose_gain(ifs.dim(), gamma, eps);
    require_gain(N, std::max(min_gain_fold(eps), min_gain_indicator(gamma)),
                 "blocked classifier");
    // With zero residue the last fold is unnecessary and a pass-through layer
    // restores the advertised 2*floor(n/s)+2 depth; a nonzero residue needs
    // its own detector stage and costs one extra layer pair.
    const int fold_blocks = residue == 0 ? blocks - 1 : blocks;
    return build_pipeline(blocked, fold_blocks, last_inv, gamma, N, /*pad=*/residue == 0);
}

LayeredNet build_coarse_classifier(const IteratedFunctionSystem& ifs, int n, int j, int s,
                                   double gamma) {
    if (j < 1 || j > n) throw InvalidArgument("coarse level j must satisfy 1 <= j <= n");
    return build_blocked_classifier(ifs, j, s, gamma);
}

VerificationReport verify_classifier(const LayeredNet& net, const IteratedFunctionSystem& ifs,
                                     int n, double gamma, std::size_t m, std::uint64_t seed) {
    VerificationReport report;
    Rng rng(derive_seed(seed, 0x7e51f1ed));
    const std::size_t pos_slots = m / 2;
    const int d = ifs.dim();
    std::vector<double> x;
    for (std::size_t k = 0; k < pos_slots; ++k) {
        x = sample_uniform_positive(ifs, n, gamma, rng);
        ++report.pos_total;
        if (forward(net, x) >= 0.0) ++report.pos_correct;
    }
    for (std::size_t k = pos_slots; k < m; ++k) {
        do {
            x.assign(static_cast<std::size_t>(d), 0.0);
            for (int c = 0; c < d; ++c) x[static_cast<std::size_t>(c)] = rng.uniform01();
        } while (ifs.membership(x, n));
        if (ifs.near_membership(x, n, gamma)) {
            ++report.boundary_skipped;
            continue;
        }
        ++report.neg_total;
        if (forward(net, x) < 0.0) ++report.neg_correct;
    }
    return report;
}

} // namespace fractal
