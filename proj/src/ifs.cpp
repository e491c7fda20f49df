#include "fractal/ifs.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace fractal {

namespace {

AffineMap conjugate_to_unit_box(const AffineMap& map, double lo, double hi) {
    // T carries [0,1]^d onto [lo,hi]^d; the normalized map is T^-1 ∘ F ∘ T.
    const int d = map.dim();
    const double s = hi - lo;
    AffineMap T{Mat::diagonal(d, s), Vec(d, lo)};
    AffineMap Tinv{Mat::diagonal(d, 1.0 / s), Vec(d, -lo / s)};
    return Tinv.compose(map.compose(T));
}

} // namespace

IteratedFunctionSystem::IteratedFunctionSystem(std::vector<AffineMap> maps, int dim,
                                               double base_box_lo, double base_box_hi,
                                               std::string name)
    : dim_(dim), name_(std::move(name)) {
    if (maps.size() < 2) throw InvalidArgument("an IFS needs r >= 2 maps");
    if (base_box_hi <= base_box_lo) throw InvalidArgument("base box is empty");
    for (auto& m : maps) {
        if (m.dim() != dim || static_cast<int>(m.offset.size()) != dim)
            throw ShapeMismatch("IFS map dimension mismatch");
        if (base_box_lo != 0.0 || base_box_hi != 1.0)
            m = conjugate_to_unit_box(m, base_box_lo, base_box_hi);
    }
    maps_ = std::move(maps);
    inverses_.reserve(maps_.size());
    for (const auto& m : maps_) inverses_.push_back(m.inverse(kRankTol));
    max_inverse_norm_ = 1.0;
    for (const auto& inv : inverses_)
        max_inverse_norm_ = std::max(max_inverse_norm_, operator_norm(inv.matrix));

    uniform_matrix_ = true;
    for (std::size_t i = 1; i < maps_.size(); ++i) {
        if (maps_[i].matrix.a != maps_[0].matrix.a) { uniform_matrix_ = false; break; }
    }

    report_ = check_assumptions(*this);
}

Vec IteratedFunctionSystem::map_point(int index1, const Vec& x, MapDirection dir) const {
    if (index1 < 1 || index1 > map_count())
        throw IndexOutOfRange("map index " + std::to_string(index1) + " outside {1.." +
                              std::to_string(map_count()) + "}");
    const auto& m = maps_[static_cast<std::size_t>(index1 - 1)];
    return map_eval(m, x, dir, kRankTol);
}

AffineMap IteratedFunctionSystem::compose_address(const FractalAddress& address) const {
    AffineMap out = AffineMap::identity(dim_);
    for (int idx : address.indices) {
        if (idx < 1 || idx > map_count())
            throw IndexOutOfRange("address entry " + std::to_string(idx) + " outside {1.." +
                                  std::to_string(map_count()) + "}");
        out = out.compose(maps_[static_cast<std::size_t>(idx - 1)]);
    }
    return out;
}

bool IteratedFunctionSystem::descend_membership(const Vec& x, int level, double band) const {
    if (linf_distance_to_unit_box(x) > band) return false;
    if (level == 0) return true;
    for (const auto& inv : inverses_) {
        Vec u = inv.apply(x);
        if (descend_membership(u, level - 1, band)) return true;
    }
    return false;
}

bool IteratedFunctionSystem::membership(const Vec& x, int level) const {
    if (level < 0) throw InvalidArgument("membership level must be >= 0");
    if (static_cast<int>(x.size()) != dim_) throw ShapeMismatch("membership: bad point dim");
    return descend_membership(x, level, kGeomTol);
}

bool IteratedFunctionSystem::near_membership(const Vec& x, int level, double band) const {
    // Band inflated by the inverse-map expansion rate at each level; the
    // inflation only widens boxes, so this never misses a point within `band`
    // of K_level.
    if (linf_distance_to_unit_box(x) > band + kGeomTol) return false;
    if (level == 0) return true;
    for (const auto& inv : inverses_) {
        if (near_membership(inv.apply(x), level - 1, band * max_inverse_norm_)) return true;
    }
    return false;
}

void IteratedFunctionSystem::collect_addresses(const Vec& x, int level, std::vector<int>& stack,
                                               std::vector<FractalAddress>& out,
                                               std::size_t cap) const {
    if (out.size() >= cap) return;
    if (linf_distance_to_unit_box(x) > kGeomTol) return;
    if (level == 0) {
        out.push_back(FractalAddress{stack});
        return;
    }
    for (int i = 0; i < map_count(); ++i) {
        stack.push_back(i + 1);
        collect_addresses(inverses_[static_cast<std::size_t>(i)].apply(x), level - 1, stack, out, cap);
        stack.pop_back();
    }
}

std::optional<FractalAddress> IteratedFunctionSystem::address_of(const Vec& x, int level) const {
    if (level < 0) throw InvalidArgument("address_of level must be >= 0");
    std::vector<FractalAddress> found;
    std::vector<int> stack;
    collect_addresses(x, level, stack, found, 2);
    if (found.empty()) return std::nullopt;
    if (found.size() > 1)
        throw AmbiguousBoundary("point lies within tolerance of two level-" +
                                std::to_string(level) + " cells");
    return found.front();
}

double IteratedFunctionSystem::distance_to_cell_boundary(const Vec& x,
                                                         const FractalAddress& address) const {
    const AffineMap cell = compose_address(address);
    const AffineMap inv = cell.inverse(kRankTol);
    const Vec u = inv.apply(x);
    // Distance from an interior point of a convex polytope to its boundary is
    // the minimum distance over the face planes; plane {u_m = c} pulled back
    // through the cell map has x-space distance |u_m - c| / ||row_m(M^-1)||.
    double best = 1e300;
    for (int m = 0; m < dim_; ++m) {
        const double rn = row_norm2(inv.matrix, m);
        best = std::min(best, std::min(u[m], 1.0 - u[m]) / rn);
    }
    return best;
}

double IteratedFunctionSystem::margin_cap(int level) const {
    if (level < 0) throw InvalidArgument("margin_cap level must be >= 0");
    if (uniform_matrix_) {
        Mat m = Mat::identity(dim_);
        for (int i = 0; i < level; ++i) m = mat_mul(m, maps_[0].matrix);
        const Mat inv = mat_inverse(m, 0.0);
        double cap = 1e300;
        for (int r = 0; r < dim_; ++r) cap = std::min(cap, 0.5 / row_norm2(inv, r));
        return cap;
    }
    double smin = 1e300;
    for (const auto& m : maps_) smin = std::min(smin, min_singular_value(m.matrix, kRankTol));
    return 0.5 * std::pow(smin, level);
}

MarginResult IteratedFunctionSystem::margin_membership(const Vec& x, int level,
                                                       double gamma) const {
    if (!(gamma > 0.0) || gamma >= margin_cap(level))
        throw MarginTooLarge("gamma " + std::to_string(gamma) + " outside (0, " +
                             std::to_string(margin_cap(level)) + ")");
    std::optional<FractalAddress> addr;
    try {
        addr = address_of(x, level);
    } catch (const AmbiguousBoundary&) {
        return MarginResult::BoundaryBand;
    }
    if (!addr) return MarginResult::Outside;
    return distance_to_cell_boundary(x, *addr) >= gamma ? MarginResult::InsideWithMargin
                                                        : MarginResult::BoundaryBand;
}

IteratedFunctionSystem IteratedFunctionSystem::rewrite_blocked(int block) const {
    if (block < 1) throw InvalidArgument("block size must be >= 1");
    double count = std::pow(static_cast<double>(map_count()), block);
    if (count > kBlowupCap)
        throw BlowupLimit("r^s = " + std::to_string(static_cast<long long>(count)) +
                          " exceeds cap " + std::to_string(kBlowupCap));
    std::vector<AffineMap> comps;
    comps.reserve(static_cast<std::size_t>(count));
    std::vector<int> addr(static_cast<std::size_t>(block), 1);
    // Lexicographic enumeration of [r]^s with the first index outermost.
    while (true) {
        comps.push_back(compose_address(FractalAddress{addr}));
        int pos = block - 1;
        while (pos >= 0 && addr[static_cast<std::size_t>(pos)] == map_count()) {
            addr[static_cast<std::size_t>(pos)] = 1;
            --pos;
        }
        if (pos < 0) break;
        ++addr[static_cast<std::size_t>(pos)];
    }
    return IteratedFunctionSystem(std::move(comps), dim_, 0.0, 1.0,
                                  name_ + "_blocked" + std::to_string(block));
}

Vec IteratedFunctionSystem::margin_insets(const AffineMap& cell_map, double gamma) const {
    const AffineMap inv = cell_map.inverse(kRankTol);
    Vec insets(dim_);
    for (int m = 0; m < dim_; ++m) insets[m] = gamma * row_norm2(inv.matrix, m);
    return insets;
}

std::vector<double> IteratedFunctionSystem::map_abs_determinants() const {
    std::vector<double> dets;
    dets.reserve(maps_.size());
    for (const auto& m : maps_) dets.push_back(std::abs(mat_determinant(m.matrix)));
    return dets;
}

AssumptionReport check_assumptions(const IteratedFunctionSystem& ifs) {
    AssumptionReport report;
    report.contraction_ok = true;
    for (int i = 0; i < ifs.map_count(); ++i) {
        const Mat& M = ifs.map(i).matrix;
        if (std::abs(mat_determinant(M)) <= kRankTol) report.contraction_ok = false;
        if (operator_norm(M) >= 1.0) report.contraction_ok = false;
    }
    report.containment_ok = true;
    const int d = ifs.dim();
    for (int i = 0; i < ifs.map_count() && report.containment_ok; ++i) {
        // Convexity: it is enough to check the 2^d vertices of the base box.
        for (unsigned long long mask = 0; mask < (1ULL << d); ++mask) {
            Vec corner(d);
            for (int m = 0; m < d; ++m) corner[m] = (mask >> m) & 1 ? 1.0 : 0.0;
            Vec img = ifs.map(i).apply(corner);
            if (linf_distance_to_unit_box(img) > kGeomTol) {
                report.containment_ok = false;
                break;
            }
        }
    }
    double sep = 1e300;
    for (int i = 0; i < ifs.map_count(); ++i)
        for (int j = i + 1; j < ifs.map_count(); ++j)
            sep = std::min(sep, image_distance(ifs.map(i), ifs.map(j)));
    report.separation = ifs.map_count() >= 2 ? sep : 0.0;
    return report;
}

namespace {

AffineMap scaled_offset_map(int d, double scale, const Vec& offset) {
    return AffineMap{Mat::diagonal(d, scale), offset};
}

} // namespace

IteratedFunctionSystem builtin_ifs(const std::string& name) {
    const double third = 1.0 / 3.0;
    if (name == "cantor1d") {
        // Middle-thirds system x/3 and (x+2)/3.
        std::vector<AffineMap> maps{scaled_offset_map(1, third, {0.0}),
                                    scaled_offset_map(1, third, {2.0 / 3.0})};
        return IteratedFunctionSystem(std::move(maps), 1, 0.0, 1.0, "cantor1d");
    }
    if (name == "cantor2d") {
        std::vector<AffineMap> maps{scaled_offset_map(2, third, {0.0, 0.0}),
                                    scaled_offset_map(2, third, {2.0 / 3.0, 0.0}),
                                    scaled_offset_map(2, third, {0.0, 2.0 / 3.0}),
                                    scaled_offset_map(2, third, {2.0 / 3.0, 2.0 / 3.0})};
        return IteratedFunctionSystem(std::move(maps), 2, 0.0, 1.0, "cantor2d");
    }
    if (name == "sierpinski") {
        // Three 0.45-scale squares: two base corners plus a centered top.
        // Scale stays below 1/2 so the images keep a positive gap (0.1).
        std::vector<AffineMap> maps{scaled_offset_map(2, 0.45, {0.0, 0.0}),
                                    scaled_offset_map(2, 0.45, {0.55, 0.0}),
                                    scaled_offset_map(2, 0.45, {0.275, 0.55})};
        return IteratedFunctionSystem(std::move(maps), 2, 0.0, 1.0, "sierpinski");
    }
    if (name == "vicsek") {
        // Saltire arrangement: four corner squares plus the center, scale 0.3
        // (the classic 1/3 scale leaves the corner and center squares
        // touching, which has zero separation).
        std::vector<AffineMap> maps{scaled_offset_map(2, 0.3, {0.0, 0.0}),
                                    scaled_offset_map(2, 0.3, {0.7, 0.0}),
                                    scaled_offset_map(2, 0.3, {0.0, 0.7}),
                                    scaled_offset_map(2, 0.3, {0.7, 0.7}),
                                    scaled_offset_map(2, 0.3, {0.35, 0.35})};
        return IteratedFunctionSystem(std::move(maps), 2, 0.0, 1.0, "vicsek");
    }
    if (name == "pentaflake") {
        // Five similitudes: center plus four edge-midpoint squares at
        // 90-degree spacing, scale 0.3 for a 0.05 gap.
        std::vector<AffineMap> maps{scaled_offset_map(2, 0.3, {0.35, 0.0}),
                                    scaled_offset_map(2, 0.3, {0.7, 0.35}),
                                    scaled_offset_map(2, 0.3, {0.35, 0.7}),
                                    scaled_offset_map(2, 0.3, {0.0, 0.35}),
                                    scaled_offset_map(2, 0.3, {0.35, 0.35})};
        return IteratedFunctionSystem(std::move(maps), 2, 0.0, 1.0, "pentaflake");
    }
    throw UnknownName("no built-in IFS named '" + name + "'");
}

void write_ifs(std::ostream& os, const IteratedFunctionSystem& ifs) {
    os.precision(17);
    os << "dim " << ifs.dim() << "\n";
    for (int i = 0; i < ifs.map_count(); ++i) {
        const AffineMap& m = ifs.map(i);
        bool first = true;
        for (double v : m.matrix.a) {
            os << (first ? "" : " ") << v;
            first = false;
        }
        for (double v : m.offset) os << " " << v;
        os << "\n";
    }
}

IteratedFunctionSystem read_ifs(std::istream& is, const std::string& name) {
    std::string tag;
    int d = 0;
    if (!(is >> tag >> d) || tag != "dim" || d < 1)
        throw ParseError("IFS block must start with 'dim <d>'");
    std::string line;
    std::getline(is, line);
    std::vector<AffineMap> maps;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        std::istringstream row(line);
        std::vector<double> vals;
        double v;
        while (row >> v) vals.push_back(v);
        if (vals.empty()) continue;
        if (static_cast<int>(vals.size()) != d * d + d)
            throw ParseError("IFS line " + std::to_string(line_no) + ": expected " +
                             std::to_string(d * d + d) + " values, got " +
                             std::to_string(vals.size()));
        AffineMap m;
        m.matrix = Mat(d);
        m.matrix.a.assign(vals.begin(), vals.begin() + d * d);
        m.offset.assign(vals.begin() + d * d, vals.end());
        maps.push_back(std::move(m));
    }
    return IteratedFunctionSystem(std::move(maps), d, 0.0, 1.0, name);
}

} // namespace fractal
