#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fractal/geometry.hpp"

namespace fractal {

// Geometric tolerance for boundary and pruning decisions, in base-box units.
inline constexpr double kGeomTol = 1e-9;
// Rank tolerance for matrix inversion.
inline constexpr double kRankTol = 1e-12;
// Cap on r^s when rewriting an IFS with composed maps.
inline constexpr int kBlowupCap = 4096;

// Map indices are 1-based: entries lie in {1..r}. The first entry is the
// coarsest level, so the cell of address (i1,...,in) is F_i1∘...∘F_in([0,1]^d).
struct FractalAddress {
    std::vector<int> indices;

    std::size_t length() const { return indices.size(); }
};

struct AssumptionReport {
    bool contraction_ok = false;
    bool containment_ok = false;
    double separation = 0.0; // minimum pairwise distance between map images

    bool all_ok() const { return contraction_ok && containment_ok && separation > 0.0; }
};

enum class MarginResult { InsideWithMargin, BoundaryBand, Outside };

// A finite iterated function system of r contractive affine maps. The base box
// is always [0,1]^d: construction conjugates the maps with the affine change
// of coordinates that carries the supplied base box onto the unit box, so all
// quantities downstream (margins, separations, compiled nets) live in
// normalized units.
class IteratedFunctionSystem {
  public:
    // base_box_lo/hi give the original box [lo,hi]^d; defaults to [0,1]^d.
    IteratedFunctionSystem(std::vector<AffineMap> maps, int dim,
                           double base_box_lo = 0.0, double base_box_hi = 1.0,
                           std::string name = "custom");

    int dim() const { return dim_; }
    int map_count() const { return static_cast<int>(maps_.size()); }
    const AffineMap& map(int i) const { return maps_[static_cast<std::size_t>(i)]; } // 0-based
    const AffineMap& inverse_map(int i) const { return inverses_[static_cast<std::size_t>(i)]; }
    const std::string& name() const { return name_; }
    double separation() const { return report_.separation; }
    const AssumptionReport& assumption_report() const { return report_; }

    // True when every map matrix is identical (all built-ins); enables exact
    // per-level cell geometry.
    bool uniform_matrix() const { return uniform_matrix_; }

    Vec map_point(int index1, const Vec& x, MapDirection dir) const; // index1 is 1-based

    AffineMap compose_address(const FractalAddress& address) const;

    bool membership(const Vec& x, int level) const;
    // True when x lies within `band` (l2, base-box units) of K_level.
    bool near_membership(const Vec& x, int level, double band) const;

    std::optional<FractalAddress> address_of(const Vec& x, int level) const;

    MarginResult margin_membership(const Vec& x, int level, double gamma) const;

    // Largest admissible margin at `level`: the inradius of the smallest
    // level-n cell (3^-n/2 for the middle-thirds Cantor system).
    double margin_cap(int level) const;

    // Distance from x to the boundary of the level-n cell with this address.
    double distance_to_cell_boundary(const Vec& x, const FractalAddress& address) const;

    // IFS whose r^s maps are the s-fold compositions; level m of the result
    // equals level m*s of the original.
    IteratedFunctionSystem rewrite_blocked(int block) const;

    // Unit-box insets per coordinate such that mapping [inset,1-inset]^d
    // through compose_address(address) keeps l2 distance >= gamma from the
    // cell boundary.
    Vec margin_insets(const AffineMap& cell_map, double gamma) const;

    std::vector<double> map_abs_determinants() const;

  private:
    std::vector<AffineMap> maps_;
    std::vector<AffineMap> inverses_;
    int dim_;
    std::string name_;
    AssumptionReport report_;
    bool uniform_matrix_ = false;
    double max_inverse_norm_ = 1.0;

    bool descend_membership(const Vec& x, int level, double band) const;
    void collect_addresses(const Vec& x, int level, std::vector<int>& stack,
                           std::vector<FractalAddress>& out, std::size_t cap) const;
};

AssumptionReport check_assumptions(const IteratedFunctionSystem& ifs);

// Built-in systems: cantor1d, cantor2d, sierpinski, vicsek, pentaflake.
IteratedFunctionSystem builtin_ifs(const std::string& name);

// Plain text block: first line "dim <d>", then one line per map holding the
// d*d matrix entries row-major followed by the d offset entries, 17
// significant digits.
void write_ifs(std::ostream& os, const IteratedFunctionSystem& ifs);
IteratedFunctionSystem read_ifs(std::istream& is, const std::string& name = "custom");

} // namespace fractal
