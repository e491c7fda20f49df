#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fractal/errors.hpp"

namespace fractal {

using Vec = std::vector<double>;

// Dense square matrix, row-major.
struct Mat {
    int dim = 0;
    std::vector<double> a; // dim*dim entries

    Mat() = default;
    explicit Mat(int d) : dim(d), a(static_cast<std::size_t>(d) * d, 0.0) {}

    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * dim + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * dim + c]; }

    static Mat identity(int d);
    static Mat diagonal(int d, double value);

    bool is_diagonal(double tol = 0.0) const;
};

Mat mat_mul(const Mat& A, const Mat& B);
Vec mat_vec(const Mat& A, const Vec& x);

// Gauss-Jordan inverse with partial pivoting. Throws SingularMatrix when the
// pivot magnitude falls below tol_rank.
Mat mat_inverse(const Mat& A, double tol_rank);
double mat_determinant(const Mat& A);

// Largest singular value, via eigen-iteration on A^T A.
double operator_norm(const Mat& A);
// Smallest singular value.
double min_singular_value(const Mat& A, double tol_rank);

double row_norm2(const Mat& A, int row);

// Affine map x -> M x + v on R^d. Coordinates are in base-box units.
struct AffineMap {
    Mat matrix;
    Vec offset;

    int dim() const { return matrix.dim; }

    Vec apply(const Vec& x) const;

    static AffineMap identity(int d);

    // this(other(x))
    AffineMap compose(const AffineMap& other) const;

    // Inverse map x -> M^-1 (x - v). Throws SingularMatrix.
    AffineMap inverse(double tol_rank) const;
};

enum class MapDirection { Forward, Inverse };

// Forward applies Mx+v; Inverse applies M^-1(x-v).
Vec map_eval(const AffineMap& map, const Vec& x, MapDirection direction,
             double tol_rank = 1e-12);

// ---------------------------------------------------------------------------
// Distances involving affine images of the unit box [0,1]^d.
// ---------------------------------------------------------------------------

// l-inf distance from x to [0,1]^d (0 when inside).
double linf_distance_to_unit_box(const Vec& x);
// l2 distance from x to [0,1]^d.
double l2_distance_to_unit_box(const Vec& x);

bool inside_unit_box(const Vec& x, double tol);

// Minimum l2 distance between A([0,1]^d) and B([0,1]^d).
// Exact for d<=2 and for diagonal matrices in any dimension; for general
// matrices with d>=3 an alternating-projection upper bound is returned,
// converged to gradient tolerance 1e-13.
double image_distance(const AffineMap& A, const AffineMap& B);

// Minimum l2 distance between A([0,1]^d) and the fixed axis-aligned box
// [lo,hi]^d (same exactness notes as image_distance).
double image_box_distance(const AffineMap& A, double lo, double hi);

} // namespace fractal
