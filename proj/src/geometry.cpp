#include "fractal/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace fractal {

Mat Mat::identity(int d) {
    Mat m(d);
    for (int i = 0; i < d; ++i) m.at(i, i) = 1.0;
    return m;
}

Mat Mat::diagonal(int d, double value) {
    Mat m(d);
    for (int i = 0; i < d; ++i) m.at(i, i) = value;
    return m;
}

bool Mat::is_diagonal(double tol) const {
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
            if (r != c && std::abs(at(r, c)) > tol) return false;
    return true;
}

Mat mat_mul(const Mat& A, const Mat& B) {
    if (A.dim != B.dim) throw ShapeMismatch("matrix product dims differ");
    Mat C(A.dim);
    for (int i = 0; i < A.dim; ++i)
        for (int k = 0; k < A.dim; ++k) {
            const double aik = A.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < A.dim; ++j) C.at(i, j) += aik * B.at(k, j);
        }
    return C;
}

Vec mat_vec(const Mat& A, const Vec& x) {
    if (static_cast<int>(x.size()) != A.dim) throw ShapeMismatch("matrix-vector dims differ");
    Vec y(A.dim, 0.0);
    for (int i = 0; i < A.dim; ++i) {
        double s = 0.0;
        for (int j = 0; j < A.dim; ++j) s += A.at(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

Mat mat_inverse(const Mat& A, double tol_rank) {
    const int d = A.dim;
    Mat work = A;
    Mat inv = Mat::identity(d);
    for (int col = 0; col < d; ++col) {
        int pivot = col;
        for (int r = col + 1; r < d; ++r)
            if (std::abs(work.at(r, col)) > std::abs(work.at(pivot, col))) pivot = r;
        if (std::abs(work.at(pivot, col)) <= tol_rank)
            throw SingularMatrix("pivot below rank tolerance");
        if (pivot != col) {
            for (int j = 0; j < d; ++j) {
                std::swap(work.at(pivot, j), work.at(col, j));
                std::swap(inv.at(pivot, j), inv.at(col, j));
            }
        }
        const double p = work.at(col, col);
        for (int j = 0; j < d; ++j) {
            work.at(col, j) /= p;
            inv.at(col, j) /= p;
        }
        for (int r = 0; r < d; ++r) {
            if (r == col) continue;
            const double f = work.at(r, col);
            if (f == 0.0) continue;
            for (int j = 0; j < d; ++j) {
                work.at(r, j) -= f * work.at(col, j);
                inv.at(r, j) -= f * inv.at(col, j);
            }
        }
    }
    return inv;
}

double mat_determinant(const Mat& A) {
    const int d = A.dim;
    Mat work = A;
    double det = 1.0;
    for (int col = 0; col < d; ++col) {
        int pivot = col;
        for (int r = col + 1; r < d; ++r)
            if (std::abs(work.at(r, col)) > std::abs(work.at(pivot, col))) pivot = r;
        if (work.at(pivot, col) == 0.0) return 0.0;
        if (pivot != col) {
            det = -det;
            for (int j = 0; j < d; ++j) std::swap(work.at(pivot, j), work.at(col, j));
        }
        det *= work.at(col, col);
        for (int r = col + 1; r < d; ++r) {
            const double f = work.at(r, col) / work.at(col, col);
            for (int j = col; j < d; ++j) work.at(r, j) -= f * work.at(col, j);
        }
    }
    return det;
}

double operator_norm(const Mat& A) {
    const int d = A.dim;
    if (d == 1) return std::abs(A.at(0, 0));
    // Power iteration on A^T A with deterministic start.
    Vec v(d, 1.0 / std::sqrt(static_cast<double>(d)));
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
        Vec av(d, 0.0);
        for (int i = 0; i < d; ++i) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += A.at(i, j) * v[j];
            av[i] = s;
        }
        Vec w(d, 0.0);
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int i = 0; i < d; ++i) s += A.at(i, j) * av[i];
            w[j] = s;
        }
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        double prev = lambda;
        lambda = norm;
        for (int j = 0; j < d; ++j) v[j] = w[j] / norm;
        if (it > 10 && std::abs(lambda - prev) <= 1e-15 * std::max(1.0, lambda)) break;
    }
    return std::sqrt(lambda);
}

double min_singular_value(const Mat& A, double tol_rank) {
    Mat inv = mat_inverse(A, tol_rank);
    const double n = operator_norm(inv);
    return n == 0.0 ? 0.0 : 1.0 / n;
}

double row_norm2(const Mat& A, int row) {
    double s = 0.0;
    for (int j = 0; j < A.dim; ++j) s += A.at(row, j) * A.at(row, j);
    return std::sqrt(s);
}

Vec AffineMap::apply(const Vec& x) const {
    Vec y = mat_vec(matrix, x);
    for (int i = 0; i < dim(); ++i) y[i] += offset[i];
    return y;
}

AffineMap AffineMap::identity(int d) {
    return AffineMap{Mat::identity(d), Vec(d, 0.0)};
}

AffineMap AffineMap::compose(const AffineMap& other) const {
    AffineMap out;
    out.matrix = mat_mul(matrix, other.matrix);
    out.offset = mat_vec(matrix, other.offset);
    for (int i = 0; i < dim(); ++i) out.offset[i] += offset[i];
    return out;
}

AffineMap AffineMap::inverse(double tol_rank) const {
    AffineMap out;
    out.matrix = mat_inverse(matrix, tol_rank);
    out.offset = mat_vec(out.matrix, offset);
    for (double& v : out.offset) v = -v;
    return out;
}

Vec map_eval(const AffineMap& map, const Vec& x, MapDirection direction, double tol_rank) {
    if (static_cast<int>(x.size()) != map.dim())
        throw ShapeMismatch("map_eval: point dimension mismatch");
    if (direction == MapDirection::Forward) return map.apply(x);
    return map.inverse(tol_rank).apply(x);
}

double linf_distance_to_unit_box(const Vec& x) {
    double d = 0.0;
    for (double v : x) {
        double viol = std::max(-v, v - 1.0);
        d = std::max(d, std::max(viol, 0.0));
    }
    return d;
}

double l2_distance_to_unit_box(const Vec& x) {
    double s = 0.0;
    for (double v : x) {
        double viol = std::max(std::max(-v, v - 1.0), 0.0);
        s += viol * viol;
    }
    return std::sqrt(s);
}

bool inside_unit_box(const Vec& x, double tol) {
    return linf_distance_to_unit_box(x) <= tol;
}

namespace {

struct Interval {
    double lo, hi;
};

Interval image_interval_1d(const AffineMap& A) {
    const double m = A.matrix.at(0, 0), v = A.offset[0];
    const double a = v, b = m + v;
    return {std::min(a, b), std::max(a, b)};
}

double interval_distance(Interval a, Interval b) {
    if (a.hi < b.lo) return b.lo - a.hi;
    if (b.hi < a.lo) return a.lo - b.hi;
    return 0.0;
}

// Per-axis image interval of A([0,1]^d) for diagonal matrices.
Interval axis_interval(const AffineMap& A, int axis) {
    const double m = A.matrix.at(axis, axis), v = A.offset[axis];
    const double a = v, b = m + v;
    return {std::min(a, b), std::max(a, b)};
}

double boxes_distance(const std::vector<Interval>& a, const std::vector<Interval>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double g = interval_distance(a[i], b[i]);
        s += g * g;
    }
    return std::sqrt(s);
}

// --- exact 2-D convex polygon distance ---

struct P2 {
    double x, y;
};

std::vector<P2> parallelogram_vertices(const AffineMap& A) {
    auto pt = [&](double u, double v) {
        Vec p = A.apply(Vec{u, v});
        return P2{p[0], p[1]};
    };
    return {pt(0, 0), pt(1, 0), pt(1, 1), pt(0, 1)};
}

double seg_seg_distance(P2 p1, P2 p2, P2 q1, P2 q2) {
    auto dot = [](P2 a, P2 b) { return a.x * b.x + a.y * b.y; };
    auto sub = [](P2 a, P2 b) { return P2{a.x - b.x, a.y - b.y}; };
    auto point_seg = [&](P2 p, P2 a, P2 b) {
        P2 ab = sub(b, a), ap = sub(p, a);
        double denom = dot(ab, ab);
        double t = denom > 0.0 ? std::clamp(dot(ap, ab) / denom, 0.0, 1.0) : 0.0;
        P2 c{a.x + t * ab.x, a.y + t * ab.y};
        P2 e = sub(p, c);
        return std::sqrt(dot(e, e));
    };
    double d = point_seg(p1, q1, q2);
    d = std::min(d, point_seg(p2, q1, q2));
    d = std::min(d, point_seg(q1, p1, p2));
    d = std::min(d, point_seg(q2, p1, p2));
    return d;
}

bool polygons_intersect(const std::vector<P2>& a, const std::vector<P2>& b) {
    // Separating axis test over both polygons' edge normals.
    auto axes_separate = [](const std::vector<P2>& u, const std::vector<P2>& w) {
        const std::size_t n = u.size();
        for (std::size_t i = 0; i < n; ++i) {
            P2 e{u[(i + 1) % n].x - u[i].x, u[(i + 1) % n].y - u[i].y};
            P2 nrm{-e.y, e.x};
            double ulo = 1e300, uhi = -1e300, wlo = 1e300, whi = -1e300;
            for (const P2& p : u) {
                double s = nrm.x * p.x + nrm.y * p.y;
                ulo = std::min(ulo, s);
                uhi = std::max(uhi, s);
            }
            for (const P2& p : w) {
                double s = nrm.x * p.x + nrm.y * p.y;
                wlo = std::min(wlo, s);
                whi = std::max(whi, s);
            }
            if (uhi < wlo || whi < ulo) return true;
        }
        return false;
    };
    return !axes_separate(a, b) && !axes_separate(b, a);
}

double polygon_distance(const std::vector<P2>& a, const std::vector<P2>& b) {
    if (polygons_intersect(a, b)) return 0.0;
    double best = 1e300;
    const std::size_t n = a.size(), m = b.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            best = std::min(best, seg_seg_distance(a[i], a[(i + 1) % n], b[j], b[(j + 1) % m]));
    return best;
}

// --- alternating projection fallback for general matrices, d >= 3 ---

// Minimizes ||A u + a - (B v + b)|| over u, v in [0,1]^d by projected
// coordinate descent; converges since the objective is convex and the
// feasible set is a product of boxes.
double alternating_distance(const AffineMap& A, const AffineMap& B) {
    const int d = A.dim();
    Vec u(d, 0.5), v(d, 0.5);
    auto col_sq = [](const Mat& M, int c) {
        double s = 0.0;
        for (int r = 0; r < M.dim; ++r) s += M.at(r, c) * M.at(r, c);
        return s;
    };
    double prev = 1e300;
    for (int sweep = 0; sweep < 20000; ++sweep) {
        Vec pa = A.apply(u), pb = B.apply(v);
        Vec r(d);
        for (int i = 0; i < d; ++i) r[i] = pa[i] - pb[i];
        for (int c = 0; c < d; ++c) {
            double g = 0.0;
            for (int i = 0; i < d; ++i) g += A.matrix.at(i, c) * r[i];
            double diag = col_sq(A.matrix, c);
            if (diag > 0.0) {
                double nu = std::clamp(u[c] - g / diag, 0.0, 1.0);
                double delta = nu - u[c];
                if (delta != 0.0) {
                    for (int i = 0; i < d; ++i) r[i] += A.matrix.at(i, c) * delta;
                    u[c] = nu;
                }
            }
            g = 0.0;
            for (int i = 0; i < d; ++i) g -= B.matrix.at(i, c) * r[i];
            diag = col_sq(B.matrix, c);
            if (diag > 0.0) {
                double nv = std::clamp(v[c] - g / diag, 0.0, 1.0);
                double delta = nv - v[c];
                if (delta != 0.0) {
                    for (int i = 0; i < d; ++i) r[i] -= B.matrix.at(i, c) * delta;
                    v[c] = nv;
                }
            }
        }
        double val = 0.0;
        for (int i = 0; i < d; ++i) val += r[i] * r[i];
        if (prev - val <= 1e-26) { prev = val; break; }
        prev = val;
    }
    return std::sqrt(std::max(prev, 0.0));
}

} // namespace

double image_distance(const AffineMap& A, const AffineMap& B) {
    const int d = A.dim();
    if (d != B.dim()) throw ShapeMismatch("image_distance: dims differ");
    if (d == 1) return interval_distance(image_interval_1d(A), image_interval_1d(B));
    if (A.matrix.is_diagonal() && B.matrix.is_diagonal()) {
        std::vector<Interval> ia(d), ib(d);
        for (int i = 0; i < d; ++i) {
            ia[i] = axis_interval(A, i);
            ib[i] = axis_interval(B, i);
        }
        return boxes_distance(ia, ib);
    }
    if (d == 2) return polygon_distance(parallelogram_vertices(A), parallelogram_vertices(B));
    return alternating_distance(A, B);
}

double image_box_distance(const AffineMap& A, double lo, double hi) {
    const int d = A.dim();
    AffineMap box;
    box.matrix = Mat::diagonal(d, hi - lo);
    box.offset = Vec(d, lo);
    return image_distance(A, box);
}

} // namespace fractal
