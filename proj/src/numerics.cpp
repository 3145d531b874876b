#include "flatmin/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "flatmin/error.hpp"

namespace flatmin {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_same_size(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw Error(ErrorKind::invalid_parameter, "dimension mismatch: " + std::to_string(a.size()) +
                                                      " vs " + std::to_string(b.size()));
}

double checked_eval(const ScalarField& func, std::span<const double> x) {
    const double value = func(x);
    if (!std::isfinite(value))
        throw Error(ErrorKind::evaluation_domain, "non-finite value at a finite-difference stencil point");
    return value;
}

double step_for(std::optional<double> h, double base, double xi) {
    if (h) {
        if (!(*h > 0.0)) throw Error(ErrorKind::invalid_parameter, "finite-difference step must be positive");
        return *h;
    }
    return base * (1.0 + std::abs(xi));
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_size(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    if (scale == 0.0 || !std::isfinite(scale)) return scale;
    double s = 0.0;
    for (double v : a) s += (v / scale) * (v / scale);
    return scale * std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
    return norm(subtract(a, b));
}

Vector axpy(std::span<const double> a, double s, std::span<const double> b) {
    require_same_size(a, b);
    Vector out(a.begin(), a.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * b[i];
    return out;
}

Vector subtract(std::span<const double> a, std::span<const double> b) { return axpy(a, -1.0, b); }

Vector scaled(std::span<const double> a, double s) {
    Vector out(a.begin(), a.end());
    for (double& v : out) v *= s;
    return out;
}

bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows_ * cols_)
        throw Error(ErrorKind::invalid_parameter, "matrix data has " + std::to_string(data_.size()) +
                                                      " entries, expected " + std::to_string(rows_ * cols_));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_columns(std::span<const Vector> columns) {
    if (columns.empty()) return {};
    Matrix m(columns.front().size(), columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j].size() != m.rows()) throw Error(ErrorKind::invalid_parameter, "ragged column list");
        for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) = columns[j][i];
    }
    return m;
}

Vector Matrix::row(std::size_t i) const {
    return Vector(data_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                  data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_));
}

Vector Matrix::column(std::size_t j) const {
    Vector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
    if (cols_ != rhs.rows_) throw Error(ErrorKind::invalid_parameter, "matrix product shape mismatch");
    Matrix out(rows_, rhs.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t k = 0; k < cols_; ++k) {
            const double a = (*this)(i, k);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
        }
    return out;
}

Vector Matrix::operator*(std::span<const double> v) const {
    if (cols_ != v.size()) throw Error(ErrorKind::invalid_parameter, "matrix-vector shape mismatch");
    Vector out(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) out[i] += (*this)(i, j) * v[j];
    return out;
}

double Matrix::frobenius_norm() const { return norm(data_); }

// ---------------------------------------------------------------------------

SymmetricMatrix::SymmetricMatrix(std::size_t order, double fill)
    : order_(order), data_(order * (order + 1) / 2, fill) {}

SymmetricMatrix SymmetricMatrix::identity(std::size_t n) {
    SymmetricMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1.0);
    return m;
}

SymmetricMatrix SymmetricMatrix::from_matrix(const Matrix& m) {
    if (m.rows() != m.cols()) throw Error(ErrorKind::invalid_parameter, "symmetric matrix must be square");
    SymmetricMatrix s(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i; j < m.cols(); ++j) s.set(i, j, 0.5 * (m(i, j) + m(j, i)));
    return s;
}

std::size_t SymmetricMatrix::index(std::size_t i, std::size_t j) const noexcept {
    if (i > j) std::swap(i, j);
    // row i of the upper triangle starts after i rows of decreasing length
    return i * order_ - i * (i - 1) / 2 + (j - i);
}

Matrix SymmetricMatrix::to_matrix() const {
    Matrix m(order_, order_);
    for (std::size_t i = 0; i < order_; ++i)
        for (std::size_t j = 0; j < order_; ++j) m(i, j) = (*this)(i, j);
    return m;
}

double SymmetricMatrix::quadratic_form(std::span<const double> u) const {
    if (u.size() != order_) throw Error(ErrorKind::invalid_parameter, "quadratic form dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < order_; ++i)
        for (std::size_t j = 0; j < order_; ++j) s += u[i] * (*this)(i, j) * u[j];
    return s;
}

double SymmetricMatrix::frobenius_norm() const { return to_matrix().frobenius_norm(); }

// ---------------------------------------------------------------------------

Vector finite_diff_gradient(const ScalarField& func, std::span<const double> x, std::optional<double> h) {
    const double base = std::cbrt(kEps);
    Vector point(x.begin(), x.end());
    Vector grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double hi = step_for(h, base, x[i]);
        point[i] = x[i] + hi;
        const double fp = checked_eval(func, point);
        point[i] = x[i] - hi;
        const double fm = checked_eval(func, point);
        point[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * hi);
    }
    return grad;
}

SymmetricMatrix finite_diff_hessian(const ScalarField& func, std::span<const double> x, std::optional<double> h) {
    const double base = std::pow(kEps, 0.25);
    const std::size_t n = x.size();
    Vector step(n);
    for (std::size_t i = 0; i < n; ++i) step[i] = step_for(h, base, x[i]);

    Vector p(x.begin(), x.end());
    const double f0 = checked_eval(func, p);
    SymmetricMatrix hess(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = x[i] + step[i];
        const double fp = checked_eval(func, p);
        p[i] = x[i] - step[i];
        const double fm = checked_eval(func, p);
        p[i] = x[i];
        hess.set(i, i, (fp - 2.0 * f0 + fm) / (step[i] * step[i]));
        for (std::size_t j = i + 1; j < n; ++j) {
            auto at = [&](double si, double sj) {
                p[i] = x[i] + si * step[i];
                p[j] = x[j] + sj * step[j];
                const double v = checked_eval(func, p);
                p[i] = x[i];
                p[j] = x[j];
                return v;
            };
            const double mixed = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * step[i] * step[j]);
            hess.set(i, j, mixed);
        }
    }
    return hess;
}

// ---------------------------------------------------------------------------

EigenDecomposition symmetric_eigen(const SymmetricMatrix& m) {
    const std::size_t n = m.order();
    if (n == 0) return {};
    Matrix a = m.to_matrix();
    Matrix v = Matrix::identity(n);
    if (!all_finite(a.data())) throw Error(ErrorKind::numeric_failure, "non-finite matrix entry");

    const double scale = std::max(a.frobenius_norm(), std::numeric_limits<double>::min());
    constexpr int kMaxSweeps = 100;
    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (std::sqrt(off) <= 1e-12 * scale) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged) throw Error(ErrorKind::numeric_failure, "Jacobi eigen iteration did not converge in 100 sweeps");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
    EigenDecomposition out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

double top_eigenvalue(const SymmetricMatrix& m) {
    if (m.order() == 0) throw Error(ErrorKind::invalid_parameter, "empty matrix has no eigenvalues");
    return symmetric_eigen(m).values.front();
}

namespace {

// Fills the columns of q not marked present with unit vectors orthogonal to
// the others, by Gram-Schmidt against the standard basis.
void complete_orthonormal(Matrix& q, std::vector<bool>& present) {
    const std::size_t m = q.rows();
    for (std::size_t j = 0; j < q.cols(); ++j) {
        if (present[j]) continue;
        for (std::size_t e = 0; e < m; ++e) {
            Vector cand(m, 0.0);
            cand[e] = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t k = 0; k < q.cols(); ++k) {
                    if (!present[k]) continue;
                    const Vector col = q.column(k);
                    const double d = dot(cand, col);
                    for (std::size_t i = 0; i < m; ++i) cand[i] -= d * col[i];
                }
            const double nc = norm(cand);
            if (nc > 1e-6) {
                for (std::size_t i = 0; i < m; ++i) q(i, j) = cand[i] / nc;
                present[j] = true;
                break;
            }
        }
    }
}

SvdResult svd_tall(const Matrix& input) {
    const std::size_t m = input.rows();
    const std::size_t n = input.cols();
    Matrix a = input;
    Matrix v = Matrix::identity(n);
    const double scale = a.frobenius_norm();
    constexpr int kMaxSweeps = 100;
    bool converged = scale == 0.0;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += a(i, p) * a(i, p);
                    beta += a(i, q) * a(i, q);
                    gamma += a(i, p) * a(i, q);
                }
                if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta) || gamma == 0.0) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double ap = a(i, p);
                    const double aq = a(i, q);
                    a(i, p) = c * ap - s * aq;
                    a(i, q) = s * ap + c * aq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p);
                    const double vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) converged = true;
    }
    if (!converged) throw Error(ErrorKind::numeric_failure, "one-sided Jacobi SVD did not converge in 100 sweeps");

    Vector sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = norm(a.column(j));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

    SvdResult out{Matrix(m, n), Vector(n), Matrix(n, n)};
    std::vector<bool> present(n, false);
    const double sigma_max = sigma[order[0]];
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.sigma[k] = sigma[j];
        for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
        if (sigma_max > 0.0 && sigma[j] > 1e-14 * sigma_max) {
            for (std::size_t i = 0; i < m; ++i) out.u(i, k) = a(i, j) / sigma[j];
            present[k] = true;
        }
    }
    complete_orthonormal(out.u, present);
    return out;
}

}  // namespace

SvdResult svd_small(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw Error(ErrorKind::invalid_parameter, "empty matrix");
    if (!all_finite(m.data())) throw Error(ErrorKind::numeric_failure, "non-finite matrix entry");
    if (m.rows() >= m.cols()) return svd_tall(m);
    SvdResult t = svd_tall(m.transpose());
    return SvdResult{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

std::size_t numerical_rank(const Matrix& m, double rel_tol) {
    if (m.rows() == 0 || m.cols() == 0) return 0;
    const Vector sigma = svd_small(m).sigma;
    if (sigma.front() == 0.0) return 0;
    return static_cast<std::size_t>(
        std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > rel_tol * sigma.front(); }));
}

std::vector<Vector> orthonormal_complement(std::span<const Vector> vectors, std::size_t n) {
    std::vector<Vector> basis;
    auto orthogonalize = [&](Vector cand) {
        for (int pass = 0; pass < 2; ++pass)
            for (const Vector& b : basis) cand = axpy(cand, -dot(cand, b), b);
        return cand;
    };
    for (const Vector& v : vectors) {
        if (v.size() != n) throw Error(ErrorKind::invalid_parameter, "vector dimension mismatch");
        const double scale = std::max(norm(v), 1e-300);
        Vector c = orthogonalize(v);
        const double nc = norm(c);
        if (nc > 1e-10 * scale) basis.push_back(scaled(c, 1.0 / nc));
    }
    const std::size_t spanned = basis.size();
    for (std::size_t e = 0; e < n && basis.size() < n; ++e) {
        Vector cand(n, 0.0);
        cand[e] = 1.0;
        cand = orthogonalize(cand);
        const double nc = norm(cand);
        if (nc > 1e-6) basis.push_back(scaled(cand, 1.0 / nc));
    }
    return {basis.begin() + static_cast<std::ptrdiff_t>(spanned), basis.end()};
}

// ---------------------------------------------------------------------------

std::optional<Vector> solve_linear(Matrix a, Vector b, double pivot_tol) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw Error(ErrorKind::invalid_parameter, "solve_linear shape mismatch");
    double amax = 0.0;
    for (double v : a.data()) amax = std::max(amax, std::abs(v));
    if (amax == 0.0) return std::nullopt;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (std::abs(a(piv, col)) <= pivot_tol * amax) return std::nullopt;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
            std::swap(b[piv], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

double determinant(Matrix a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw Error(ErrorKind::invalid_parameter, "determinant of non-square matrix");
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (a(piv, col) == 0.0) return 0.0;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
            det = -det;
        }
        det *= a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
        }
    }
    return det;
}

Vector project_affine(std::span<const double> x, std::span<const Vector> basis) {
    const std::size_t k = basis.size();
    if (k == 0) return Vector(x.size(), 0.0);
    Matrix gram(k, k);
    Vector rhs(k);
    for (std::size_t i = 0; i < k; ++i) {
        rhs[i] = dot(basis[i], x);
        for (std::size_t j = 0; j < k; ++j) gram(i, j) = dot(basis[i], basis[j]);
    }
    if (!(determinant(gram) > 1e-12))
        throw Error(ErrorKind::degenerate_basis, "projection basis is rank-deficient (Gram determinant <= 1e-12)");
    const auto coef = solve_linear(gram, rhs, 0.0);
    if (!coef) throw Error(ErrorKind::degenerate_basis, "projection basis is rank-deficient");
    Vector out(x.size(), 0.0);
    for (std::size_t i = 0; i < k; ++i) out = axpy(out, (*coef)[i], basis[i]);
    return out;
}

namespace {

// Minimum-norm point of the affine hull of the selected points, if it lies in
// their convex hull. Solves the bordered system [G 1; 1^T 0][w; mu] = [0; 1].
std::optional<double> simplex_candidate(std::span<const Vector> points, std::span<const std::size_t> idx) {
    const std::size_t k = idx.size();
    Matrix kkt(k + 1, k + 1);
    Vector rhs(k + 1, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) kkt(i, j) = dot(points[idx[i]], points[idx[j]]);
        kkt(i, k) = 1.0;
        kkt(k, i) = 1.0;
    }
    rhs[k] = 1.0;
    const auto sol = solve_linear(kkt, rhs, 1e-12);
    if (!sol) return std::nullopt;
    const std::size_t dim = points[idx[0]].size();
    Vector combo(dim, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        if ((*sol)[i] < -1e-12) return std::nullopt;
        combo = axpy(combo, (*sol)[i], points[idx[i]]);
    }
    return norm(combo);
}

}  // namespace

double hull_distance(std::span<const Vector> points) {
    if (points.empty()) throw Error(ErrorKind::invalid_parameter, "hull of an empty point set");
    const std::size_t dim = points.front().size();
    for (const Vector& p : points)
        if (p.size() != dim) throw Error(ErrorKind::invalid_parameter, "hull points differ in dimension");

    double best = std::numeric_limits<double>::infinity();
    for (const Vector& p : points) best = std::min(best, norm(p));
    const std::size_t max_size = std::min(points.size(), dim + 1);
    std::vector<std::size_t> idx;
    // depth-first enumeration of index subsets of size 2..max_size
    auto recurse = [&](auto&& self, std::size_t start) -> void {
        if (idx.size() >= 2) {
            if (auto d = simplex_candidate(points, idx)) best = std::min(best, *d);
        }
        if (idx.size() == max_size) return;
        for (std::size_t i = start; i < points.size(); ++i) {
            idx.push_back(i);
            self(self, i + 1);
            idx.pop_back();
        }
    };
    recurse(recurse, 0);
    return best;
}

bool hull_contains_origin(std::span<const Vector> points, double tol) { return hull_distance(points) <= tol; }

// ---------------------------------------------------------------------------

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (spare_normal_) {
        const double v = *spare_normal_;
        spare_normal_.reset();
        return v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double kTwoPi = 6.283185307179586;
    spare_normal_ = r * std::sin(kTwoPi * u2);
    return r * std::cos(kTwoPi * u2);
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0) throw Error(ErrorKind::invalid_parameter, "index range is empty");
    return static_cast<std::size_t>(next() % n);
}

Vector Rng::unit_vector(std::size_t dim) {
    for (;;) {
        Vector v(dim);
        for (double& c : v) c = normal();
        const double nv = norm(v);
        if (nv > 1e-12) return scaled(v, 1.0 / nv);
    }
}

Vector Rng::in_ball(std::span<const double> center, double radius) {
    const Vector dir = unit_vector(center.size());
    const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(center.size()));
    return axpy(center, r, dir);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(master) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

Vector halton_point(std::size_t index, std::size_t dim) {
    static constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    if (dim > std::size(kPrimes))
        throw Error(ErrorKind::invalid_parameter, "Halton sequence supports at most 16 dimensions");
    Vector out(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        const unsigned base = kPrimes[d];
        double f = 1.0, r = 0.0;
        for (std::size_t i = index; i > 0; i /= base) {
            f /= base;
            r += f * static_cast<double>(i % base);
        }
        out[d] = r;
    }
    return out;
}

std::vector<Vector> halton_ball(std::size_t count, std::size_t dim) {
    std::vector<Vector> out;
    out.reserve(count);
    for (std::size_t i = 1; out.size() < count; ++i) {
        Vector p = halton_point(i, dim);
        for (double& c : p) c = 2.0 * c - 1.0;
        if (dot(p, p) <= 1.0) out.push_back(std::move(p));
    }
    return out;
}

}  // namespace flatmin
