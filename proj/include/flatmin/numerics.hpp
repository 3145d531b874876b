#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace flatmin {

using Vector = std::vector<double>;
using ScalarField = std::function<double(std::span<const double>)>;
using VectorField = std::function<Vector(std::span<const double>)>;

// ---------------------------------------------------------------------------
// Vector helpers

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double distance(std::span<const double> a, std::span<const double> b);
/// a + s * b
Vector axpy(std::span<const double> a, double s, std::span<const double> b);
Vector subtract(std::span<const double> a, std::span<const double> b);
Vector scaled(std::span<const double> a, double s);
bool all_finite(std::span<const double> a);

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

    static Matrix identity(std::size_t n);
    static Matrix from_columns(std::span<const Vector> columns);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::span<const double> data() const noexcept { return data_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    Vector row(std::size_t i) const;
    Vector column(std::size_t j) const;
    Matrix transpose() const;
    Matrix operator*(const Matrix& rhs) const;
    Vector operator*(std::span<const double> v) const;
    double frobenius_norm() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Symmetric matrix stored as its packed upper triangle.
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;
    explicit SymmetricMatrix(std::size_t order, double fill = 0.0);

    static SymmetricMatrix identity(std::size_t n);
    /// Symmetrizes (m + m^T) / 2. Requires a square matrix.
    static SymmetricMatrix from_matrix(const Matrix& m);

    std::size_t order() const noexcept { return order_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[index(i, j)]; }
    void set(std::size_t i, std::size_t j, double value) { data_[index(i, j)] = value; }

    Matrix to_matrix() const;
    /// <u, M u>
    double quadratic_form(std::span<const double> u) const;
    double frobenius_norm() const;

private:
    std::size_t index(std::size_t i, std::size_t j) const noexcept;

    std::size_t order_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Differentiation

/// Central-difference gradient. Without an explicit step each coordinate uses
/// h_i = eps^(1/3) * (1 + |x_i|). Throws evaluation_domain when the field is
/// not finite at a stencil point.
Vector finite_diff_gradient(const ScalarField& func, std::span<const double> x,
                            std::optional<double> h = std::nullopt);

/// Central-difference Hessian, symmetrized. Default step eps^(1/4) * (1 + |x_i|).
SymmetricMatrix finite_diff_hessian(const ScalarField& func, std::span<const double> x,
                                    std::optional<double> h = std::nullopt);

// ---------------------------------------------------------------------------
// Spectral routines

struct EigenDecomposition {
    Vector values;   ///< descending
    Matrix vectors;  ///< column j pairs with values[j]
};

/// Cyclic Jacobi; off-diagonal mass driven below 1e-12 relative, 100 sweeps max.
EigenDecomposition symmetric_eigen(const SymmetricMatrix& m);
double top_eigenvalue(const SymmetricMatrix& m);

struct SvdResult {
    Matrix u;      ///< rows x k, orthonormal columns
    Vector sigma;  ///< k = min(rows, cols), descending
    Matrix v;      ///< cols x k, orthonormal columns
};

/// Thin SVD by one-sided Jacobi. Columns of U belonging to zero singular
/// values are completed to an orthonormal set.
SvdResult svd_small(const Matrix& m);

/// Rank with threshold rel_tol * sigma_1.
std::size_t numerical_rank(const Matrix& m, double rel_tol = 1e-8);

/// Orthonormal basis of the complement of span(vectors) in R^n.
std::vector<Vector> orthonormal_complement(std::span<const Vector> vectors, std::size_t n);

// ---------------------------------------------------------------------------
// Small linear algebra

/// Gaussian elimination with partial pivoting. Returns nullopt when a pivot
/// falls below pivot_tol times the largest entry of the matrix.
std::optional<Vector> solve_linear(Matrix a, Vector b, double pivot_tol = 1e-13);

double determinant(Matrix a);

/// Orthogonal projection of x onto span(basis). Throws degenerate_basis when
/// the Gram determinant is at most 1e-12.
Vector project_affine(std::span<const double> x, std::span<const Vector> basis);

/// Euclidean distance from the origin to the convex hull of points, computed
/// exactly by enumerating affinely independent subsets of size <= dim + 1.
double hull_distance(std::span<const Vector> points);
bool hull_contains_origin(std::span<const Vector> points, double tol);

// ---------------------------------------------------------------------------
// Random numbers and low-discrepancy points

/// mt19937_64 with hand-written distributions; std:: distributions differ
/// between standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    double uniform();                      ///< [0, 1)
    double uniform(double lo, double hi);  ///< [lo, hi)
    double normal();
    std::size_t index(std::size_t n);      ///< [0, n)
    Vector unit_vector(std::size_t dim);
    Vector in_ball(std::span<const double> center, double radius);

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_normal_;
};

/// Independent substream seed for (master, a, b).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// i-th point (i >= 1) of the Halton sequence in [0,1)^dim.
Vector halton_point(std::size_t index, std::size_t dim);

/// First `count` Halton points mapped into the closed unit ball.
std::vector<Vector> halton_ball(std::size_t count, std::size_t dim);

}  // namespace flatmin
