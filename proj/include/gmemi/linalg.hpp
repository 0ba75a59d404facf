#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gmemi {

using Vector = std::vector<double>;

// Dense row-major matrix. The only matrix representation used across the
// library; structured operators (differences, cumulative sums) get dedicated
// apply paths where speed matters, but every operator can be materialized
// into one of these for verification.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;  // rows*cols, row-major

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static DenseMatrix identity(std::size_t n);
    // Validates finiteness of every entry; throws std::invalid_argument.
    static DenseMatrix from_data(std::size_t r, std::size_t c, std::vector<double> data);

    bool empty() const { return rows == 0 || cols == 0; }
};

// Throws std::invalid_argument if any entry is NaN or infinite.
void require_finite(const Vector& x, const std::string& what);
void require_finite(const DenseMatrix& m, const std::string& what);

// ---- vector helpers (always serial: cheap, and keeping reductions
//      single-threaded makes every caller bit-deterministic) ----
double dot(const Vector& x, const Vector& y);
double nrm2(const Vector& x);
double nrm1(const Vector& x);
double nrm_inf(const Vector& x);
Vector operator+(const Vector& x, const Vector& y);
Vector operator-(const Vector& x, const Vector& y);
Vector scaled(const Vector& x, double c);
void axpy(double a, const Vector& x, Vector& y);  // y += a*x

// ---- kernels (OpenMP over rows; each output entry is one serial dot
//      product, so results are bit-identical for any thread count) ----
Vector matvec(const DenseMatrix& m, const Vector& x);
Vector matvec_t(const DenseMatrix& m, const Vector& x);  // M^T x
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix gram(const DenseMatrix& m);  // M^T M, exactly symmetric by construction
DenseMatrix transpose(const DenseMatrix& m);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& m, double c);

// Serial reference kernels, kept for tests and the kernel benchmark.
namespace serial {
Vector matvec(const DenseMatrix& m, const Vector& x);
Vector matvec_t(const DenseMatrix& m, const Vector& x);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix gram(const DenseMatrix& m);
}  // namespace serial

// Largest singular value via power iteration on M^T M. Deterministic:
// two independent runs from fixed pseudo-random starts, max Rayleigh
// quotient wins; a start lying in the kernel contributes zero.
double operator_norm(const DenseMatrix& m, double tol = 1e-12,
                     std::size_t max_iters = 100000);

// Smallest eigenvalue of a symmetric matrix. Householder tridiagonalization
// plus Sturm-count bisection for n <= 4000 (deterministic, every bisection
// step certified by the count), shifted power iteration beyond.
// Throws std::invalid_argument("not symmetric") if max |S-S^T| > 1e-12.
double min_eigenvalue_symmetric(const DenseMatrix& s, double tol = 1e-12);

}  // namespace gmemi
