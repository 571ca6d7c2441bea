// Two-level atom operator algebra.
//
// Basis order is (|g>, |e>) and the lowering operator is sigma = |g><e|.
// Time is measured in units of 1/Gamma; rates are in units of Gamma.

#ifndef REALTRAJ_TLA_HPP
#define REALTRAJ_TLA_HPP

#include <complex>

namespace realtraj {

using cplx = std::complex<double>;

/// Absolute tolerance for Hermiticity and positivity checks.
inline constexpr double kStateTolerance = 1e-9;

/// A 2x2 operator on the atom, possibly unnormalized.
struct DensityOperator {
    cplx gg{0.0};
    cplx ge{0.0};
    cplx eg{0.0};
    cplx ee{0.0};

    static DensityOperator ground() { return {1.0, 0.0, 0.0, 0.0}; }
    static DensityOperator excited() { return {0.0, 0.0, 0.0, 1.0}; }
    static DensityOperator maximally_mixed() { return {0.5, 0.0, 0.0, 0.5}; }
    static DensityOperator zero() { return {}; }

    /// Normalized state with Bloch vector (x, y, z); requires x^2+y^2+z^2 <= 1.
    static DensityOperator from_bloch(double x, double y, double z);

    double trace() const { return gg.real() + ee.real(); }

    DensityOperator& operator+=(const DensityOperator& o)
    {
        gg += o.gg;
        ge += o.ge;
        eg += o.eg;
        ee += o.ee;
        return *this;
    }
    DensityOperator& operator-=(const DensityOperator& o)
    {
        gg -= o.gg;
        ge -= o.ge;
        eg -= o.eg;
        ee -= o.ee;
        return *this;
    }
    DensityOperator& operator*=(double s)
    {
        gg *= s;
        ge *= s;
        eg *= s;
        ee *= s;
        return *this;
    }
    /// this += s * o
    void add_scaled(const DensityOperator& o, double s)
    {
        gg += s * o.gg;
        ge += s * o.ge;
        eg += s * o.eg;
        ee += s * o.ee;
    }

    friend DensityOperator operator+(DensityOperator a, const DensityOperator& b) { return a += b; }
    friend DensityOperator operator-(DensityOperator a, const DensityOperator& b) { return a -= b; }
    friend DensityOperator operator*(DensityOperator a, double s) { return a *= s; }
    friend DensityOperator operator*(double s, DensityOperator a) { return a *= s; }

    bool is_hermitian(double tol = kStateTolerance) const;
    /// Hermitian, trace one and positive semidefinite within tol.
    bool is_valid_state(double tol = kStateTolerance) const;
    /// Largest absolute entry.
    double max_abs() const;
};

struct SystemParams {
    double omega = 0.0;  // Rabi frequency, units of Gamma
    double gamma = 1.0;  // decay rate; fixed to 1 internally
    /// Physical decay rate in 1/s, only used for labeling and SI conversions.
    double gamma_si = 3.0e8;

    void validate() const;
};

struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm_squared() const { return x * x + y * y + z * z; }
};

// Unconditional master-equation generator:
//   L rho = -i (Omega/2) [sigma_x, rho] + Gamma (sigma rho sigma^dag - 1/2 {sigma^dag sigma, rho}).
DensityOperator liouvillian(const DensityOperator& rho, const SystemParams& params);

/// sigma rho sigma^dag
DensityOperator jump_super(const DensityOperator& rho);

/// A rho + rho A^dag with A = exp(-i phase) sigma, without the trace subtraction.
DensityOperator quadrature_super(const DensityOperator& rho, double phase);

/// H[A] rho = A rho + rho A^dag - Tr[A rho + rho A^dag] rho, A = exp(-i phase) sigma.
/// Throws std::invalid_argument if rho is not normalized.
DensityOperator h_super(const DensityOperator& rho, double phase);

/// <exp(-i phase) sigma + exp(i phase) sigma^dag> for a normalized state.
double quadrature_expectation(const DensityOperator& rho, double phase);

/// Bloch vector of rho / Tr[rho]. Throws if Tr[rho] <= 0.
BlochVector expectations(const DensityOperator& rho);

/// Analytic stationary solution of the unconditional master equation.
DensityOperator steady_state(const SystemParams& params);

/// Tr[rho^2]; throws std::invalid_argument for unnormalized input.
double purity(const DensityOperator& rho);

/// Trace distance 1/2 |a - b|_1 between two normalized qubit states.
double trace_distance(const DensityOperator& a, const DensityOperator& b);
double trace_distance(const BlochVector& a, const BlochVector& b);

/// Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2 between two qubit states given by Bloch vectors.
double fidelity(const BlochVector& a, const BlochVector& b);

/// Divides by the trace. Throws if the trace is not positive.
DensityOperator normalized(const DensityOperator& rho);

}  // namespace realtraj

#endif  // REALTRAJ_TLA_HPP
