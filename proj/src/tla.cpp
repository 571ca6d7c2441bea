#include "realtraj/tla.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace realtraj {

namespace {

constexpr cplx kI{0.0, 1.0};

void require_normalized(const DensityOperator& rho, const char* what)
{
    if (std::abs(rho.trace() - 1.0) > kStateTolerance) {
        throw std::invalid_argument(std::string(what) + ": state must have unit trace, got trace " +
                                    std::to_string(rho.trace()));
    }
}

}  // namespace

DensityOperator DensityOperator::from_bloch(double x, double y, double z)
{
    if (x * x + y * y + z * z > 1.0 + kStateTolerance) {
        throw std::invalid_argument("from_bloch: Bloch vector longer than 1");
    }
    return {cplx{0.5 * (1.0 - z), 0.0}, cplx{0.5 * x, -0.5 * y}, cplx{0.5 * x, 0.5 * y},
            cplx{0.5 * (1.0 + z), 0.0}};
}

bool DensityOperator::is_hermitian(double tol) const
{
    return std::abs(gg.imag()) <= tol && std::abs(ee.imag()) <= tol && std::abs(ge - std::conj(eg)) <= tol;
}

bool DensityOperator::is_valid_state(double tol) const
{
    if (!is_hermitian(tol) || std::abs(trace() - 1.0) > tol) {
        return false;
    }
    const double det = gg.real() * ee.real() - std::norm(ge);
    const double pg = gg.real();
    const double pe = ee.real();
    return det >= -tol && pg >= -tol && pg <= 1.0 + tol && pe >= -tol && pe <= 1.0 + tol;
}

double DensityOperator::max_abs() const
{
    return std::max({std::abs(gg), std::abs(ge), std::abs(eg), std::abs(ee)});
}

void SystemParams::validate() const
{
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("system.gamma must be > 0");
    }
    if (!(omega >= 0.0)) {
        throw std::invalid_argument("system.omega must be >= 0");
    }
    if (!(gamma_si > 0.0)) {
        throw std::invalid_argument("system.gamma_si must be > 0");
    }
}

DensityOperator liouvillian(const DensityOperator& rho, const SystemParams& params)
{
    const cplx h = -kI * (0.5 * params.omega);
    const double g = params.gamma;
    DensityOperator out;
    out.gg = h * (rho.eg - rho.ge) + g * rho.ee;
    out.ge = h * (rho.ee - rho.gg) - 0.5 * g * rho.ge;
    out.eg = h * (rho.gg - rho.ee) - 0.5 * g * rho.eg;
    out.ee = h * (rho.ge - rho.eg) - g * rho.ee;
    return out;
}

DensityOperator jump_super(const DensityOperator& rho)
{
    return {rho.ee, 0.0, 0.0, 0.0};
}

DensityOperator quadrature_super(const DensityOperator& rho, double phase)
{
    const cplx c = std::polar(1.0, -phase);
    const cplx cc = std::conj(c);
    return {c * rho.eg + cc * rho.ge, c * rho.ee, cc * rho.ee, 0.0};
}

DensityOperator h_super(const DensityOperator& rho, double phase)
{
    require_normalized(rho, "h_super");
    DensityOperator out = quadrature_super(rho, phase);
    out.add_scaled(rho, -out.trace());
    return out;
}

double quadrature_expectation(const DensityOperator& rho, double phase)
{
    return 2.0 * (std::polar(1.0, -phase) * rho.eg).real() / rho.trace();
}

BlochVector expectations(const DensityOperator& rho)
{
    const double tr = rho.trace();
    if (!(tr > 0.0)) {
        throw std::invalid_argument("expectations: trace must be positive");
    }
    return {2.0 * rho.eg.real() / tr, 2.0 * rho.eg.imag() / tr, (rho.ee.real() - rho.gg.real()) / tr};
}

DensityOperator steady_state(const SystemParams& params)
{
    params.validate();
    // Bloch equations: dx = -G/2 x, dy = W z - G/2 y, dz = -W y - G (1 + z).
    const double g2 = params.gamma * params.gamma;
    const double w2 = params.omega * params.omega;
    const double z = -g2 / (g2 + 2.0 * w2);
    const double y = -2.0 * params.omega * params.gamma / (g2 + 2.0 * w2);
    return DensityOperator::from_bloch(0.0, y, z);
}

double purity(const DensityOperator& rho)
{
    require_normalized(rho, "purity");
    return (rho.gg * rho.gg + rho.ee * rho.ee + 2.0 * rho.ge * rho.eg).real();
}

double trace_distance(const BlochVector& a, const BlochVector& b)
{
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return 0.5 * std::sqrt(dx * dx + dy * dy + dz * dz);
}

double trace_distance(const DensityOperator& a, const DensityOperator& b)
{
    return trace_distance(expectations(a), expectations(b));
}

double fidelity(const BlochVector& a, const BlochVector& b)
{
    const double overlap = 0.5 * (1.0 + a.x * b.x + a.y * b.y + a.z * b.z);
    const double mixed = std::max(0.0, 1.0 - a.norm_squared()) * std::max(0.0, 1.0 - b.norm_squared());
    return std::clamp(overlap + 0.5 * std::sqrt(mixed), 0.0, 1.0);
}

DensityOperator normalized(const DensityOperator& rho)
{
    const double tr = rho.trace();
    if (!(tr > 0.0)) {
        throw std::invalid_argument("normalized: trace must be positive");
    }
    return rho * (1.0 / tr);
}

}  // namespace realtraj
