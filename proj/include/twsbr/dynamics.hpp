#pragma once

#include <array>
#include <complex>
#include <vector>

#include "twsbr/errors.hpp"

namespace twsbr {

// Which mass multiplies the gravity coefficient of the transfer-function
// denominators. The cart-pendulum derivation gives the pendulum mass m2 in
// the (m1+m2)*m*g*l/q term; some published coefficient tables carry the body
// mass m1 there instead. Both are exposed; kPendulum is the derived form.
enum class GravityTermMass { kPendulum, kBody };

// Physical parameters of the robot modelled as an inverted pendulum on a
// cart. Defaults are the reference robot in SI units; I2 defaults to the
// thin-rod value m2*l^2/3.
struct PhysicalParams {
    double m1 = 0.135;            // mass of main body (kg)
    double m2 = 0.060;            // mass of pendulum (kg)
    double l = 0.10;              // distance to pendulum's centre of mass (m)
    double I2 = 0.060 * 0.10 * 0.10 / 3.0;  // pendulum inertia about CoM (kg m^2)
    double f = 0.1;               // viscous friction on the cart (N s/m)
    double g = 9.81;              // gravitational acceleration (m/s^2)
    double wheel_diameter = 0.05; // (m)
    double wheel_base = 0.20;     // distance between wheels (m)
    double mu_s = 1.15;           // static friction, stored but unused by the point-mass model
    double force_limit = 3.0;     // maximum actuator force magnitude (N)
    GravityTermMass tf_gravity_mass = GravityTermMass::kPendulum;

    // Denominator constant q = (m1+m2)(I2 + m2 l^2) - (m2 l)^2.
    double q() const;
    // Throws ConfigError when an invariant is violated (positivity, q > 0).
    void validate() const;
};

// Continuous state of the cart-pendulum. phi is the pitch angle from the
// upward vertical, stored unwrapped so divergence stays observable. The
// orientation is chosen so that a positive force produces a positive pitch
// acceleration at the upright equilibrium.
struct RobotState {
    double x = 0.0;        // cart horizontal position (m)
    double x_dot = 0.0;    // cart velocity (m/s)
    double phi = 0.0;      // pitch angle from vertical (rad)
    double phi_dot = 0.0;  // pitch angular velocity (rad/s)
    double t = 0.0;        // simulation time (s)

    bool finite() const;
};

struct StateDerivative {
    double x_dot;
    double x_ddot;
    double phi_dot;
    double phi_ddot;
};

// Fixed-step integration blew up; carries the offending state.
struct IntegrationDivergedError : Error {
    RobotState state;
    explicit IntegrationDivergedError(const RobotState& s)
        : Error("integration diverged: state became non-finite"), state(s) {}
};

// Right-hand side of the nonlinear equations of motion. The coupled
// equations in (x_ddot, phi_ddot) are
//   (m1+m2) x_dd - m2 l cos(phi) phi_dd = F - f x_d - m2 l phi_d^2 sin(phi)
//   (I2+m2 l^2) phi_dd - m2 l cos(phi) x_dd = m2 g l sin(phi)
// solved as a symmetric 2x2 system at every call. Caller clamps the force.
StateDerivative derivatives(const RobotState& state, double force,
                            const PhysicalParams& params);

// Classical RK4 step with the force held constant over the step. dt must be
// in (0, 0.05]. Throws IntegrationDivergedError when the result is not
// finite.
RobotState step_rk4(const RobotState& state, double force,
                    const PhysicalParams& params, double dt);

// Total mechanical energy (kinetic + potential) of the cart-pendulum, zero
// potential at axle height. Conserved when f = 0 and force = 0.
double mechanical_energy(const RobotState& state, const PhysicalParams& params);

// Linearization about the upright equilibrium, state order (x, x_dot, phi,
// phi_dot), single force input.
struct StateSpace {
    std::array<std::array<double, 4>, 4> A;
    std::array<double, 4> B;
};

StateSpace linearize(const PhysicalParams& params);

// Eigenvalues of the A matrix (4 values, unordered multiset semantics).
std::vector<std::complex<double>> eigenvalues(const StateSpace& ss);

// Polynomial coefficients in s, descending degree. Denominator is monic.
struct TransferFunction {
    std::vector<double> numerator;
    std::vector<double> denominator;
};

// Pitch/force transfer function: (m2 l / q) s over the monic cubic
// s^3 + f(I2+m2 l^2)/q s^2 - (m1+m2) m g l / q s - f m2 g l / q,
// with m chosen by params.tf_gravity_mass.
TransferFunction pitch_transfer_function(const PhysicalParams& params);

// Position/force transfer function: ((I2+m2 l^2) s^2 - g m2 l)/q over the
// pitch denominator times s (one free integrator).
TransferFunction yaw_transfer_function(const PhysicalParams& params);

struct PoleSet {
    std::vector<std::complex<double>> poles;  // sorted by (re, im) descending
    int unstable_count = 0;  // poles with re > kMarginalTol
    int marginal_count = 0;  // poles with |re| <= kMarginalTol
};

// Real-part tolerance below which a pole counts as marginal, not unstable.
inline constexpr double kMarginalTol = 1e-10;

// All roots of the denominator via a companion-matrix eigenvalue solve.
// Denominator degree must be >= 1.
PoleSet poles(const TransferFunction& tf);

// Horner evaluation of a descending-degree coefficient vector.
std::complex<double> evaluate_polynomial(const std::vector<double>& coeffs,
                                         std::complex<double> s);

// |p(s)| scaled by sum_i |c_i| |s|^i; backward-error style residual used to
// certify computed roots.
double relative_residual(const std::vector<double>& coeffs,
                         std::complex<double> s);

}  // namespace twsbr
