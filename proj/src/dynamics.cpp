#include "twsbr/dynamics.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace twsbr {

double PhysicalParams::q() const {
    const double J = I2 + m2 * l * l;
    return (m1 + m2) * J - (m2 * l) * (m2 * l);
}

void PhysicalParams::validate() const {
    if (!(m1 > 0.0) || !(m2 > 0.0) || !(l > 0.0)) {
        throw ConfigError("physical params: m1, m2 and l must be positive");
    }
    if (!(I2 >= 0.0) || !(f >= 0.0)) {
        throw ConfigError("physical params: I2 and f must be non-negative");
    }
    if (!(g > 0.0) || !(force_limit > 0.0)) {
        throw ConfigError("physical params: g and force_limit must be positive");
    }
    if (!(q() > 0.0)) {
        throw DegenerateParamsError("physical params: q = (m1+m2)(I2+m2 l^2) - (m2 l)^2 must be positive");
    }
}

bool RobotState::finite() const {
    return std::isfinite(x) && std::isfinite(x_dot) && std::isfinite(phi) &&
           std::isfinite(phi_dot) && std::isfinite(t);
}

StateDerivative derivatives(const RobotState& state, double force,
                            const PhysicalParams& p) {
    if (!state.finite() || !std::isfinite(force)) {
        throw IntegrationDivergedError(state);
    }
    const double sin_phi = std::sin(state.phi);
    const double cos_phi = std::cos(state.phi);

    const double m_total = p.m1 + p.m2;
    const double J = p.I2 + p.m2 * p.l * p.l;       // inertia about the axle
    const double ml = p.m2 * p.l;

    // Symmetric mass matrix [[m_total, -ml c], [-ml c, J]].
    const double coupling = -ml * cos_phi;
    const double rhs_x = force - p.f * state.x_dot -
                         ml * state.phi_dot * state.phi_dot * sin_phi;
    const double rhs_phi = p.m2 * p.g * p.l * sin_phi;

    const double det = m_total * J - coupling * coupling;
    const double det_scale = m_total * J + coupling * coupling;
    if (!(det > 1e-12 * det_scale)) {
        throw DegenerateParamsError("derivatives: singular mass matrix");
    }

    StateDerivative d;
    d.x_dot = state.x_dot;
    d.phi_dot = state.phi_dot;
    d.x_ddot = (J * rhs_x - coupling * rhs_phi) / det;
    d.phi_ddot = (m_total * rhs_phi - coupling * rhs_x) / det;
    return d;
}

RobotState step_rk4(const RobotState& state, double force,
                    const PhysicalParams& params, double dt) {
    if (!(dt > 0.0) || dt > 0.05) {
        throw ContractError("step_rk4: dt must be in (0, 0.05]");
    }

    auto advance = [&](const RobotState& s, const StateDerivative& d,
                       double h) {
        RobotState out = s;
        out.x = state.x + h * d.x_dot;
        out.x_dot = state.x_dot + h * d.x_ddot;
        out.phi = state.phi + h * d.phi_dot;
        out.phi_dot = state.phi_dot + h * d.phi_ddot;
        return out;
    };

    const StateDerivative k1 = derivatives(state, force, params);
    const StateDerivative k2 = derivatives(advance(state, k1, 0.5 * dt), force, params);
    const StateDerivative k3 = derivatives(advance(state, k2, 0.5 * dt), force, params);
    const StateDerivative k4 = derivatives(advance(state, k3, dt), force, params);

    RobotState next = state;
    next.x += dt / 6.0 * (k1.x_dot + 2.0 * k2.x_dot + 2.0 * k3.x_dot + k4.x_dot);
    next.x_dot += dt / 6.0 * (k1.x_ddot + 2.0 * k2.x_ddot + 2.0 * k3.x_ddot + k4.x_ddot);
    next.phi += dt / 6.0 * (k1.phi_dot + 2.0 * k2.phi_dot + 2.0 * k3.phi_dot + k4.phi_dot);
    next.phi_dot += dt / 6.0 * (k1.phi_ddot + 2.0 * k2.phi_ddot + 2.0 * k3.phi_ddot + k4.phi_ddot);
    next.t += dt;

    if (!next.finite()) {
        throw IntegrationDivergedError(next);
    }
    return next;
}

double mechanical_energy(const RobotState& s, const PhysicalParams& p) {
    const double J = p.I2 + p.m2 * p.l * p.l;
    const double kinetic = 0.5 * (p.m1 + p.m2) * s.x_dot * s.x_dot -
                           p.m2 * p.l * s.x_dot * s.phi_dot * std::cos(s.phi) +
                           0.5 * J * s.phi_dot * s.phi_dot;
    const double potential = p.m2 * p.g * p.l * std::cos(s.phi);
    return kinetic + potential;
}

StateSpace linearize(const PhysicalParams& p) {
    p.validate();
    const double q = p.q();
    const double J = p.I2 + p.m2 * p.l * p.l;
    const double ml = p.m2 * p.l;
    const double m_total = p.m1 + p.m2;

    StateSpace ss{};
    ss.A = {{{0.0, 1.0, 0.0, 0.0},
             {0.0, -p.f * J / q, p.m2 * p.m2 * p.g * p.l * p.l / q, 0.0},
             {0.0, 0.0, 0.0, 1.0},
             {0.0, -p.f * ml / q, m_total * p.m2 * p.g * p.l / q, 0.0}}};
    ss.B = {0.0, J / q, 0.0, ml / q};
    return ss;
}

std::vector<std::complex<double>> eigenvalues(const StateSpace& ss) {
    Eigen::Matrix4d a;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            a(i, j) = ss.A[static_cast<size_t>(i)][static_cast<size_t>(j)];
        }
    }
    const Eigen::Vector4cd ev = a.eigenvalues();
    std::vector<std::complex<double>> out(4);
    for (int i = 0; i < 4; ++i) out[static_cast<size_t>(i)] = ev(i);
    return out;
}

namespace {

double gravity_mass(const PhysicalParams& p) {
    return p.tf_gravity_mass == GravityTermMass::kPendulum ? p.m2 : p.m1;
}

}  // namespace

TransferFunction pitch_transfer_function(const PhysicalParams& p) {
    p.validate();
    const double q = p.q();
    const double J = p.I2 + p.m2 * p.l * p.l;

    TransferFunction tf;
    tf.numerator = {p.m2 * p.l / q, 0.0};
    tf.denominator = {1.0,
                      p.f * J / q,
                      -(p.m1 + p.m2) * gravity_mass(p) * p.g * p.l / q,
                      -p.f * p.m2 * p.g * p.l / q};
    return tf;
}

TransferFunction yaw_transfer_function(const PhysicalParams& p) {
    const TransferFunction pitch = pitch_transfer_function(p);
    const double q = p.q();
    const double J = p.I2 + p.m2 * p.l * p.l;

    TransferFunction tf;
    tf.numerator = {J / q, 0.0, -p.g * p.m2 * p.l / q};
    tf.denominator = pitch.denominator;
    tf.denominator.push_back(0.0);  // extra free integrator
    return tf;
}

PoleSet poles(const TransferFunction& tf) {
    std::vector<double> den = tf.denominator;
    // Strip leading zeros, then normalize to monic.
    size_t first = 0;
    while (first < den.size() && den[first] == 0.0) ++first;
    den.erase(den.begin(), den.begin() + static_cast<std::ptrdiff_t>(first));
    if (den.size() < 2) {
        throw ContractError("poles: denominator degree must be >= 1");
    }
    const double lead = den.front();
    for (double& c : den) c /= lead;

    const auto n = den.size() - 1;  // polynomial degree
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(
        static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (size_t i = 0; i + 1 < n; ++i) {
        companion(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = 1.0;
    }
    for (size_t i = 0; i < n; ++i) {
        // den = [1, a_{n-1}, ..., a_0]; last column holds -a_i, constant term on top.
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n - 1)) =
            -den[n - i];
    }

    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("poles: companion eigenvalue iteration did not converge");
    }

    PoleSet ps;
    ps.poles.resize(n);
    for (size_t i = 0; i < n; ++i) {
        ps.poles[i] = solver.eigenvalues()(static_cast<Eigen::Index>(i));
    }
    std::sort(ps.poles.begin(), ps.poles.end(),
              [](const std::complex<double>& a, const std::complex<double>& b) {
                  if (a.real() != b.real()) return a.real() > b.real();
                  return a.imag() > b.imag();
              });
    for (const auto& pole : ps.poles) {
        if (pole.real() > kMarginalTol) {
            ++ps.unstable_count;
        } else if (std::abs(pole.real()) <= kMarginalTol) {
            ++ps.marginal_count;
        }
    }
    return ps;
}

std::complex<double> evaluate_polynomial(const std::vector<double>& coeffs,
                                         std::complex<double> s) {
    std::complex<double> acc = 0.0;
    for (double c : coeffs) acc = acc * s + c;
    return acc;
}

double relative_residual(const std::vector<double>& coeffs,
                         std::complex<double> s) {
    const double mag = std::abs(s);
    double scale = 0.0;
    double power = 1.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
        scale += std::abs(*it) * power;
        power *= mag;
    }
    if (scale == 0.0) return 0.0;
    return std::abs(evaluate_polynomial(coeffs, s)) / scale;
}

}  // namespace twsbr
