#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "twsbr/dynamics.hpp"

using namespace twsbr;

namespace {

// Independent 2x2 Cramer solve of the equations of motion at a given state,
// written out long-hand as the oracle for `derivatives`.
void oracle_accelerations(const RobotState& s, double force,
                          const PhysicalParams& p, double& x_ddot,
                          double& phi_ddot) {
    const double m_total = p.m1 + p.m2;
    const double J = p.I2 + p.m2 * p.l * p.l;
    const double ml = p.m2 * p.l;
    const double c = std::cos(s.phi);
    const double si = std::sin(s.phi);

    // [ m_total   -ml c ] [x_dd  ]   [ F - f x_d - ml phi_d^2 sin ]
    // [ -ml c      J    ] [phi_dd] = [ m2 g l sin                 ]
    const double a11 = m_total;
    const double a12 = -ml * c;
    const double a21 = -ml * c;
    const double a22 = J;
    const double b1 = force - p.f * s.x_dot - ml * s.phi_dot * s.phi_dot * si;
    const double b2 = p.m2 * p.g * p.l * si;
    const double det = a11 * a22 - a12 * a21;
    x_ddot = (b1 * a22 - a12 * b2) / det;
    phi_ddot = (a11 * b2 - b1 * a21) / det;
}

// Total mechanical energy from the Lagrangian the equations of motion were
// derived from; test-local so the library cannot cheat.
double oracle_energy(const RobotState& s, const PhysicalParams& p) {
    const double J = p.I2 + p.m2 * p.l * p.l;
    const double kinetic = 0.5 * (p.m1 + p.m2) * s.x_dot * s.x_dot -
                           p.m2 * p.l * s.x_dot * s.phi_dot * std::cos(s.phi) +
                           0.5 * J * s.phi_dot * s.phi_dot;
    return kinetic + p.m2 * p.g * p.l * std::cos(s.phi);
}

// Characteristic polynomial of an n x n matrix by Faddeev-LeVerrier;
// returns monic coefficients in descending degree.
std::vector<double> characteristic_polynomial(
    const std::vector<std::vector<double>>& m) {
    const size_t n = m.size();
    std::vector<std::vector<double>> mk(n, std::vector<double>(n, 0.0));
    std::vector<double> coeffs{1.0};

    auto matmul = [&](const std::vector<std::vector<double>>& a) {
        std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
        for (size_t i = 0; i < n; ++i) {
            for (size_t k = 0; k < n; ++k) {
                for (size_t j = 0; j < n; ++j) out[i][j] += m[i][k] * a[k][j];
            }
        }
        return out;
    };

    // M_1 = A, c_1 = -tr(M_1); M_{k+1} = A (M_k + c_k I).
    std::vector<std::vector<double>> cur = m;
    for (size_t k = 1; k <= n; ++k) {
        double trace = 0.0;
        for (size_t i = 0; i < n; ++i) trace += cur[i][i];
        const double ck = -trace / static_cast<double>(k);
        coeffs.push_back(ck);
        if (k == n) break;
        for (size_t i = 0; i < n; ++i) cur[i][i] += ck;
        cur = matmul(cur);
    }
    return coeffs;
}

PhysicalParams frictionless() {
    PhysicalParams p;
    p.f = 0.0;
    return p;
}

}  // namespace

TEST_CASE("params: q and validation") {
    PhysicalParams p;
    CHECK(p.q() == doctest::Approx(1.2e-4).epsilon(1e-12));
    CHECK_NOTHROW(p.validate());

    PhysicalParams bad = p;
    bad.m1 = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = p;
    bad.force_limit = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("derivatives: upright equilibrium is a fixed point") {
    PhysicalParams p;
    RobotState s;
    const StateDerivative d = derivatives(s, 0.0, p);
    CHECK(d.x_dot == 0.0);
    CHECK(d.x_ddot == 0.0);
    CHECK(d.phi_dot == 0.0);
    CHECK(d.phi_ddot == 0.0);
}

TEST_CASE("derivatives: positive force couples into both accelerations") {
    PhysicalParams p;
    RobotState s;
    const StateDerivative d = derivatives(s, 1.0, p);

    double x_dd = 0.0;
    double phi_dd = 0.0;
    oracle_accelerations(s, 1.0, p, x_dd, phi_dd);

    CHECK(d.x_ddot > 0.0);
    CHECK(d.phi_ddot > 0.0);
    CHECK(d.x_ddot == doctest::Approx(x_dd).epsilon(1e-14));
    CHECK(d.phi_ddot == doctest::Approx(phi_dd).epsilon(1e-14));
    // Closed forms at the equilibrium: J F / q and m2 l F / q.
    CHECK(d.x_ddot == doctest::Approx(8e-4 / 1.2e-4).epsilon(1e-13));
    CHECK(d.phi_ddot == doctest::Approx(50.0).epsilon(1e-13));
}

TEST_CASE("derivatives: upright instability sign") {
    PhysicalParams p = frictionless();
    RobotState s;
    s.phi = 0.01;
    const StateDerivative d = derivatives(s, 0.0, p);
    CHECK(d.phi_ddot > 0.0);

    s.phi = -0.01;
    CHECK(derivatives(s, 0.0, p).phi_ddot < 0.0);
}

TEST_CASE("derivatives: oracle agreement across random states") {
    PhysicalParams p;
    const double states[][4] = {
        {0.3, -0.8, 0.4, 2.0}, {-1.0, 0.5, -1.2, -3.0}, {0.0, 2.0, 3.0, 0.7}};
    const double forces[] = {-4.0, 0.5, 3.0};
    for (int i = 0; i < 3; ++i) {
        RobotState s;
        s.x = states[i][0];
        s.x_dot = states[i][1];
        s.phi = states[i][2];
        s.phi_dot = states[i][3];
        double x_dd = 0.0;
        double phi_dd = 0.0;
        oracle_accelerations(s, forces[i], p, x_dd, phi_dd);
        const StateDerivative d = derivatives(s, forces[i], p);
        CHECK(d.x_ddot == doctest::Approx(x_dd).epsilon(1e-13));
        CHECK(d.phi_ddot == doctest::Approx(phi_dd).epsilon(1e-13));
    }
}

TEST_CASE("step_rk4: equilibrium only advances time") {
    PhysicalParams p;
    RobotState s;
    const RobotState next = step_rk4(s, 0.0, p, 0.01);
    CHECK(next.x == 0.0);
    CHECK(next.x_dot == 0.0);
    CHECK(next.phi == 0.0);
    CHECK(next.phi_dot == 0.0);
    CHECK(next.t == doctest::Approx(0.01));
}

TEST_CASE("step_rk4: dt contract") {
    PhysicalParams p;
    RobotState s;
    CHECK_THROWS_AS(step_rk4(s, 0.0, p, 0.0), ContractError);
    CHECK_THROWS_AS(step_rk4(s, 0.0, p, 0.06), ContractError);
    CHECK_THROWS_AS(step_rk4(s, 0.0, p, -0.01), ContractError);
}

TEST_CASE("step_rk4: energy conserved for the frictionless hanging pendulum") {
    PhysicalParams p = frictionless();
    RobotState s;
    s.phi = M_PI - 0.3;  // swinging around the hanging configuration

    const double e0 = oracle_energy(s, p);
    CHECK(mechanical_energy(s, p) == doctest::Approx(e0).epsilon(1e-14));

    for (int i = 0; i < 10000; ++i) {
        s = step_rk4(s, 0.0, p, 1e-3);
    }
    const double e1 = oracle_energy(s, p);
    CHECK(std::abs(e1 - e0) / std::abs(e0) < 1e-6);
}

TEST_CASE("step_rk4: small tilt grows monotonically and matches a fine reference") {
    PhysicalParams p;
    RobotState coarse;
    coarse.phi = 0.05;

    double prev = coarse.phi;
    for (int i = 0; i < 500; ++i) {  // 0.5 s at dt = 1e-3
        coarse = step_rk4(coarse, 0.0, p, 1e-3);
        CHECK(std::abs(coarse.phi) > std::abs(prev));
        prev = coarse.phi;
    }

    RobotState fine;
    fine.phi = 0.05;
    for (int i = 0; i < 50000; ++i) {
        fine = step_rk4(fine, 0.0, p, 1e-5);
    }
    CHECK(coarse.phi == doctest::Approx(fine.phi).epsilon(1e-8));
}

TEST_CASE("step_rk4: diverged integration carries the offending state") {
    PhysicalParams p;
    RobotState s;
    s.x_dot = 1e308;
    s.phi = 0.3;
    bool thrown = false;
    try {
        // Repeated huge-velocity steps overflow x.
        for (int i = 0; i < 100; ++i) s = step_rk4(s, 0.0, p, 0.05);
    } catch (const IntegrationDivergedError& e) {
        thrown = true;
        CHECK_FALSE(e.state.finite());
    }
    CHECK(thrown);
}

TEST_CASE("step_rk4: order check, halving dt shrinks error by >= 14") {
    PhysicalParams p;
    RobotState s;
    s.x = 0.1;
    s.x_dot = 0.5;
    s.phi = 0.3;
    s.phi_dot = 2.0;
    const double force = 2.0;
    const double h = 0.02;

    auto integrate = [&](double dt, int steps) {
        RobotState out = s;
        for (int i = 0; i < steps; ++i) out = step_rk4(out, force, p, dt);
        return out;
    };
    auto state_error = [](const RobotState& a, const RobotState& b) {
        return std::sqrt(std::pow(a.x - b.x, 2) + std::pow(a.x_dot - b.x_dot, 2) +
                         std::pow(a.phi - b.phi, 2) +
                         std::pow(a.phi_dot - b.phi_dot, 2));
    };

    const RobotState reference = integrate(1e-6, static_cast<int>(h / 1e-6));
    const double err_full = state_error(integrate(h, 1), reference);
    const double err_half = state_error(integrate(h / 2.0, 2), reference);
    CHECK(err_full / err_half >= 14.0);
}

TEST_CASE("linearize: structure and finite-difference agreement") {
    PhysicalParams p;
    const StateSpace ss = linearize(p);

    // Force enters only the acceleration rows.
    CHECK(ss.B[0] == 0.0);
    CHECK(ss.B[2] == 0.0);
    CHECK(ss.B[1] != 0.0);
    CHECK(ss.B[3] != 0.0);

    // Central differences of `derivatives` at the equilibrium.
    const double h = 1e-6;
    auto deriv_vec = [&](const RobotState& s, double force) {
        const StateDerivative d = derivatives(s, force, p);
        return std::array<double, 4>{d.x_dot, d.x_ddot, d.phi_dot, d.phi_ddot};
    };
    for (int col = 0; col < 4; ++col) {
        RobotState plus;
        RobotState minus;
        auto bump = [&](RobotState& s, double v) {
            if (col == 0) s.x = v;
            if (col == 1) s.x_dot = v;
            if (col == 2) s.phi = v;
            if (col == 3) s.phi_dot = v;
        };
        bump(plus, h);
        bump(minus, -h);
        const auto fp = deriv_vec(plus, 0.0);
        const auto fm = deriv_vec(minus, 0.0);
        for (int row = 0; row < 4; ++row) {
            const double fd = (fp[row] - fm[row]) / (2.0 * h);
            CHECK(std::abs(fd - ss.A[row][col]) < 1e-6);
        }
    }
    const auto fp = deriv_vec(RobotState{}, h);
    const auto fm = deriv_vec(RobotState{}, -h);
    for (int row = 0; row < 4; ++row) {
        const double fd = (fp[row] - fm[row]) / (2.0 * h);
        CHECK(std::abs(fd - ss.B[row]) < 1e-6);
    }
}

TEST_CASE("linearize: upright plant has an unstable eigenvalue") {
    const StateSpace ss = linearize(PhysicalParams{});
    bool unstable = false;
    for (const auto& ev : eigenvalues(ss)) {
        if (ev.real() > 1e-6) unstable = true;
    }
    CHECK(unstable);
}

TEST_CASE("pitch TF: coefficients match det(sI - A) on the pitch subsystem") {
    PhysicalParams p;
    const TransferFunction tf = pitch_transfer_function(p);
    REQUIRE(tf.numerator.size() == 2);
    REQUIRE(tf.denominator.size() == 4);
    CHECK(tf.denominator[0] == 1.0);

    // (x_dot, phi, phi_dot) subsystem of the A matrix.
    const StateSpace ss = linearize(p);
    std::vector<std::vector<double>> sub(3, std::vector<double>(3, 0.0));
    const int idx[3] = {1, 2, 3};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            sub[i][j] = ss.A[idx[i]][idx[j]];
        }
    }
    const std::vector<double> charpoly = characteristic_polynomial(sub);
    REQUIRE(charpoly.size() == 4);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(tf.denominator[i] ==
              doctest::Approx(charpoly[i]).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("pitch TF: f = 0 zeroes the s^2 and s^0 terms") {
    const TransferFunction tf = pitch_transfer_function(frictionless());
    CHECK(tf.denominator[1] == 0.0);
    CHECK(tf.denominator[3] == 0.0);
    CHECK(tf.denominator[2] < 0.0);
}

TEST_CASE("pitch TF: numerator is a pure multiple of s") {
    const TransferFunction tf = pitch_transfer_function(PhysicalParams{});
    CHECK(tf.numerator[0] > 0.0);
    CHECK(tf.numerator[1] == 0.0);
}

TEST_CASE("gravity-term switch changes only the s^1 denominator coefficient") {
    PhysicalParams p;
    const TransferFunction derived = pitch_transfer_function(p);
    p.tf_gravity_mass = GravityTermMass::kBody;
    const TransferFunction printed = pitch_transfer_function(p);
    CHECK(derived.denominator[1] == printed.denominator[1]);
    CHECK(derived.denominator[3] == printed.denominator[3]);
    CHECK(derived.denominator[2] != printed.denominator[2]);
    // Derived form carries m2, the alternative m1: ratio m1/m2.
    CHECK(printed.denominator[2] / derived.denominator[2] ==
          doctest::Approx(p.m1 / p.m2));
}

TEST_CASE("yaw TF: denominator is s times the pitch denominator") {
    PhysicalParams p;
    const TransferFunction pitch = pitch_transfer_function(p);
    const TransferFunction yaw = yaw_transfer_function(p);
    REQUIRE(yaw.numerator.size() == 3);
    REQUIRE(yaw.denominator.size() == 5);
    for (size_t i = 0; i < pitch.denominator.size(); ++i) {
        CHECK(yaw.denominator[i] == pitch.denominator[i]);
    }
    CHECK(yaw.denominator.back() == 0.0);
}

TEST_CASE("yaw TF: pole at zero and spectral match with the A matrix") {
    PhysicalParams p;
    const PoleSet ps = poles(yaw_transfer_function(p));
    REQUIRE(ps.poles.size() == 4);

    bool has_zero = false;
    for (const auto& pole : ps.poles) {
        if (std::abs(pole) < 1e-9) has_zero = true;
    }
    CHECK(has_zero);

    // Same multiset as the eigenvalues of A within 1e-8.
    std::vector<std::complex<double>> evs = eigenvalues(linearize(p));
    REQUIRE(evs.size() == 4);
    std::vector<bool> used(4, false);
    for (const auto& pole : ps.poles) {
        double best = 1e9;
        size_t best_i = 0;
        for (size_t i = 0; i < evs.size(); ++i) {
            if (used[i]) continue;
            const double d = std::abs(pole - evs[i]);
            if (d < best) {
                best = d;
                best_i = i;
            }
        }
        used[best_i] = true;
        CHECK(best < 1e-8);
    }
}

TEST_CASE("poles: hand-checkable denominators") {
    TransferFunction tf;
    tf.numerator = {1.0};

    tf.denominator = {1.0, 0.0, -1.0};  // s^2 - 1
    PoleSet ps = poles(tf);
    REQUIRE(ps.poles.size() == 2);
    CHECK(ps.poles[0].real() == doctest::Approx(1.0));
    CHECK(ps.poles[1].real() == doctest::Approx(-1.0));
    CHECK(ps.unstable_count == 1);

    tf.denominator = {1.0, 2.0, 0.0};  // s (s + 2)
    ps = poles(tf);
    REQUIRE(ps.poles.size() == 2);
    CHECK(ps.unstable_count == 0);
    CHECK(ps.marginal_count == 1);

    tf.denominator = {2.0};  // degree 0
    CHECK_THROWS_AS(poles(tf), ContractError);
}

TEST_CASE("poles: pitch plant has exactly one unstable pole with tiny residual") {
    const TransferFunction tf = pitch_transfer_function(PhysicalParams{});
    const PoleSet ps = poles(tf);
    REQUIRE(ps.poles.size() == 3);
    CHECK(ps.unstable_count == 1);
    for (const auto& pole : ps.poles) {
        CHECK(relative_residual(tf.denominator, pole) < 1e-8);
    }
}

TEST_CASE("poles: descartes cross-check of the unstable count") {
    // Signs (+, +, -, -) admit exactly one positive real root; the companion
    // solver must agree without any eigen machinery.
    const TransferFunction tf = pitch_transfer_function(PhysicalParams{});
    REQUIRE(tf.denominator.size() == 4);
    CHECK(tf.denominator[0] > 0.0);
    CHECK(tf.denominator[1] > 0.0);
    CHECK(tf.denominator[2] < 0.0);
    CHECK(tf.denominator[3] < 0.0);

    int sign_changes = 0;
    for (size_t i = 0; i + 1 < tf.denominator.size(); ++i) {
        if (tf.denominator[i] * tf.denominator[i + 1] < 0.0) ++sign_changes;
    }
    CHECK(sign_changes == 1);
    CHECK(poles(tf).unstable_count == 1);
}

TEST_CASE("energy drift over 10 s stays below 1e-5 relative") {
    PhysicalParams p = frictionless();
    RobotState s;
    s.phi = M_PI - 0.5;
    s.phi_dot = 1.0;

    const double e0 = mechanical_energy(s, p);
    double max_drift = 0.0;
    for (int i = 0; i < 10000; ++i) {
        s = step_rk4(s, 0.0, p, 1e-3);
        max_drift = std::max(
            max_drift, std::abs(mechanical_energy(s, p) - e0) / std::abs(e0));
    }
    CHECK(max_drift < 1e-5);
}

TEST_CASE("no silent NaN: steps either stay finite or raise diverged") {
    PhysicalParams p;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> mild(-5.0, 5.0);
    std::uniform_real_distribution<double> wild(-1e12, 1e12);

    for (int trial = 0; trial < 200; ++trial) {
        RobotState s;
        const bool extreme = trial % 4 == 0;
        auto draw = [&]() { return extreme ? wild(rng) : mild(rng); };
        s.x = draw();
        s.x_dot = draw();
        s.phi = draw();
        s.phi_dot = draw();
        const double force = mild(rng);
        try {
            const RobotState next = step_rk4(s, force, p, 0.002);
            CHECK(next.finite());
        } catch (const IntegrationDivergedError& e) {
            CHECK_FALSE(e.state.finite());
        }
    }
}
