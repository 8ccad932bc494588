#pragma once

#include <limits>
#include <string>
#include <vector>

#include "twsbr/sim.hpp"

namespace twsbr {

struct PidGains {
    double kp = 0.0;  // proportional gain (N/rad)
    double ki = 0.0;  // integral gain (N/(rad s))
    double kd = 0.0;  // derivative gain (N s/rad)

    void validate() const;
};

// Gains calibrated on the physical robot (PWM-count scale, trial and error).
// They do not transfer to the force-in-newtons simulator and are kept as a
// documented reference only.
inline constexpr PidGains kHardwareReferenceGains{1970.0, 21950.0, 19.5};

// Simulator calibration produced by tune_pid with the default physical
// parameters (see README); used as the default controller gains.
inline constexpr PidGains kDefaultSimGains{63.2, 400.0, 0.19};

struct PidState {
    double integral = 0.0;    // accumulated error (rad s)
    double prev_error = 0.0;  // last error (rad)
    bool initialized = false; // derivative term is forced to 0 on first call
};

struct Setpoint {
    double target_phi = 0.0;  // target pitch (rad)
    double target_x = 0.0;    // target horizontal position (m)
};

struct PidOutput {
    double force = 0.0;  // command before clamping (N)
    PidState state;
};

// Discrete PID step: kp*e + ki*I + kd*(e - e_prev)/dt with rectangle
// integration and the integral clamped to +/-integral_limit.
PidOutput pid_step(const PidState& ps, const PidGains& gains, double error,
                   double dt,
                   double integral_limit = std::numeric_limits<double>::infinity());

// Anti-windup bound: |integral| such that ki*|integral| <= 2*force_limit.
double integral_limit_for(const PidGains& gains, double force_limit);

struct PidLoopConfig {
    Setpoint setpoint;
    bool position_loop = false;   // outer loop feeding target_x error into the pitch setpoint
    double position_kp = 0.08;    // rad of pitch command per m of position error
    double position_kd = 0.12;    // rad per m/s
    double position_cmd_limit = 0.05;  // clamp on the outer-loop pitch command (rad)
};

// Closed loop: sense -> complementary filter -> pitch error -> PID -> clamp
// -> integrate, until the horizon, a fall, or divergence.
Trajectory run_pid_episode(const RobotState& initial, const PidGains& gains,
                           const Setpoint& setpoint, const SimConfig& cfg,
                           const PidLoopConfig& loop = {},
                           std::vector<ImuSample>* imu_log = nullptr);

// Scalar tuning cost over a fixed set of initial perturbations.
struct TuneWeights {
    double mean_abs_phi = 1.0;
    double settling_time = 0.5;
    double fall_penalty = 100.0;
};

struct CandidateScore {
    PidGains gains;
    double cost = 0.0;
    double mean_abs_phi = 0.0;
    double mean_settling = 0.0;  // unsettled episodes count as the horizon
    int falls = 0;
};

struct TuneResult {
    PidGains best;
    double best_cost = 0.0;
    std::vector<CandidateScore> evaluated;
};

// cost = w1 * mean|phi| + w2 * mean settling time + w3 * falls, averaged
// over the phi0 grid with zero sensor noise and matched seeds.
CandidateScore evaluate_gains(const PidGains& gains,
                              const std::vector<double>& phi0_grid,
                              const SimConfig& cfg, double settling_band,
                              const TuneWeights& weights);

// Grid search over an explicit candidate list.
TuneResult tune_pid(const std::vector<PidGains>& candidates,
                    const std::vector<double>& phi0_grid, const SimConfig& cfg,
                    double settling_band, const TuneWeights& weights);

// Log-spaced range for one gain; n = 1 pins the gain to lo.
struct GainRange {
    double lo = 0.0;
    double hi = 0.0;
    int n = 1;
};

struct TuneConfig {
    GainRange kp{2.0, 200.0, 9};
    GainRange ki{0.5, 400.0, 9};
    GainRange kd{0.02, 8.0, 9};
    int sweeps = 3;  // coordinate-descent passes with bracket refinement
    std::vector<double> phi0_grid = {-0.09, -0.06, -0.03, 0.03, 0.06, 0.09};
    double settling_band = 0.017;
    TuneWeights weights;
};

// Deterministic coordinate descent over the three gains.
TuneResult tune_pid(const TuneConfig& tune, const SimConfig& cfg);

// Plain-text gains file (kp/ki/kd key-value lines).
void save_gains(const PidGains& gains, const std::string& path);
PidGains load_gains(const std::string& path);

}  // namespace twsbr
