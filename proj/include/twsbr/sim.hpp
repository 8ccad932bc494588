#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "twsbr/dynamics.hpp"
#include "twsbr/sensing.hpp"

namespace twsbr {

// Everything the closed loop needs: plant, sensor, filter and timing.
struct SimConfig {
    PhysicalParams params;
    ImuConfig imu;
    double filter_alpha = 0.98;
    double dt = 0.002;            // control and integration period (s)
    double horizon_s = 10.0;      // episode length (s)
    double fall_threshold = 0.35; // |phi| beyond which the robot has fallen (rad)
    std::uint64_t seed = 0;

    int horizon_steps() const;
};

enum class Termination { kHorizon, kFell, kDiverged };

std::string to_string(Termination t);
std::optional<Termination> termination_from_string(const std::string& s);

struct TrajectorySample {
    double t = 0.0;
    double phi_true = 0.0;
    double phi_est = 0.0;
    double x = 0.0;
    double x_dot = 0.0;
    double u = 0.0;       // applied force after clamping (N)
    double reward = 0.0;  // zero for non-RL controllers
};

// Full time series of one closed-loop episode. t is strictly increasing with
// constant dt and samples are non-empty for any episode that ran at least
// one tick.
struct Trajectory {
    std::vector<TrajectorySample> samples;
    Termination termination = Termination::kHorizon;
    std::string controller;       // meta: controller id
    std::uint64_t seed = 0;       // meta: sensor-noise seed
    std::uint64_t config_hash = 0;
    double dt = 0.0;
};

// What a controller sees each tick before choosing a force.
struct LoopObservation {
    double t = 0.0;
    double phi_hat = 0.0;    // complementary-filter pitch estimate (rad)
    double gyro_rate = 0.0;  // bias-corrected gyro pitch rate (rad/s)
    RobotState state;        // true simulator state
    double prev_force = 0.0; // force applied on the previous tick (N)
};

// Steps the plant/sensor/filter pipeline one control period at a time.
// sense() must be called exactly once per tick before apply().
class BalanceEnv {
  public:
    explicit BalanceEnv(const SimConfig& cfg);

    // Restarts the episode from pitch phi0 at rest; reseeds the noise stream.
    void reset(double phi0, std::optional<std::uint64_t> seed = std::nullopt);

    // Restarts from a full state (t is reset to the state's own t).
    void reset(const RobotState& initial,
               std::optional<std::uint64_t> seed = std::nullopt);

    LoopObservation sense();

    // When set, every raw sample produced by sense() is appended here.
    void collect_imu(std::vector<ImuSample>* sink) { imu_sink_ = sink; }

    // Clamps the command to +/-force_limit, integrates one step and checks
    // for falls. Returns the force actually applied.
    double apply(double force_command);

    bool done() const { return done_; }
    Termination termination() const { return termination_; }
    const RobotState& state() const { return state_; }
    double prev_force() const { return prev_force_; }
    const SimConfig& config() const { return cfg_; }
    int steps_taken() const { return steps_; }

  private:
    SimConfig cfg_;
    std::mt19937_64 rng_;
    RobotState state_;
    FilterState filter_;
    double prev_force_ = 0.0;
    bool sensed_ = false;
    bool done_ = false;
    Termination termination_ = Termination::kHorizon;
    int steps_ = 0;
    std::vector<ImuSample>* imu_sink_ = nullptr;
};

// force = controller(observation); the loop clamps it before applying.
using Controller = std::function<double(const LoopObservation&)>;

// Optional per-step reward: reward(state after the step, fell flag).
using RewardFn = std::function<double(const RobotState&, bool fell)>;

// Runs a full episode: sense -> controller -> clamp -> integrate, recording
// one sample per tick. Divergence is recorded in-band as
// Termination::kDiverged with the partial trajectory preserved.
Trajectory run_episode(const SimConfig& cfg, const RobotState& initial,
                       const Controller& controller,
                       const std::string& controller_id,
                       const RewardFn& reward = nullptr,
                       std::vector<ImuSample>* imu_log = nullptr);

}  // namespace twsbr
