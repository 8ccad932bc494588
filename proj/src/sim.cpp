#include "twsbr/sim.hpp"

#include <algorithm>
#include <cmath>

namespace twsbr {

int SimConfig::horizon_steps() const {
    return static_cast<int>(std::llround(horizon_s / dt));
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::kHorizon: return "horizon";
        case Termination::kFell: return "fell";
        case Termination::kDiverged: return "diverged";
    }
    return "unknown";
}

std::optional<Termination> termination_from_string(const std::string& s) {
    if (s == "horizon") return Termination::kHorizon;
    if (s == "fell") return Termination::kFell;
    if (s == "diverged") return Termination::kDiverged;
    return std::nullopt;
}

BalanceEnv::BalanceEnv(const SimConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.params.validate();
    cfg_.imu.validate();
    if (!(cfg_.filter_alpha >= 0.0) || !(cfg_.filter_alpha <= 1.0)) {
        throw ConfigError("sim config: filter alpha must be in [0, 1]");
    }
    if (!(cfg_.dt > 0.0) || cfg_.dt > 0.05) {
        throw ConfigError("sim config: dt must be in (0, 0.05]");
    }
    if (!(cfg_.horizon_s > 0.0) || !(cfg_.fall_threshold > 0.0)) {
        throw ConfigError("sim config: horizon and fall threshold must be positive");
    }
    reset(0.0);
}

void BalanceEnv::reset(double phi0, std::optional<std::uint64_t> seed) {
    RobotState initial;
    initial.phi = phi0;
    reset(initial, seed);
}

void BalanceEnv::reset(const RobotState& initial,
                       std::optional<std::uint64_t> seed) {
    if (!initial.finite()) {
        throw ContractError("BalanceEnv::reset: initial state must be finite");
    }
    state_ = initial;
    filter_ = FilterState{0.0, cfg_.filter_alpha, initial.t};
    rng_.seed(seed.value_or(cfg_.seed));
    prev_force_ = 0.0;
    sensed_ = false;
    done_ = false;
    termination_ = Termination::kHorizon;
    steps_ = 0;
}

LoopObservation BalanceEnv::sense() {
    // The IMU feels the acceleration produced by the force still held from
    // the previous tick (zero-order hold).
    const StateDerivative d = derivatives(state_, prev_force_, cfg_.params);
    const ImuSample sample = synthesize_imu(state_, d.x_ddot, cfg_.imu, rng_);
    filter_ = filter_update(filter_, sample, cfg_.imu, cfg_.dt);
    if (imu_sink_) imu_sink_->push_back(sample);
    sensed_ = true;

    LoopObservation obs;
    obs.t = state_.t;
    obs.phi_hat = filter_.phi_hat;
    obs.gyro_rate = (sample.gx - cfg_.imu.offsets.gx) / cfg_.imu.gyro_scale;
    obs.state = state_;
    obs.prev_force = prev_force_;
    return obs;
}

double BalanceEnv::apply(double force_command) {
    if (done_) {
        throw ContractError("BalanceEnv::apply called on a finished episode");
    }
    if (!sensed_) {
        throw ContractError("BalanceEnv::apply called before sense()");
    }
    sensed_ = false;

    const double limit = cfg_.params.force_limit;
    const double force = std::clamp(force_command, -limit, limit);
    try {
        state_ = step_rk4(state_, force, cfg_.params, cfg_.dt);
    } catch (const IntegrationDivergedError& e) {
        state_ = e.state;
        done_ = true;
        termination_ = Termination::kDiverged;
        prev_force_ = force;
        ++steps_;
        return force;
    }
    prev_force_ = force;
    ++steps_;

    if (std::abs(state_.phi) > cfg_.fall_threshold) {
        done_ = true;
        termination_ = Termination::kFell;
    } else if (steps_ >= cfg_.horizon_steps()) {
        done_ = true;
        termination_ = Termination::kHorizon;
    }
    return force;
}

Trajectory run_episode(const SimConfig& cfg, const RobotState& initial,
                       const Controller& controller,
                       const std::string& controller_id,
                       const RewardFn& reward, std::vector<ImuSample>* imu_log) {
    BalanceEnv env(cfg);
    env.reset(initial);
    env.collect_imu(imu_log);

    Trajectory traj;
    traj.controller = controller_id;
    traj.seed = cfg.seed;
    traj.dt = cfg.dt;
    traj.samples.reserve(static_cast<size_t>(cfg.horizon_steps()));

    while (!env.done()) {
        const LoopObservation obs = env.sense();
        const double applied = env.apply(controller(obs));

        TrajectorySample row;
        row.t = obs.t;
        row.phi_true = obs.state.phi;
        row.phi_est = obs.phi_hat;
        row.x = obs.state.x;
        row.x_dot = obs.state.x_dot;
        row.u = applied;
        if (reward) {
            row.reward = reward(env.state(),
                                env.termination() == Termination::kFell && env.done());
        }
        traj.samples.push_back(row);
    }
    traj.termination = env.termination();
    return traj;
}

}  // namespace twsbr
